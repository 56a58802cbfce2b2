"""Collective variables of metastable diffusions: neural eigenfunctions,
(time-lagged) autoencoders and grid/matrix reference computations."""

__version__ = "0.1.0"
