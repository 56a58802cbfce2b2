"""Reference computations that do not involve neural networks."""
from .effective import ConditionalMoments, EffectiveResult, conditional_moments, effective_1d
from .grid import (
    EigenResult,
    FDGenerator,
    Grid2D,
    GridInterpolant,
    energy_generator,
    fd_generator,
    generator_spectrum,
    leading_eigs,
    make_grid,
    resolution_check,
    sample_invariant,
)
from .identities import AnalyticFunction, bochner_check, orthonormalize, slowness_objective
from .pca import pca, pca_autoencoder
from .ulam import BinSpec, UlamModel, lemma1_check, transfer_energy, ulam_transfer
