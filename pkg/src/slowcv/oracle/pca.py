"""Principal component analysis and its linear-autoencoder form."""
from __future__ import annotations

import numpy as np

from ..errors import TooFewSamples
from ..net import MlpModel, MlpSpec


def pca(data, k: int):
    """Top-``k`` principal directions of centered data.

    Returns
    -------
    basis : (d, k) ndarray
        Orthonormal columns, leading direction first.
    residual : float
        ``sum_i |x_i - U U^T x_i|^2`` over the centered points.
    mean : (d,) ndarray
    """
    X = np.asarray(data.points if hasattr(data, "points") else data, dtype=float)
    if len(X) < 2:
        raise TooFewSamples("pca needs at least 2 points")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / len(X)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    U = vecs[:, order[:k]]
    R = Xc - (Xc @ U) @ U.T
    return U, float(np.sum(R * R)), mean


def pca_autoencoder(basis, mean):
    """Affine encoder ``x -> U^T (x - m)`` and decoder ``z -> U z + m`` as single-layer networks."""
    U = np.asarray(basis, dtype=float)
    m = np.asarray(mean, dtype=float)
    d, k = U.shape
    enc = MlpModel(MlpSpec((d, k)), np.concatenate([U.T.ravel(), -U.T @ m]))
    dec = MlpModel(MlpSpec((k, d)), np.concatenate([U.ravel(), m]))
    return enc, dec
