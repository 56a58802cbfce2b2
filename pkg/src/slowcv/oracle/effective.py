"""Binned conditional statistics along a scalar collective variable.

``effective_1d`` builds the one-dimensional effective generator
``(1/beta) Q^{-1} d/dz (Q a d/dz)`` with ``a(z) = E[|grad xi|^2 | xi = z]``
from samples, using equal-count bins in ``z``. Between neighbouring bin
centers ``c_k < c_{k+1}`` the edge conductance is

    kappa_k = (1/beta) * a_face * (m_k + m_{k+1}) / 2 / (c_{k+1} - c_k)^2,

where ``m_k`` are bin masses (so ``(m_k + m_{k+1}) / 2`` is the mass
between the two centers). The eigenproblem ``K g = lambda diag(m) g`` is
solved densely.

``conditional_moments`` bins lagged pairs by ``enc(x)`` and reports the mean
and total variance of the lagged endpoints in every bin.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from ..errors import EmptyBin, TooFewBins
from ..potentials import PotentialSpec, Thermo
from .grid import Grid2D, energy_generator


def _scalar_cv(xi, X):
    z = np.asarray(xi.forward(X), dtype=float)
    J = np.asarray(xi.input_gradient(X), dtype=float)
    if z.ndim == 2:
        if z.shape[1] != 1:
            raise ValueError("effective dynamics needs a scalar collective variable")
        z = z[:, 0]
    if J.ndim == 3:
        J = J[:, 0, :]
    return z, J


@dataclass
class EffectiveResult:
    lambda1: float
    eigenvalues: np.ndarray
    centers: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    diffusion: np.ndarray = field(repr=False)  # bin means of |grad xi|^2
    drift: np.ndarray | None = field(default=None, repr=False)  # bin means of L xi, analytic CVs only
    eigenfunction: np.ndarray | None = field(default=None, repr=False)
    bound_gap: float | None = None


def effective_1d(d, xi, p: PotentialSpec, th: Thermo, n_bins: int = 200, weights=None,
                 reference: tuple | None = None) -> EffectiveResult:
    """Smallest nonzero eigenvalue of the effective dynamics along ``xi``.

    Parameters
    ----------
    d : Dataset or (N, 2) array
        Samples of the invariant measure.
    xi : object with ``forward`` and ``input_gradient``
        An ``MlpModel``, ``GridInterpolant`` or ``AnalyticFunction``.
    weights : (N,) array, optional
        Sample weights (uniform by default).
    reference : (Grid2D, grid function), optional
        Grid eigenfunction used to report ``E(phi - phi_eff o xi)`` (the
        gap term of the upper bound) as a diagnostic.
    """
    X = np.asarray(d.points if hasattr(d, "points") else d, dtype=float)
    if n_bins < 3:
        raise TooFewBins(f"need at least 3 bins, got {n_bins}")
    if len(X) < n_bins:
        raise EmptyBin(f"{len(X)} samples cannot fill {n_bins} bins")
    z, J = _scalar_cv(xi, X)
    w = np.full(len(X), 1.0 / len(X)) if weights is None else np.asarray(weights, float) / np.sum(weights)
    order = np.argsort(z, kind="stable")
    chunks = np.array_split(order, n_bins)
    m = np.array([w[c].sum() for c in chunks])
    if np.any(m <= 0):
        raise EmptyBin("a bin carries no weight")
    c = np.array([np.dot(w[ch], z[ch]) for ch in chunks]) / m
    gn2 = np.sum(J * J, axis=1)
    a = np.array([np.dot(w[ch], gn2[ch]) for ch in chunks]) / m
    dz = np.diff(c)
    if np.any(dz <= 0):
        raise EmptyBin("bins with coincident centers; use fewer bins")
    kappa = 0.5 * (a[:-1] + a[1:]) * 0.5 * (m[:-1] + m[1:]) / dz**2 / th.beta
    K = np.zeros((n_bins, n_bins))
    idx = np.arange(n_bins - 1)
    K[idx, idx] += kappa
    K[idx + 1, idx + 1] += kappa
    K[idx, idx + 1] -= kappa
    K[idx + 1, idx] -= kappa
    vals, vecs = eigh(K, np.diag(m))
    drift = None
    if hasattr(xi, "generator"):
        Lxi = xi.generator(p, th, X)
        drift = np.array([np.dot(w[ch], Lxi[ch]) for ch in chunks]) / m
    phi = vecs[:, 1]
    gap = None
    if reference is not None:
        g, ref = reference
        zg, _ = _scalar_cv(xi, g.points)
        lifted = np.interp(zg, c, phi)
        # align sign and normalisation with the reference before comparing
        lifted -= g.mean(lifted)
        lifted /= np.sqrt(g.var(lifted))
        if g.inner(lifted, ref) < 0:
            lifted = -lifted
        gap = energy_generator(ref - lifted, g)
    return EffectiveResult(float(vals[1]), vals, c, m, a, drift, phi, gap)


@dataclass
class ConditionalMoments:
    z_center: np.ndarray
    mean_y: np.ndarray  # (n, 2)
    var_y: np.ndarray  # total variance (trace of the covariance)
    count: np.ndarray
    skipped: list


def conditional_moments(pairs, enc, n_bins: int = 20) -> ConditionalMoments:
    """Per-bin mean and total variance of lagged endpoints, binned by ``enc(x)``.

    Bins are equal-width over the range of ``enc(x)``; ``z_center`` is the
    mean latent value inside a bin. Empty bins are skipped with a warning.
    """
    X, Y = (pairs.x, pairs.y) if hasattr(pairs, "x") else pairs
    z = np.asarray(enc.forward(X), dtype=float)
    if z.ndim == 2:
        if z.shape[1] != 1:
            raise ValueError("conditional moments need a scalar latent")
        z = z[:, 0]
    if n_bins < 1:
        raise TooFewBins("need at least one bin")
    edges = np.linspace(z.min(), z.max(), n_bins + 1)
    which = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, n_bins - 1)
    zc, my, vy, cnt, skipped = [], [], [], [], []
    for b in range(n_bins):
        sel = which == b
        n = int(sel.sum())
        if n == 0:
            skipped.append(b)
            continue
        yb = Y[sel]
        mu = yb.mean(axis=0)
        zc.append(z[sel].mean())
        my.append(mu)
        vy.append(float(np.mean(np.sum((yb - mu) ** 2, axis=1))))
        cnt.append(n)
    if skipped:
        warnings.warn(f"empty latent bins skipped: {skipped}", stacklevel=2)
    return ConditionalMoments(np.array(zc), np.array(my).reshape(-1, 2), np.array(vy), np.array(cnt), skipped)
