"""Training objectives: spectral (eigenfunction) losses and autoencoder losses.

Every loss returns its value, or ``(value, grads)`` with ``grad=True``,
where ``grads`` holds one flat parameter gradient per network.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, TooFewSamples
from .net import MlpModel


@dataclass(frozen=True)
class EigenLossConfig:
    """Settings of the eigenfunction losses.

    ``beta`` is only read by the generator loss, ``tau`` only by the
    transfer-operator loss.
    """

    k: int = 1
    omegas: tuple = (1.0,)
    alpha: float = 10.0
    beta: float = 1.0
    tau: float = 1.0
    var_guard: float = 1e-6

    def __post_init__(self):
        om = tuple(float(w) for w in self.omegas)
        object.__setattr__(self, "omegas", om)
        if self.k < 1 or len(om) != self.k:
            raise ValueError(f"need k >= 1 weights, got k={self.k}, omegas={om}")
        if any(w <= 0 for w in om) or any(a < b for a, b in zip(om, om[1:])):
            raise ValueError("omegas must be positive and non-increasing")
        if self.alpha < 0 or not self.var_guard > 0:
            raise ValueError("alpha must be >= 0 and var_guard > 0")


@dataclass
class LossParts:
    """Value of an eigen loss split into its two terms."""

    total: float
    spectral: float
    penalty: float
    variances: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)  # per-function energy / variance


def empirical_stats(values):
    """Means, variances and the 1/N covariance matrix of per-sample features.

    Parameters
    ----------
    values : (N, k) array_like
    """
    F = np.asarray(values, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if len(F) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(F)}")
    mean = F.mean(axis=0)
    C = F - mean
    cov = C.T @ C / len(F)
    return mean, np.diag(cov).copy(), cov


def _penalty(cov, alpha):
    k = len(cov)
    iu = np.triu_indices(k)
    return alpha * float(np.sum((cov - np.eye(k))[iu] ** 2))


def _stats_cotangent(F, cov, g_var, alpha):
    """Cotangent of the (N, k) feature matrix from d loss / d var and the penalty.

    ``g_var`` is d(spectral term)/d(variance_i).
    """
    N, k = F.shape
    C = F - F.mean(axis=0)
    K = 2.0 * alpha * cov  # off-diagonal entries: each (i1 < i2) term touches both features
    np.fill_diagonal(K, 2.0 * (2.0 * alpha * (np.diag(cov) - 1.0) + g_var))
    return C @ K / N


def _check_models(models, n_in):
    for m in models:
        if m.spec.n_out != 1:
            raise DimensionMismatch("eigenfunction networks must have scalar output")
        if m.spec.n_in != n_in:
            raise DimensionMismatch(f"network input width {m.spec.n_in} != data width {n_in}")


def eigen_generator_loss(models, batch, cfg: EigenLossConfig, grad: bool = False, parts: bool = False):
    """Rayleigh-quotient loss for generator eigenfunctions with an orthonormality penalty.

    ``(1/beta) sum_i w_i mean|grad f_i|^2 / (Var f_i + var_guard)
    + alpha sum_{i1 <= i2} (Cov(f_i1, f_i2) - delta)^2``
    """
    X = np.asarray(batch, dtype=float)
    models = list(models)
    if len(models) != cfg.k:
        raise ValueError(f"expected {cfg.k} networks, got {len(models)}")
    _check_models(models, X.shape[1])
    caches, cols, jacs = [], [], []
    for m in models:
        out, cache = m.forward_cache(X, tangent=True)
        caches.append(cache)
        cols.append(out[:, 0])
        jacs.append(cache.jacobian[:, 0, :])
    F = np.stack(cols, axis=1)
    _, var, cov = empirical_stats(F)
    om = np.array(cfg.omegas)
    energy = np.array([np.mean(np.sum(J * J, axis=1)) for J in jacs])
    denom = var + cfg.var_guard
    spectral = float(np.sum(om * energy / denom) / cfg.beta)
    penalty = _penalty(cov, cfg.alpha)
    value = spectral + penalty
    result = value
    if parts:
        result = LossParts(value, spectral, penalty, var, energy / denom)
    if not grad:
        return result
    N = len(X)
    g_energy = om / (cfg.beta * denom)
    g_var = -om * energy / (cfg.beta * denom**2)
    gF = _stats_cotangent(F, cov, g_var, cfg.alpha)
    grads = []
    for i, (m, cache) in enumerate(zip(models, caches)):
        g_jac = (2.0 * g_energy[i] / N) * jacs[i][:, None, :]
        g, _ = m.backward(cache, gF[:, i:i + 1], g_jac)
        grads.append(g)
    return result, grads


def eigen_transfer_loss(models, pairs, cfg: EigenLossConfig, stats_batch=None, grad: bool = False,
                        parts: bool = False):
    """Rayleigh-quotient loss for transfer-operator eigenfunctions.

    ``(1/(2 tau)) sum_i w_i mean|f_i(y) - f_i(x)|^2 / (Var f_i + var_guard) + penalty``

    Variances and covariances are taken over ``stats_batch``; by default that
    is the ``x`` side of the pairs.

    Parameters
    ----------
    pairs : PairDataset or tuple ``(x, y)`` of (P, d) arrays
    """
    if hasattr(pairs, "x"):
        Xp, Yp = pairs.x, pairs.y
    else:
        Xp, Yp = pairs
    Xp = np.asarray(Xp, dtype=float)
    Yp = np.asarray(Yp, dtype=float)
    if len(Xp) == 0:
        raise TooFewSamples("empty pair batch")
    if not cfg.tau > 0:
        raise ValueError("tau must be positive")
    models = list(models)
    if len(models) != cfg.k:
        raise ValueError(f"expected {cfg.k} networks, got {len(models)}")
    _check_models(models, Xp.shape[1])
    S = None if stats_batch is None else np.asarray(stats_batch, dtype=float)

    fx, fy, fs, cx, cy, cs = [], [], [], [], [], []
    for m in models:
        ox, c1 = m.forward_cache(Xp)
        oy, c2 = m.forward_cache(Yp)
        fx.append(ox[:, 0]); cx.append(c1)
        fy.append(oy[:, 0]); cy.append(c2)
        if S is not None:
            os_, c3 = m.forward_cache(S)
            fs.append(os_[:, 0]); cs.append(c3)
    FX, FY = np.stack(fx, axis=1), np.stack(fy, axis=1)
    FS = FX if S is None else np.stack(fs, axis=1)
    _, var, cov = empirical_stats(FS)
    om = np.array(cfg.omegas)
    D = FY - FX
    num = np.mean(D * D, axis=0)
    denom = var + cfg.var_guard
    scale = 1.0 / (2.0 * cfg.tau)
    spectral = float(scale * np.sum(om * num / denom))
    penalty = _penalty(cov, cfg.alpha)
    value = spectral + penalty
    result = LossParts(value, spectral, penalty, var, num / denom) if parts else value
    if not grad:
        return result
    P = len(Xp)
    g_num = scale * om / denom
    g_var = -scale * om * num / denom**2
    gS = _stats_cotangent(FS, cov, g_var, cfg.alpha)
    gD = D * (2.0 * g_num / P)
    grads = []
    for i, m in enumerate(models):
        gx = -gD[:, i:i + 1]
        if S is None:
            gx = gx + gS[:, i:i + 1]
        g = m.backward(cx[i], gx)[0] + m.backward(cy[i], gD[:, i:i + 1])[0]
        if S is not None:
            g = g + m.backward(cs[i], gS[:, i:i + 1])[0]
        grads.append(g)
    return result, grads


def _check_ae(enc: MlpModel, dec: MlpModel, d: int):
    if enc.spec.n_in != d or dec.spec.n_out != d or enc.spec.n_out != dec.spec.n_in:
        raise DimensionMismatch(
            f"encoder {enc.spec.layer_sizes} / decoder {dec.spec.layer_sizes} incompatible with data width {d}"
        )


def _reconstruction(enc, dec, X, T, grad):
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.ndim != 2 or T.shape != X.shape:
        raise DimensionMismatch(f"inputs {X.shape} and targets {T.shape} differ")
    _check_ae(enc, dec, X.shape[1])
    z, ce = enc.forward_cache(X)
    out, cd = dec.forward_cache(z)
    R = out - T
    value = float(np.sum(R * R) / len(X))
    if not grad:
        return value
    g_out = 2.0 * R / len(X)
    g_dec, g_z = dec.backward(cd, g_out)
    g_enc, _ = enc.backward(ce, g_z)
    return value, [g_enc, g_dec]


def ae_loss(enc: MlpModel, dec: MlpModel, batch, grad: bool = False):
    """Mean squared reconstruction error ``mean |dec(enc(x)) - x|^2``."""
    X = batch.points if hasattr(batch, "points") else batch
    return _reconstruction(enc, dec, X, X, grad)


def tlae_loss(enc: MlpModel, dec: MlpModel, pairs, grad: bool = False):
    """Time-lagged reconstruction error ``mean |dec(enc(x_i)) - x_{i+j}|^2``."""
    if hasattr(pairs, "x"):
        X, Y = pairs.x, pairs.y
    else:
        X, Y = pairs
    return _reconstruction(enc, dec, X, Y, grad)
