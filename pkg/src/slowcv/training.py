"""Mini-batch Adam training of autoencoders and eigenfunction networks.

One epoch is a pass over the data shuffled with
``default_rng(seed + epoch)`` and cut into contiguous batches of
``batch_size``. Network parameters are drawn first from
``default_rng(seed)``: encoder then decoder, or ``f_1 ... f_k`` in order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVariance, NumericalError
from .losses import EigenLossConfig, ae_loss, eigen_generator_loss, eigen_transfer_loss, tlae_loss
from .net import AdamState, MlpModel, MlpSpec, adam_update, init

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    batch_size: int = 20_000
    epochs: int = 500
    seed: int = 2046
    alpha: float = 10.0
    omegas: tuple = (1.0,)
    k: int = 1
    var_guard: float = 1e-6

    def eigen_loss(self, beta: float = 1.0, tau: float = 1.0) -> EigenLossConfig:
        return EigenLossConfig(self.k, tuple(self.omegas), self.alpha, beta, tau, self.var_guard)


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int):
    perm = np.random.default_rng(seed + epoch).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


@dataclass
class TrainResult:
    models: list
    history: list = field(repr=False)  # one dict per epoch


def _check_finite(value, epoch):
    if not np.isfinite(value):
        raise NumericalError(f"loss became non-finite in epoch {epoch}")


def _fit(models, n, step_fn, cfg: TrainConfig, progress=None):
    """Generic loop; ``step_fn(models, idx)`` returns ``(record, grads)``."""
    states = [AdamState.fresh(m.spec.n_params, lr=cfg.lr) for m in models]
    history = []
    for epoch in range(cfg.epochs):
        sums, total = {}, 0
        for idx in epoch_batches(n, cfg.batch_size, cfg.seed, epoch):
            record, grads = step_fn(models, idx)
            _check_finite(record["loss"], epoch)
            for key, v in record.items():
                sums[key] = sums.get(key, 0.0) + v * len(idx)
            total += len(idx)
            updated = []
            for i, (m, g) in enumerate(zip(models, grads)):
                params, states[i] = adam_update(m.params, g, states[i])
                updated.append(m.with_params(params))
            models = updated
        rec = {"epoch": epoch}
        rec.update({k: v / total for k, v in sums.items()})
        history.append(rec)
        if progress is not None:
            progress(rec)
    return TrainResult(models, history)


def train_autoencoder(data, enc_spec: MlpSpec, dec_spec: MlpSpec, cfg: TrainConfig, progress=None) -> TrainResult:
    """Fit an encoder/decoder pair.

    ``data`` is either an ``(N, d)`` array (plain reconstruction loss) or a
    pair dataset (time-lagged loss).
    """
    rng = np.random.default_rng(cfg.seed)
    models = [init(enc_spec, rng), init(dec_spec, rng)]
    lagged = hasattr(data, "x")
    if lagged:
        X, Y = data.x, data.y
    else:
        X = np.asarray(data.points if hasattr(data, "points") else data, dtype=float)

    def step(ms, idx):
        if lagged:
            value, grads = tlae_loss(ms[0], ms[1], (X[idx], Y[idx]), grad=True)
        else:
            value, grads = ae_loss(ms[0], ms[1], X[idx], grad=True)
        return {"loss": value, "penalty": 0.0}, grads

    return _fit(models, len(X), step, cfg, progress)


def train_eigenfunctions(data, spec: MlpSpec, cfg: TrainConfig, kind: str = "transfer", beta: float = 1.0,
                         progress=None) -> TrainResult:
    """Fit ``k`` eigenfunction networks with the transfer or generator loss.

    For ``kind="transfer"`` ``data`` is a pair dataset and batch statistics
    use the ``x`` side of each batch; for ``kind="generator"`` it holds states.
    """
    rng = np.random.default_rng(cfg.seed)
    models = [init(spec, rng) for _ in range(cfg.k)]
    if kind == "transfer":
        lcfg = cfg.eigen_loss(beta=beta, tau=data.tau)
        X, Y = data.x, data.y

        def step(ms, idx):
            parts, grads = eigen_transfer_loss(ms, (X[idx], Y[idx]), lcfg, grad=True, parts=True)
            return _eigen_record(parts), grads

        n = len(X)
    elif kind == "generator":
        lcfg = cfg.eigen_loss(beta=beta)
        X = np.asarray(data.points if hasattr(data, "points") else data, dtype=float)

        def step(ms, idx):
            parts, grads = eigen_generator_loss(ms, X[idx], lcfg, grad=True, parts=True)
            return _eigen_record(parts), grads

        n = len(X)
    else:
        raise ValueError(f"unknown eigen loss kind {kind!r}")
    return _fit(models, n, step, cfg, progress)


def _eigen_record(parts) -> dict:
    rec = {"loss": parts.total, "spectral": parts.spectral, "penalty": parts.penalty}
    for i, v in enumerate(parts.variances):
        rec[f"var_{i}"] = float(v)
    return rec


def _values(model, X):
    out = np.asarray(model.forward(X), dtype=float)
    return out[:, 0] if out.ndim == 2 else out


def eigenvalue_estimate(models, d, pairs=None, beta: float | None = None, var_guard: float = 1e-6) -> list:
    """Rayleigh-quotient eigenvalue estimates for trained (or any) scalar functions.

    With ``pairs`` the transfer-operator form is used:
    ``nu = 1 - E_tau(f) / Var(f)`` and ``lambda = (1 - nu) / tau``, where
    ``E_tau(f) = mean (f(y) - f(x))^2 / 2``. Without pairs the generator form
    ``lambda = (1/beta) mean |grad f|^2 / Var(f)`` is used and ``beta`` is
    required. Variances are taken over the states ``d``.

    Raises
    ------
    DegenerateVariance
        If some ``Var(f) < 10 * var_guard``.
    """
    X = np.asarray(d.points if hasattr(d, "points") else d, dtype=float)
    out = []
    for m in models:
        f = _values(m, X)
        var = float(np.var(f))
        if var < 10.0 * var_guard:
            raise DegenerateVariance(f"variance {var:.3g} is below {10 * var_guard:.3g}")
        if pairs is not None:
            diff = _values(m, pairs.y) - _values(m, pairs.x)
            e_tau = 0.5 * float(np.mean(diff * diff))
            nu = 1.0 - e_tau / var
            out.append({"nu": nu, "lambda": (1.0 - nu) / pairs.tau, "energy": e_tau, "variance": var})
        else:
            if beta is None:
                raise ValueError("beta is required for the generator estimate")
            J = np.asarray(m.input_gradient(X), dtype=float).reshape(len(X), -1)
            energy = float(np.mean(np.sum(J * J, axis=1))) / beta
            out.append({"lambda": energy / var, "energy": energy, "variance": var})
    return out


def grid_table(fun, bounds, resolution) -> np.ndarray:
    """Rows ``x1, x2, v...`` of ``fun`` on a regular grid (``x1`` slowest)."""
    (a1, b1), (a2, b2) = bounds
    n1, n2 = resolution
    X1, X2 = np.meshgrid(np.linspace(a1, b1, n1), np.linspace(a2, b2, n2), indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    vals = np.asarray(fun(pts), dtype=float).reshape(len(pts), -1)
    return np.column_stack([pts, vals])


def export_grid(fun, bounds, resolution, path) -> np.ndarray:
    """Write :func:`grid_table` as CSV with header ``x1,x2,v`` (or ``v0,v1,...``)."""
    table = grid_table(fun, bounds, resolution)
    nv = table.shape[1] - 2
    header = ["x1", "x2"] + (["v"] if nv == 1 else [f"v{i}" for i in range(nv)])
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return table


def decoder_curve(enc: MlpModel, dec: MlpModel, data, n: int = 256) -> np.ndarray:
    """Rows ``z, y1, y2``: the decoder image for ``z`` between the 1st and 99th percentile of ``enc(data)``."""
    X = np.asarray(data.points if hasattr(data, "points") else data, dtype=float)
    z = _values(enc, X)
    lo, hi = np.percentile(z, [1.0, 99.0])
    zs = np.linspace(lo, hi, n)
    return np.column_stack([zs, dec.forward(zs[:, None])])


def export_decoder_curve(enc, dec, data, path, n: int = 256) -> np.ndarray:
    table = decoder_curve(enc, dec, data, n)
    np.savetxt(path, table, delimiter=",", header="z,y1,y2", comments="", fmt="%.17g")
    return table
