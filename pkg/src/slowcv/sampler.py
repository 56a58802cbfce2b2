"""Euler-Maruyama sampling of overdamped Langevin dynamics and dataset assembly.

The recurrence is

    X_{n+1} = X_n - grad V(X_n) dt + sqrt(2 dt / beta) G_n,

with ``G_n`` standard 2D Gaussians drawn in one block, row ``n`` for step
``n``, from ``numpy.random.Generator(PCG64(seed))``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import Diverged, LagTooLarge
from .potentials import PotentialSpec, Thermo, default_start, gradient_components

DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (n_steps + 1, 2)
    dt: float
    potential: PotentialSpec
    thermo: Thermo
    seed: int

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class Dataset:
    """States recorded every ``stride`` integration steps."""

    points: np.ndarray  # (N, 2)
    stride: int = 1
    dt: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def effective_dt(self) -> float:
        return self.stride * self.dt

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PairDataset:
    """Time-lagged pairs ``(points[i], points[i + lag_steps])``."""

    x: np.ndarray
    y: np.ndarray
    lag_steps: int
    tau: float

    def __len__(self) -> int:
        return len(self.x)

    @property
    def pairs(self):
        return list(zip(self.x, self.y))

    def take(self, idx) -> "PairDataset":
        return PairDataset(self.x[idx], self.y[idx], self.lag_steps, self.tau)


def simulate(p: PotentialSpec, th: Thermo, x0=None, dt: float = 0.005, n_steps: int = 100_000,
             seed: int = 0) -> Trajectory:
    """Integrate the overdamped Langevin SDE with the Euler-Maruyama scheme.

    Raises
    ------
    Diverged
        If a coordinate becomes non-finite or exceeds ``DIVERGENCE_BOUND``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if x0 is None:
        x0 = default_start(p)
    rng = np.random.default_rng(seed)
    noise = math.sqrt(2.0 * dt / th.beta) * rng.standard_normal((n_steps, 2))
    out = np.empty((n_steps + 1, 2))
    out[0] = x0
    x1, x2 = float(x0[0]), float(x0[1])
    # scalar loop: the recurrence is sequential and per-step numpy calls dominate otherwise
    kick1 = noise[:, 0].tolist()
    kick2 = noise[:, 1].tolist()
    for n in range(n_steps):
        g1, g2 = gradient_components(p, x1, x2)
        x1 = x1 - g1 * dt + kick1[n]
        x2 = x2 - g2 * dt + kick2[n]
        if not (abs(x1) <= DIVERGENCE_BOUND and abs(x2) <= DIVERGENCE_BOUND):
            raise Diverged(f"trajectory left the finite range at step {n + 1} (dt={dt})")
        out[n + 1, 0] = x1
        out[n + 1, 1] = x2
    return Trajectory(out, float(dt), p, th, int(seed))


def subsample(t: Trajectory, stride: int, include_initial: bool = True) -> Dataset:
    """Keep every ``stride``-th state.

    With ``include_initial=True`` the points are ``states[0], states[stride], ...``.
    With ``include_initial=False`` recording starts at step ``stride``, so a run
    of ``n_steps`` yields exactly ``n_steps // stride`` points.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    start = 0 if include_initial else stride
    meta = {
        "dt": t.dt,
        "stride": int(stride),
        "seed": t.seed,
        "potential": t.potential.to_dict(),
        "beta": t.thermo.beta,
        "include_initial": include_initial,
    }
    return Dataset(t.states[start::stride].copy(), int(stride), t.dt, meta)


def lag_for(d: Dataset, tau: float) -> int:
    """Number of recorded steps corresponding to lag time ``tau``."""
    j = round(tau / d.effective_dt)
    if abs(j * d.effective_dt - tau) > 1e-9 * max(1.0, abs(tau)):
        raise ValueError(f"tau={tau} is not a multiple of the recording interval {d.effective_dt}")
    return int(j)


def lagged_pairs(d: Dataset, j: int) -> PairDataset:
    """All ``N - j`` pairs ``(points[i], points[i + j])``."""
    n = len(d.points)
    if j < 0:
        raise ValueError("lag must be non-negative")
    if j >= n:
        raise LagTooLarge(f"lag {j} >= number of points {n}")
    return PairDataset(d.points[: n - j], d.points[j:], int(j), j * d.effective_dt)


def save_dataset(d: Dataset, path) -> None:
    """Write ``path`` (CSV, header ``x1,x2``) and ``path`` + ``.json`` metadata."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2"])
        for a, b in d.points:
            w.writerow([repr(float(a)), repr(float(b))])
    meta = {"dt": d.dt, "stride": d.stride}
    meta.update({k: v for k, v in d.meta.items() if k not in meta})
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_dataset(path) -> Dataset:
    path = Path(path)
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return Dataset(pts, int(meta.get("stride", 1)), float(meta.get("dt", 1.0)), meta)
