"""Potential-energy landscapes on the plane.

Three closed-form potentials are provided:

``example1``
    Double well with a curved stiff channel,
    ``V = (x1^2 - 1)^2 + (x1^2 + x2 - 1)^2 / eps``.
``example2``
    Asymmetric double well with a narrow transition region.
``quadratic_ou``
    ``V = |x|^2 / 2`` (Ornstein-Uhlenbeck process).

All evaluators accept arrays of shape ``(..., 2)`` and broadcast over the
leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

KINDS = ("example1", "example2", "quadratic_ou")

# step used for the Example2 Hessian (central differences of the exact gradient)
_HESS_FD_STEP = 1e-5


@dataclass(frozen=True)
class Thermo:
    """Inverse temperature ``beta = 1 / (k_B T)``."""

    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta!r}")


@dataclass(frozen=True)
class PotentialSpec:
    """A builtin potential, addressed by name.

    Parameters
    ----------
    kind : {"example1", "example2", "quadratic_ou"}
    epsilon : float
        Stiffness of the channel term; only used by ``example1``.
    """

    kind: str
    epsilon: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "example1" and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def to_dict(self) -> dict:
        if self.kind == "example1":
            return {"kind": self.kind, "epsilon": self.epsilon}
        return {"kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(d["kind"], float(d.get("epsilon", 0.5)))

    def value(self, x):
        return eval_potential(self, x)

    def gradient(self, x):
        return eval_gradient(self, x)

    def hessian(self, x):
        return eval_hessian(self, x)


def example1(epsilon: float = 0.5) -> PotentialSpec:
    return PotentialSpec("example1", epsilon)


def example2() -> PotentialSpec:
    return PotentialSpec("example2")


def quadratic_ou() -> PotentialSpec:
    return PotentialSpec("quadratic_ou")


def _split(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError(f"points must have trailing dimension 2, got shape {x.shape}")
    return x[..., 0], x[..., 1]


# Example2 building blocks: V = s(x) + g_r(x) + g_l(x) + quartic + bump, with
#   s   = exp(1.5 x2^2) / (1 + exp(5 (x1^2 - 1)))
#   g_r = -4 exp(-4 (x1 - 2)^2 - 0.4 x2^2)
#   g_l = -5 exp(-4 (x1 + 2)^2 - 0.4 x2^2)

def _ex2_value(x1, x2):
    s = np.exp(1.5 * x2**2 - np.logaddexp(0.0, 5.0 * (x1**2 - 1.0)))
    gr = -4.0 * np.exp(-4.0 * (x1 - 2.0) ** 2 - 0.4 * x2**2)
    gl = -5.0 * np.exp(-4.0 * (x1 + 2.0) ** 2 - 0.4 * x2**2)
    return s + gr + gl + 0.2 * (x1**4 + x2**4) + 0.5 * np.exp(-2.0 * x1**2)


def _ex2_gradient(x1, x2):
    u = 5.0 * (x1**2 - 1.0)
    # log form keeps s finite far from the origin where exp(u) alone overflows
    s = np.exp(1.5 * x2**2 - np.logaddexp(0.0, u))
    gr = -4.0 * np.exp(-4.0 * (x1 - 2.0) ** 2 - 0.4 * x2**2)
    gl = -5.0 * np.exp(-4.0 * (x1 + 2.0) ** 2 - 0.4 * x2**2)
    bump = 0.5 * np.exp(-2.0 * x1**2)
    # d/dx1 of 1/(1+e^u) is -10 x1 expit(u) / (1+e^u)
    d1 = (
        -s * 10.0 * x1 * expit(u)
        + gr * (-8.0 * (x1 - 2.0))
        + gl * (-8.0 * (x1 + 2.0))
        + 0.8 * x1**3
        - 4.0 * x1 * bump
    )
    d2 = s * 3.0 * x2 + (gr + gl) * (-0.8 * x2) + 0.8 * x2**3
    return d1, d2


def eval_potential(p: PotentialSpec, x):
    """Potential energy at ``x`` (shape ``(..., 2)``)."""
    x1, x2 = _split(x)
    if p.kind == "example1":
        return (x1**2 - 1.0) ** 2 + (x1**2 + x2 - 1.0) ** 2 / p.epsilon
    if p.kind == "example2":
        return _ex2_value(x1, x2)
    return 0.5 * (x1**2 + x2**2)


def gradient_components(p: PotentialSpec, x1, x2):
    """Gradient as a pair ``(dV/dx1, dV/dx2)``; works on floats and arrays."""
    if p.kind == "example1":
        c = 2.0 * (x1**2 + x2 - 1.0) / p.epsilon
        return 4.0 * x1 * (x1**2 - 1.0) + 2.0 * x1 * c, c
    if p.kind == "example2":
        return _ex2_gradient(x1, x2)
    return x1, x2


def eval_gradient(p: PotentialSpec, x):
    """Exact gradient, shape ``(..., 2)``."""
    d1, d2 = gradient_components(p, *_split(x))
    return np.stack(np.broadcast_arrays(d1, d2), axis=-1)


def eval_hessian(p: PotentialSpec, x):
    """Hessian, shape ``(..., 2, 2)``.

    Closed form for ``example1`` and ``quadratic_ou``. For ``example2`` the
    Hessian is the central difference of the exact gradient, symmetrised.
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = _split(x)
    if p.kind == "example1":
        eps = p.epsilon
        h11 = 12.0 * x1**2 - 4.0 + (4.0 * (x1**2 + x2 - 1.0) + 8.0 * x1**2) / eps
        h12 = 4.0 * x1 / eps
        h22 = np.full_like(x1, 2.0 / eps)
        rows = [np.stack(np.broadcast_arrays(h11, h12), -1), np.stack(np.broadcast_arrays(h12, h22), -1)]
        return np.stack(rows, axis=-2)
    if p.kind == "quadratic_ou":
        return np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()
    h = _HESS_FD_STEP
    cols = []
    for k in range(2):
        step = np.zeros(2)
        step[k] = h
        cols.append((eval_gradient(p, x + step) - eval_gradient(p, x - step)) / (2 * h))
    hess = np.stack(cols, axis=-1)
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


def default_start(p: PotentialSpec) -> tuple[float, float]:
    """Starting point for trajectories: inside a well."""
    return {"example1": (1.0, 0.0), "example2": (2.0, 0.0), "quadratic_ou": (0.0, 0.0)}[p.kind]


def default_domain(p: PotentialSpec) -> tuple[tuple[float, float], tuple[float, float]]:
    """Rectangle ``((x1min, x1max), (x2min, x2max))`` used by grid oracles."""
    return {
        "example1": ((-2.0, 2.0), (-1.5, 2.5)),
        "example2": ((-3.5, 3.5), (-2.5, 2.5)),
        "quadratic_ou": ((-4.0, 4.0), (-4.0, 4.0)),
    }[p.kind]
