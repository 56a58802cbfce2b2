"""Quadrature checks of the integration-by-parts identities and the slowness objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DegenerateFamily
from ..potentials import PotentialSpec, Thermo, eval_gradient, eval_hessian
from .grid import FDGenerator, Grid2D, fd_generator, gradient_energy_density


@dataclass(frozen=True)
class AnalyticFunction:
    """A scalar function with closed-form first and second derivatives.

    Each callable maps ``(N, 2)`` points to ``(N,)``, ``(N, 2)`` and
    ``(N, 2, 2)`` arrays respectively.
    """

    value: Callable
    grad: Callable
    hess: Callable

    def forward(self, x):
        return np.asarray(self.value(np.atleast_2d(x)), dtype=float)[:, None]

    __call__ = forward

    def input_gradient(self, x):
        return np.asarray(self.grad(np.atleast_2d(x)), dtype=float)[:, None, :]

    def generator(self, p: PotentialSpec, th: Thermo, x):
        """``L f = -grad V . grad f + (1/beta) Laplacian f`` at ``x``."""
        x = np.atleast_2d(x)
        H = self.hess(x)
        return -np.sum(eval_gradient(p, x) * self.grad(x), axis=1) + np.trace(H, axis1=1, axis2=2) / th.beta


def linear(a) -> AnalyticFunction:
    a = np.asarray(a, dtype=float)
    return AnalyticFunction(
        lambda x: x @ a,
        lambda x: np.broadcast_to(a, x.shape).copy(),
        lambda x: np.zeros(x.shape[:-1] + (2, 2)),
    )


def constant(c: float = 1.0) -> AnalyticFunction:
    return AnalyticFunction(
        lambda x: np.full(len(x), float(c)),
        lambda x: np.zeros_like(x),
        lambda x: np.zeros(x.shape[:-1] + (2, 2)),
    )


def gaussian_bump() -> AnalyticFunction:
    """``exp(-|x|^2)``."""

    def value(x):
        return np.exp(-np.sum(x * x, axis=1))

    def grad(x):
        return -2.0 * x * value(x)[:, None]

    def hess(x):
        v = value(x)[:, None, None]
        return v * (4.0 * x[:, :, None] * x[:, None, :] - 2.0 * np.eye(2))

    return AnalyticFunction(value, grad, hess)


def coordinate(k: int) -> AnalyticFunction:
    """``x -> x_k``."""
    a = np.zeros(2)
    a[k] = 1.0
    return linear(a)


def bochner_check(p: PotentialSpec, th: Thermo, g: Grid2D, f: AnalyticFunction):
    """Both sides of ``int |L f|^2 dmu = (1/beta) int [HessV(grad f, grad f) + |grad^2 f|_F^2 / beta] dmu``.

    Returns ``(lhs, rhs, rel_err)``; ``rel_err`` is 0 when both sides vanish.
    """
    x = g.points
    Lf = f.generator(p, th, x)
    gf = f.grad(x)
    H = f.hess(x)
    HV = eval_hessian(p, x)
    lhs = float(np.dot(g.weights, Lf * Lf))
    integrand = np.einsum("ni,nij,nj->n", gf, HV, gf) + np.sum(H * H, axis=(1, 2)) / th.beta
    rhs = float(np.dot(g.weights, integrand)) / th.beta
    scale = max(abs(lhs), abs(rhs))
    rel = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
    return lhs, rhs, rel


def orthonormalize(xi, g: Grid2D, rtol: float = 1e-10) -> list:
    """Center and Gram-Schmidt (twice) a family of grid functions in the weighted inner product.

    Raises
    ------
    DegenerateFamily
        If a member is (numerically) constant or in the span of the others.
    """
    basis = []
    for f in xi:
        v = np.asarray(f, dtype=float).copy()
        ref = np.sqrt(g.inner(v, v))
        v -= g.mean(v)
        for _ in range(2):
            for b in basis:
                v -= g.inner(v, b) * b
        norm = np.sqrt(g.inner(v, v))
        if not norm > rtol * max(ref, 1e-300):
            raise DegenerateFamily("family is constant or linearly dependent after centering")
        basis.append(v / norm)
    return basis


def slowness_objective(xi, g: Grid2D, p: PotentialSpec, th: Thermo, omegas, op: FDGenerator | None = None):
    """Weighted sum of ``int |L xi_i|^2 dmu`` and ``int |grad xi_i|^2 dmu``.

    The family is centered and orthonormalized first.

    Returns
    -------
    (term1, term2, total)
    """
    omegas = np.asarray(omegas, dtype=float)
    if len(omegas) != len(xi):
        raise ValueError("need one weight per function")
    op = fd_generator(p, th, g) if op is None else op
    basis = orthonormalize(xi, g)
    t1 = t2 = 0.0
    for w, v in zip(omegas, basis):
        Lv = op.apply(v)
        t1 += w * g.inner(Lv, Lv)
        t2 += w * gradient_energy_density(v, g)
    return t1, t2, t1 + t2
