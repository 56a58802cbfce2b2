"""Finite-volume discretisation of the generator on a rectangular grid.

Grid functions are plain float arrays of length ``n1 * n2``; node ``(i, j)``
(``x1`` index ``i``, ``x2`` index ``j``) sits at flat position ``i * n2 + j``.

The discrete Dirichlet form is

    E_h(f) = (1/beta) * sum over faces  w_face * ((f_a - f_b) / h)^2,

with face weights ``exp(-beta V(midpoint))`` normalised like the node
weights. The operator ``M`` (approximating ``-L``) is defined by
``<M f, g>_w = (1/beta) sum w_face (df)(dg) / h^2``, which makes it
self-adjoint in the node-weighted inner product, positive semidefinite and
zero on constants (no flux leaves the rectangle).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ..errors import ConvergenceFailure, GridTooCoarse
from ..potentials import PotentialSpec, Thermo, default_domain, eval_potential

# energies are capped at min(V) + ENERGY_CAP / beta; the capped region carries
# relative weight below exp(-ENERGY_CAP) and the cap keeps exp() finite on stiff landscapes
ENERGY_CAP = 30.0


@dataclass(frozen=True, eq=False)
class Grid2D:
    potential: PotentialSpec
    thermo: Thermo
    x1: np.ndarray
    x2: np.ndarray
    energies: np.ndarray = field(repr=False)  # capped V at nodes, flat
    weights: np.ndarray = field(repr=False)  # normalised Boltzmann weights, flat
    vmin: float = 0.0  # uncapped minimum of V over the nodes
    zsum: float = 1.0  # sum of exp(-beta (V - vmin)) over the nodes

    @property
    def shape(self) -> tuple:
        return (len(self.x1), len(self.x2))

    @property
    def size(self) -> int:
        return len(self.x1) * len(self.x2)

    @property
    def h(self) -> tuple:
        return (self.x1[1] - self.x1[0], self.x2[1] - self.x2[0])

    @property
    def bounds(self) -> tuple:
        return ((float(self.x1[0]), float(self.x1[-1])), (float(self.x2[0]), float(self.x2[-1])))

    @property
    def points(self) -> np.ndarray:
        X1, X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])

    @property
    def beta(self) -> float:
        return self.thermo.beta

    def capped(self, V):
        return np.minimum(V, self.vmin + ENERGY_CAP / self.beta)

    def evaluate(self, fun) -> np.ndarray:
        """Evaluate a callable on ``(N, 2)`` node coordinates; returns a flat grid function."""
        return np.asarray(fun(self.points), dtype=float).reshape(self.size)

    def mean(self, f) -> float:
        return float(np.dot(self.weights, f))

    def inner(self, f, g) -> float:
        return float(np.dot(self.weights, f * g))

    def var(self, f) -> float:
        c = f - self.mean(f)
        return self.inner(c, c)

    def nearest_node(self, x) -> int:
        i = int(np.argmin(np.abs(self.x1 - x[0])))
        j = int(np.argmin(np.abs(self.x2 - x[1])))
        return i * len(self.x2) + j


def make_grid(p: PotentialSpec, th: Thermo, n=(161, 161), bounds=None) -> Grid2D:
    """Regular grid over ``bounds`` (default: the potential's oracle domain)."""
    n1, n2 = (n, n) if np.isscalar(n) else n
    if n1 < 3 or n2 < 3:
        raise ValueError("grids need at least 3 nodes per axis")
    (a1, b1), (a2, b2) = bounds if bounds is not None else default_domain(p)
    x1 = np.linspace(a1, b1, n1)
    x2 = np.linspace(a2, b2, n2)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    V = eval_potential(p, np.stack([X1, X2], axis=-1)).ravel()
    vmin = float(V.min())
    Vc = np.minimum(V, vmin + ENERGY_CAP / th.beta)
    w = np.exp(-th.beta * (Vc - vmin))
    return Grid2D(p, th, x1, x2, Vc, w / w.sum(), vmin, float(w.sum()))


def _faces(g: Grid2D):
    """Yield ``(a, b, inv_h2, face_weight, log_ratio_a, log_ratio_b)`` for both face directions.

    ``log_ratio_a = -beta (V_face - V_a)`` so that ``w_face / w_a = exp(log_ratio_a)``.
    """
    n1, n2 = g.shape
    idx = np.arange(g.size).reshape(n1, n2)
    V = g.energies.reshape(n1, n2)
    beta = g.beta
    h1, h2 = g.h
    out = []
    for axis, h in ((0, h1), (1, h2)):
        if axis == 0:
            a, b = idx[:-1, :], idx[1:, :]
            m1 = 0.5 * (g.x1[:-1] + g.x1[1:])
            M1, M2 = np.meshgrid(m1, g.x2, indexing="ij")
        else:
            a, b = idx[:, :-1], idx[:, 1:]
            m2 = 0.5 * (g.x2[:-1] + g.x2[1:])
            M1, M2 = np.meshgrid(g.x1, m2, indexing="ij")
        Vf = g.capped(eval_potential(g.potential, np.stack([M1, M2], axis=-1)))
        Va = V.ravel()[a.ravel()]
        Vb = V.ravel()[b.ravel()]
        Vf = Vf.ravel()
        wf = np.exp(-beta * (Vf - g.vmin)) / g.zsum
        out.append((a.ravel(), b.ravel(), 1.0 / h**2, wf, -beta * (Vf - Va), -beta * (Vf - Vb)))
    return out


@dataclass(frozen=True, eq=False)
class FDGenerator:
    """Discretised ``-L``.

    Attributes
    ----------
    matrix : csr_matrix
        ``M`` acting on grid functions (not symmetric as a matrix, but
        ``w_i M_ij == w_j M_ji``).
    symmetric : csr_matrix
        ``W^{1/2} M W^{-1/2}``, assembled directly in log space.
    """

    grid: Grid2D
    matrix: sp.csr_matrix = field(repr=False)
    symmetric: sp.csr_matrix = field(repr=False)

    def apply(self, f):
        return self.matrix @ f


def fd_generator(p: PotentialSpec, th: Thermo, g: Grid2D) -> FDGenerator:
    """Assemble the reflecting-boundary finite-volume generator on ``g``."""
    if g.potential != p or g.thermo.beta != th.beta:
        raise ValueError("grid was built for a different potential or temperature")
    rows, cols, vals, srows, scols, svals = [], [], [], [], [], []
    diag = np.zeros(g.size)
    for a, b, inv_h2, _, la, lb in _faces(g):
        c = inv_h2 / th.beta
        ca = c * np.exp(la)  # (1/beta h^2) w_face / w_a
        cb = c * np.exp(lb)
        rows += [a, b]; cols += [b, a]; vals += [-ca, -cb]
        np.add.at(diag, a, ca)
        np.add.at(diag, b, cb)
        # symmetric entry: (1/beta h^2) w_face / sqrt(w_a w_b)
        s = -c * np.exp(0.5 * (la + lb))
        srows += [a, b]; scols += [b, a]; svals += [s, s]
    n = g.size
    ar = np.arange(n)
    M = sp.coo_matrix(
        (np.concatenate(vals + [diag]), (np.concatenate(rows + [ar]), np.concatenate(cols + [ar]))), shape=(n, n)
    ).tocsr()
    S = sp.coo_matrix(
        (np.concatenate(svals + [diag]), (np.concatenate(srows + [ar]), np.concatenate(scols + [ar]))), shape=(n, n)
    ).tocsr()
    return FDGenerator(g, M, S)


def energy_generator(f, g: Grid2D, th: Thermo | None = None) -> float:
    """Discrete energy ``(1/beta) E_mu |grad f|^2`` as a face sum."""
    beta = g.beta if th is None else th.beta
    f = np.asarray(f, dtype=float)
    total = 0.0
    for a, b, inv_h2, wf, _, _ in _faces(g):
        d = f[b] - f[a]
        total += inv_h2 * float(np.dot(wf, d * d))
    return total / beta


def gradient_energy_density(f, g: Grid2D) -> float:
    """``sum w_face |df / h|^2``, the discrete ``E_mu |grad f|^2``."""
    return energy_generator(f, g) * g.beta


@dataclass(frozen=True, eq=False)
class EigenResult:
    """Eigenpairs with eigenfunctions orthonormal in the weighted inner product.

    ``order`` is ``"ascending"`` for generators and ``"descending"`` for
    transfer operators. ``vectors[:, i]`` belongs to ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    order: str = "ascending"
    coords: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def gram(self) -> np.ndarray:
        return self.vectors.T @ (self.weights[:, None] * self.vectors)

    def save(self, stem) -> None:
        """Write ``stem.csv`` (coordinates and eigenfunctions) and ``stem.json``."""
        stem = Path(stem)
        m = len(self.values)
        header = (["x1", "x2"] if self.coords is not None and self.coords.shape[1] == 2 else ["index"])
        header += ["weight"] + [f"phi{i}" for i in range(m)]
        first = self.coords if self.coords is not None else np.arange(len(self.weights))[:, None]
        table = np.column_stack([first, self.weights, self.vectors])
        np.savetxt(stem.with_suffix(".csv"), table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
        meta = dict(self.meta)
        meta.update({"eigenvalues": [float(v) for v in self.values], "order": self.order})
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def fix_signs(vectors, anchor_order):
    """Flip columns so each is non-negative at the first anchor where it is not ~0."""
    vectors = vectors.copy()
    for i in range(vectors.shape[1]):
        v = vectors[:, i]
        tol = 1e-10 * np.max(np.abs(v))
        for node in anchor_order:
            if abs(v[node]) > tol:
                if v[node] < 0:
                    vectors[:, i] = -v
                break
    return vectors


def _anchor_order(points, anchor=(1.0, 0.0)):
    d = np.sum((points - np.asarray(anchor)) ** 2, axis=1)
    return np.lexsort((points[:, 1], points[:, 0], d))


def leading_eigs(op: FDGenerator, g: Grid2D | None = None, m: int = 3, sigma: float = -1e-3) -> EigenResult:
    """The ``m`` smallest eigenpairs of the discrete generator.

    Shift-invert Lanczos on the symmetrised matrix with a fixed start vector.
    Each eigenfunction is made non-negative at the node nearest ``(1, 0)``.
    """
    g = op.grid if g is None else g
    if not 1 <= m <= 12:
        raise ValueError("m must be in 1..12")
    v0 = np.random.default_rng(0).uniform(0.5, 1.5, g.size)
    try:
        vals, U = eigsh(op.symmetric, k=m, sigma=sigma, which="LM", v0=v0, tol=1e-13)
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(str(exc)) from exc
    order = np.argsort(vals)
    vals, U = vals[order], U[:, order]
    phi = U / np.sqrt(g.weights)[:, None]
    phi = fix_signs(phi, _anchor_order(g.points))
    meta = {
        "potential": g.potential.to_dict(),
        "beta": g.beta,
        "bounds": [list(b) for b in g.bounds],
        "shape": list(g.shape),
    }
    return EigenResult(vals, phi, g.weights.copy(), "ascending", g.points, meta)


def generator_spectrum(p: PotentialSpec, th: Thermo, n=(161, 161), m: int = 3, bounds=None):
    """Convenience: grid, operator and leading eigenpairs in one call."""
    g = make_grid(p, th, n, bounds)
    op = fd_generator(p, th, g)
    return g, op, leading_eigs(op, g, m)


def resolution_check(p: PotentialSpec, th: Thermo, n=(161, 161), bounds=None, threshold: float = 0.2) -> float:
    """Relative change of the first nonzero eigenvalue when the spacing doubles.

    Raises
    ------
    GridTooCoarse
        If the change exceeds ``threshold``.
    """
    n1, n2 = (n, n) if np.isscalar(n) else n
    fine = generator_spectrum(p, th, (n1, n2), 2, bounds)[2].values[1]
    coarse = generator_spectrum(p, th, ((n1 + 1) // 2, (n2 + 1) // 2), 2, bounds)[2].values[1]
    change = abs(coarse - fine) / abs(fine)
    if change > threshold:
        raise GridTooCoarse(f"first eigenvalue changes by {change:.1%} when halving the resolution")
    return float(change)


class GridInterpolant:
    """Bilinear interpolation of a grid function, usable where a scalar network is.

    Gradients are the bilinear interpolation of nodal central differences.
    Points outside the grid are clamped to its boundary.
    """

    def __init__(self, g: Grid2D, values):
        self.grid = g
        F = np.asarray(values, dtype=float).reshape(g.shape)
        D1, D2 = np.gradient(F, g.x1, g.x2)
        axes = (g.x1, g.x2)
        self._f = RegularGridInterpolator(axes, F)
        self._d1 = RegularGridInterpolator(axes, D1)
        self._d2 = RegularGridInterpolator(axes, D2)
        self._lo = np.array([g.x1[0], g.x2[0]])
        self._hi = np.array([g.x1[-1], g.x2[-1]])

    def _clip(self, x):
        return np.clip(np.atleast_2d(np.asarray(x, dtype=float)), self._lo, self._hi)

    def forward(self, x):
        return self._f(self._clip(x))[:, None]

    __call__ = forward

    def input_gradient(self, x):
        X = self._clip(x)
        return np.stack([self._d1(X), self._d2(X)], axis=-1)[:, None, :]


def sample_invariant(g: Grid2D, n: int, seed: int = 0) -> np.ndarray:
    """Draw ``n`` points from the grid's Boltzmann weights with uniform in-cell jitter."""
    rng = np.random.default_rng(seed)
    nodes = rng.choice(g.size, size=n, p=g.weights)
    h1, h2 = g.h
    jitter = rng.uniform(-0.5, 0.5, size=(n, 2)) * np.array([h1, h2])
    pts = g.points[nodes] + jitter
    lo = np.array([g.x1[0], g.x2[0]])
    hi = np.array([g.x1[-1], g.x2[-1]])
    return np.clip(pts, lo, hi)
