"""Simplified string method for minimal energy paths.

Each iteration moves the interior nodes one gradient-descent step and then
redistributes all nodes at equal arclength along the piecewise-linear curve.
Endpoints stay pinned.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged
from .potentials import PotentialSpec, eval_gradient, eval_potential


@dataclass
class Path:
    nodes: np.ndarray  # (M, 2)
    converged: bool
    iterations: int
    max_energy: np.ndarray = field(default=None, repr=False)  # max V over nodes, per iteration

    def save(self, path) -> None:
        np.savetxt(path, self.nodes, delimiter=",", header="x1,x2", comments="", fmt="%.17g")


def _redistribute(nodes):
    seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return nodes.copy()
    target = np.linspace(0.0, s[-1], len(nodes))
    out = np.column_stack([np.interp(target, s, nodes[:, k]) for k in range(nodes.shape[1])])
    out[0], out[-1] = nodes[0], nodes[-1]
    return out


def reparameterize(nodes: np.ndarray, rtol: float = 1e-9, max_passes: int = 100) -> np.ndarray:
    """Place the same number of nodes at equal arclength along the polyline.

    One interpolation pass equalizes arclength along the old polyline, which
    leaves the new chords slightly uneven where corners get cut; passes are
    repeated until the chord lengths agree to ``rtol``.
    """
    out = np.asarray(nodes, dtype=float)
    for _ in range(max_passes):
        out = _redistribute(out)
        seg = np.linalg.norm(np.diff(out, axis=0), axis=1)
        if seg.max() - seg.min() <= rtol * max(seg.mean(), 1e-300):
            break
    return out


def string_method(p: PotentialSpec, a, b, M: int = 50, step: float = 1e-3, max_iters: int = 50_000,
                  tol: float = 1e-6, init=None) -> Path:
    """Relax a string between ``a`` and ``b`` to the minimal energy path.

    Stops once the largest node displacement in one iteration is below
    ``tol``. If ``max_iters`` is reached first, the last path is returned
    with ``converged=False`` and a :class:`NotConverged` warning.
    """
    if M < 10:
        raise ValueError("string needs at least 10 nodes")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for end in (a, b):
        if np.linalg.norm(eval_gradient(p, end)) >= 0.1:
            warnings.warn(f"endpoint {end.tolist()} is not near a local minimum", stacklevel=2)
    if init is None:
        t = np.linspace(0.0, 1.0, M)[:, None]
        nodes = (1.0 - t) * a + t * b
    else:
        nodes = reparameterize(np.asarray(init, dtype=float))
    nodes[0], nodes[-1] = a, b
    history = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        moved = nodes.copy()
        moved[1:-1] -= step * eval_gradient(p, nodes[1:-1])
        new = reparameterize(moved)
        shift = float(np.max(np.linalg.norm(new - nodes, axis=1)))
        nodes = new
        history.append(float(np.max(eval_potential(p, nodes))))
        if shift < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"string method stopped after {max_iters} iterations", NotConverged, stacklevel=2)
    return Path(nodes, converged, it, np.array(history))
