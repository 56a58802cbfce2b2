"""Ulam (bin-counting) estimate of the transfer operator from lagged pairs."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import EmptyBinRow
from .grid import EigenResult, fix_signs


@dataclass(frozen=True)
class BinSpec:
    """Regular rectangular bins; points outside the rectangle go to one overflow bin."""

    bounds: tuple
    n1: int
    n2: int

    @property
    def n_regular(self) -> int:
        return self.n1 * self.n2

    @property
    def overflow(self) -> int:
        return self.n_regular

    def assign(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        (a1, b1), (a2, b2) = self.bounds
        i = np.floor((pts[:, 0] - a1) / (b1 - a1) * self.n1).astype(np.int64)
        j = np.floor((pts[:, 1] - a2) / (b2 - a2) * self.n2).astype(np.int64)
        # the upper edge belongs to the last bin
        i = np.where(pts[:, 0] == b1, self.n1 - 1, i)
        j = np.where(pts[:, 1] == b2, self.n2 - 1, j)
        inside = (i >= 0) & (i < self.n1) & (j >= 0) & (j < self.n2)
        return np.where(inside, i * self.n2 + j, self.overflow)

    def centers(self) -> np.ndarray:
        (a1, b1), (a2, b2) = self.bounds
        c1 = a1 + (np.arange(self.n1) + 0.5) * (b1 - a1) / self.n1
        c2 = a2 + (np.arange(self.n2) + 0.5) * (b2 - a2) / self.n2
        C1, C2 = np.meshgrid(c1, c2, indexing="ij")
        regular = np.column_stack([C1.ravel(), C2.ravel()])
        return np.vstack([regular, [np.nan, np.nan]])


@dataclass(frozen=True, eq=False)
class UlamModel:
    """Row-stochastic transition matrix over the retained bins.

    ``flux[i, j] = pi[i] * P[i, j]``; after symmetrisation ``flux`` is an
    exactly symmetric matrix and ``pi`` its row sums.
    """

    P: np.ndarray
    pi: np.ndarray
    flux: np.ndarray
    states: np.ndarray  # bin ids of the rows
    symmetrized: bool
    bins: BinSpec | None = None
    counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.pi)

    @classmethod
    def from_matrix(cls, P, pi=None) -> "UlamModel":
        """Wrap a known transition matrix (``pi`` defaults to its stationary vector)."""
        P = np.asarray(P, dtype=float)
        if pi is None:
            vals, vecs = np.linalg.eig(P.T)
            v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
            pi = v / v.sum()
        pi = np.asarray(pi, dtype=float)
        flux = pi[:, None] * P
        return cls(P, pi, flux, np.arange(len(pi)), bool(np.array_equal(flux, flux.T)))

    def eigs(self, m: int | None = None) -> EigenResult:
        """Leading eigenpairs, eigenvalues descending, vectors pi-orthonormal."""
        m = self.n_states if m is None else min(m, self.n_states)
        if self.symmetrized:
            s = 1.0 / np.sqrt(self.pi)
            A = s[:, None] * self.flux * s[None, :]
            vals, U = np.linalg.eigh(0.5 * (A + A.T))
            order = np.argsort(vals)[::-1][:m]
            vals, vecs = vals[order], U[:, order] * s[:, None]
        else:
            vals, vecs = np.linalg.eig(self.P)
            order = np.argsort(-vals.real)[:m]
            vals, vecs = vals[order].real, vecs[:, order].real
            norms = np.sqrt(np.sum(self.pi[:, None] * vecs**2, axis=0))
            vecs = vecs / norms
        coords = self.bins.centers()[self.states] if self.bins is not None else None
        if coords is not None:
            d = np.nansum((coords - np.array([1.0, 0.0])) ** 2, axis=1)
            d = np.where(np.isnan(coords[:, 0]), np.inf, d)
            anchor = np.argsort(d, kind="stable")
        else:
            anchor = np.arange(self.n_states)
        vecs = fix_signs(vecs, anchor)
        return EigenResult(vals, vecs, self.pi.copy(), "descending", coords, {"symmetrized": self.symmetrized})

    def save(self, stem) -> None:
        """Write ``stem.csv`` (bin id, center, stationary weight) and ``stem.json``."""
        stem = Path(stem)
        coords = self.bins.centers()[self.states] if self.bins is not None else np.full((self.n_states, 2), np.nan)
        table = np.column_stack([self.states, coords, self.pi])
        np.savetxt(stem.with_suffix(".csv"), table, delimiter=",", header="bin,x1,x2,pi", comments="", fmt="%.17g")
        meta = {
            "symmetrized": self.symmetrized,
            "n_states": self.n_states,
            "transition_matrix": self.P.tolist(),
        }
        if self.bins is not None:
            meta["bins"] = {"bounds": [list(b) for b in self.bins.bounds], "n1": self.bins.n1, "n2": self.bins.n2}
        stem.with_suffix(".json").write_text(json.dumps(meta))


def ulam_transfer(pairs, bins: BinSpec, symmetrize: bool = True) -> UlamModel:
    """Count bin-to-bin transitions of lagged pairs.

    Bins never visited are left out. A bin reached only as an endpoint (no
    outgoing pair) is dropped with an :class:`EmptyBinRow` warning, together
    with the transitions into it.
    """
    X, Y = (pairs.x, pairs.y) if hasattr(pairs, "x") else pairs
    bx = bins.assign(X)
    by = bins.assign(Y)
    n_all = bins.n_regular + 1
    C = np.zeros((n_all, n_all))
    np.add.at(C, (bx, by), 1.0)
    keep = (C.sum(axis=1) > 0) | (C.sum(axis=0) > 0)
    while True:
        sub = C[np.ix_(keep, keep)]
        empty = sub.sum(axis=1) == 0
        if not empty.any():
            break
        dropped = np.flatnonzero(keep)[empty]
        warnings.warn(f"bins {dropped.tolist()} have no outgoing transition; dropped", EmptyBinRow, stacklevel=2)
        keep[dropped] = False
    states = np.flatnonzero(keep)
    C = C[np.ix_(keep, keep)]
    total = C.sum()
    if symmetrize:
        F = C / total
        F = 0.5 * (F + F.T)
        pi = F.sum(axis=1)
        P = F / pi[:, None]
    else:
        rows = C.sum(axis=1)
        P = C / rows[:, None]
        pi = rows / total
        F = pi[:, None] * P
    return UlamModel(P, pi, F, states, symmetrize, bins, C)


def lemma1_check(u: UlamModel, f):
    """Compare the transition energy with ``<(I - P) f, f>_pi``.

    Returns ``(lhs, rhs, abs_err)`` with ``lhs = 1/2 sum_ij pi_i P_ij (f_j - f_i)^2``.
    """
    if not u.symmetrized:
        raise ValueError("the identity needs a detailed-balance (symmetrized) model")
    f = np.asarray(f, dtype=float)
    diff = f[None, :] - f[:, None]
    lhs = 0.5 * float(np.sum(u.flux * diff * diff))
    rhs = float(np.dot(u.pi * f, f - u.P @ f))
    return lhs, rhs, abs(lhs - rhs)


def transfer_energy(u: UlamModel, f) -> float:
    """``1/2 sum_ij pi_i P_ij (f_j - f_i)^2``."""
    f = np.asarray(f, dtype=float)
    diff = f[None, :] - f[:, None]
    return 0.5 * float(np.sum(u.flux * diff * diff))
