"""Reference spectra of the three built-in landscapes.

Prints the leading generator eigenvalues from the finite-volume oracle, the
Ulam estimate of the leading transfer eigenvalue from a short trajectory and
the effective 1D eigenvalue for two candidate collective variables.

    python demos/spectrum_tour.py
"""
import warnings

import numpy as np

from slowcv.oracle import BinSpec, GridInterpolant, effective_1d, generator_spectrum, sample_invariant, ulam_transfer
from slowcv.oracle.identities import coordinate
from slowcv.potentials import Thermo, default_domain, example1, example2, quadratic_ou
from slowcv.sampler import lag_for, lagged_pairs, simulate, subsample

CASES = [
    ("OU", quadratic_ou(), Thermo(1.0), (201, 201)),
    ("double well", example1(0.5), Thermo(4.0), (161, 161)),
    ("three wells", example2(), Thermo(1.5), (141, 101)),
]

for name, p, th, n in CASES:
    g, _, res = generator_spectrum(p, th, n, 3)
    print(f"{name:12s} lambda = {np.array2string(res.values, precision=5)}")

print()
p, th = example1(0.5), Thermo(4.0)
g, _, res = generator_spectrum(p, th, (161, 161), 3)
lam = res.values[1]

d = subsample(simulate(p, th, (1.0, 0.0), 0.005, 100_000, seed=2046), 2, include_initial=False)
pairs = lagged_pairs(d, lag_for(d, 1.0))
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    u = ulam_transfer(pairs, BinSpec(default_domain(p), 30, 30))
print(f"Ulam 30x30, tau=1: nu1 = {u.eigs(2).values[1]:.4f}   exp(-lambda1) = {np.exp(-lam):.4f}")

X = sample_invariant(g, 400_000, seed=3)
for label, xi in [("phi1", GridInterpolant(g, res.vectors[:, 1])), ("x1", coordinate(0)), ("x2", coordinate(1))]:
    out = effective_1d(X, xi, p, th, n_bins=200)
    print(f"effective dynamics along {label:4s}: lambda1 = {out.lambda1:.5f}   (full: {lam:.5f})")
