"""Minimum energy paths between the wells of both double-well style landscapes.

    python demos/minimum_energy_paths.py
"""
import numpy as np
from scipy.optimize import minimize

from slowcv.mep import string_method
from slowcv.potentials import eval_gradient, eval_potential, example1, example2

p = example1(0.5)
path = string_method(p, (-1.0, 0.0), (1.0, 0.0))
V = eval_potential(p, path.nodes)
top = path.nodes[np.argmax(V)]
dev = np.abs(path.nodes[:, 0] ** 2 + path.nodes[:, 1] - 1.0)
print(f"double well: {path.iterations} iterations, saddle near {np.round(top, 3)}, barrier {V.max() - V.min():.4f}")
print(f"  largest offset from the parabola x2 = 1 - x1^2: {dev.max():.4f}")

q = example2()
ends = [minimize(lambda x: eval_potential(q, x), x0, jac=lambda x: eval_gradient(q, x)).x for x0 in ((-2, 0), (2, 0))]
path = string_method(q, ends[0], ends[1])
V = eval_potential(q, path.nodes)
print(f"three wells: minima {np.round(ends[0], 3)} and {np.round(ends[1], 3)}")
print(f"  path stays on x2 = 0: max|x2| = {np.abs(path.nodes[:, 1]).max():.2e}; highest node V = {V.max():.4f}")
