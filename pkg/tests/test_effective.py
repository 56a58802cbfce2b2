import warnings

import numpy as np
import pytest

from slowcv.errors import EmptyBin, TooFewBins
from slowcv.net import MlpModel, MlpSpec
from slowcv.oracle import (
    GridInterpolant,
    conditional_moments,
    effective_1d,
    generator_spectrum,
    make_grid,
    sample_invariant,
)
from slowcv.oracle.identities import coordinate
from slowcv.potentials import Thermo, quadratic_ou
from slowcv.sampler import Dataset, PairDataset


@pytest.fixture(scope="module")
def ex1_samples(ex1_spectrum):
    g, _, _ = ex1_spectrum
    return sample_invariant(g, 400_000, seed=3)


def test_eigenfunction_cv_reproduces_eigenvalue(ex1, ex1_spectrum, ex1_samples):
    g, _, res = ex1_spectrum
    xi = GridInterpolant(g, res.vectors[:, 1])
    out = effective_1d(ex1_samples, xi, ex1, Thermo(4.0), n_bins=200, reference=(g, res.vectors[:, 1]))
    assert out.lambda1 == pytest.approx(res.values[1], rel=0.10)
    assert out.bound_gap is not None and out.bound_gap >= 0
    assert out.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)


def test_poor_cv_bounds_eigenvalue_from_above(ex1, ex1_spectrum, ex1_samples):
    g, _, res = ex1_spectrum
    out = effective_1d(ex1_samples, coordinate(1), ex1, Thermo(4.0), n_bins=200)
    assert out.lambda1 >= 0.95 * res.values[1]
    assert out.drift is not None


def test_ou_exact_cv():
    g = make_grid(quadratic_ou(), Thermo(1.0), (161, 161))
    X = sample_invariant(g, 200_000, seed=4)
    out = effective_1d(X, coordinate(0), quadratic_ou(), Thermo(1.0), n_bins=200)
    assert 0.95 <= out.lambda1 <= 1.05
    # the drift diagnostic of x1 is E[L x1 | x1 = z] = -z
    np.testing.assert_allclose(out.drift, -out.centers, atol=1e-12)


def test_bin_errors():
    X = np.random.default_rng(0).normal(size=(50, 2))
    with pytest.raises(TooFewBins):
        effective_1d(X, coordinate(0), quadratic_ou(), Thermo(1.0), n_bins=2)
    with pytest.raises(EmptyBin):
        effective_1d(X, coordinate(0), quadratic_ou(), Thermo(1.0), n_bins=60)


def _coord_net():
    return MlpModel(MlpSpec((2, 1)), np.array([1.0, 0.0, 0.0]))


def test_conditional_moments_zero_lag():
    X = np.random.default_rng(1).normal(size=(500, 2))
    cm = conditional_moments(PairDataset(X, X, 0, 0.0), _coord_net(), n_bins=10)
    edges = np.linspace(X[:, 0].min(), X[:, 0].max(), 11)
    which = np.clip(np.searchsorted(edges, X[:, 0], side="right") - 1, 0, 9)
    for zc, my in zip(cm.z_center, cm.mean_y):
        b = np.argmin([abs(X[which == k, 0].mean() - zc) if np.any(which == k) else np.inf for k in range(10)])
        np.testing.assert_allclose(my, X[which == b].mean(axis=0), rtol=1e-12)
    assert cm.count.sum() == 500


def test_conditional_moments_single_bin():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(100, 2)), rng.normal(size=(100, 2))
    cm = conditional_moments((X, Y), _coord_net(), n_bins=1)
    np.testing.assert_allclose(cm.mean_y[0], Y.mean(axis=0), rtol=1e-12)
    assert cm.var_y[0] == pytest.approx(np.sum(Y.var(axis=0)), rel=1e-12)


def test_conditional_moments_skips_empty_bins():
    X = np.array([[0.0, 0], [0.1, 0], [5.0, 0]])
    with pytest.warns(UserWarning):
        cm = conditional_moments((X, X), _coord_net(), n_bins=10)
    assert len(cm.skipped) > 0 and cm.count.sum() == 3
