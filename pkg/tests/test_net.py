import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowcv.net import AdamState, MlpModel, MlpSpec, adam_step, adam_update, init, load_model, save_model

ARCHS = [(2, 30, 30, 30, 30, 1), (1, 30, 30, 30, 2), (2, 20, 20, 20, 1), (2, 5, 3)]


def reference_forward(layer_sizes, params, x):
    """Straightforward re-implementation with explicit loops over layers."""
    pos = 0
    h = np.asarray(x, dtype=float)
    n = len(layer_sizes) - 1
    for i in range(n):
        a, b = layer_sizes[i], layer_sizes[i + 1]
        W = np.array(params[pos:pos + a * b]).reshape(b, a)
        pos += a * b
        c = np.array(params[pos:pos + b])
        pos += b
        z = np.array([sum(W[r, q] * h[q] for q in range(a)) + c[r] for r in range(b)])
        h = np.tanh(z) if i < n - 1 else z
    return h


def test_param_count():
    assert MlpSpec((2, 30, 30, 30, 30, 1)).n_params == 2911
    assert MlpSpec((2, 1)).n_params == 3


def test_invalid_spec():
    with pytest.raises(ValueError):
        MlpSpec((2,))
    with pytest.raises(ValueError):
        MlpSpec((2, 0, 1))
    with pytest.raises(ValueError):
        MlpModel(MlpSpec((2, 1)), np.zeros(4))


def test_init_deterministic_and_zero_bias():
    spec = MlpSpec((2, 30, 30, 30, 30, 1))
    a, b = init(spec, 2046), init(spec, 2046)
    assert a.params.tobytes() == b.params.tobytes()
    for (W, bias), n_in in zip(a.layers(), spec.layer_sizes[:-1]):
        assert np.all(bias == 0)
        assert np.all(np.abs(W) <= 1 / np.sqrt(n_in))


@pytest.mark.parametrize("sizes", ARCHS)
def test_forward_matches_reference(sizes):
    m = init(MlpSpec(sizes), 3)
    m = m.with_params(m.params + 0.1 * np.random.default_rng(0).normal(size=m.spec.n_params))
    X = np.random.default_rng(1).normal(size=(10, sizes[0]))
    ref = np.array([reference_forward(sizes, m.params, x) for x in X])
    np.testing.assert_allclose(m.forward(X), ref, rtol=0, atol=1e-12)
    np.testing.assert_allclose(m.forward(X[0]), ref[0], atol=1e-12)


def test_linear_and_zero_models():
    m = MlpModel(MlpSpec((2, 1)), np.array([2.0, -3.0, 0.5]))
    assert m.forward([1.0, 1.0])[0] == pytest.approx(-0.5)
    np.testing.assert_array_equal(m.input_gradient([0.3, 0.2]), [[2.0, -3.0]])
    z = MlpModel(MlpSpec((2, 7, 1)), np.zeros(MlpSpec((2, 7, 1)).n_params))
    X = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_array_equal(z.forward(X), 0.0)
    np.testing.assert_array_equal(z.input_gradient(X), 0.0)


@pytest.mark.parametrize("sizes", ARCHS)
def test_input_gradient_fd(sizes):
    m = init(MlpSpec(sizes), 4)
    X = np.random.default_rng(2).normal(size=(6, sizes[0]))
    J = m.input_gradient(X)
    h = 1e-5
    for k in range(sizes[0]):
        e = np.zeros(sizes[0])
        e[k] = h
        fd = (m.forward(X + e) - m.forward(X - e)) / (2 * h)
        np.testing.assert_allclose(J[:, :, k], fd, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("sizes", ARCHS)
def test_forward_tangent_matches_input_gradient(sizes):
    m = init(MlpSpec(sizes), 5)
    X = np.random.default_rng(3).normal(size=(8, sizes[0]))
    out, cache = m.forward_cache(X, tangent=True)
    np.testing.assert_array_equal(out, m.forward(X))
    np.testing.assert_allclose(cache.jacobian, m.input_gradient(X), rtol=1e-12, atol=1e-14)


def test_backward_plain_fd():
    m = init(MlpSpec((2, 6, 4, 2)), 6)
    X = np.random.default_rng(4).normal(size=(9, 2))
    C = np.random.default_rng(5).normal(size=(9, 2))

    def obj(theta):
        return float(np.sum(m.with_params(theta).forward(X) * C))

    _, cache = m.forward_cache(X)
    g, _ = m.backward(cache, C)
    h = 1e-6
    for i in range(0, m.spec.n_params, 3):
        tp, tm = m.params.copy(), m.params.copy()
        tp[i] += h
        tm[i] -= h
        assert g[i] == pytest.approx((obj(tp) - obj(tm)) / (2 * h), rel=1e-6, abs=1e-9)


def test_backward_jacobian_cotangent_fd():
    # objective sum <C, J> exercises the jacobian cotangent path
    m = init(MlpSpec((2, 5, 4, 1)), 7)
    X = np.random.default_rng(6).normal(size=(7, 2))
    C = np.random.default_rng(7).normal(size=(7, 1, 2))

    def obj(theta):
        return float(np.sum(m.with_params(theta).input_gradient(X) * C))

    _, cache = m.forward_cache(X, tangent=True)
    g, _ = m.backward(cache, np.zeros((7, 1)), C)
    h = 1e-6
    for i in range(m.spec.n_params):
        tp, tm = m.params.copy(), m.params.copy()
        tp[i] += h
        tm[i] -= h
        assert g[i] == pytest.approx((obj(tp) - obj(tm)) / (2 * h), rel=1e-5, abs=1e-8)


def test_backward_requires_tangents():
    m = init(MlpSpec((2, 3, 1)), 0)
    _, cache = m.forward_cache(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        m.backward(cache, np.zeros((2, 1)), np.zeros((2, 1, 2)))


def test_checkpoint_roundtrip(tmp_path):
    m = init(MlpSpec((2, 20, 20, 20, 1)), 2046)
    m = m.with_params(m.params * np.pi)
    save_model(m, tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["layer_sizes"] == [2, 20, 20, 20, 1] and d["activation"] == "tanh"
    back = load_model(tmp_path / "m.json")
    assert back.params.tobytes() == m.params.tobytes()
    X = np.random.default_rng(0).normal(size=(50, 2))
    assert back.forward(X).tobytes() == m.forward(X).tobytes()


def test_adam_zero_gradient_keeps_params():
    m = init(MlpSpec((2, 3, 1)), 0)
    s = AdamState.fresh(m.spec.n_params)
    m2, s2 = adam_step(m, np.zeros(m.spec.n_params), s)
    np.testing.assert_array_equal(m2.params, m.params)
    assert s2.t == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=8))
def test_adam_first_step_is_signed_lr(g):
    g = np.array(g)
    theta = np.zeros(len(g))
    new, s = adam_update(theta, g, AdamState.fresh(len(g), lr=0.01))
    np.testing.assert_allclose(new, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_quadratic():
    theta = np.array([1.0, 1.0])
    s = AdamState.fresh(2, lr=0.05)
    for _ in range(100):
        theta, s = adam_update(theta, 2 * theta, s)
    assert np.linalg.norm(theta) < 0.1


def test_adam_length_mismatch():
    with pytest.raises(ValueError):
        adam_update(np.zeros(3), np.zeros(2), AdamState.fresh(3))
