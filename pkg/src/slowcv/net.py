"""Small tanh multilayer perceptrons with hand-written derivatives.

Parameters live in one flat float64 vector, layer by layer: the weight
matrix of shape ``(n_out, n_in)`` in row-major order, then the bias vector.
Hidden layers use ``tanh``; the output layer is affine.

Besides the usual reverse pass, the forward pass can carry the input
Jacobian along (forward-mode tangents, one per input coordinate). The
backward pass then accepts a cotangent for that Jacobian as well, which
gives exact parameter gradients of objectives containing ``|grad_x f|^2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


@dataclass
class _Cache:
    x: np.ndarray
    hidden: list  # tanh outputs per hidden layer
    slopes: list  # 1 - tanh^2 per hidden layer
    tangents: list | None  # per hidden layer, (N, n_l, d) pre-activation tangents
    jacobian: np.ndarray | None


@dataclass(frozen=True, eq=False)
class MlpModel:
    spec: MlpSpec
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.ascontiguousarray(self.params, dtype=np.float64)
        if p.shape != (self.spec.n_params,):
            raise ValueError(f"expected {self.spec.n_params} parameters, got shape {p.shape}")
        object.__setattr__(self, "params", p)

    def layers(self):
        """List of ``(W, b)`` views into the flat parameter vector."""
        out, pos = [], 0
        s = self.spec.layer_sizes
        for i in range(len(s) - 1):
            n_in, n_out = s[i], s[i + 1]
            W = self.params[pos:pos + n_in * n_out].reshape(n_out, n_in)
            pos += n_in * n_out
            b = self.params[pos:pos + n_out]
            pos += n_out
            out.append((W, b))
        return out

    def with_params(self, params) -> "MlpModel":
        return MlpModel(self.spec, params)

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        """Network output; ``(N, n_in) -> (N, n_out)`` or ``(n_in,) -> (n_out,)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out, _ = self.forward_cache(np.atleast_2d(x))
        return out[0] if single else out

    def input_gradient(self, x):
        """Jacobian of the output w.r.t. the input, ``(N, n_out, n_in)``.

        Computed by a reverse pass seeded with every output unit vector.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        self._check_input(X)
        layers = self.layers()
        h = X
        hidden = []
        for W, b in layers[:-1]:
            h = np.tanh(h @ W.T + b)
            hidden.append(h)
        W_last = layers[-1][0]
        G = np.broadcast_to(W_last, (len(X),) + W_last.shape)
        for (W, _), h in zip(reversed(layers[:-1]), reversed(hidden)):
            G = (G * (1.0 - h * h)[:, None, :]) @ W
        G = np.array(G)
        return G[0] if single else G

    def _check_input(self, X):
        if X.ndim != 2 or X.shape[1] != self.spec.n_in:
            raise ValueError(f"expected inputs of width {self.spec.n_in}, got shape {X.shape}")

    def forward_cache(self, X, tangent: bool = False):
        """Forward pass keeping what the backward pass needs.

        With ``tangent=True`` the input Jacobian ``(N, n_out, n_in)`` is
        propagated alongside and stored on the cache.
        """
        self._check_input(X)
        layers = self.layers()
        h = X
        hidden, slopes, tangents = [], [], ([] if tangent else None)
        T = None
        for i, (W, b) in enumerate(layers[:-1]):
            a = h @ W.T
            a += b
            h = np.tanh(a, out=a)
            s = h * h
            np.subtract(1.0, s, out=s)
            if tangent:
                # dA[n, i, k] = sum_j W[i, j] T[n, j, k]; T_0 is the identity
                dA = np.broadcast_to(W, (len(X),) + W.shape) if i == 0 else np.matmul(W, T)
                tangents.append(dA)
                T = dA * s[:, :, None]
            hidden.append(h)
            slopes.append(s)
        W, b = layers[-1]
        out = h @ W.T + b
        jac = None
        if tangent:
            jac = np.matmul(W, T) if hidden else np.broadcast_to(W, (len(X),) + W.shape)
        return out, _Cache(X, hidden, slopes, tangents, jac)

    def backward(self, cache: _Cache, g_out, g_jac=None):
        """Reverse pass.

        Parameters
        ----------
        cache : from :meth:`forward_cache`
        g_out : (N, n_out) cotangent of the outputs
        g_jac : (N, n_out, n_in) cotangent of the input Jacobian, optional;
            requires the cache to have been built with ``tangent=True``.

        Returns
        -------
        g_params : (n_params,) ndarray
        g_input : (N, n_in) ndarray, cotangent of the inputs (``g_jac``
            contributions excluded: the Jacobian of a tanh net depends on the
            input, but no loss here needs that second-order term).
        """
        layers = self.layers()
        n_layers = len(layers)
        grads = [None] * n_layers
        use_jac = g_jac is not None
        if use_jac and cache.tangents is None:
            raise ValueError("g_jac requires a cache built with tangent=True")
        X, hidden, slopes = cache.x, cache.hidden, cache.slopes

        W, _ = layers[-1]
        h_prev = hidden[-1] if hidden else X
        gW = g_out.T @ h_prev
        gb = g_out.sum(axis=0)
        gh = g_out @ W
        if use_jac:
            if hidden:
                T_prev = cache.tangents[-1] * slopes[-1][:, :, None]
                gW = gW + np.einsum("nok,njk->oj", g_jac, T_prev)
                gT = np.matmul(np.swapaxes(W, 0, 1)[None], g_jac)  # (N, n_prev, d)
            else:
                gW = gW + g_jac.sum(axis=0)
        grads[-1] = (gW, gb)

        for li in range(n_layers - 2, -1, -1):
            W, _ = layers[li]
            h = hidden[li]
            s = slopes[li]
            h_prev = hidden[li - 1] if li > 0 else X
            if use_jac:
                dA = cache.tangents[li]
                g_dA = gT * s[:, :, None]
                g_s = np.einsum("nik,nik->ni", gT, dA)
                gh = gh + g_s * (-2.0 * h)
            g_a = gh * s
            gW = g_a.T @ h_prev
            gb = g_a.sum(axis=0)
            gh = g_a @ W
            if use_jac:
                if li > 0:
                    T_prev = cache.tangents[li - 1] * slopes[li - 1][:, :, None]
                    gW = gW + np.einsum("nik,njk->ij", g_dA, T_prev)
                    gT = np.matmul(np.swapaxes(W, 0, 1)[None], g_dA)
                else:
                    gW = gW + g_dA.sum(axis=0)
            grads[li] = (gW, gb)

        flat = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])
        return flat, gh

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.spec.layer_sizes),
            "activation": "tanh",
            "params": [float(v) for v in self.params],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("activation", "tanh") != "tanh":
            raise ValueError(f"unsupported activation {d['activation']!r}")
        return cls(MlpSpec(tuple(d["layer_sizes"])), np.array(d["params"], dtype=np.float64))


def init(spec: MlpSpec, seed) -> MlpModel:
    """Fresh model: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.

    ``seed`` may be an integer or a ``numpy.random.Generator``; weights are
    drawn layer by layer in the flat-vector order.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    s = spec.layer_sizes
    for i in range(len(s) - 1):
        bound = 1.0 / np.sqrt(s[i])
        chunks.append(rng.uniform(-bound, bound, size=s[i] * s[i + 1]))
        chunks.append(np.zeros(s[i + 1]))
    return MlpModel(spec, np.concatenate(chunks))


def save_model(m: MlpModel, path) -> None:
    Path(path).write_text(json.dumps(m.to_dict()))


def load_model(path) -> MlpModel:
    return MlpModel.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.005
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, lr: float = 0.005, b1: float = 0.9, b2: float = 0.999,
              eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, b1, b2, eps)


def adam_update(params, g, s: AdamState):
    """Bias-corrected Adam step on a raw parameter vector."""
    if len(g) != len(params) or len(s.m) != len(params):
        raise ValueError("parameter, gradient and state lengths differ")
    t = s.t + 1
    m = s.b1 * s.m + (1.0 - s.b1) * g
    v = s.b2 * s.v + (1.0 - s.b2) * g * g
    m_hat = m / (1.0 - s.b1**t)
    v_hat = v / (1.0 - s.b2**t)
    new = params - s.lr * m_hat / (np.sqrt(v_hat) + s.eps)
    return new, AdamState(m, v, t, s.lr, s.b1, s.b2, s.eps)


def adam_step(model: MlpModel, g, s: AdamState):
    """Return the updated ``(model, state)``."""
    params, s = adam_update(model.params, g, s)
    return model.with_params(params), s
