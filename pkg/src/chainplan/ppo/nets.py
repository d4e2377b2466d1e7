"""Tiny dense networks with hand-written backprop, plus Adam.

Everything is plain numpy so gradients can be checked against finite
differences; no autograd framework is involved. Parameters of one network
are a flat list of arrays [W0, b0, W1, b1, ...], and the optimizer treats
any list of arrays the same way.
"""

from __future__ import annotations

import numpy as np


def orthogonal(shape, gain: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal weight init (SVD of a Gaussian draw), scaled by gain."""
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    w = u if u.shape == shape else vt
    return gain * w


_ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),          # derivative from output
    "relu": (lambda x: np.maximum(x, 0.0), lambda y: (y > 0).astype(np.float64)),
}


class Mlp:
    """Fully connected net: linear layers with an activation on hidden ones."""

    def __init__(self, sizes, activation: str = "tanh",
                 rng: np.random.Generator | None = None, out_gain: float = 0.01):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        rng = rng or np.random.default_rng()
        self.weights = []
        self.biases = []
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            gain = out_gain if i == n_layers - 1 else np.sqrt(2.0)
            self.weights.append(orthogonal((self.sizes[i], self.sizes[i + 1]), gain, rng))
            self.biases.append(np.zeros(self.sizes[i + 1]))

    @property
    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_params(self, arrays):
        arrays = list(arrays)
        for i in range(len(self.weights)):
            self.weights[i] = arrays[2 * i]
            self.biases[i] = arrays[2 * i + 1]

    def forward(self, x: np.ndarray):
        """Returns (output, cache) for a (batch, in_dim) input."""
        act, _ = _ACTIVATIONS[self.activation]
        hs = [np.asarray(x, dtype=np.float64)]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = hs[-1] @ w + b
            hs.append(act(z) if i < n_layers - 1 else z)
        return hs[-1], hs

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dout: np.ndarray):
        """Gradients for a forward cache; returns (dx, grad list)."""
        _, dact = _ACTIVATIONS[self.activation]
        grads = [None] * (2 * len(self.weights))
        delta = np.asarray(dout, dtype=np.float64)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in, h_out = cache[i], cache[i + 1]
            if i < len(self.weights) - 1:
                delta = delta * dact(h_out)
            grads[2 * i] = h_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        return delta, grads


def global_norm(grads) -> float:
    """L2 norm over a whole list of gradient arrays."""
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grads(grads, max_norm: float):
    """Scale all gradients so their joint norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm > 0:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


class Adam:
    """Adam with bias correction over a list of parameter arrays."""

    def __init__(self, shapes, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params, grads) -> list:
        """One update; returns the new parameter arrays."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / bias1
            v_hat = self.v[i] / bias2
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out
