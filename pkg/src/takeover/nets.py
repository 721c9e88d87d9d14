"""Small dense-network gradient engine shared by the policy and the safety net.

Plain numpy, ReLU hidden layers, linear head. Consumers apply their own
output squashing (tanh scaling for actions, sigmoid for probabilities)
and push d(loss)/d(head) back through ``backward``.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def relu(x: Array) -> Array:
    return np.maximum(x, 0.0)


class Mlp:
    """Fully connected net. ``layer_sizes`` runs input..output, length >= 2.

    Weights start uniform on +-1/sqrt(fan_in), biases at zero. Init is
    deterministic for a given seed.
    """

    def __init__(self, layer_sizes: list[int], seed: int | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output size")
        if any(int(n) <= 0 for n in layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {layer_sizes}")
        self.layer_sizes = [int(n) for n in layer_sizes]
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights: list[Array] = []
        self.biases: list[Array] = []
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            self.weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.biases.append(np.zeros(n_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: Array) -> Array:
        """Map a batch (B, in) or a single vector (in,) to the linear head."""
        squeeze = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"input has {h.shape[1]} features, net expects {self.layer_sizes[0]}"
            )
        for i in range(self.n_layers):
            h = h @ self.weights[i] + self.biases[i]
            if i < self.n_layers - 1:
                h = relu(h)
        return h[0] if squeeze else h

    def forward_cached(self, x: Array) -> tuple[Array, list[Array]]:
        """Batch forward that keeps per-layer inputs for ``backward``."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [h]
        for i in range(self.n_layers):
            z = h @ self.weights[i] + self.biases[i]
            h = relu(z) if i < self.n_layers - 1 else z
            cache.append(h)
        return h, cache

    def backward(self, cache: list[Array], d_out: Array) -> list[tuple[Array, Array]]:
        """Gradients of a scalar loss given d(loss)/d(head output).

        Returns [(dW, db), ...] aligned with ``weights``/``biases``.
        """
        grads: list[tuple[Array, Array]] = [None] * self.n_layers  # type: ignore[list-item]
        delta = np.atleast_2d(d_out)
        for i in reversed(range(self.n_layers)):
            h_in = cache[i]
            grads[i] = (h_in.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = delta @ self.weights[i].T
                # ReLU was applied to cache[i] on the way up, so its output
                # doubles as the activation mask.
                delta = delta * (cache[i] > 0)
        return grads

    # -- flat parameter views, used by checkpoints and gradient checks --

    def get_flat(self) -> Array:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat(self, flat: Array) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        k = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = flat[k : k + w.size].reshape(w.shape).copy()
            k += w.size
            self.biases[i] = flat[k : k + b.size].reshape(b.shape).copy()
            k += b.size

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


class Sgd:
    """Plain gradient descent."""

    def __init__(self, learning_rate: float):
        self.learning_rate = float(learning_rate)

    def step(self, net: Mlp, grads: list[tuple[Array, Array]]) -> None:
        for i, (dw, db) in enumerate(grads):
            net.weights[i] -= self.learning_rate * dw
            net.biases[i] -= self.learning_rate * db


class Adam:
    """Adaptive-moment descent with bias correction."""

    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = float(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list[tuple[Array, Array]] | None = None
        self._v: list[tuple[Array, Array]] | None = None

    def step(self, net: Mlp, grads: list[tuple[Array, Array]]) -> None:
        if self._m is None:
            self._m = [(np.zeros_like(dw), np.zeros_like(db)) for dw, db in grads]
            self._v = [(np.zeros_like(dw), np.zeros_like(db)) for dw, db in grads]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for i, (dw, db) in enumerate(grads):
            mw, mb = self._m[i]
            vw, vb = self._v[i]
            mw = b1 * mw + (1 - b1) * dw
            mb = b1 * mb + (1 - b1) * db
            vw = b2 * vw + (1 - b2) * dw**2
            vb = b2 * vb + (1 - b2) * db**2
            self._m[i] = (mw, mb)
            self._v[i] = (vw, vb)
            net.weights[i] -= self.learning_rate * (mw / c1) / (np.sqrt(vw / c2) + self.eps)
            net.biases[i] -= self.learning_rate * (mb / c1) / (np.sqrt(vb / c2) + self.eps)


def make_optimizer(name: str, learning_rate: float) -> Sgd | Adam:
    if name == "sgd":
        return Sgd(learning_rate)
    if name == "adam":
        return Adam(learning_rate)
    raise ValueError(f"unknown optimizer {name!r}, expected 'sgd' or 'adam'")
