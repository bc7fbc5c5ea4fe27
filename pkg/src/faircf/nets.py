"""Small dense networks with hand-derived backprop, plus Adam and polyak helpers.

The network zoo here is deliberately tiny (dense + tanh + linear output), so
gradients are written out per layer instead of going through a general tape.
"""

from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected net: tanh on hidden layers, linear output.

    forward(X, cache=True) stores the per-layer activations that backward()
    needs to produce exact parameter gradients and the gradient w.r.t. the
    input batch.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._acts: list[np.ndarray] | None = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, X: np.ndarray, cache: bool = False) -> np.ndarray:
        A = np.atleast_2d(np.asarray(X, dtype=float))
        if A.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got {A.shape[1]}")
        acts = [A]
        last = self.n_layers - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            Z = A @ W + b
            A = Z if i == last else np.tanh(Z)
            acts.append(A)
        if cache:
            self._acts = acts
        return A

    def backward(self, d_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Backprop an upstream gradient through the cached forward pass.

        Returns (parameter gradients in parameters() order, gradient w.r.t. input).
        """
        if self._acts is None:
            raise RuntimeError("backward() requires a cached forward pass")
        acts = self._acts
        d = np.asarray(d_out, dtype=float)
        grads: list[np.ndarray] = [np.empty(0)] * (2 * self.n_layers)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                d = d * (1.0 - acts[i + 1] ** 2)  # tanh'
            grads[2 * i] = acts[i].T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            d = d @ self.weights[i].T
        return grads, d

    def parameters(self) -> list[np.ndarray]:
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, vec: np.ndarray) -> None:
        offset = 0
        for p in self.parameters():
            p[...] = vec[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != vec.size:
            raise ValueError("flat vector size does not match parameter count")

    def clone(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.sizes = list(self.sizes)
        twin.weights = [W.copy() for W in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        twin._acts = None
        return twin


class Adam:
    """Standard Adam over a fixed list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def polyak_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, parameter-wise."""
    for pt, po in zip(target.parameters(), online.parameters()):
        pt[...] = tau * po + (1.0 - tau) * pt
