"""Small dense-network machinery with explicit gradients.

One hand-written feed-forward implementation backs both the Q-network of
the search agent and the multi-layer-perceptron performance predictor, so
a single backprop path is finite-difference checked and reused.  Layers
are fully connected with ReLU hidden activations and a linear output.
"""

from __future__ import annotations

import numpy as np


class MLP:
    """Fully-connected ReLU network over plain numpy arrays.

    ``params`` alternates weight matrices and bias vectors layer by layer.
    ``forward`` accepts a (n, d_in) batch and returns (n, d_out).
    """

    def __init__(self, sizes: tuple[int, ...], seed: int, dtype=np.float64):
        self.sizes = tuple(int(s) for s in sizes)
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: list[np.ndarray] = []
        for d_in, d_out in zip(self.sizes, self.sizes[1:]):
            bound = 1.0 / np.sqrt(d_in)
            self.params.append(
                rng.uniform(-bound, bound, size=(d_in, d_out)).astype(self.dtype)
            )
            self.params.append(np.zeros(d_out, dtype=self.dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.forward_with_cache(x)[0]

    def forward_with_cache(self, x: np.ndarray):
        """Return (output, cache); the cache feeds ``backward``."""
        h = np.asarray(x, dtype=self.dtype)
        pre_acts = []
        inputs = [h]
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            w, b = self.params[2 * k], self.params[2 * k + 1]
            z = h @ w + b
            pre_acts.append(z)
            h = np.maximum(z, 0.0) if k < n_layers - 1 else z
            inputs.append(h)
        return h, (inputs, pre_acts)

    def backward(self, cache, grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss w.r.t. every parameter.

        ``grad_out`` is dLoss/dOutput with the output's shape; the return
        list aligns with ``self.params``.
        """
        inputs, pre_acts = cache
        n_layers = len(self.params) // 2
        grads: list[np.ndarray | None] = [None] * len(self.params)
        delta = np.asarray(grad_out, dtype=self.dtype)
        for k in range(n_layers - 1, -1, -1):
            if k < n_layers - 1:
                delta = delta * (pre_acts[k] > 0)
            grads[2 * k] = inputs[k].T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = delta @ self.params[2 * k].T
        return grads  # type: ignore[return-value]

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = self.sizes
        clone.dtype = self.dtype
        clone.params = [p.copy() for p in self.params]
        return clone

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.params:
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError("flat vector length does not match parameter count")


class Adam:
    """Adaptive moment estimation over a list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * np.square(g)
            p -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def mse_loss_and_grads(net: MLP, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean squared error (plus optional L2 weight penalty) and its gradients."""
    out, cache = net.forward_with_cache(x)
    target = np.asarray(y, dtype=net.dtype).reshape(out.shape)
    n = out.shape[0]
    err = out - target
    loss = float(np.mean(err**2))
    grads = net.backward(cache, 2.0 * err / err.size)
    if l2 > 0.0:
        for k in range(0, len(net.params), 2):  # weights only, not biases
            loss += l2 * float(np.sum(net.params[k] ** 2)) / (2 * n)
            grads[k] += l2 * net.params[k] / n
    return loss, grads
