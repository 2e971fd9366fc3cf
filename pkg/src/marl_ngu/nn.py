"""Small dense networks with hand-written backprop, Adam and the two losses
the learners need. Everything runs in float64."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, TrainingDivergenceError, UsageError


class MLP:
    """Fully connected network: ReLU on hidden layers, identity on the output.

    ``weights[l]`` has shape ``(layer_sizes[l + 1], layer_sizes[l])``.
    ``forward`` accepts a single vector or a ``(batch, in)`` matrix.
    """

    def __init__(self, layer_sizes, rng: np.random.Generator | None = None, init: str = "uniform"):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ConfigurationError(f"layer sizes must be >= 2 positive integers, got {layer_sizes}")
        self.layer_sizes = sizes
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if init == "zeros":
                w = np.zeros((fan_out, fan_in))
                b = np.zeros(fan_out)
            elif init == "uniform":
                if rng is None:
                    raise ConfigurationError("uniform init needs an rng")
                bound = 1.0 / np.sqrt(fan_in)
                w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
                b = rng.uniform(-bound, bound, size=fan_out)
            else:
                raise ConfigurationError(f"unknown init {init!r}")
            self.weights.append(w)
            self.biases.append(b)
        self.grad_weights = [np.zeros_like(w) for w in self.weights]
        self.grad_biases = [np.zeros_like(b) for b in self.biases]
        self._cache: list[np.ndarray] | None = None
        self._vector_input = False

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Parameters interleaved as ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def gradients(self) -> list[np.ndarray]:
        out = []
        for gw, gb in zip(self.grad_weights, self.grad_biases):
            out.extend((gw, gb))
        return out

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        vector = x.ndim == 1
        h = x[None, :] if vector else x
        if h.ndim != 2 or h.shape[1] != self.layer_sizes[0]:
            raise ConfigurationError(
                f"input has shape {x.shape}, network expects width {self.layer_sizes[0]}"
            )
        cache = [h]
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0)
            cache.append(h)
        self._cache = cache
        self._vector_input = vector
        return h[0] if vector else h

    def predict(self, x) -> np.ndarray:
        """Forward pass that leaves the backward cache untouched."""
        saved = self._cache, self._vector_input
        try:
            return self.forward(x)
        finally:
            self._cache, self._vector_input = saved

    def backward(self, output_gradient) -> np.ndarray:
        """Fill the gradient buffers for the last ``forward`` input.

        Gradients are summed over the batch; scale ``output_gradient`` for a
        mean loss. Returns the gradient with respect to the input. The cache
        is consumed, so a second call needs a fresh ``forward``.
        """
        if self._cache is None:
            raise UsageError("backward() called without a preceding forward()")
        cache = self._cache
        g = np.asarray(output_gradient, dtype=np.float64)
        if self._vector_input:
            g = g[None, :]
        if g.shape != cache[-1].shape:
            raise ConfigurationError(f"output gradient shape {g.shape} != output shape {cache[-1].shape}")
        for i in range(self.n_layers - 1, -1, -1):
            if i < self.n_layers - 1:
                g = g * (cache[i + 1] > 0.0)
            inp = cache[i]
            self.grad_weights[i][...] = g.T @ inp
            self.grad_biases[i][...] = g.sum(axis=0)
            g = g @ self.weights[i]
        self._cache = None
        return g[0] if self._vector_input else g

    def copy(self) -> "MLP":
        return copy.deepcopy(self)

    def load_from(self, other: "MLP") -> None:
        """Overwrite parameters with a copy of ``other``'s."""
        if other.layer_sizes != self.layer_sizes:
            raise ConfigurationError("layer sizes differ")
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src


def forward(net: MLP, x) -> np.ndarray:
    return net.forward(x)


def backward(net: MLP, output_gradient) -> np.ndarray:
    return net.backward(output_gradient)


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kwargs) -> "AdamState":
        state = cls(**kwargs)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(params, grads, state: AdamState, layer_of=None):
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``layer_of(i)`` maps a parameter index to the layer index reported on
    divergence; by default parameters are assumed interleaved ``W, b``.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ConfigurationError("params, grads and optimizer state must align")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ConfigurationError(f"gradient {i} has shape {g.shape}, parameter has {params[i].shape}")
        if not np.all(np.isfinite(g)):
            layer = layer_of(i) if layer_of is not None else i // 2
            raise TrainingDivergenceError(f"non-finite gradient in layer {layer}", layer=layer)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_gradients(grads, max_norm: float):
    """Scale all gradients in place so their joint L2 norm is at most ``max_norm``."""
    if max_norm <= 0:
        raise ConfigurationError("max_norm must be positive")
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return grads


def huber_q_loss(predicted_q, target_q, delta: float = 1.0):
    """Mean Huber loss and its gradient with respect to ``predicted_q``."""
    pred = np.asarray(predicted_q, dtype=np.float64)
    target = np.asarray(target_q, dtype=np.float64)
    if pred.shape != target.shape:
        raise ConfigurationError(f"shape mismatch {pred.shape} vs {target.shape}")
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= delta
    losses = np.where(quad, 0.5 * err * err, delta * (abs_err - 0.5 * delta))
    grad = np.where(quad, err, delta * np.sign(err)) / err.size
    return float(losses.mean()), grad


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_from_logits(logits, true_class):
    """Softmax cross-entropy and its gradient with respect to the logits.

    A ``(batch, classes)`` matrix with an integer array of labels gives the
    batch mean and a gradient already divided by the batch size.
    """
    z = np.asarray(logits, dtype=np.float64)
    labels = np.atleast_1d(np.asarray(true_class))
    rows = z[None, :] if z.ndim == 1 else z
    n_classes = rows.shape[1]
    if labels.shape[0] != rows.shape[0]:
        raise UsageError("one label per row of logits is required")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise UsageError(f"class index out of range [0, {n_classes})")
    shifted = rows - rows.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    idx = np.arange(rows.shape[0])
    losses = log_norm - shifted[idx, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[idx, labels] -= 1.0
    grad /= rows.shape[0]
    if z.ndim == 1:
        return float(losses[0]), grad[0]
    return float(losses.mean()), grad
