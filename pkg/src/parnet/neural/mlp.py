"""Dense feed-forward networks with manual backpropagation and Adam."""

from dataclasses import dataclass, field

import numpy as np

from parnet.exceptions import InvalidArgumentError


def softplus(x):
    """ln(1 + e^x), returning x itself above 30 to avoid overflow."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.minimum(x, 30.0)
    return np.where(x > 30.0, x, np.log1p(np.exp(safe)))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def identity(x):
    return np.asarray(x, dtype=np.float64)


ACTIVATIONS = {
    "softplus": (softplus, lambda z, a: sigmoid(z)),
    "relu": (relu, lambda z, a: (z > 0).astype(np.float64)),
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "identity": (identity, lambda z, a: np.ones_like(z)),
}


class Mlp:
    """Fully connected network.

    ``activations`` has one entry per weight layer (hidden layers and the
    output layer).  Dropout with rate ``dropout`` is applied to hidden
    activations in training mode only, using inverted scaling so inference
    needs no correction.
    """

    def __init__(self, layer_sizes, activations, dropout=0.0, weights=None,
                 biases=None, rng=None):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise InvalidArgumentError("need at least input and output sizes >= 1")
        if isinstance(activations, str):
            activations = [activations] * (len(self.layer_sizes) - 1)
        self.activations = list(activations)
        if len(self.activations) != len(self.layer_sizes) - 1:
            raise InvalidArgumentError("one activation per weight layer required")
        for name in self.activations:
            if name not in ACTIVATIONS:
                raise InvalidArgumentError(f"unknown activation {name!r}")
        if not 0.0 <= dropout < 1.0:
            raise InvalidArgumentError("dropout must lie in [0, 1)")
        self.dropout = float(dropout)
        if weights is None:
            rng = np.random.default_rng(rng)
            weights, biases = [], []
            for fan_in, fan_out, act in zip(self.layer_sizes[:-1],
                                            self.layer_sizes[1:], self.activations):
                gain = 2.0 if act == "relu" else 1.0
                weights.append(rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, fan_out)))
                biases.append(np.zeros(fan_out))
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected or b.shape != expected[1:]:
                raise InvalidArgumentError(
                    f"layer {i}: weight {w.shape} / bias {b.shape}, expected {expected}")

    @property
    def params(self):
        """Flat list [W0, b0, W1, b1, ...]; arrays are shared, not copied."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def forward(self, X, training=False, rng=None):
        """Return (output, tape) for a batch ``X`` of shape (B, n_in) or (n_in,)."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.layer_sizes[0]:
            raise InvalidArgumentError(
                f"input has {X.shape[1]} features, network expects {self.layer_sizes[0]}")
        use_dropout = training and self.dropout > 0
        if use_dropout and rng is None:
            raise InvalidArgumentError("training with dropout needs an rng")
        inputs, pre, post, masks = [], [], [], []
        a = X
        last = len(self.weights) - 1
        for i, (w, b, name) in enumerate(zip(self.weights, self.biases, self.activations)):
            inputs.append(a)
            z = a @ w + b
            a = ACTIVATIONS[name][0](z)
            pre.append(z)
            post.append(a)
            mask = None
            if use_dropout and i < last:
                keep = 1.0 - self.dropout
                mask = (rng.random(a.shape) < keep) / keep
                a = a * mask
            masks.append(mask)
        tape = {"inputs": inputs, "pre": pre, "post": post, "masks": masks}
        return (a[0] if single else a), tape

    def predict(self, X):
        return self.forward(X)[0]

    def backward(self, tape, grad_out):
        """Gradients of a scalar loss with respect to ``params`` and the input."""
        g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
        grads = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            if tape["masks"][i] is not None:
                g = g * tape["masks"][i]
            deriv = ACTIVATIONS[self.activations[i]][1]
            g = g * deriv(tape["pre"][i], tape["post"][i])
            grads[2 * i] = tape["inputs"][i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def copy(self):
        return Mlp(self.layer_sizes, self.activations, self.dropout,
                   [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state, params, grads):
    """Bias-corrected Adam update of ``params`` in place; returns ``params``."""
    if len(params) != len(grads):
        raise InvalidArgumentError("parameter and gradient lists differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise InvalidArgumentError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
