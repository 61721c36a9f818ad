"""Feed-forward semi-affine networks trained by plain SGD.

A network is a chain of layers ``a_l = act_l(W_l a_{l-1} + b_l)``. Samples
are rows: ``forward`` on a (M, n_in) matrix returns (M, n_out).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DivergenceError, DomainError, ShapeError, ValidationError

__all__ = [
    "ACTIVATIONS",
    "Layer",
    "Network",
    "TrainConfig",
    "LossTrace",
    "activation_apply",
    "offset_relu",
    "init_network",
    "forward",
    "penalty_value",
    "loss",
    "gradient",
    "train_sgd",
    "nested_relu_chain",
    "network_to_dict",
    "network_from_dict",
    "NETWORK_FORMAT",
]

ACTIVATIONS = ("relu", "tanh", "linear")
PENALTIES = ("l1", "l2")
NETWORK_FORMAT = "dpt-net-1"


def activation_apply(kind: str, x):
    """Apply an activation elementwise. Works on scalars and arrays."""
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "linear":
        return x
    raise ValidationError(f"unknown activation {kind!r}")


def _activation_slope(kind, z, a):
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def offset_relu(x, level: float = 0.05):
    """``(x - level)^+ + level``: pass values above ``level``, floor the rest at it."""
    return activation_apply("relu", np.asarray(x, dtype=float) - level) + level


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        w = np.array(self.weight, dtype=float)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias length {b.shape[0]} != weight rows {w.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError("layer parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self):
        return self.weight.shape[1]

    @property
    def n_out(self):
        return self.weight.shape[0]


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("network needs at least one layer")
        for i, (a, b) in enumerate(zip(layers, layers[1:])):
            if b.n_in != a.n_out:
                raise ShapeError(f"layer {i + 1} takes {b.n_in} inputs but layer {i} emits {a.n_out}")
        object.__setattr__(self, "layers", layers)

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out

    @property
    def sizes(self):
        return (self.n_in, *(layer.n_out for layer in self.layers))

    @property
    def activations(self):
        return tuple(layer.activation for layer in self.layers)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.activation == b.activation
            and np.array_equal(a.weight, b.weight)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


@dataclass(frozen=True)
class TrainConfig:
    """Penalized SGD settings.

    ``lam`` is the penalty weight (``"lambda"`` in serialized form).
    ``init_scale=None`` means ``0.5 / sqrt(n_in)`` per layer.
    """

    lam: float = 0.0
    penalty: str = "l2"
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    init_scale: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be >= 0, got {self.lam}")
        if self.penalty not in PENALTIES:
            raise ValidationError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if not self.learning_rate >= 0:
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.init_scale is not None and not self.init_scale > 0:
            raise ValidationError(f"init_scale must be > 0, got {self.init_scale}")

    def to_dict(self):
        return {
            "lambda": self.lam,
            "penalty": self.penalty,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "init_scale": self.init_scale,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class LossTrace:
    total: list = field(default_factory=list)
    fit: list = field(default_factory=list)
    penalty: list = field(default_factory=list)

    def append(self, total, fit, penalty):
        self.total.append(total)
        self.fit.append(fit)
        self.penalty.append(penalty)

    def __len__(self):
        return len(self.total)


# --------------------------------------------------------------------------
# construction & serialization
# --------------------------------------------------------------------------


def init_network(sizes: Sequence[int], activations: Sequence[str], seed: int = 0,
                 init_scale: Optional[float] = None) -> Network:
    """Random network with weights U(-s, s) and zero biases.

    ``sizes`` lists widths from input to output; ``activations`` has one
    entry per layer (``len(sizes) - 1``).
    """
    if len(activations) != len(sizes) - 1:
        raise ShapeError(f"{len(sizes) - 1} layers need {len(sizes) - 1} activations, got {len(activations)}")
    rng = np.random.default_rng([seed, 0])
    layers = []
    for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
        s = init_scale if init_scale is not None else 0.5 / math.sqrt(n_in)
        layers.append(Layer(rng.uniform(-s, s, size=(n_out, n_in)), np.zeros(n_out), act))
    return Network(tuple(layers))


def network_to_dict(net: Network) -> dict:
    return {
        "format": NETWORK_FORMAT,
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(d: dict) -> Network:
    if d.get("format") != NETWORK_FORMAT:
        raise ValidationError(f"expected format {NETWORK_FORMAT!r}, got {d.get('format')!r}")
    layers = []
    for spec in d["layers"]:
        w = np.array(spec["weight"], dtype=float)
        if w.ndim == 1:
            w = w.reshape(len(spec["bias"]), -1)
        layers.append(Layer(w, spec["bias"], spec["activation"]))
    return Network(tuple(layers))


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _as_rows(net, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise ShapeError(f"network expects {net.n_in} inputs, got shape {np.shape(X)}")
    return X, single


def _targets(net, Y, m):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(m, -1) if net.n_out > 1 and Y.size == m * net.n_out else Y[:, None]
    if Y.shape != (m, net.n_out):
        raise ShapeError(f"targets should have shape {(m, net.n_out)}, got {Y.shape}")
    return Y


def _forward_cache(layers, X):
    pre, post = [], [X]
    a = X
    for layer in layers:
        z = a @ layer.weight.T + layer.bias
        a = activation_apply(layer.activation, z)
        pre.append(z)
        post.append(a)
    return pre, post


def forward(net: Network, x) -> np.ndarray:
    """Network output for a single input vector or a matrix of row samples."""
    X, single = _as_rows(net, x)
    out = _forward_cache(net.layers, X)[1][-1]
    return out[0] if single else out


def penalty_value(net: Network, kind: str = "l2") -> float:
    """``sum W^2`` (l2) or ``sum |W|`` (l1) over weight matrices; biases excluded."""
    if kind == "l2":
        return float(sum(np.sum(layer.weight ** 2) for layer in net.layers))
    if kind == "l1":
        return float(sum(np.sum(np.abs(layer.weight)) for layer in net.layers))
    raise ValidationError(f"unknown penalty {kind!r}")


def loss(net: Network, X, Y, cfg: TrainConfig):
    """Return ``(total, fit, penalty)``.

    ``fit`` is the mean over rows of the squared residual norm; ``penalty``
    is ``cfg.lam * phi(W)``.
    """
    Xr, _ = _as_rows(net, X)
    Yr = _targets(net, Y, Xr.shape[0])
    resid = forward(net, Xr) - Yr
    fit = float(np.sum(resid * resid) / Xr.shape[0])
    pen = cfg.lam * penalty_value(net, cfg.penalty) if cfg.lam else 0.0
    return fit + pen, fit, pen


def _backprop(layers, X, Y, lam, penalty):
    pre, post = _forward_cache(layers, X)
    m = X.shape[0]
    delta_a = 2.0 * (post[-1] - Y) / m
    grads = [None] * len(layers)
    for l in range(len(layers) - 1, -1, -1):
        layer = layers[l]
        delta = delta_a * _activation_slope(layer.activation, pre[l], post[l + 1])
        dW = delta.T @ post[l]
        if lam:
            dW = dW + (2.0 * lam * layer.weight if penalty == "l2" else lam * np.sign(layer.weight))
        grads[l] = (dW, delta.sum(axis=0))
        if l:
            delta_a = delta @ layer.weight
    return grads


def gradient(net: Network, X, Y, cfg: TrainConfig):
    """Exact gradient of :func:`loss` as a list of ``(dW, db)`` per layer.

    At kinks the relu slope and the l1 subgradient are both taken as 0.
    """
    Xr, _ = _as_rows(net, X)
    Yr = _targets(net, Y, Xr.shape[0])
    return _backprop(net.layers, Xr, Yr, cfg.lam, cfg.penalty)


class _Params:
    """Mutable working copy of a network's parameters during training."""

    __slots__ = ("weight", "bias", "activation")

    def __init__(self, layer):
        self.weight = layer.weight.copy()
        self.bias = layer.bias.copy()
        self.activation = layer.activation


def train_sgd(net: Network, X, Y, cfg: TrainConfig):
    """Minimize :func:`loss` by minibatch SGD, starting from ``net``.

    Rows are reshuffled each epoch from a stream seeded by ``cfg.seed``. The
    trace records the full-data objective after every epoch.

    Returns
    -------
    (Network, LossTrace)

    Raises
    ------
    DivergenceError
        If the objective or any parameter becomes non-finite.
    """
    Xr, _ = _as_rows(net, X)
    Yr = _targets(net, Y, Xr.shape[0])
    m = Xr.shape[0]
    if cfg.batch_size > m:
        raise ValidationError(f"batch_size {cfg.batch_size} exceeds {m} training rows")
    rng = np.random.default_rng([cfg.seed, 1])
    params = [_Params(layer) for layer in net.layers]
    trace = LossTrace()
    lr = cfg.learning_rate
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(m)
            for start in range(0, m, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                grads = _backprop(params, Xr[idx], Yr[idx], cfg.lam, cfg.penalty)
                for p, (dW, db) in zip(params, grads):
                    p.weight -= lr * dW
                    p.bias -= lr * db
            if not all(np.all(np.isfinite(p.weight)) and np.all(np.isfinite(p.bias)) for p in params):
                raise DivergenceError(epoch)
            current = Network(tuple(Layer(p.weight, p.bias, p.activation) for p in params))
            total, fit, pen = loss(current, Xr, Yr, cfg)
            if not math.isfinite(total):
                raise DivergenceError(epoch)
            trace.append(total, fit, pen)
    return current, trace


# --------------------------------------------------------------------------
# max-sum identity
# --------------------------------------------------------------------------


def nested_relu_chain(xs) -> float:
    """Evaluate ``(x1 + (x2 + ... + (x_{n-1} + x_n^+)^+ ...)^+)^+`` innermost first."""
    xs = [float(v) for v in xs]
    if not xs:
        raise DomainError("nested_relu_chain needs at least one value")
    acc = max(xs[-1], 0.0)
    for v in reversed(xs[:-1]):
        acc = max(v + acc, 0.0)
    return acc
