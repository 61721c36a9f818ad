"""Market-map: autoencode the return cross-section and rank stocks by communality.

Each period's cross-section is one sample, so the autoencoder maps R^N to
R^N through a ``hidden_width`` bottleneck. A stock that the bottleneck
reproduces well carries information shared with the rest of the universe.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import ReturnsMatrix
from .errors import DivergenceError, SelectionError, ShapeError, ValidationError
from .nn import (
    Layer,
    Network,
    TrainConfig,
    activation_apply,
    forward,
    init_network,
    train_sgd,
)

__all__ = [
    "CommunalRanking",
    "EncoderReport",
    "train_autoencoder",
    "reconstruction_errors",
    "rank_communal",
    "select_universe",
    "encode_market",
    "alternating_objective",
    "train_autoencoder_alternating",
    "ranking_to_csv",
]

DEFAULT_HIDDEN_WIDTH = 5
DEFAULT_N_COMMUNAL = 10


def _values(X):
    return X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)


def train_autoencoder(
    X,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    cfg: TrainConfig = TrainConfig(),
    hidden_activation: str = "relu",
    output_activation: str = "linear",
) -> Network:
    """Fit an N -> hidden_width -> N autoencoder with targets equal to inputs."""
    if hidden_width < 1:
        raise ValidationError(f"hidden_width must be >= 1, got {hidden_width}")
    V = _values(X)
    n = V.shape[1]
    net = init_network((n, hidden_width, n), (hidden_activation, output_activation),
                       seed=cfg.seed, init_scale=cfg.init_scale)
    net, _ = train_sgd(net, V, V, cfg)
    return net


def reconstruction_errors(net: Network, X) -> np.ndarray:
    """Per-stock 2-norm over periods of ``X - F(X)``."""
    V = _values(X)
    if net.n_in != V.shape[1] or net.n_out != V.shape[1]:
        raise ShapeError(f"network maps {net.n_in}->{net.n_out}, data has {V.shape[1]} columns")
    resid = V - forward(net, V)
    return np.sqrt(np.sum(resid * resid, axis=0))


@dataclass(frozen=True)
class CommunalRanking:
    """Stocks ordered from most communal (smallest error) to least."""

    errors: dict
    order: tuple

    def __post_init__(self):
        if sorted(self.order) != sorted(self.errors):
            raise ValidationError("order must be a permutation of the ticker set")

    def __len__(self):
        return len(self.order)

    def sorted_errors(self):
        return [self.errors[t] for t in self.order]


def rank_communal(errors, tickers: Sequence[str]) -> CommunalRanking:
    errors = [float(e) for e in errors]
    tickers = [str(t) for t in tickers]
    if len(errors) != len(tickers):
        raise ShapeError(f"{len(errors)} errors for {len(tickers)} tickers")
    order = tuple(t for _, t in sorted(zip(errors, tickers)))
    return CommunalRanking(dict(zip(tickers, errors)), order)


def select_universe(ranking: CommunalRanking, n_total: int,
                    n_communal: int = DEFAULT_N_COMMUNAL) -> list:
    """The ``n_communal`` most communal stocks, then the ``n_total - n_communal``
    least communal ones (least communal first)."""
    n = len(ranking)
    if n_communal < 0 or n_communal > n_total:
        raise SelectionError(f"n_communal={n_communal} must lie in [0, n_total={n_total}]")
    if n_total > n:
        raise SelectionError(f"n_total={n_total} exceeds the {n} ranked stocks")
    x = n_total - n_communal
    tail = list(reversed(ranking.order[n - x:])) if x else []
    return list(ranking.order[:n_communal]) + tail


@dataclass
class EncoderReport:
    network: Network
    ranking: CommunalRanking
    epsilon_m: Optional[float] = None


def encode_market(X: ReturnsMatrix, hidden_width: int = DEFAULT_HIDDEN_WIDTH,
                  cfg: TrainConfig = TrainConfig(), X_hat: Optional[ReturnsMatrix] = None,
                  hidden_activation: str = "relu", output_activation: str = "linear") -> EncoderReport:
    """Train on ``X`` (calibration only), rank on ``X``, score ``X_hat`` if given."""
    net = train_autoencoder(X, hidden_width, cfg, hidden_activation, output_activation)
    ranking = rank_communal(reconstruction_errors(net, X), X.tickers)
    eps = None
    if X_hat is not None:
        if X_hat.tickers != X.tickers:
            raise ShapeError("held-out set must have the calibration tickers in the same order")
        resid = X_hat.values - forward(net, X_hat.values)
        eps = float(np.sum(resid * resid) / X_hat.T)
    return EncoderReport(net, ranking, eps)


def ranking_to_csv(ranking: CommunalRanking) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "ticker", "reconstruction_error"])
    for i, t in enumerate(ranking.order, start=1):
        w.writerow([i, t, f"{ranking.errors[t]:.10g}"])
    return buf.getvalue()


# --------------------------------------------------------------------------
# alternating (encoder/decoder split) training
# --------------------------------------------------------------------------


def alternating_objective(net: Network, Z, X, lam: float = 0.0, penalty: str = "l2"):
    """``(||X - dec(Z)||^2 + lam*phi(Z) + ||Z - enc(X)||^2) / T``.

    ``enc`` is the first layer of ``net`` and ``dec`` the (affine) second.
    """
    V = _values(X)
    enc, dec = net.layers
    E = activation_apply(enc.activation, V @ enc.weight.T + enc.bias)
    R = V - (Z @ dec.weight.T + dec.bias)
    phi = np.sum(Z * Z) if penalty == "l2" else np.sum(np.abs(Z))
    return float((np.sum(R * R) + lam * phi + np.sum((Z - E) ** 2)) / V.shape[0])


def _z_gradient(Z, V, W1, b1, W2, b2, act, lam, penalty):
    E = activation_apply(act, V @ W1.T + b1)
    R = V - (Z @ W2.T + b2)
    g = -2.0 * R @ W2 + 2.0 * (Z - E)
    if lam:
        g = g + (2.0 * lam * Z if penalty == "l2" else lam * np.sign(Z))
    return g / V.shape[0]


def _w_gradients(Z, V, W1, b1, W2, b2, act):
    T = V.shape[0]
    R = V - (Z @ W2.T + b2)
    dW2 = -2.0 * R.T @ Z / T
    db2 = -2.0 * R.sum(axis=0) / T
    P = V @ W1.T + b1
    E = activation_apply(act, P)
    if act == "relu":
        slope = (P > 0).astype(float)
    elif act == "tanh":
        slope = 1.0 - E * E
    else:
        slope = 1.0
    D = -2.0 * (Z - E) * slope / T
    return D.T @ V, D.sum(axis=0), dW2, db2


def _lstsq_affine(A, B):
    """Least-squares ``B ~ A @ M.T + c``; returns (M, c)."""
    A1 = np.column_stack([A, np.ones(A.shape[0])])
    sol = np.linalg.lstsq(A1, B, rcond=None)[0]
    return sol[:-1].T, sol[-1]


def train_autoencoder_alternating(
    X,
    hidden_width: int = DEFAULT_HIDDEN_WIDTH,
    cfg: TrainConfig = TrainConfig(),
    activation: str = "linear",
    inner_steps: int = 1,
    exact: bool = False,
    net: Optional[Network] = None,
    Z=None,
):
    """Block-coordinate training of the split encoder/decoder objective.

    Each outer iteration (``cfg.epochs`` of them) first updates the latent
    matrix ``Z`` with the weights fixed, then updates encoder and decoder
    weights with ``Z`` fixed. Updates are ``inner_steps`` full-batch gradient
    steps of size ``cfg.learning_rate`` or, with ``exact=True`` (linear
    activation, l2 penalty only), exact block minimizers.

    Returns
    -------
    (Network, ndarray, list)
        The network, the T x hidden_width latent matrix, and the objective
        after each outer iteration.
    """
    if hidden_width < 1:
        raise ValidationError(f"hidden_width must be >= 1, got {hidden_width}")
    if exact and (activation != "linear" or cfg.penalty != "l2"):
        raise ValidationError("exact block updates need a linear encoder and the l2 penalty")
    V = _values(X)
    T, n = V.shape
    if net is None:
        net = init_network((n, hidden_width, n), (activation, "linear"), seed=cfg.seed,
                           init_scale=cfg.init_scale)
    enc, dec = net.layers
    W1, b1, W2, b2 = enc.weight.copy(), enc.bias.copy(), dec.weight.copy(), dec.bias.copy()
    act = enc.activation
    if Z is None:
        Z = activation_apply(act, V @ W1.T + b1)
    Z = np.array(Z, dtype=float)
    lam, lr = cfg.lam, cfg.learning_rate
    eye = np.eye(W1.shape[0])
    trace = []
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, cfg.epochs + 1):
            if exact:
                E = V @ W1.T + b1
                A = W2.T @ W2 + (1.0 + lam) * eye
                Z = np.linalg.solve(A, ((V - b2) @ W2 + E).T).T
                W2, b2 = _lstsq_affine(Z, V)
                W1, b1 = _lstsq_affine(V, Z)
            else:
                for _ in range(inner_steps):
                    Z = Z - lr * _z_gradient(Z, V, W1, b1, W2, b2, act, lam, cfg.penalty)
                for _ in range(inner_steps):
                    dW1, db1, dW2, db2 = _w_gradients(Z, V, W1, b1, W2, b2, act)
                    W1, b1, W2, b2 = W1 - lr * dW1, b1 - lr * db1, W2 - lr * dW2, b2 - lr * db2
            if not all(np.all(np.isfinite(a)) for a in (Z, W1, b1, W2, b2)):
                raise DivergenceError(it)
            net = Network((Layer(W1, b1, act), Layer(W2, b2, "linear")))
            obj = alternating_objective(net, Z, V, lam, cfg.penalty)
            if not math.isfinite(obj):
                raise DivergenceError(it)
            trace.append(obj)
    return net, Z, trace
