"""Portfolio-map: calibrate a network from selected stocks to a target series."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data import ReturnsMatrix
from .errors import DomainError, ShapeError, ValidationError
from .nn import (
    Layer,
    Network,
    TrainConfig,
    forward,
    init_network,
    network_to_dict,
    train_sgd,
)

__all__ = [
    "TargetSeries",
    "CalibrationReport",
    "index_target",
    "amend_target",
    "kfold_split",
    "calibrate",
    "fit_least_squares",
    "track",
]

DEFAULT_FLOOR = -0.05
DEFAULT_REPLACEMENT = 0.05


@dataclass(frozen=True, eq=False)
class TargetSeries:
    values: np.ndarray
    label: str = "target"
    amended: bool = False
    floor: float = DEFAULT_FLOOR
    replacement: float = DEFAULT_REPLACEMENT
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise DomainError("target values must be finite")
        if self.amended and np.any(v < self.floor):
            raise DomainError(f"amended target has entries below floor {self.floor}")
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != v.shape[0]:
                raise ShapeError(f"{len(ts)} timestamps for {v.shape[0]} target values")
            object.__setattr__(self, "timestamps", ts)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def rows(self, index) -> "TargetSeries":
        idx = np.arange(len(self))[index]
        ts = None if self.timestamps is None else tuple(self.timestamps[i] for i in idx)
        return replace(self, values=self.values[idx], timestamps=ts)

    def align(self, data: ReturnsMatrix) -> "TargetSeries":
        """Restrict to ``data``'s timestamps (all must be present)."""
        if self.timestamps is None:
            if len(self) != data.T:
                raise ShapeError(f"target has {len(self)} rows, data has {data.T}")
            return replace(self, timestamps=data.timestamps)
        pos = {t: i for i, t in enumerate(self.timestamps)}
        missing = [t for t in data.timestamps if t not in pos]
        if missing:
            raise ShapeError(f"target lacks {len(missing)} data timestamps, first {missing[0]!r}")
        return self.rows([pos[t] for t in data.timestamps])


def index_target(data: ReturnsMatrix, label: str = "index") -> TargetSeries:
    """Equal-weight average return of every column."""
    return TargetSeries(data.values.mean(axis=1), label, timestamps=data.timestamps)


def amend_target(y: TargetSeries, floor: float = DEFAULT_FLOOR,
                 replacement: float = DEFAULT_REPLACEMENT) -> TargetSeries:
    """Replace entries strictly below ``floor`` by ``replacement``.

    Values equal to ``floor`` are kept. With the defaults every return under
    -5% becomes +5%, so a tracker of the amended series is pushed to pay off
    in drawdowns.
    """
    if replacement < floor:
        raise DomainError(f"replacement {replacement} is below floor {floor}")
    v = np.where(y.values < floor, replacement, y.values)
    return replace(y, values=v, amended=True, floor=floor, replacement=replacement)


def kfold_split(n_rows: int, k: int, seed: int = 0, contiguous: bool = False) -> list:
    """Partition ``range(n_rows)`` into ``k`` folds whose sizes differ by at most one.

    Random folds come from a seeded permutation; ``contiguous=True`` gives
    consecutive time blocks instead. Each fold's indices are sorted.
    """
    if not 2 <= k <= n_rows:
        raise DomainError(f"need 2 <= k <= n_rows, got k={k}, n_rows={n_rows}")
    idx = np.arange(n_rows) if contiguous else np.random.default_rng(seed).permutation(n_rows)
    return [np.sort(part) for part in np.array_split(idx, k)]


@dataclass
class CalibrationReport:
    network: Network
    fold_errors: list
    mean_cv_error: float
    in_sample_error: float
    tickers: tuple = ()

    def to_dict(self):
        return {
            "tickers": list(self.tickers),
            "fold_errors": [float(e) for e in self.fold_errors],
            "mean_cv_error": float(self.mean_cv_error),
            "in_sample_error": float(self.in_sample_error),
            "network": network_to_dict(self.network),
        }


def fit_least_squares(X, y, hidden_width: int = 1) -> Network:
    """Exact least-squares affine fit, embedded in an n -> hidden_width -> 1 linear net.

    The first hidden unit carries the fitted combination; the rest are zero.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    A = np.column_stack([X, np.ones(X.shape[0])])
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    W1 = np.zeros((hidden_width, X.shape[1]))
    W1[0] = sol[:-1]
    W2 = np.zeros((1, hidden_width))
    W2[0, 0] = 1.0
    return Network((Layer(W1, np.zeros(hidden_width), "linear"), Layer(W2, [sol[-1]], "linear")))


def _fit(X, y, hidden_width, cfg, hidden_activation, output_activation, solver):
    if solver == "lstsq":
        return fit_least_squares(X, y, hidden_width)
    net = init_network((X.shape[1], hidden_width, 1), (hidden_activation, output_activation),
                       seed=cfg.seed, init_scale=cfg.init_scale)
    return train_sgd(net, X, y, cfg)[0]


def _mse(net, X, y):
    r = forward(net, X)[:, 0] - y
    return float(np.mean(r * r))


def calibrate(
    X_sel,
    y,
    hidden_width: int = 5,
    cfg: TrainConfig = TrainConfig(),
    k: int = 4,
    hidden_activation: str = "relu",
    output_activation: str = "linear",
    solver: str = "sgd",
    contiguous_folds: bool = False,
) -> CalibrationReport:
    """k-fold cross-validated fit of an n_sel -> hidden_width -> 1 portfolio-map.

    Fold ``i`` trains with seed ``cfg.seed + i`` on the other folds and
    scores MSE on fold ``i``. The delivered network is then trained on every
    row with ``cfg.seed``.

    ``solver="lstsq"`` replaces SGD by the exact least-squares fit; it is
    only valid for linear activations with ``cfg.lam == 0``.
    """
    if solver not in ("sgd", "lstsq"):
        raise ValidationError(f"solver must be 'sgd' or 'lstsq', got {solver!r}")
    if solver == "lstsq" and (cfg.lam != 0 or hidden_activation != "linear"
                              or output_activation != "linear"):
        raise ValidationError("solver='lstsq' requires linear activations and lambda = 0")
    X = X_sel.values if isinstance(X_sel, ReturnsMatrix) else np.asarray(X_sel, dtype=float)
    yv = y.values if isinstance(y, TargetSeries) else np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != yv.shape[0]:
        raise ShapeError(f"{X.shape[0]} input rows for {yv.shape[0]} target values")
    folds = kfold_split(X.shape[0], k, seed=cfg.seed, contiguous=contiguous_folds)
    fold_errors = []
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(X.shape[0]), test)
        fold_cfg = cfg.with_(seed=cfg.seed + i, batch_size=min(cfg.batch_size, train.size))
        net = _fit(X[train], yv[train], hidden_width, fold_cfg, hidden_activation,
                   output_activation, solver)
        fold_errors.append(_mse(net, X[test], yv[test]))
    full_cfg = cfg.with_(batch_size=min(cfg.batch_size, X.shape[0]))
    net = _fit(X, yv, hidden_width, full_cfg, hidden_activation, output_activation, solver)
    tickers = X_sel.tickers if isinstance(X_sel, ReturnsMatrix) else ()
    return CalibrationReport(net, fold_errors, float(np.mean(fold_errors)), _mse(net, X, yv), tickers)


def track(net: Network, X_sel) -> np.ndarray:
    """Per-period scalar output of the portfolio-map."""
    X = X_sel.values if isinstance(X_sel, ReturnsMatrix) else np.asarray(X_sel, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise ShapeError(f"network expects {net.n_in} inputs, got shape {X.shape}")
    if net.n_out != 1:
        raise ShapeError(f"portfolio-map must have one output, has {net.n_out}")
    return forward(net, X)[:, 0]
