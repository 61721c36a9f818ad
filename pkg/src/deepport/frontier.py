"""Validation errors, the efficient deep frontier, and frontier comparison."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ReturnsMatrix, SplitSpec, split
from .errors import ComparisonError, DeepPortError, ParseError, ShapeError, ValidationError
from .market_map import (
    DEFAULT_HIDDEN_WIDTH,
    DEFAULT_N_COMMUNAL,
    encode_market,
    select_universe,
)
from .nn import Network, TrainConfig, forward
from .portfolio_map import (
    DEFAULT_FLOOR,
    DEFAULT_REPLACEMENT,
    TargetSeries,
    amend_target,
    calibrate,
    track,
)

__all__ = [
    "PipelineSettings",
    "FrontierPoint",
    "TrackingSeries",
    "Frontier",
    "VerificationReport",
    "validation_errors",
    "build_frontier",
    "build_lambda_frontier",
    "compare_frontiers",
    "frontier_to_csv",
    "frontier_from_csv",
    "tracking_to_csv",
]


@dataclass(frozen=True)
class PipelineSettings:
    """Everything the encode/calibrate/validate sweep needs besides the data."""

    # plain SGD on raw weekly-return scale; larger steps diverge
    autoencoder: TrainConfig = TrainConfig(learning_rate=0.2, epochs=1000, batch_size=16)
    calibration: TrainConfig = TrainConfig(learning_rate=0.5, epochs=500, batch_size=16)
    ae_hidden: int = DEFAULT_HIDDEN_WIDTH
    pm_hidden: int = DEFAULT_HIDDEN_WIDTH
    ae_activation: str = "relu"
    pm_activation: str = "relu"
    output_activation: str = "linear"
    k: int = 4
    n_communal: int = DEFAULT_N_COMMUNAL
    solver: str = "sgd"
    contiguous_folds: bool = False
    amend: bool = False
    floor: float = DEFAULT_FLOOR
    replacement: float = DEFAULT_REPLACEMENT
    jobs: int = 1

    @classmethod
    def linear_diagnostic(cls, **overrides):
        """Linear activations, lambda = 0, exact least-squares calibration."""
        base = dict(ae_activation="linear", pm_activation="linear", solver="lstsq",
                    calibration=TrainConfig(lam=0.0, batch_size=16))
        base.update(overrides)
        return cls(**base)

    def to_dict(self):
        d = asdict(self)
        d["autoencoder"] = self.autoencoder.to_dict()
        d["calibration"] = self.calibration.to_dict()
        return d


@dataclass(frozen=True)
class FrontierPoint:
    n_stocks: int
    epsilon_m: float
    epsilon_p: float
    lam: float
    seed: int
    tickers: tuple
    in_sample_error: float = float("nan")
    cv_error: float = float("nan")

    def __post_init__(self):
        if len(self.tickers) != self.n_stocks:
            raise ShapeError(f"{len(self.tickers)} tickers for n_stocks={self.n_stocks}")
        if not (np.isfinite(self.epsilon_m) and np.isfinite(self.epsilon_p)):
            raise ValidationError("frontier errors must be finite")


@dataclass(frozen=True)
class TrackingSeries:
    timestamps: tuple
    target: np.ndarray
    tracker: np.ndarray


@dataclass
class Frontier:
    """Frontier points in grid order.

    ``mode`` is ``"stocks"`` (grid over universe size, fixed lambda) or
    ``"lambda"`` (grid over penalty weight, fixed universe size).
    """

    points: list
    config: dict = field(default_factory=dict)
    mode: str = "stocks"
    tracks: dict = field(default_factory=dict)
    encoder: object = None
    reports: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = self.grid
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ValidationError(f"frontier grid must be strictly increasing, got {keys}")

    @property
    def grid(self):
        attr = "n_stocks" if self.mode == "stocks" else "lam"
        return [getattr(p, attr) for p in self.points]

    @property
    def epsilon_p(self):
        return np.array([p.epsilon_p for p in self.points])


def validation_errors(market_net: Network, portfolio_net: Network, X_hat, X_hat_sel, y_hat):
    """Per-row mean squared errors ``(epsilon_m, epsilon_p)`` on held-out data."""
    if isinstance(X_hat, ReturnsMatrix) and isinstance(X_hat_sel, ReturnsMatrix):
        extra = set(X_hat_sel.tickers) - set(X_hat.tickers)
        if extra:
            raise ShapeError(f"selected tickers not in held-out market: {sorted(extra)}")
    Xm = X_hat.values if isinstance(X_hat, ReturnsMatrix) else np.asarray(X_hat, dtype=float)
    yv = y_hat.values if isinstance(y_hat, TargetSeries) else np.asarray(y_hat, dtype=float).reshape(-1)
    tracker = track(portfolio_net, X_hat_sel)
    if tracker.shape[0] != yv.shape[0] or Xm.shape[0] != yv.shape[0]:
        raise ShapeError("held-out market, selection and target must have equal row counts")
    resid_m = Xm - forward(market_net, Xm)
    eps_m = float(np.sum(resid_m * resid_m) / Xm.shape[0])
    eps_p = float(np.mean((yv - tracker) ** 2))
    return eps_m, eps_p


def _prepare(data, target, spec, settings):
    cal, val = split(data, spec)
    y_cal, y_val = target.align(cal), target.align(val)
    if settings.amend:
        y_cal = amend_target(y_cal, settings.floor, settings.replacement)
        y_val = amend_target(y_val, settings.floor, settings.replacement)
    return cal, val, y_cal, y_val


def _annotate(exc, where):
    exc.grid_point = where
    if exc.args:
        exc.args = (f"{where}: {exc.args[0]}", *exc.args[1:])
    return exc


def _run_point(cal, val, y_cal, y_val, encoder, tickers, settings, cal_cfg):
    report = calibrate(cal.select(tickers), y_cal, settings.pm_hidden, cal_cfg, settings.k,
                       settings.pm_activation, settings.output_activation, settings.solver,
                       settings.contiguous_folds)
    val_sel = val.select(tickers)
    eps_m, eps_p = validation_errors(encoder.network, report.network, val, val_sel, y_val)
    point = FrontierPoint(len(tickers), eps_m, eps_p, cal_cfg.lam, cal_cfg.seed, tuple(tickers),
                          report.in_sample_error, report.mean_cv_error)
    tracks = {
        "calibration": TrackingSeries(cal.timestamps, y_cal.values, track(report.network, cal.select(tickers))),
        "validation": TrackingSeries(val.timestamps, y_val.values, track(report.network, val_sel)),
    }
    return point, tracks, report


def _sweep(jobs, keys, fn):
    results = {}
    if jobs > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {key: pool.submit(fn, key) for key in keys}
            for key in keys:
                results[key] = futures[key].result()
    else:
        for key in keys:
            results[key] = fn(key)
    return [results[key] for key in keys]


def build_frontier(data: ReturnsMatrix, target: TargetSeries, spec: SplitSpec,
                   stock_grid: Sequence[int], settings: PipelineSettings = PipelineSettings(),
                   keep_reports: bool = False) -> Frontier:
    """Trace validation error against universe size.

    The market-map is trained and the stocks ranked once, on the
    calibration window only. For each grid size the "n_communal most
    communal + rest least communal" universe is calibrated with k-fold CV
    and scored on the validation window. Points come back in grid order
    whatever ``settings.jobs`` is.
    """
    grid = [int(n) for n in stock_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError(f"stock grid must be strictly increasing, got {grid}")
    if grid and grid[-1] > data.N:
        raise ValidationError(f"grid value {grid[-1]} exceeds {data.N} stocks")
    cal, val, y_cal, y_val = _prepare(data, target, spec, settings)
    try:
        encoder = encode_market(cal, settings.ae_hidden, settings.autoencoder, X_hat=val,
                                hidden_activation=settings.ae_activation,
                                output_activation=settings.output_activation)
    except DeepPortError as exc:
        raise _annotate(exc, "encode") from None

    def one(n):
        try:
            tickers = select_universe(encoder.ranking, n, settings.n_communal)
            return _run_point(cal, val, y_cal, y_val, encoder, tickers, settings, settings.calibration)
        except DeepPortError as exc:
            raise _annotate(exc, f"n_stocks={n}") from None

    out = _sweep(settings.jobs, grid, one)
    return Frontier([p for p, _, _ in out], settings.to_dict(), "stocks",
                    {n: t for n, (_, t, _) in zip(grid, out)}, encoder,
                    {n: r for n, (_, _, r) in zip(grid, out)} if keep_reports else {})


def build_lambda_frontier(data: ReturnsMatrix, target: TargetSeries, spec: SplitSpec,
                          n_stocks: int, lambdas: Sequence[float],
                          settings: PipelineSettings = PipelineSettings()) -> Frontier:
    """Trace validation error against the calibration penalty at a fixed universe size."""
    lams = [float(v) for v in lambdas]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValidationError(f"lambda grid must be strictly increasing, got {lams}")
    cal, val, y_cal, y_val = _prepare(data, target, spec, settings)
    try:
        encoder = encode_market(cal, settings.ae_hidden, settings.autoencoder, X_hat=val,
                                hidden_activation=settings.ae_activation,
                                output_activation=settings.output_activation)
        tickers = select_universe(encoder.ranking, n_stocks, settings.n_communal)
    except DeepPortError as exc:
        raise _annotate(exc, "encode") from None

    def one(lam):
        try:
            return _run_point(cal, val, y_cal, y_val, encoder, tickers, settings,
                              settings.calibration.with_(lam=lam))
        except DeepPortError as exc:
            raise _annotate(exc, f"lambda={lam:g}") from None

    out = _sweep(settings.jobs, lams, one)
    return Frontier([p for p, _, _ in out], settings.to_dict(), "lambda",
                    {lam: t for lam, (_, t, _) in zip(lams, out)}, encoder)


@dataclass
class VerificationReport:
    """Which frontier has the smallest epsilon_p at each grid value.

    ``winners[i]`` is the index of the best frontier at ``grid[i]`` (first
    listed on ties); ``ties[i]`` flags an exact tie for the minimum.
    ``dominant`` is the first frontier that is weakly best at every grid
    value, or ``None``.
    """

    grid: list
    winners: list
    ties: list
    dominant: Optional[int]

    def to_dict(self):
        return asdict(self)


def compare_frontiers(frontiers: Sequence[Frontier]) -> VerificationReport:
    if not frontiers:
        raise ComparisonError("need at least one frontier")
    grid = frontiers[0].grid
    for i, f in enumerate(frontiers[1:], start=1):
        if f.mode != frontiers[0].mode or f.grid != grid:
            raise ComparisonError(f"frontier {i} grid {f.grid} does not match {grid}")
    E = np.array([f.epsilon_p for f in frontiers])
    best = E.min(axis=0)
    winners = [int(i) for i in np.argmin(E, axis=0)]
    ties = [bool(np.sum(E[:, j] == best[j]) > 1) for j in range(len(grid))]
    dominant = next((i for i in range(len(frontiers)) if np.all(E[i] <= best)), None)
    return VerificationReport([g for g in grid], winners, ties, dominant)


# --------------------------------------------------------------------------
# CSV exports
# --------------------------------------------------------------------------


def frontier_to_csv(frontier: Frontier) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_stocks", "lambda", "epsilon_m", "epsilon_p"])
    for p in frontier.points:
        w.writerow([p.n_stocks, f"{p.lam:.10g}", f"{p.epsilon_m:.10g}", f"{p.epsilon_p:.10g}"])
    return buf.getvalue()


def frontier_from_csv(text: str, mode: str = "stocks") -> Frontier:
    """Rebuild a frontier (without tickers or tracks) from its CSV export."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["n_stocks", "lambda", "epsilon_m", "epsilon_p"]:
        raise ParseError("frontier CSV header must be 'n_stocks,lambda,epsilon_m,epsilon_p'", 1)
    points = []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line)
        try:
            n, lam, em, ep = int(row[0]), float(row[1]), float(row[2]), float(row[3])
        except ValueError:
            raise ParseError(f"malformed frontier row {row}", line) from None
        points.append(FrontierPoint(n, em, ep, lam, 0, tuple(f"#{i}" for i in range(n))))
    return Frontier(points, mode=mode)


def tracking_to_csv(series: TrackingSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "target", "tracker"])
    for ts, y, z in zip(series.timestamps, series.target, series.tracker):
        w.writerow([ts, f"{y:.10g}", f"{z:.10g}"])
    return buf.getvalue()
