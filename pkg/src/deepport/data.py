"""Return panels: loading, writing, price conversion, splitting, synthesis."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, DomainError, ParseError, SchemaError, SplitError

__all__ = [
    "ReturnsMatrix",
    "SplitSpec",
    "load_returns_csv",
    "write_returns_csv",
    "format_returns_csv",
    "prices_to_returns",
    "simple_returns",
    "split",
    "split_by_fraction",
    "synth_market",
    "depth_example",
    "weekly_dates",
]

FLOAT_FORMAT = "{:.10g}"


@dataclass(frozen=True, eq=False)
class ReturnsMatrix:
    """A dense T x N panel of per-period returns (or price levels).

    Rows are periods, columns are assets. ``values`` is stored read-only.
    """

    values: np.ndarray
    tickers: tuple
    timestamps: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise SchemaError(f"values must be 2-D, got shape {values.shape}")
        tickers = tuple(str(t) for t in self.tickers)
        timestamps = tuple(str(t) for t in self.timestamps)
        T, N = values.shape
        if T < 2 or N < 1:
            raise SchemaError(f"need T >= 2 and N >= 1, got T={T}, N={N}")
        if len(tickers) != N:
            raise SchemaError(f"{len(tickers)} tickers for {N} columns")
        if len(timestamps) != T:
            raise SchemaError(f"{len(timestamps)} timestamps for {T} rows")
        if len(set(tickers)) != N:
            dupes = sorted({t for t in tickers if tickers.count(t) > 1})
            raise SchemaError(f"duplicate tickers: {', '.join(dupes)}")
        for a, b in zip(timestamps, timestamps[1:]):
            if not a < b:
                raise DataError(f"timestamps not strictly increasing at {a!r} -> {b!r}")
        if not np.all(np.isfinite(values)):
            t, i = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at ({timestamps[t]}, {tickers[i]})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def column(self, ticker: str) -> np.ndarray:
        return self.values[:, self.tickers.index(ticker)]

    def select(self, tickers: Sequence[str]) -> "ReturnsMatrix":
        """Restrict to ``tickers`` in the given order."""
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise SchemaError(f"unknown tickers: {', '.join(missing)}")
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnsMatrix(self.values[:, idx], tuple(tickers), self.timestamps)

    def drop(self, tickers: Iterable[str]) -> "ReturnsMatrix":
        gone = set(tickers)
        return self.select([t for t in self.tickers if t not in gone])

    def rows(self, index) -> "ReturnsMatrix":
        idx = np.arange(self.T)[index]
        return ReturnsMatrix(
            self.values[idx], self.tickers, tuple(self.timestamps[i] for i in idx)
        )

    def __eq__(self, other):
        if not isinstance(other, ReturnsMatrix):
            return NotImplemented
        return (
            self.tickers == other.tickers
            and self.timestamps == other.timestamps
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------


def _parse_float(text, line, what):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {what} {text!r} as a number", line) from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: non-finite {what} {text!r}")
    return value


def _read_wide(rows):
    header = rows[0][1]
    if len(header) < 2:
        raise ParseError("wide header needs a date column and at least one ticker", rows[0][0])
    tickers = [h.strip() for h in header[1:]]
    if len(set(tickers)) != len(tickers):
        dupes = sorted({t for t in tickers if tickers.count(t) > 1})
        raise SchemaError(f"duplicate tickers in header: {', '.join(dupes)}")
    records = {}
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        date = row[0].strip()
        if date in records:
            raise DataError(f"line {line}: duplicate timestamp {date!r}")
        records[date] = [_parse_float(v, line, f"value for {tickers[j]}") for j, v in enumerate(row[1:])]
    dates = sorted(records)
    values = [records[d] for d in dates]
    return values, tickers, dates


def _read_long(rows):
    header = [h.strip().lower() for h in rows[0][1]]
    if header != ["date", "ticker", "value"]:
        raise ParseError("long header must be 'date,ticker,value'", rows[0][0])
    cells = {}
    tickers = []
    for line, row in rows[1:]:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        date, ticker = row[0].strip(), row[1].strip()
        if (date, ticker) in cells:
            raise DataError(f"line {line}: duplicate cell ({date}, {ticker})")
        cells[date, ticker] = _parse_float(row[2], line, "value")
        if ticker not in tickers:
            tickers.append(ticker)
    dates = sorted({d for d, _ in cells})
    values = []
    for d in dates:
        row = []
        for t in tickers:
            if (d, t) not in cells:
                raise DataError(f"missing cell ({d}, {t})")
            row.append(cells[d, t])
        values.append(row)
    return values, tickers, dates


def load_returns_csv(path, layout: str = "wide") -> ReturnsMatrix:
    """Read a return (or price) panel from CSV.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV file.
    layout : {"wide", "long"}
        ``wide``: header ``date,T1,...,TN``, one row per period.
        ``long``: header ``date,ticker,value``, one row per cell; every
        (date, ticker) pair must be present.

    Returns
    -------
    ReturnsMatrix
        Rows sorted by timestamp.
    """
    if layout not in ("wide", "long"):
        raise ValueError(f"layout must be 'wide' or 'long', not {layout!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ParseError(f"{os.fspath(path)}: no data rows")
    values, tickers, dates = (_read_wide if layout == "wide" else _read_long)(rows)
    return ReturnsMatrix(np.asarray(values, dtype=float).reshape(len(dates), len(tickers)), tickers, dates)


def format_returns_csv(data: ReturnsMatrix, layout: str = "wide") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if layout == "wide":
        w.writerow(["date", *data.tickers])
        for ts, row in zip(data.timestamps, data.values):
            w.writerow([ts, *(FLOAT_FORMAT.format(v) for v in row)])
    elif layout == "long":
        w.writerow(["date", "ticker", "value"])
        for ts, row in zip(data.timestamps, data.values):
            for t, v in zip(data.tickers, row):
                w.writerow([ts, t, FLOAT_FORMAT.format(v)])
    else:
        raise ValueError(f"layout must be 'wide' or 'long', not {layout!r}")
    return buf.getvalue()


def write_returns_csv(data: ReturnsMatrix, path, layout: str = "wide") -> None:
    """Write ``data`` as CSV with 10 significant digits per value."""
    from ._io import atomic_write_text

    atomic_write_text(path, format_returns_csv(data, layout))


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------


def simple_returns(prices) -> np.ndarray:
    """Row-wise ``P_t / P_{t-1} - 1`` for a 1-D or 2-D array of positive prices."""
    p = np.asarray(prices, dtype=float)
    if p.shape[0] < 2:
        raise DomainError("need at least 2 prices")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise DomainError("prices must be finite and > 0")
    return p[1:] / p[:-1] - 1.0


def prices_to_returns(prices: ReturnsMatrix) -> ReturnsMatrix:
    """Simple returns ``P_t / P_{t-1} - 1``; the first period is dropped."""
    p = prices.values
    if np.any(p <= 0):
        t, i = np.argwhere(p <= 0)[0]
        raise DomainError(
            f"nonpositive price {p[t, i]} at ({prices.timestamps[t]}, {prices.tickers[i]})"
        )
    if prices.T < 3:
        # one return row cannot form a ReturnsMatrix; use simple_returns
        raise DomainError("need at least 3 price rows to produce 2 return rows")
    return ReturnsMatrix(simple_returns(p), prices.tickers, prices.timestamps[1:])


@dataclass(frozen=True)
class SplitSpec:
    """Half-open timestamp ranges ``[start, end)``; ``None`` is unbounded."""

    calibration_range: tuple
    validation_range: tuple

    def __post_init__(self):
        c1, v0 = self.calibration_range[1], self.validation_range[0]
        for lo, hi in (self.calibration_range, self.validation_range):
            if lo is not None and hi is not None and not lo < hi:
                raise SplitError(f"empty range [{lo}, {hi})")
        if c1 is None or v0 is None or c1 > v0:
            raise SplitError(
                f"calibration {self.calibration_range} must end at or before "
                f"validation {self.validation_range} starts"
            )

    @staticmethod
    def _mask(timestamps, rng):
        lo, hi = rng
        return np.array(
            [(lo is None or t >= lo) and (hi is None or t < hi) for t in timestamps], dtype=bool
        )


def split(data: ReturnsMatrix, spec: SplitSpec):
    """Cut ``data`` into (calibration, validation) by timestamp range."""
    out = []
    for name, rng in (("calibration", spec.calibration_range), ("validation", spec.validation_range)):
        mask = SplitSpec._mask(data.timestamps, rng)
        if mask.sum() < 2:
            raise SplitError(f"{name} range {rng} selects {int(mask.sum())} rows; need >= 2")
        out.append(data.rows(np.flatnonzero(mask)))
    return tuple(out)


def split_by_fraction(data: ReturnsMatrix, fraction: float = 0.5) -> SplitSpec:
    """SplitSpec putting the first ``fraction`` of rows into calibration."""
    m = int(round(fraction * data.T))
    if not 2 <= m <= data.T - 2:
        raise SplitError(f"fraction {fraction} leaves fewer than 2 rows on one side (T={data.T})")
    return SplitSpec((None, data.timestamps[m]), (data.timestamps[m], None))


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------


def weekly_dates(n, start="2012-01-06"):
    d0 = _dt.date.fromisoformat(start)
    return tuple((d0 + _dt.timedelta(weeks=i)).isoformat() for i in range(n))


def synth_market(
    n_assets: int,
    n_periods: int,
    n_latent: int,
    drawdown: Optional[tuple] = None,
    seed: int = 0,
    noise_scale: float = 0.01,
    factor_scale: float = 0.02,
    start: str = "2012-01-06",
) -> ReturnsMatrix:
    """Linear latent-factor market ``r_t = loadings @ f_t + eps_t``.

    Loadings are N(1, 0.5); factors are N(0, ``factor_scale``). Each asset's
    idiosyncratic volatility is ``noise_scale`` times a U(0.25, 2) multiplier,
    so assets differ in how much of their variance is communal.

    Parameters
    ----------
    drawdown : (asset, period, magnitude), optional
        Adds ``magnitude`` to a single entry after generation; the random
        draws are unaffected.
    """
    if n_assets < 1 or n_periods < 2 or n_latent < 1:
        raise DomainError("need n_assets >= 1, n_periods >= 2, n_latent >= 1")
    if n_latent > n_assets:
        raise DomainError(f"n_latent={n_latent} exceeds n_assets={n_assets}")
    if noise_scale < 0 or factor_scale < 0:
        raise DomainError("scales must be nonnegative")
    rng = np.random.default_rng(seed)
    loadings = rng.normal(1.0, 0.5, size=(n_assets, n_latent))
    factors = rng.normal(0.0, factor_scale, size=(n_periods, n_latent))
    vol = noise_scale * rng.uniform(0.25, 2.0, size=n_assets)
    eps = rng.standard_normal((n_periods, n_assets)) * vol
    values = factors @ loadings.T + eps
    if drawdown is not None:
        asset, period, magnitude = drawdown
        if not (0 <= asset < n_assets and 0 <= period < n_periods):
            raise DomainError(
                f"drawdown index (asset={asset}, period={period}) outside "
                f"{n_assets} assets x {n_periods} periods"
            )
        values[period, asset] += magnitude
    width = len(str(n_assets - 1))
    tickers = tuple(f"S{i:0{width}d}" for i in range(n_assets))
    return ReturnsMatrix(values, tickers, weekly_dates(n_periods, start))


def depth_example(seed: int = 0, n_periods: int = 30, t_star: int = 15) -> ReturnsMatrix:
    """Benchmark ``B`` and two candidates ``X2``, ``X3`` with a single X3 crash.

    ``X3`` follows ``B`` closely except at ``t_star`` (0-based row), where it
    falls 0.17 below the benchmark; ``X2`` tracks ``B`` with wider noise but
    no crash. The benchmark sits at or above 0.05 and dips to 0.06 at
    ``t_star``.
    """
    if not 0 <= t_star < n_periods:
        raise DomainError(f"t_star={t_star} outside {n_periods} periods")
    rng = np.random.default_rng(seed)
    t = np.arange(n_periods)
    bench = 0.12 + 0.04 * np.sin(t / 3.0) + rng.normal(0.0, 0.01, n_periods)
    bench = np.maximum(bench, 0.07)
    bench[t_star] = 0.06
    x2 = bench + rng.normal(0.0, 0.029, n_periods)
    x3 = bench + rng.normal(0.0, 0.004, n_periods)
    x3[t_star] = bench[t_star] - 0.17
    values = np.column_stack([bench, x2, x3])
    return ReturnsMatrix(values, ("B", "X2", "X3"), tuple(f"t{i:03d}" for i in t))
