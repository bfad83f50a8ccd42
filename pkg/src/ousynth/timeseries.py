"""Price and return series, normalization and panel alignment.

Returns are simple returns ``p[t+1] / p[t] - 1``. With simple returns the
split of a sector return into market return plus relative return is exact,
which the market pipeline relies on when it maps simulated relative paths
back to sector prices.

Date axes are numpy arrays of either ``datetime64[D]`` (real data) or
``int64`` trading-day indices (synthetic output). Model math only ever uses
the integer position ``t = 0, 1, 2, ...`` within an aligned panel.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DomainError


def as_date_axis(dates) -> np.ndarray:
    arr = np.asarray(dates)
    if arr.ndim != 1:
        raise AlignmentError("date axis must be one-dimensional")
    if arr.size == 0:
        return arr.astype(np.int64)
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.int64)
    if np.issubdtype(arr.dtype, np.datetime64):
        return arr.astype("datetime64[D]")
    try:
        return np.array(list(dates), dtype="datetime64[D]")
    except (ValueError, TypeError) as exc:
        raise AlignmentError(f"cannot interpret date axis: {exc}") from exc


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


def _check_increasing(dates: np.ndarray, what: str) -> None:
    if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
        bad = int(np.argmin(dates[1:] > dates[:-1])) + 1
        raise AlignmentError(f"{what}: dates not strictly increasing at position {bad} ({dates[bad]})")


def _step_before(dates: np.ndarray):
    if dates.size == 0:
        return np.int64(0)
    one = np.timedelta64(1, "D") if np.issubdtype(dates.dtype, np.datetime64) else 1
    return dates[0] - one


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Strictly positive price levels on a strictly increasing date axis."""

    id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = as_date_axis(self.dates)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape != dates.shape:
            raise AlignmentError(f"{self.id}: {values.size} values for {dates.size} dates")
        if values.size < 1:
            raise DomainError(f"{self.id}: empty price series")
        _check_increasing(dates, self.id)
        bad = np.flatnonzero(~(values > 0) | ~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"{self.id}: non-positive or non-finite price {values[i]!r} on {dates[i]}")
        object.__setattr__(self, "dates", _frozen(dates, dates.dtype))
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Simple returns; ``dates[t]`` is the end day of return ``t``.

    ``origin`` is the date of the price preceding the first return. When
    omitted it defaults to one step before ``dates[0]``.
    """

    id: str
    dates: np.ndarray
    values: np.ndarray
    origin: object = None

    def __post_init__(self):
        dates = as_date_axis(self.dates)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape != dates.shape:
            raise AlignmentError(f"{self.id}: {values.size} returns for {dates.size} dates")
        _check_increasing(dates, self.id)
        bad = np.flatnonzero(~(values > -1.0) | ~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"{self.id}: return {values[i]!r} on {dates[i]} is not > -1")
        origin = self.origin
        if origin is None:
            origin = _step_before(dates)
        else:
            origin = as_date_axis([origin])[0]
            if dates.size and not origin < dates[0]:
                raise AlignmentError(f"{self.id}: origin {origin} is not before first date {dates[0]}")
        object.__setattr__(self, "dates", _frozen(dates, dates.dtype))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "origin", origin)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class PricePanel:
    """T x N matrix of aligned levels with a shared date axis and ordered columns."""

    dates: np.ndarray
    columns: tuple
    matrix: np.ndarray

    def __post_init__(self):
        dates = as_date_axis(self.dates)
        columns = tuple(str(c) for c in self.columns)
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape != (dates.size, len(columns)):
            raise AlignmentError(
                f"panel matrix shape {matrix.shape} does not match {dates.size} dates x {len(columns)} columns"
            )
        if len(set(columns)) != len(columns):
            raise AlignmentError(f"duplicate column ids in {columns}")
        if not np.all(np.isfinite(matrix)):
            raise AlignmentError("panel contains missing or non-finite entries")
        _check_increasing(dates, "panel")
        object.__setattr__(self, "dates", _frozen(dates, dates.dtype))
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "matrix", _frozen(matrix))

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def column_index(self, column_id: str) -> int:
        try:
            return self.columns.index(column_id)
        except ValueError:
            raise AlignmentError(f"column {column_id!r} not in panel {list(self.columns)}") from None

    def series(self, column_id: str) -> PriceSeries:
        return PriceSeries(column_id, self.dates, self.matrix[:, self.column_index(column_id)])

    def __eq__(self, other):
        if not isinstance(other, PricePanel):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.dates.dtype == other.dates.dtype
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None


# -- array-level kernels (operate along axis 0) -----------------------------


def simple_returns(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if np.any(~(values > 0)):
        raise DomainError("prices must be strictly positive to form returns")
    return values[1:] / values[:-1] - 1.0


def compound(returns: np.ndarray, start=1.0) -> np.ndarray:
    """Levels ``out[0] = start``, ``out[t+1] = out[t] * (1 + r[t])``."""
    returns = np.asarray(returns, dtype=float)
    if np.any(~(returns > -1.0)):
        raise DomainError("returns must be > -1 to propagate prices")
    start = np.broadcast_to(np.asarray(start, dtype=float), returns.shape[1:])
    out = np.empty((returns.shape[0] + 1,) + returns.shape[1:])
    out[0] = start
    np.cumprod(1.0 + returns, axis=0, out=out[1:])
    out[1:] *= start
    return out


# -- series operations ------------------------------------------------------


def returns_from_prices(prices: PriceSeries) -> ReturnSeries:
    return ReturnSeries(prices.id, prices.dates[1:], simple_returns(prices.values), origin=prices.dates[0])


def prices_from_returns(returns: ReturnSeries, start: float = 1.0) -> PriceSeries:
    if not start > 0:
        raise DomainError(f"start level must be positive, got {start}")
    dates = np.concatenate([[returns.origin], returns.dates]).astype(returns.dates.dtype)
    return PriceSeries(returns.id, dates, compound(returns.values, start))


def _check_same_axis(a: ReturnSeries, b: ReturnSeries) -> None:
    if a.dates.shape != b.dates.shape or a.dates.dtype != b.dates.dtype or not np.array_equal(a.dates, b.dates):
        raise AlignmentError(f"date axes of {a.id!r} and {b.id!r} differ")


def relative_returns(sector: ReturnSeries, market: ReturnSeries) -> ReturnSeries:
    """Sector return minus market return on each day."""
    _check_same_axis(sector, market)
    return ReturnSeries(sector.id, sector.dates, sector.values - market.values, origin=sector.origin)


def recombine_returns(relative: ReturnSeries, market: ReturnSeries) -> ReturnSeries:
    _check_same_axis(relative, market)
    return ReturnSeries(relative.id, relative.dates, relative.values + market.values, origin=relative.origin)


def normalize(prices: PriceSeries, anchor: float = 1.0) -> PriceSeries:
    """Rescale so the first value equals ``anchor``."""
    if not anchor > 0:
        raise DomainError(f"anchor must be positive, got {anchor}")
    return PriceSeries(prices.id, prices.dates, prices.values / prices.values[0] * anchor)


def align_panel(series: Sequence[PriceSeries]) -> PricePanel:
    """Inner-join series on dates. Columns keep input order."""
    series = list(series)
    if not series:
        raise AlignmentError("align_panel needs at least one series")
    kinds = {np.issubdtype(s.dates.dtype, np.datetime64) for s in series}
    if len(kinds) > 1:
        raise AlignmentError("cannot align calendar-dated series with step-indexed series")
    common = reduce(np.intersect1d, (s.dates for s in series))
    if common.size < 2:
        ranges = ", ".join(f"{s.id}: {s.dates[0]}..{s.dates[-1]} ({s.dates.size} rows)" for s in series)
        raise AlignmentError(f"date intersection has {common.size} rows, need >= 2; ranges: {ranges}")
    cols = []
    for s in series:
        idx = np.searchsorted(s.dates, common)
        cols.append(s.values[idx])
    return PricePanel(common, tuple(s.id for s in series), np.column_stack(cols))
