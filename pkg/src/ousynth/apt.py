"""APT factor regression and synthetic stock generation.

Factors are the market return followed by each sector's return relative to
the market, all computed from a normalized ETF price panel. A stock's
return is modelled as ``r(t) = alpha + beta . f(t) + eps(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DomainError, GenerationError, InsufficientDataError, RankDeficientError
from .rng import derive_seed, make_rng
from .timeseries import PricePanel, ReturnSeries, as_date_axis, compound, simple_returns

NOISE_MODES = ("gaussian", "bootstrap", "none")
DEFAULT_RETRIES = 16
RANK_TOL = 1e-10


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FactorPanel:
    """T x K factor values; column 0 is the market return, the rest sector relative returns.

    ``dates`` are return end days; ``origin`` is the price date before the first one.
    """

    dates: np.ndarray
    columns: tuple
    matrix: np.ndarray
    origin: object = None

    def __post_init__(self):
        dates = as_date_axis(self.dates)
        matrix = np.asarray(self.matrix, dtype=float)
        columns = tuple(str(c) for c in self.columns)
        if matrix.ndim != 2 or matrix.shape != (dates.size, len(columns)):
            raise AlignmentError(f"factor matrix {matrix.shape} vs {dates.size} dates x {len(columns)} columns")
        if len(columns) < 2:
            raise AlignmentError("a factor panel needs at least 2 factors")
        if not np.all(np.isfinite(matrix)):
            raise AlignmentError("factor panel contains missing values")
        origin = self.origin
        if origin is None:
            origin = dates[0] - (np.timedelta64(1, "D") if np.issubdtype(dates.dtype, np.datetime64) else 1)
        object.__setattr__(self, "dates", _readonly(dates, dates.dtype))
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "matrix", _readonly(matrix))
        object.__setattr__(self, "origin", as_date_axis([origin])[0])

    @property
    def k(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class AptCoefficients:
    stock_id: str
    alpha: float
    betas: np.ndarray
    resid_sigma: float
    residuals: np.ndarray
    r_squared: float = float("nan")

    def __post_init__(self):
        if not self.resid_sigma >= 0:
            raise DomainError(f"{self.stock_id}: resid_sigma must be >= 0")
        object.__setattr__(self, "stock_id", str(self.stock_id))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "resid_sigma", float(self.resid_sigma))
        object.__setattr__(self, "r_squared", float(self.r_squared))
        object.__setattr__(self, "betas", _readonly(self.betas))
        object.__setattr__(self, "residuals", _readonly(self.residuals))

    def __eq__(self, other):
        if not isinstance(other, AptCoefficients):
            return NotImplemented
        return (
            self.stock_id == other.stock_id
            and self.alpha == other.alpha
            and np.array_equal(self.betas, other.betas)
            and self.resid_sigma == other.resid_sigma
            and np.array_equal(self.residuals, other.residuals)
            and np.array_equal(self.r_squared, other.r_squared, equal_nan=True)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AptModel:
    """A fitted stock universe: factor identities plus per-stock coefficients."""

    factor_ids: tuple
    coefficients: tuple

    def __post_init__(self):
        fids = tuple(str(f) for f in self.factor_ids)
        coeffs = tuple(self.coefficients)
        for c in coeffs:
            if c.betas.shape != (len(fids),):
                raise AlignmentError(f"{c.stock_id}: {c.betas.size} betas for {len(fids)} factors")
        object.__setattr__(self, "factor_ids", fids)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def stock_ids(self) -> tuple:
        return tuple(c.stock_id for c in self.coefficients)

    def __eq__(self, other):
        if not isinstance(other, AptModel):
            return NotImplemented
        return self.factor_ids == other.factor_ids and self.coefficients == other.coefficients

    __hash__ = None


def build_factor_panel(etf_panel: PricePanel, market_column: int) -> FactorPanel:
    n = etf_panel.shape[1]
    if not 0 <= market_column < n:
        raise AlignmentError(f"market_column {market_column} out of range for {n} columns")
    ret = simple_returns(etf_panel.matrix)
    market = ret[:, market_column]
    others = [j for j in range(n) if j != market_column]
    matrix = np.column_stack([market] + [ret[:, j] - market for j in others])
    columns = (etf_panel.columns[market_column],) + tuple(etf_panel.columns[j] for j in others)
    return FactorPanel(etf_panel.dates[1:], columns, matrix, origin=etf_panel.dates[0])


def factors_for_model(model: AptModel, etf_panel: PricePanel) -> FactorPanel:
    """Factor panel from ``etf_panel`` with columns ordered as the model's factors."""
    missing = [f for f in model.factor_ids if f not in etf_panel.columns]
    if missing:
        raise AlignmentError(f"ETF panel lacks factor columns {missing}")
    idx = [etf_panel.column_index(f) for f in model.factor_ids]
    ordered = PricePanel(etf_panel.dates, model.factor_ids, etf_panel.matrix[:, idx])
    return build_factor_panel(ordered, 0)


def _collinear_columns(design: np.ndarray, names: Sequence[str]) -> list[str]:
    norms = np.linalg.norm(design, axis=0)
    scaled = design / np.where(norms > 0, norms, 1.0)
    _, s, vt = np.linalg.svd(scaled, full_matrices=False)
    if s.size == 0:
        return []
    null = vt[s <= RANK_TOL * max(s[0], 1.0)]
    involved = np.any(np.abs(null) > 1e-6, axis=0) if null.size else np.zeros(len(names), bool)
    return [names[i] for i in np.flatnonzero(involved)]


def fit_apt(stock_returns: ReturnSeries, factors: FactorPanel) -> AptCoefficients:
    """OLS with intercept of stock returns on the factor columns."""
    if stock_returns.dates.shape != factors.dates.shape or not np.array_equal(stock_returns.dates, factors.dates):
        raise AlignmentError(f"{stock_returns.id}: return dates do not match the factor panel")
    y = stock_returns.values
    T, k = factors.matrix.shape
    if T < k + 2:
        raise InsufficientDataError(f"{stock_returns.id}: {T} returns for {k} factors; need at least {k + 2}")
    design = np.column_stack([np.ones(T), factors.matrix])
    names = ["intercept", *factors.columns]
    collinear = _collinear_columns(design, names)
    if collinear:
        raise RankDeficientError(f"{stock_returns.id}: factor matrix is rank deficient; collinear columns: {collinear}")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return AptCoefficients(
        stock_id=stock_returns.id,
        alpha=coef[0],
        betas=coef[1:],
        resid_sigma=np.sqrt(ss_res / (T - k - 1)),
        residuals=resid,
        r_squared=r2,
    )


def fit_apt_universe(stock_returns: Sequence[ReturnSeries], factors: FactorPanel) -> AptModel:
    return AptModel(factors.columns, tuple(fit_apt(r, factors) for r in stock_returns))


def _draw_returns(coeffs: AptCoefficients, factors: FactorPanel, noise_mode: str, seed: int) -> np.ndarray:
    if noise_mode not in NOISE_MODES:
        raise ValueError(f"noise_mode must be one of {NOISE_MODES}, got {noise_mode!r}")
    if coeffs.betas.size != factors.k:
        raise AlignmentError(f"{coeffs.stock_id}: {coeffs.betas.size} betas for {factors.k} factors")
    T = factors.matrix.shape[0]
    mean = coeffs.alpha + factors.matrix @ coeffs.betas
    if noise_mode == "none":
        return mean
    rng = make_rng(seed)
    if noise_mode == "gaussian":
        return mean + coeffs.resid_sigma * rng.standard_normal(T)
    if coeffs.residuals.size == 0:
        raise DomainError(f"{coeffs.stock_id}: bootstrap noise needs stored residuals")
    return mean + coeffs.residuals[rng.integers(0, coeffs.residuals.size, size=T)]


def generate_stock_returns(
    coeffs: AptCoefficients, factors: FactorPanel, noise_mode: str = "gaussian", seed: int = 0
) -> ReturnSeries:
    """``alpha + betas . f(t) + eps(t)``.

    ``gaussian`` draws i.i.d. N(0, resid_sigma^2); ``bootstrap`` resamples the
    stored residuals with replacement; ``none`` adds nothing.
    """
    values = _draw_returns(coeffs, factors, noise_mode, seed)
    return ReturnSeries(coeffs.stock_id, factors.dates, values, origin=factors.origin)


def generate_stock_universe(
    coeff_set: Sequence[AptCoefficients],
    factors: FactorPanel,
    noise_mode: str = "gaussian",
    base_seed: int = 0,
    max_retries: int = DEFAULT_RETRIES,
) -> PricePanel:
    """Normalized price panel, one column per stock, anchored at 1.

    Stock i draws with ``derive_seed(base_seed, i)``; a draw containing a
    return <= -1 is replaced by ``derive_seed(stock_seed, attempt)``.
    """
    coeff_set = list(coeff_set)
    if not coeff_set:
        raise ValueError("coeff_set is empty")
    ks = {c.betas.size for c in coeff_set}
    if len(ks) != 1:
        raise AlignmentError(f"coefficient sets disagree on factor count: {sorted(ks)}")
    cols = []
    for i, coeffs in enumerate(coeff_set):
        stock_seed = derive_seed(base_seed, i)
        for attempt in range(max_retries + 1):
            seed = stock_seed if attempt == 0 else derive_seed(stock_seed, attempt)
            values = _draw_returns(coeffs, factors, noise_mode, seed)
            if np.all(values > -1.0):
                cols.append(compound(values, 1.0))
                break
        else:
            raise GenerationError(f"{coeffs.stock_id}: {max_retries + 1} draws all produced a return <= -1")
    dates = np.concatenate([[factors.origin], factors.dates]).astype(factors.dates.dtype)
    return PricePanel(dates, tuple(c.stock_id for c in coeff_set), np.column_stack(cols))
