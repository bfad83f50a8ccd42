"""Synthetic market generator: multivariate OU sector ETFs mapped to stocks through an APT factor model."""

__version__ = "0.1.0"

from .apt import (
    AptCoefficients,
    AptModel,
    FactorPanel,
    build_factor_panel,
    fit_apt,
    fit_apt_universe,
    generate_stock_returns,
    generate_stock_universe,
)
from .errors import OusynthError
from .evaluate import EvalReport, KdeEstimate, KsResult, evaluate_scenario, kde_1d, kde_2d, ks_two_sample
from .market import (
    MarketModel,
    build_training_panel,
    fit_market,
    generate_etf_scenario,
    generate_etf_scenarios,
)
from .ou import OuFit, OuParameters, estimate_ou, multi_trace, simulate_ou
from .rng import derive_seed
from .timeseries import (
    PricePanel,
    PriceSeries,
    ReturnSeries,
    align_panel,
    prices_from_returns,
    recombine_returns,
    relative_returns,
    returns_from_prices,
)

__all__ = [
    "AptCoefficients",
    "AptModel",
    "EvalReport",
    "FactorPanel",
    "KdeEstimate",
    "KsResult",
    "MarketModel",
    "OuFit",
    "OuParameters",
    "OusynthError",
    "PricePanel",
    "PriceSeries",
    "ReturnSeries",
    "align_panel",
    "build_factor_panel",
    "build_training_panel",
    "derive_seed",
    "estimate_ou",
    "evaluate_scenario",
    "fit_apt",
    "fit_apt_universe",
    "fit_market",
    "generate_etf_scenario",
    "generate_etf_scenarios",
    "generate_stock_returns",
    "generate_stock_universe",
    "kde_1d",
    "kde_2d",
    "ks_two_sample",
    "multi_trace",
    "prices_from_returns",
    "recombine_returns",
    "relative_returns",
    "returns_from_prices",
    "simulate_ou",
]
