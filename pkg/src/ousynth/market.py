"""Market-index plus sector ETF workflow.

The OU state vector holds the market's normalized price in one column and,
for every sector, a *relative* normalized price: the level obtained by
compounding (sector return - market return) from the anchor. Simulated
states are mapped back to ordinary normalized prices by recombining the
relative returns with the simulated market returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DomainError, GenerationError
from .ou import OuParameters, estimate_ou, simulate_ou
from .rng import derive_seed
from .timeseries import PricePanel, PriceSeries, align_panel, compound, simple_returns

DEFAULT_RETRIES = 16


@dataclass(frozen=True, eq=False)
class MarketModel:
    ou: OuParameters
    market_column: int
    column_ids: tuple
    anchor: float = 1.0
    x0: np.ndarray = None

    def __post_init__(self):
        ids = tuple(str(c) for c in self.column_ids)
        if len(ids) != self.ou.dim:
            raise AlignmentError(f"{len(ids)} column ids for a {self.ou.dim}-dimensional model")
        if not 0 <= int(self.market_column) < self.ou.dim:
            raise AlignmentError(f"market_column {self.market_column} out of range for dim {self.ou.dim}")
        if not self.anchor > 0:
            raise DomainError(f"anchor must be positive, got {self.anchor}")
        x0 = np.full(self.ou.dim, float(self.anchor)) if self.x0 is None else np.array(self.x0, dtype=float, order="C")
        if x0.shape != (self.ou.dim,):
            raise AlignmentError(f"x0 has shape {x0.shape}, expected ({self.ou.dim},)")
        x0.setflags(write=False)
        object.__setattr__(self, "column_ids", ids)
        object.__setattr__(self, "market_column", int(self.market_column))
        object.__setattr__(self, "anchor", float(self.anchor))
        object.__setattr__(self, "x0", x0)

    @property
    def dim(self) -> int:
        return self.ou.dim

    @property
    def market_id(self) -> str:
        return self.column_ids[self.market_column]

    def __eq__(self, other):
        if not isinstance(other, MarketModel):
            return NotImplemented
        return (
            self.ou == other.ou
            and self.market_column == other.market_column
            and self.column_ids == other.column_ids
            and self.anchor == other.anchor
            and np.array_equal(self.x0, other.x0)
        )

    __hash__ = None


def build_training_panel(prices: Sequence[PriceSeries], market_id: str, anchor: float = 1.0) -> PricePanel:
    """Market normalized prices first, then each sector's relative normalized prices."""
    ids = [p.id for p in prices]
    if market_id not in ids:
        raise AlignmentError(f"market {market_id!r} not among input series {ids}")
    if not anchor > 0:
        raise DomainError(f"anchor must be positive, got {anchor}")
    raw = align_panel(prices)
    m = raw.column_index(market_id)
    market_ret = simple_returns(raw.matrix[:, m])
    order = [m] + [j for j in range(len(ids)) if j != m]
    cols = [compound(market_ret, anchor)]
    for j in order[1:]:
        rel = simple_returns(raw.matrix[:, j]) - market_ret
        cols.append(compound(rel, anchor))
    return PricePanel(raw.dates, tuple(raw.columns[j] for j in order), np.column_stack(cols))


def fit_market(panel: PricePanel, market_id: str, anchor: float = 1.0, start: str = "last") -> MarketModel:
    """Fit the OU model to a training panel.

    ``start="last"`` continues scenarios from the last observed row;
    ``start="anchor"`` starts every column at the anchor level.
    """
    mc = panel.column_index(market_id)
    fit = estimate_ou(panel.matrix)
    if start == "last":
        x0 = panel.matrix[-1]
    elif start == "anchor":
        x0 = np.full(panel.shape[1], float(anchor))
    else:
        raise ValueError(f"start must be 'last' or 'anchor', got {start!r}")
    return MarketModel(fit.params, mc, panel.columns, anchor, x0)


def states_to_prices(states: np.ndarray, market_column: int, anchor: float = 1.0) -> np.ndarray:
    """Map simulated OU states to normalized prices anchored at ``anchor``.

    Raises ``DomainError`` if a state path or a resulting price is not
    strictly positive.
    """
    states = np.asarray(states, dtype=float)
    if not np.all(np.isfinite(states)):
        raise DomainError("simulated path is not finite")
    all_ret = simple_returns(states)
    market_ret = all_ret[:, market_column]
    total = all_ret + market_ret[:, None]
    total[:, market_column] = market_ret
    return compound(total, anchor)


def prices_to_states(prices: np.ndarray, x0, market_column: int, anchor: float = 1.0) -> np.ndarray:
    """Inverse of :func:`states_to_prices` given the starting state ``x0``."""
    prices = np.asarray(prices, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    ret = simple_returns(prices)
    market_ret = ret[:, market_column]
    rel = ret - market_ret[:, None]
    rel[:, market_column] = market_ret
    return compound(rel, x0)


def _scenario_seed(seed: int, attempt: int) -> int:
    return seed if attempt == 0 else derive_seed(seed, attempt)


def generate_etf_scenario(
    model: MarketModel, steps: int, seed: int, max_retries: int = DEFAULT_RETRIES
) -> PricePanel:
    """One synthetic normalized-price panel of shape (steps + 1) x N.

    The first draw uses ``seed`` itself. If a path goes non-positive the
    scenario is re-drawn with ``derive_seed(seed, 1)``, ``derive_seed(seed, 2)``,
    ... up to ``max_retries`` redraws.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    for attempt in range(max_retries + 1):
        states = simulate_ou(model.ou, model.x0, steps, _scenario_seed(seed, attempt))
        try:
            prices = states_to_prices(states, model.market_column, model.anchor)
        except DomainError:
            continue
        return PricePanel(np.arange(steps + 1), model.column_ids, prices)
    raise GenerationError(
        f"every one of {max_retries + 1} draws for seed {seed} produced a non-positive price path"
    )


def generate_etf_scenarios(
    model: MarketModel, steps: int, n_traces: int, base_seed: int, max_retries: int = DEFAULT_RETRIES
) -> list[PricePanel]:
    """Trace k is ``generate_etf_scenario(model, steps, derive_seed(base_seed, k))``."""
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    return [
        generate_etf_scenario(model, steps, derive_seed(base_seed, k), max_retries) for k in range(n_traces)
    ]
