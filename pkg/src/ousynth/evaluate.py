"""Fidelity checks of synthetic against real series.

Two-sample Kolmogorov-Smirnov tests, Gaussian kernel density estimates in
one and two dimensions, and moment tables.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DegenerateSampleError, DomainError
from .timeseries import PricePanel, simple_returns

log = logging.getLogger(__name__)

KS_SERIES_TERMS = 100
# below this lambda the alternating series converges poorly; use the dual theta form
_KS_DUAL_BELOW = 1.18
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int


@dataclass(frozen=True, eq=False)
class KdeEstimate:
    """Density on a grid. For ``kind == "bivariate"`` ``density[i, j]`` is at ``(grid[i], grid_y[j])``."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: object
    kind: str = "univariate"
    grid_y: np.ndarray | None = None


@dataclass(frozen=True)
class Moments:
    """Mean, sample std (ddof=1), skewness and excess kurtosis (population moment ratios)."""

    mean: float
    std: float
    skewness: float
    excess_kurtosis: float


@dataclass
class EvalReport:
    columns: tuple
    market_id: str
    significance: float
    ks: dict = field(default_factory=dict)
    moments_real: dict = field(default_factory=dict)
    moments_synth: dict = field(default_factory=dict)
    kde: dict = field(default_factory=dict)
    kde2d: dict = field(default_factory=dict)

    @property
    def pass_count(self) -> int:
        return sum(1 for r in self.ks.values() if r.p_value > self.significance)


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the asymptotic Kolmogorov distribution.

    ``Q(lam) = 2 sum_{k=1..100} (-1)^(k-1) exp(-2 k^2 lam^2)`` for
    ``lam >= 1.18``. Below that the same function is evaluated through the
    Jacobi theta identity ``1 - sqrt(2 pi)/lam sum exp(-(2k-1)^2 pi^2 / (8 lam^2))``,
    which converges where the alternating series does not (it sums to 0 at lam=0).
    """
    if lam <= 0.0:
        return 1.0
    if lam < _KS_DUAL_BELOW:
        total = 0.0
        for k in range(1, 20):
            total += math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8.0 * lam * lam))
        q = 1.0 - _SQRT_2PI / lam * total
    else:
        q = 0.0
        for k in range(1, KS_SERIES_TERMS + 1):
            q += (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        q *= 2.0
    return min(1.0, max(0.0, q))


def ks_two_sample(a, b) -> KsResult:
    """Two-sample KS test with the asymptotic p-value.

    D is the exact supremum of the ECDF difference, evaluated at every pooled
    sample point and formed as one integer ratio so it is correctly rounded.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise DomainError("KS test needs two non-empty samples")
    if np.isnan(a).any() or np.isnan(b).any():
        raise DomainError("KS samples contain NaN")
    pooled = np.concatenate([a, b])
    ca = np.searchsorted(a, pooled, side="right").astype(np.int64)
    cb = np.searchsorted(b, pooled, side="right").astype(np.int64)
    d_num = int(np.max(np.abs(ca * n2 - cb * n1)))
    d = d_num / (n1 * n2)
    ne = n1 * n2 / (n1 + n2)
    sq = math.sqrt(ne)
    lam = (sq + 0.12 + 0.11 / sq) * d
    return KsResult(statistic=d, p_value=kolmogorov_sf(lam), n1=n1, n2=n2)


def scott_bandwidth(samples, dim: int = 1) -> float:
    samples = np.asarray(samples, dtype=float)
    return float(np.std(samples, ddof=1) * samples.size ** (-1.0 / (dim + 4)))


def _gauss_matrix(grid: np.ndarray, samples: np.ndarray, h: float, chunk: int = 4096) -> np.ndarray:
    """Unnormalised kernel sums at each grid point, accumulated over sample chunks."""
    out = np.zeros(grid.size)
    for s in range(0, samples.size, chunk):
        u = (grid[:, None] - samples[None, s : s + chunk]) / h
        out += np.exp(-0.5 * u * u).sum(axis=1)
    return out


def kde_1d(samples, grid=None, bandwidth: float | None = None, n_points: int = 512) -> KdeEstimate:
    """Gaussian KDE. Scott's rule ``h = std * n^(-1/5)`` unless ``bandwidth`` is given.

    The default grid has ``n_points`` points on ``[min - 5h, max + 5h]``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSampleError("KDE needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("KDE samples contain non-finite values")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("KDE sample has zero variance")
    h = scott_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")
    if grid is None:
        grid = np.linspace(x.min() - 5 * h, x.max() + 5 * h, n_points)
    grid = np.asarray(grid, dtype=float)
    dens = _gauss_matrix(grid, x, h) / (x.size * h * math.sqrt(2 * math.pi))
    return KdeEstimate(grid=grid, density=dens, bandwidth=h)


def kde_2d(x, y, grid_x=None, grid_y=None, n_points: int = 64, bandwidth=None) -> KdeEstimate:
    """Product-Gaussian KDE with per-axis Scott bandwidths ``std * n^(-1/6)``.

    Returns density of shape ``(len(grid_x), len(grid_y))``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise AlignmentError(f"paired samples differ in length: {x.size} vs {y.size}")
    if x.size < 3:
        raise DegenerateSampleError("2D KDE needs at least 3 paired samples")
    cov = np.cov(x, y)
    if not (cov[0, 0] > 0 and cov[1, 1] > 0) or np.linalg.det(cov) <= 1e-12 * cov[0, 0] * cov[1, 1]:
        raise DegenerateSampleError("paired sample has a degenerate covariance")
    if bandwidth is None:
        hx, hy = scott_bandwidth(x, 2), scott_bandwidth(y, 2)
    else:
        hx, hy = (float(v) for v in bandwidth)
    if grid_x is None:
        grid_x = np.linspace(x.min() - 5 * hx, x.max() + 5 * hx, n_points)
    if grid_y is None:
        grid_y = np.linspace(y.min() - 5 * hy, y.max() + 5 * hy, n_points)
    grid_x = np.asarray(grid_x, dtype=float)
    grid_y = np.asarray(grid_y, dtype=float)
    kx = np.exp(-0.5 * ((grid_x[:, None] - x[None, :]) / hx) ** 2)
    ky = np.exp(-0.5 * ((grid_y[:, None] - y[None, :]) / hy) ** 2)
    dens = kx @ ky.T / (x.size * 2 * math.pi * hx * hy)
    return KdeEstimate(grid=grid_x, density=dens, bandwidth=np.diag([hx, hy]), kind="bivariate", grid_y=grid_y)


def moments(samples) -> Moments:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSampleError("moments need at least 2 samples")
    mean = float(x.mean())
    dev = x - mean
    m2 = float(np.mean(dev**2))
    if m2 == 0:
        skew = kurt = float("nan")
    else:
        skew = float(np.mean(dev**3) / m2**1.5)
        kurt = float(np.mean(dev**4) / m2**2 - 3.0)
    return Moments(mean, float(np.std(x, ddof=1)), skew, kurt)


def _pooled_returns(panels: Sequence[PricePanel], columns) -> dict:
    return {
        col: np.concatenate([simple_returns(p.matrix[:, p.column_index(col)]) for p in panels]) for col in columns
    }


def _shared_grid(a: np.ndarray, b: np.ndarray, n_points: int, dim: int = 1) -> np.ndarray:
    h = max(scott_bandwidth(a, dim), scott_bandwidth(b, dim))
    lo = min(a.min(), b.min()) - 5 * h
    hi = max(a.max(), b.max()) + 5 * h
    return np.linspace(lo, hi, n_points)


def evaluate_scenario(
    real: PricePanel,
    synthetic: PricePanel | Sequence[PricePanel],
    significance: float = 0.05,
    market_id: str | None = None,
    grid_points: int = 256,
    grid2d_points: int = 48,
) -> EvalReport:
    """Compare return distributions of a real panel with one or more synthetic panels.

    Synthetic returns from several panels are pooled (returns never span two
    panels). Joint densities pair the market column with every other column
    and share one grid between real and synthetic so the contours overlay.
    """
    synth = [synthetic] if isinstance(synthetic, PricePanel) else list(synthetic)
    if not synth:
        raise ValueError("no synthetic panels given")
    cols = set(real.columns)
    for p in synth:
        if set(p.columns) != cols:
            missing = sorted(cols - set(p.columns))
            extra = sorted(set(p.columns) - cols)
            raise AlignmentError(f"column sets differ: missing from synthetic {missing}, extra in synthetic {extra}")
    market_id = real.columns[0] if market_id is None else market_id
    real.column_index(market_id)

    r_real = _pooled_returns([real], real.columns)
    r_syn = _pooled_returns(synth, real.columns)
    report = EvalReport(columns=real.columns, market_id=market_id, significance=significance)

    for col in real.columns:
        a, b = r_real[col], r_syn[col]
        report.ks[col] = ks_two_sample(a, b)
        report.moments_real[col] = moments(a)
        report.moments_synth[col] = moments(b)
        try:
            grid = _shared_grid(a, b, grid_points)
            report.kde[col] = (kde_1d(a, grid), kde_1d(b, grid))
        except DegenerateSampleError as exc:
            log.warning("skipping KDE for %s: %s", col, exc)
            report.kde[col] = None

    ma, mb = r_real[market_id], r_syn[market_id]
    for col in real.columns:
        if col == market_id:
            continue
        sa, sb = r_real[col], r_syn[col]
        try:
            gx = _shared_grid(ma, mb, grid2d_points, dim=2)
            gy = _shared_grid(sa, sb, grid2d_points, dim=2)
            report.kde2d[(market_id, col)] = (kde_2d(ma, sa, gx, gy), kde_2d(mb, sb, gx, gy))
        except DegenerateSampleError as exc:
            log.warning("skipping joint KDE for %s/%s: %s", market_id, col, exc)
            report.kde2d[(market_id, col)] = None
    return report
