"""Discrete multivariate Ornstein-Uhlenbeck process: estimation and simulation.

The recursion, for step index ``t = 1, 2, ...``::

    x_t = x_{t-1} + A (mu - x_{t-1} + gamma * t) + eps_t,    eps_t ~ N(0, Sigma)

Rearranged, ``dx_t = -A x_{t-1} + A mu + (A gamma) t + eps_t``, which is a
linear regression of increments on ``[x_{t-1}, t, 1]``. All equations share
the same regressors, so equation-by-equation OLS and joint OLS coincide.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DecompositionError, InsufficientDataError, InvariantViolationError, NearSingularWarning
from .rng import derive_seed, make_rng

SYMMETRY_TOL = 1e-10
SINGULAR_COND = 1e12
JITTER_START = 1e-12
JITTER_CAP = 1e-6


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a PSD covariance.

    Falls back to diagonal jitter ``1e-12 * max(diag)``, escalating x10 up to
    ``1e-6 * max(diag)``. An all-zero matrix yields an all-zero factor.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.any(sigma):
        return np.zeros_like(sigma)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.max(np.diag(sigma)))
    if scale <= 0:
        raise DecompositionError("covariance has no positive diagonal entry but is not zero")
    eye = np.eye(sigma.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_CAP * 1.0000001:
        try:
            return np.linalg.cholesky(sigma + jitter * scale * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise DecompositionError(
        f"covariance is not positive semidefinite even with jitter {JITTER_CAP:g} x max diagonal"
    )


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OuParameters:
    """Reversion matrix A, long-term means mu, trend slopes gamma, noise covariance Sigma."""

    a_matrix: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        a = _readonly(self.a_matrix)
        mu = _readonly(self.mu)
        gamma = _readonly(self.gamma)
        sigma = _readonly(self.sigma)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvariantViolationError(f"a_matrix must be square, got shape {a.shape}")
        n = a.shape[0]
        for name, arr, shape in (("mu", mu, (n,)), ("gamma", gamma, (n,)), ("sigma", sigma, (n, n))):
            if arr.shape != shape:
                raise InvariantViolationError(f"{name} has shape {arr.shape}, expected {shape}")
        for name, arr in (("a_matrix", a), ("mu", mu), ("gamma", gamma), ("sigma", sigma)):
            if not np.all(np.isfinite(arr)):
                raise InvariantViolationError(f"{name} contains non-finite values")
        asym = float(np.max(np.abs(sigma - sigma.T))) if n else 0.0
        if asym > SYMMETRY_TOL:
            raise InvariantViolationError(f"sigma is not symmetric (max |S - S^T| = {asym:.3g})")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_chol", _readonly(cholesky_factor(sigma)))

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def noise_factor(self) -> np.ndarray:
        """Cholesky factor L with L L^T = Sigma (jittered if Sigma is singular)."""
        return self._chol

    def __eq__(self, other):
        if not isinstance(other, OuParameters):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("a_matrix", "mu", "gamma", "sigma")
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class OuFit:
    params: OuParameters
    residuals: np.ndarray
    r_squared: np.ndarray
    condition_number: float
    near_singular: bool = False


def estimate_ou(x: np.ndarray) -> OuFit:
    """Fit the OU recursion to a T x N panel by ordinary least squares.

    Regresses ``x_t - x_{t-1}`` on ``[x_{t-1}, t, 1]`` for ``t = 1 .. T-1``
    and maps the coefficients back to ``A = -B``, ``A mu = c``,
    ``A gamma = d``. Sigma is the residual covariance with denominator
    ``(T - 1) - (N + 2)``.

    If ``cond(A) > 1e12`` the means and trends come from the pseudo-inverse,
    ``near_singular`` is set on the result and a ``NearSingularWarning`` is
    emitted.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InsufficientDataError(f"expected a T x N matrix, got shape {x.shape}")
    T, n = x.shape
    if T < n + 4:
        raise InsufficientDataError(
            f"{T} rows for {n} series; need at least {n + 4} (more increments than the {n + 2} coefficients per series)"
        )
    if not np.all(np.isfinite(x)):
        raise InsufficientDataError("panel contains non-finite values")

    dx = np.diff(x, axis=0)
    steps = np.arange(1, T, dtype=float)
    design = np.column_stack([x[:-1], steps, np.ones(T - 1)])
    # column scaling keeps the trend column (up to T) from dominating conditioning
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0] = 1.0
    coef_scaled, *_ = np.linalg.lstsq(design / scale, dx, rcond=None)
    coef = coef_scaled / scale[:, None]

    a_matrix = -coef[:n].T
    d = coef[n]
    c = coef[n + 1]
    residuals = dx - design @ coef

    dof = (T - 1) - (n + 2)
    sigma = residuals.T @ residuals / dof
    sigma = 0.5 * (sigma + sigma.T)

    cond = float(np.linalg.cond(a_matrix))
    near_singular = not np.isfinite(cond) or cond > SINGULAR_COND
    if near_singular:
        pinv = np.linalg.pinv(a_matrix)
        mu, gamma = pinv @ c, pinv @ d
        warnings.warn(
            f"reversion matrix is near-singular (cond={cond:.3g}); mu and gamma recovered by pseudo-inverse",
            NearSingularWarning,
            stacklevel=2,
        )
    else:
        sol, *_ = np.linalg.lstsq(a_matrix, np.column_stack([c, d]), rcond=None)
        mu, gamma = sol[:, 0], sol[:, 1]

    ss_res = np.sum(residuals**2, axis=0)
    ss_tot = np.sum((dx - dx.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), 1.0)

    return OuFit(
        params=OuParameters(a_matrix, mu, gamma, sigma),
        residuals=_readonly(residuals),
        r_squared=_readonly(r2),
        condition_number=cond,
        near_singular=near_singular,
    )


def simulate_ou(params: OuParameters, x0, steps: int, seed: int) -> np.ndarray:
    """Simulate ``steps`` increments from ``x0``; returns a (steps + 1) x N matrix.

    Row 0 is ``x0``. The noise for step t is ``L z_t`` with ``L`` the
    Cholesky factor of Sigma and ``z_t`` standard normal draws from
    ``make_rng(seed)``, drawn as one (steps x N) block.
    """
    n = params.dim
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")

    rng = make_rng(seed)
    z = rng.standard_normal((steps, n))
    noise = z @ params.noise_factor.T

    a = params.a_matrix
    m = np.eye(n) - a
    t = np.arange(1, steps + 1, dtype=float)
    drift = (a @ params.mu)[None, :] + t[:, None] * (a @ params.gamma)[None, :] + noise

    out = np.empty((steps + 1, n))
    out[0] = x0
    prev = x0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            prev = m @ prev + drift[k]
            out[k + 1] = prev
    return out


def multi_trace(params: OuParameters, x0, steps: int, n_traces: int, base_seed: int) -> list[np.ndarray]:
    """Independent traces; trace k uses ``derive_seed(base_seed, k)``."""
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    return [simulate_ou(params, x0, steps, derive_seed(base_seed, k)) for k in range(n_traces)]
