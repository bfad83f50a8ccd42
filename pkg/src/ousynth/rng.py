"""Seed handling.

All randomness in the package goes through :func:`make_rng`, which builds a
``numpy.random.Generator`` on the PCG64 bit generator. Normal deviates come
from ``Generator.standard_normal`` (numpy's ziggurat), so a given seed gives
the same stream on every platform running the same numpy major release.

Child seeds are derived with :func:`derive_seed`::

    derive_seed(base, k1, k2, ...) =
        SeedSequence(entropy=base, spawn_key=(k1, k2, ...)).generate_state(1, uint64)[0]

which is the same hash numpy uses for ``SeedSequence.spawn``. Trace ``k`` of a
batch run with base seed ``s`` uses ``derive_seed(s, k)``.
"""

from __future__ import annotations

import os

import numpy as np

SEED_MAX = 2**64 - 1
SEED_ENV_VAR = "OUSYNTH_SEED"


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must lie in [0, 2**64 - 1], got {seed}")
    return seed


def derive_seed(base_seed: int, *path: int) -> int:
    """Deterministically mix ``base_seed`` with integer keys into a new 64-bit seed."""
    base_seed = check_seed(base_seed)
    keys = tuple(check_seed(k) for k in path)
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=keys)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def default_seed(fallback: int = 0) -> int:
    """Seed from ``$OUSYNTH_SEED`` if set, else ``fallback``."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return fallback
    try:
        return check_seed(int(raw.strip(), 0))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{SEED_ENV_VAR}={raw!r} is not a valid seed") from exc
