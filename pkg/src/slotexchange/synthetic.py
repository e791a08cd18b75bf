"""Synthetic residential load profiles for when no plan dataset is at hand.

Profiles live on a power-of-two grid (default 2**-7 kWh per slot, about
7.8 Wh). Equal consumption values in different households then compare
equal exactly, which slot matching relies on, and every sum of plan values
is exact in floating point.
"""

from __future__ import annotations

import numpy as np

from slotexchange.plans import PlanSet, generate_plans


GRID = 2.0 ** -7


def preferred_profile(d: int, rng: np.random.Generator, grid: float = GRID) -> np.ndarray:
    """One household's preferred consumption, in multiples of ``grid`` kWh.

    A small standby load plus a handful of appliance runs, biased towards an
    evening peak in the last third of the horizon.
    """
    units = np.full(d, int(rng.integers(1, 4)), dtype=np.int64)
    for _ in range(2 + int(rng.poisson(2))):
        if rng.random() < 0.6:
            start = int(rng.integers(d // 2, d))
        else:
            start = int(rng.integers(0, d))
        length = int(rng.integers(2, max(3, d // 8)))
        power = int(rng.integers(3, 26))
        units[start:start + length] += power
    return units * grid


def synthetic_plan_sets(n: int, d: int = 144, k: int = 10, flexibility: float = 0.1,
                        seed: int = 0, grid: float = GRID) -> list:
    """``n`` plan sets: a synthetic preferred profile per agent plus ``k - 1``
    alternates from :func:`generate_plans`."""
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 63 - 1, size=n)
    out = []
    for i in range(n):
        pref = preferred_profile(d, rng, grid)
        out.append(generate_plans(pref, flexibility, k, int(seeds[i]), grid=grid))
    return out
