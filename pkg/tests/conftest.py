"""Shared fixtures and independent oracles used across the suite."""

import math

import numpy as np
import pytest

from aoicache import CacheEntry, LoadPoint, ServiceRates, mean_aoi


@pytest.fixture
def symmetric_rates() -> ServiceRates:
    return ServiceRates(mu_d=1000.0, mu_r=1000.0)


def refresh_probability_oracle(nbar: float, tail: float = 1e-12) -> float:
    """Brute-force refresh probability: sum 1/(n+1) against the Poisson pmf.

    Truncates once the accumulated pmf mass leaves less than `tail`.
    Independent of the closed form under test.
    """
    if nbar == 0.0:
        return 1.0
    total = 0.0
    cum = 0.0
    pmf = math.exp(-nbar)
    n = 0
    while cum < 1.0 - tail:
        total += pmf / (n + 1)
        cum += pmf
        n += 1
        pmf *= nbar / n
    return total


def window_for_aoi(rates: ServiceRates, arrival_rate: float, target: float) -> float:
    """Window whose predicted mean age equals `target`, by bisection."""
    lo = rates.aoi_floor
    if target < lo:
        raise ValueError("target below the AoI floor")
    hi = 2.0 * target + 1.0 / arrival_rate + lo

    def aoi(window: float) -> float:
        return mean_aoi(LoadPoint(arrival_rate, window, rates))

    while aoi(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if aoi(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def reference_service_process(arrivals, item_index, fetch, delivery, windows, policy):
    """Chronological object-level reference for the simulation kernel.

    Walks requests in arrival order against per-item CacheEntry state and a
    single busy-until clock.  Returns (service_start, departure, refreshed,
    aoi_at_delivery) lists computed with the same float operations as the
    kernel, so agreement must be exact.
    """
    entries = [CacheEntry(item_id=c) for c in range(len(windows))]
    free_at = 0.0
    starts, departures, refresheds, aois = [], [], [], []
    for i in range(len(arrivals)):
        start = arrivals[i] if arrivals[i] > free_at else free_at
        entry = entries[item_index[i]]
        age = entry.age(start)
        if policy == "always_refresh":
            do_refresh = True
        elif policy == "never_refresh":
            do_refresh = entry.version_timestamp == -math.inf
        else:
            do_refresh = age >= windows[item_index[i]]
        if do_refresh:
            entry.version_timestamp = start
            aoi = fetch[i] + delivery[i]
            dep = start + fetch[i] + delivery[i]
        else:
            dep = start + delivery[i]
            aoi = dep - entry.version_timestamp
        free_at = dep
        starts.append(start)
        departures.append(dep)
        refresheds.append(do_refresh)
        aois.append(aoi)
    return (
        np.array(starts),
        np.array(departures),
        np.array(refresheds),
        np.array(aois),
    )
