"""Closed-form performance predictions for the refreshing-window policy.

The queue is treated as M/M/1 with a mean service time reflecting the
refresh mix, and per-cycle request counts are treated as Poisson around
their mean.  Both devices make the formulas exact in the limits (window at
the AoI floor, or many cache serves per refresh cycle at light load) while
intermediate operating points can deviate from the faithful two-phase
dynamics simulated in :mod:`aoicache.desim`; ``mg1_delay`` quantifies the
service-distribution part of that gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Unstable
from .model import Catalog, ServiceRates

# Below this exponent magnitude (1 - exp(-x))/x switches to a series to
# avoid catastrophic cancellation.
_SERIES_CUTOFF = 1e-8


def _expm1_ratio(x: float) -> float:
    """(1 - exp(-x)) / x for x >= 0, continuously extended to 1 at x = 0."""
    if x < _SERIES_CUTOFF:
        return 1.0 - x / 2.0 + x * x / 6.0
    return -math.expm1(-x) / x


@dataclass(frozen=True)
class LoadPoint:
    """One operating point: request rate, refreshing window, service rates."""

    arrival_rate: float
    window: float
    rates: ServiceRates

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be positive")
        if self.window < self.rates.aoi_floor:
            raise ValueError(
                f"window {self.window} below AoI floor {self.rates.aoi_floor}"
            )


@dataclass(frozen=True)
class Prediction:
    """Closed-form performance summary at one operating point.

    mean_delay is math.inf when the point saturates the server and the
    caller asked for the prediction anyway (allow_unstable=True).
    """

    direct_serves_per_cycle: float
    refresh_probability: float
    refresh_frequency: float
    mean_aoi: float
    mean_delay: float
    service_time_mean: float
    service_time_variance: float


@dataclass(frozen=True)
class CatalogPrediction:
    """Per-item predictions plus the system-level summary."""

    per_item: tuple[Prediction, ...]
    system: Prediction


def direct_serves_per_cycle(point: LoadPoint) -> float:
    """Expected cache serves between consecutive refreshes of the item.

    Zero exactly when the window sits at the AoI floor.
    """
    return point.arrival_rate * (point.window - point.rates.aoi_floor)


def refresh_probability(direct_serves: float) -> float:
    """Probability that a request finds the cache stale and refreshes it.

    (1 - exp(-n)) / n over the expected per-cycle serves n, extended to 1 at
    n = 0; convex and strictly decreasing, ~1/n for large n.
    """
    if direct_serves < 0:
        raise ValueError("direct_serves must be >= 0")
    if direct_serves == 0.0:
        return 1.0
    return _expm1_ratio(direct_serves)


def refresh_frequency(point: LoadPoint) -> float:
    """Mean refreshes per second; concave increasing in the arrival rate.

    Saturates at 1/(window - floor) as the arrival rate grows.
    """
    return refresh_probability(direct_serves_per_cycle(point)) * point.arrival_rate


def mean_aoi(point: LoadPoint) -> float:
    """Mean age of delivered content, seconds.

    Convex increasing in the window with slope tending to 1/2, concave
    increasing in the arrival rate, never below the AoI floor.
    """
    floor = point.rates.aoi_floor
    half_span = 0.5 * (point.window - floor)
    p = refresh_probability(direct_serves_per_cycle(point))
    return 0.5 * (point.window + floor) - half_span * p


def service_time_moments(p: float, rates: ServiceRates) -> tuple[float, float]:
    """Mean and variance of the two-phase service time at refresh mix p.

    A refreshing request occupies the channel for a fetch plus a delivery,
    a cache hit for a delivery only.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    mean = p / rates.mu_r + 1.0 / rates.mu_d
    variance = (
        1.0 / rates.mu_d**2 + 1.0 / rates.mu_r**2 - (1.0 - p) ** 2 / rates.mu_r**2
    )
    return mean, variance


def _mm1_delay(p: float, arrival_rate: float, rates: ServiceRates) -> float:
    mean_service = p / rates.mu_r + 1.0 / rates.mu_d
    slack = 1.0 - arrival_rate * mean_service
    if slack <= 0.0:
        raise Unstable(
            f"offered load {arrival_rate * mean_service:.4f} >= 1 at refresh"
            f" probability {p:.4f}"
        )
    return mean_service / slack


def mean_delay(point: LoadPoint) -> float:
    """Mean sojourn time (queueing plus service), seconds.

    Exponential-service approximation at the mixed mean; nonincreasing in
    the window and bounded by delay_bounds.  Raises Unstable when the load
    saturates the server.
    """
    p = refresh_probability(direct_serves_per_cycle(point))
    return _mm1_delay(p, point.arrival_rate, point.rates)


def delay_bounds(
    rates: ServiceRates, arrival_rate: float
) -> tuple[float | None, float | None]:
    """(d_max, d_min): mean delays when refreshing always and never.

    d_max is the eager-refresh delay (window at the floor), d_min the
    no-refresh delay (window unbounded).  A bound is None when its load
    saturates the server.
    """
    if arrival_rate < 0:
        raise ValueError("arrival_rate must be >= 0")
    harmonic = rates.mu_r * rates.mu_d / (rates.mu_r + rates.mu_d)
    d_max = 1.0 / (harmonic - arrival_rate) if arrival_rate < harmonic else None
    d_min = 1.0 / (rates.mu_d - arrival_rate) if arrival_rate < rates.mu_d else None
    return d_max, d_min


def mg1_delay(p: float, arrival_rate: float, rates: ServiceRates) -> float:
    """Pollaczek-Khinchine mean sojourn for the true two-phase service.

    Diagnostic companion to mean_delay: uses the exact first two service
    moments instead of an exponential of equal mean.  Lies below mean_delay
    whenever the service variance is at most the squared mean (always when
    mu_r >= mu_d).
    """
    mean, variance = service_time_moments(p, rates)
    if not arrival_rate > 0:
        raise ValueError("arrival_rate must be positive")
    slack = 1.0 - arrival_rate * mean
    if slack <= 0.0:
        raise Unstable(
            f"offered load {arrival_rate * mean:.4f} >= 1 at refresh probability {p:.4f}"
        )
    second_moment = variance + mean * mean
    return mean + arrival_rate * second_moment / (2.0 * slack)


def predict(point: LoadPoint, allow_unstable: bool = False) -> Prediction:
    """Full prediction for a single-item workload."""
    n = direct_serves_per_cycle(point)
    p = refresh_probability(n)
    mean_x, var_x = service_time_moments(p, point.rates)
    try:
        delay = _mm1_delay(p, point.arrival_rate, point.rates)
    except Unstable:
        if not allow_unstable:
            raise
        delay = math.inf
    return Prediction(
        direct_serves_per_cycle=n,
        refresh_probability=p,
        refresh_frequency=p * point.arrival_rate,
        mean_aoi=mean_aoi(point),
        mean_delay=delay,
        service_time_mean=mean_x,
        service_time_variance=var_x,
    )


def predict_catalog(
    catalog: Catalog, rates: ServiceRates, allow_unstable: bool = False
) -> CatalogPrediction:
    """Per-item and system predictions for a shared FIFO server.

    Each item's age statistics depend only on its own rate and window (its
    serves are a thinned Poisson stream), while the delay couples every item
    through the request-weighted mean refresh probability.  The system mean
    delay is reported on each per-item row as well, since all items share
    one queue.
    """
    catalog.validate_windows(rates)
    lam_total = catalog.total_arrival_rate
    lams = catalog.arrival_rates
    wins = catalog.windows
    floor = rates.aoi_floor

    serves = lams * (wins - floor)
    probs = np.array([refresh_probability(float(n)) for n in serves])
    p_bar = float(np.dot(lams, probs) / lam_total)
    mean_x, var_x = service_time_moments(p_bar, rates)
    try:
        system_delay = _mm1_delay(p_bar, lam_total, rates)
    except Unstable:
        if not allow_unstable:
            raise
        system_delay = math.inf

    per_item = []
    weighted_aoi = []
    for lam_c, w_c, n_c, p_c in zip(lams, wins, serves, probs):
        aoi_c = mean_aoi(LoadPoint(float(lam_c), float(w_c), rates))
        m_c, v_c = service_time_moments(float(p_c), rates)
        per_item.append(
            Prediction(
                direct_serves_per_cycle=float(n_c),
                refresh_probability=float(p_c),
                refresh_frequency=float(p_c * lam_c),
                mean_aoi=aoi_c,
                mean_delay=system_delay,
                service_time_mean=m_c,
                service_time_variance=v_c,
            )
        )
        weighted_aoi.append(float(lam_c) * aoi_c)

    system = Prediction(
        direct_serves_per_cycle=float(np.dot(lams, serves) / lam_total),
        refresh_probability=p_bar,
        refresh_frequency=p_bar * lam_total,
        mean_aoi=math.fsum(weighted_aoi) / lam_total,
        mean_delay=system_delay,
        service_time_mean=mean_x,
        service_time_variance=var_x,
    )
    return CatalogPrediction(per_item=tuple(per_item), system=system)


def predict_for_policy(
    point: LoadPoint, policy: str, allow_unstable: bool = False
) -> Prediction:
    """Prediction matching a simulator policy.

    always_refresh pins the refresh probability at 1 (mean age equals the
    AoI floor, delay equals d_max); never_refresh pins it at 0 (delay equals
    d_min, mean age unbounded and reported as math.inf).
    """
    if policy == "freshness_window":
        return predict(point, allow_unstable=allow_unstable)
    if policy == "always_refresh":
        p = 1.0
        aoi = point.rates.aoi_floor
    elif policy == "never_refresh":
        p = 0.0
        aoi = math.inf
    else:
        raise ValueError(f"unknown policy {policy!r}")
    mean_x, var_x = service_time_moments(p, point.rates)
    try:
        delay = _mm1_delay(p, point.arrival_rate, point.rates)
    except Unstable:
        if not allow_unstable:
            raise
        delay = math.inf
    return Prediction(
        direct_serves_per_cycle=0.0 if p == 1.0 else math.inf,
        refresh_probability=p,
        refresh_frequency=p * point.arrival_rate,
        mean_aoi=aoi,
        mean_delay=delay,
        service_time_mean=mean_x,
        service_time_variance=var_x,
    )
