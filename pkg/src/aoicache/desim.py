"""Seeded discrete-event simulation of the base-station service process.

One server drains a FIFO queue of content requests.  At the start of each
service the cached copy's age decides whether the server first fetches a
fresh version (freshness_window policy), always fetches (always_refresh),
or fetches only the very first copy (never_refresh).  Fetch and delivery
times are independent exponential draws, i.e. the true two-phase service
distribution rather than the single exponential used by the closed forms.

Randomness is split into three streams (arrivals, item choice, service
draws) derived from one seed, and both a fetch and a delivery time are
drawn for every request whether or not the fetch is used.  Changing the
policy or the windows therefore never perturbs the arrival pattern or the
service draws: runs at equal seed are common-random-number comparisons.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import QueueDivergence
from .model import Catalog, ServiceRates

POLICIES = ("freshness_window", "always_refresh", "never_refresh")
_POLICY_CODES = {
    "freshness_window": _kernels.FRESHNESS_WINDOW,
    "always_refresh": _kernels.ALWAYS_REFRESH,
    "never_refresh": _kernels.NEVER_REFRESH,
}

AGGREGATE_ID = 0  # item_id used for whole-system rows; real items count from 1


@dataclass(frozen=True)
class SimConfig:
    """Inputs of one simulation run.

    request_budget counts the completions that enter the statistics; the
    run simulates round(warmup_fraction * request_budget) extra completions
    first and discards them.
    """

    seed: int
    rates: ServiceRates
    catalog: Catalog
    request_budget: int
    warmup_fraction: float = 0.1
    policy: str = "freshness_window"
    queue_cap: int = 10_000_000

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.request_budget < 1:
            raise ValueError("request_budget must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.queue_cap < 1:
            raise ValueError("queue_cap must be >= 1")
        self.catalog.validate_windows(self.rates)

    @property
    def warmup_count(self) -> int:
        return int(round(self.warmup_fraction * self.request_budget))


@dataclass
class CacheEntry:
    """Cached copy of one item; its age at time t is t - version_timestamp.

    A fresh construction is infinitely stale, which forces the first
    request for the item to fetch a real version.
    """

    item_id: int
    version_timestamp: float = -math.inf

    def age(self, now: float) -> float:
        return now - self.version_timestamp


@dataclass(frozen=True)
class RequestRecord:
    """Full accounting of one served request."""

    item_id: int
    arrival_time: float
    service_start: float
    departure_time: float
    refreshed: bool
    fetch_time: float  # 0.0 for cache hits
    delivery_time: float
    aoi_at_delivery: float

    @property
    def delay(self) -> float:
        return self.departure_time - self.arrival_time


@dataclass(frozen=True)
class RequestLog:
    """Column-oriented log of every completion, warmup included."""

    item_index: np.ndarray
    arrival_time: np.ndarray
    service_start: np.ndarray
    departure_time: np.ndarray
    refreshed: np.ndarray
    fetch_time: np.ndarray
    delivery_time: np.ndarray
    aoi_at_delivery: np.ndarray
    aoi_at_service_start: np.ndarray
    warmup_count: int
    item_ids: tuple[int, ...]

    def __len__(self) -> int:
        return int(self.arrival_time.shape[0])

    @property
    def retained(self) -> slice:
        return slice(self.warmup_count, None)

    def record(self, i: int) -> RequestRecord:
        return RequestRecord(
            item_id=self.item_ids[int(self.item_index[i])],
            arrival_time=float(self.arrival_time[i]),
            service_start=float(self.service_start[i]),
            departure_time=float(self.departure_time[i]),
            refreshed=bool(self.refreshed[i]),
            fetch_time=float(self.fetch_time[i]),
            delivery_time=float(self.delivery_time[i]),
            aoi_at_delivery=float(self.aoi_at_delivery[i]),
        )


@dataclass(frozen=True)
class ItemStats:
    """Sample means with standard errors for one item (or the aggregate).

    Standard errors are within-run for a single run and between-replication
    for pooled reports; multiply by 1.96 for a 95% half-width either way.
    """

    item_id: int
    count: int
    refresh_fraction: float
    refresh_fraction_se: float
    mean_aoi: float
    mean_aoi_se: float
    mean_delay: float
    mean_delay_se: float


@dataclass(frozen=True)
class SimReport:
    """Per-item and aggregate statistics over the retained completions."""

    policy: str
    replications: int
    total_time: float
    per_item: tuple[ItemStats, ...]
    aggregate: ItemStats


def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(s) for s in children)


def derive_seed(base: int, replication: int) -> int:
    """Per-replication seed; pairwise distinct for replications < 2**64."""
    return (base + replication) % 2**64


def simulate_log(config: SimConfig) -> RequestLog:
    """Run one seeded simulation and return the full request log.

    Identical (seed, config) pairs give bit-identical logs.
    """
    n = config.request_budget + config.warmup_count
    arrival_rng, item_rng, service_rng = _streams(config.seed)

    arrivals = np.cumsum(
        arrival_rng.exponential(1.0 / config.catalog.total_arrival_rate, n)
    )
    n_items = len(config.catalog)
    if n_items == 1:
        item_index = np.zeros(n, dtype=np.int64)
    else:
        cum = np.cumsum(config.catalog.popularities)
        item_index = np.minimum(
            np.searchsorted(cum, item_rng.random(n), side="right"), n_items - 1
        ).astype(np.int64)
    fetch = service_rng.exponential(1.0 / config.rates.mu_r, n)
    delivery = service_rng.exponential(1.0 / config.rates.mu_d, n)

    service_start = np.empty(n)
    departure = np.empty(n)
    refreshed = np.zeros(n, dtype=np.bool_)
    aoi_delivery = np.empty(n)
    aoi_start = np.empty(n)
    overflow = _kernels.service_process(
        arrivals,
        item_index,
        fetch,
        delivery,
        config.catalog.windows,
        _POLICY_CODES[config.policy],
        config.queue_cap,
        service_start,
        departure,
        refreshed,
        aoi_delivery,
        aoi_start,
    )
    if overflow >= 0:
        raise QueueDivergence(
            f"in-system requests exceeded {config.queue_cap} at request"
            f" {overflow}; the configuration is unstable"
        )
    return RequestLog(
        item_index=item_index,
        arrival_time=arrivals,
        service_start=service_start,
        departure_time=departure,
        refreshed=refreshed,
        fetch_time=np.where(refreshed, fetch, 0.0),
        delivery_time=delivery,
        aoi_at_delivery=aoi_delivery,
        aoi_at_service_start=aoi_start,
        warmup_count=config.warmup_count,
        item_ids=config.catalog.item_ids,
    )


def _stats_line(item_id: int, refreshed, aoi, delay) -> ItemStats:
    n = int(refreshed.shape[0])
    if n == 0:
        nan = math.nan
        return ItemStats(item_id, 0, nan, nan, nan, nan, nan, nan)
    frac = float(refreshed.mean())
    frac_se = math.sqrt(max(frac * (1.0 - frac), 0.0) / n)

    def mean_se(x):
        mu = float(x.mean())
        se = float(x.std(ddof=1)) / math.sqrt(n) if n > 1 else math.nan
        return mu, se

    aoi_mean, aoi_se = mean_se(aoi)
    delay_mean, delay_se = mean_se(delay)
    return ItemStats(
        item_id, n, frac, frac_se, aoi_mean, aoi_se, delay_mean, delay_se
    )


def summarize(log: RequestLog, policy: str) -> SimReport:
    """Reduce a request log to per-item and aggregate statistics."""
    keep = log.retained
    idx = log.item_index[keep]
    refreshed = log.refreshed[keep].astype(np.float64)
    aoi = log.aoi_at_delivery[keep]
    delay = log.departure_time[keep] - log.arrival_time[keep]

    per_item = []
    for c, item_id in enumerate(log.item_ids):
        mask = idx == c
        per_item.append(
            _stats_line(item_id, refreshed[mask], aoi[mask], delay[mask])
        )
    aggregate = _stats_line(AGGREGATE_ID, refreshed, aoi, delay)
    total_time = float(log.departure_time[-1]) if len(log) else 0.0
    return SimReport(
        policy=policy,
        replications=1,
        total_time=total_time,
        per_item=tuple(per_item),
        aggregate=aggregate,
    )


def run_simulation(config: SimConfig) -> SimReport:
    """Simulate one run and summarize it."""
    return summarize(simulate_log(config), config.policy)


def _pool_lines(lines: list[ItemStats]) -> ItemStats:
    live = [ln for ln in lines if ln.count > 0]
    item_id = lines[0].item_id
    total = sum(ln.count for ln in live)
    if total == 0:
        nan = math.nan
        return ItemStats(item_id, 0, nan, nan, nan, nan, nan, nan)

    def pooled(attr):
        values = [getattr(ln, attr) for ln in live]
        mean = sum(v * ln.count for v, ln in zip(values, live)) / total
        if len(values) > 1:
            spread = float(np.std(values, ddof=1)) / math.sqrt(len(values))
        else:
            spread = math.nan
        return mean, spread

    frac, frac_se = pooled("refresh_fraction")
    aoi, aoi_se = pooled("mean_aoi")
    delay, delay_se = pooled("mean_delay")
    return ItemStats(item_id, total, frac, frac_se, aoi, aoi_se, delay, delay_se)


def replicate(config: SimConfig, replications: int) -> SimReport:
    """Pool independent replications run at derived seeds.

    Pooled means are count-weighted, identical to one pass over the union
    of retained completions.  Standard errors come from the spread of the
    per-replication means, so half-widths shrink roughly as 1/sqrt(R).
    """
    if replications < 2:
        raise ValueError("replications must be >= 2")
    reports = []
    for r in range(replications):
        run_config = dataclasses.replace(config, seed=derive_seed(config.seed, r))
        try:
            reports.append(run_simulation(run_config))
        except QueueDivergence as exc:
            raise QueueDivergence(f"replication {r}: {exc}", replication=r) from exc

    per_item = tuple(
        _pool_lines([rep.per_item[c] for rep in reports])
        for c in range(len(config.catalog))
    )
    aggregate = _pool_lines([rep.aggregate for rep in reports])
    return SimReport(
        policy=config.policy,
        replications=replications,
        total_time=sum(rep.total_time for rep in reports),
        per_item=per_item,
        aggregate=aggregate,
    )
