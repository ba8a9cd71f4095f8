"""Freshness-aware cache refreshing for a single-cell edge cache.

A cached item is refreshed on demand: when a request finds the cached copy
older than the item's refreshing window, the server fetches the current
version before delivering.  Wider windows trade content age for delay by
cutting refresh traffic.  The package provides the closed-form model of
that tradeoff, a faithful discrete-event simulator, a per-item window
optimizer under a mean-age budget, and a CLI for scenario sweeps.
"""

from .analytics import (
    CatalogPrediction,
    LoadPoint,
    Prediction,
    delay_bounds,
    direct_serves_per_cycle,
    mean_aoi,
    mean_delay,
    mg1_delay,
    predict,
    predict_catalog,
    predict_for_policy,
    refresh_frequency,
    refresh_probability,
    service_time_moments,
)
from .desim import (
    AGGREGATE_ID,
    POLICIES,
    CacheEntry,
    ItemStats,
    RequestLog,
    RequestRecord,
    SimConfig,
    SimReport,
    derive_seed,
    replicate,
    run_simulation,
    simulate_log,
    summarize,
)
from .errors import (
    AoiCacheError,
    BracketFailure,
    InfeasibleBudget,
    NonConvergence,
    NonPositiveRate,
    QueueDivergence,
    ScenarioError,
    Unstable,
)
from .model import (
    BITS_PER_KB,
    Catalog,
    CatalogItem,
    RadioConfig,
    ServiceRates,
    dbm_to_watts,
    derive_service_rates,
    zipf_popularities,
)
from .optimizer import (
    OptProblem,
    OptResult,
    cycle_budget,
    invert_price,
    solve,
    solve_per_class,
    solve_projected_gradient,
    stationarity_price,
)
from .scenario import (
    Scenario,
    dump_scenario,
    load_preset,
    load_scenario,
    parse_scenario,
    preset_names,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATE_ID",
    "AoiCacheError",
    "BITS_PER_KB",
    "BracketFailure",
    "CacheEntry",
    "Catalog",
    "CatalogItem",
    "CatalogPrediction",
    "InfeasibleBudget",
    "ItemStats",
    "LoadPoint",
    "NonConvergence",
    "NonPositiveRate",
    "OptProblem",
    "OptResult",
    "POLICIES",
    "Prediction",
    "QueueDivergence",
    "RadioConfig",
    "RequestLog",
    "RequestRecord",
    "Scenario",
    "ScenarioError",
    "ServiceRates",
    "SimConfig",
    "SimReport",
    "Unstable",
    "cycle_budget",
    "dbm_to_watts",
    "delay_bounds",
    "derive_seed",
    "derive_service_rates",
    "direct_serves_per_cycle",
    "dump_scenario",
    "invert_price",
    "load_preset",
    "load_scenario",
    "mean_aoi",
    "mean_delay",
    "mg1_delay",
    "parse_scenario",
    "predict",
    "predict_catalog",
    "predict_for_policy",
    "preset_names",
    "refresh_frequency",
    "refresh_probability",
    "replicate",
    "run_simulation",
    "service_time_moments",
    "simulate_log",
    "solve",
    "solve_per_class",
    "solve_projected_gradient",
    "stationarity_price",
    "summarize",
    "zipf_popularities",
]
