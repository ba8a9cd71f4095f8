"""Command-line front end: scenario files in, CSV tables out.

Subcommands: rates, analyze, simulate, optimize, preset.  Outputs land in
the --out directory (default ./out) as `<name>_s<seed>.csv` with no
timestamps, so rerunning a scenario at the same seed reproduces the file
byte for byte.  Cells that are unavailable or correspond to a saturated
queue hold the literal token `unstable`.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

from .analytics import (
    LoadPoint,
    Prediction,
    delay_bounds,
    predict_catalog,
    predict_for_policy,
)
from .desim import AGGREGATE_ID, ItemStats, SimConfig, SimReport, replicate, run_simulation
from .errors import AoiCacheError, QueueDivergence
from .model import Catalog, ServiceRates
from .optimizer import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    OptProblem,
    OptResult,
    solve,
)
from .scenario import Scenario, load_preset, load_scenario, preset_names

UNSTABLE_TOKEN = "unstable"

SIM_COLUMNS = (
    "sweep_param",
    "sweep_value",
    "item_id",
    "analytic_p",
    "analytic_refresh_freq",
    "analytic_aoi_s",
    "analytic_delay_s",
    "sim_refresh_frac",
    "sim_refresh_frac_hw",
    "sim_aoi_s",
    "sim_aoi_hw",
    "sim_delay_s",
    "sim_delay_hw",
    "status",
)

OPT_COLUMNS = (
    "sweep_param",
    "sweep_value",
    "item_id",
    "arrival_rate_rps",
    "window_s",
    "cycle_serves",
    "refresh_prob",
    "refresh_freq_rps",
    "analytic_aoi_s",
    "analytic_delay_s",
    "sim_aoi_s",
    "sim_aoi_hw",
    "sim_delay_s",
    "sim_delay_hw",
    "status",
)

_HALF_WIDTH = 1.96  # 95% normal-approximation half-width multiplier


def _cell(value) -> str:
    if value is None:
        return UNSTABLE_TOKEN
    if isinstance(value, str):
        return value
    value = float(value)
    if not math.isfinite(value):
        return UNSTABLE_TOKEN
    return repr(value)


def _write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(col)) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sweep_points(scenario: Scenario):
    if scenario.sweep_param is None:
        return [("none", 0.0)]
    return [(scenario.sweep_param, v) for v in scenario.sweep_values]


def _catalog_overrides(param: str, value: float) -> dict:
    if param == "window":
        return {"window": value}
    if param == "total_arrival_rate":
        return {"total_arrival_rate": value}
    if param == "item_count":
        return {"item_count": int(value)}
    if param == "zipf_concentration":
        return {"zipf_concentration": value}
    return {}


def _analytic_predictions(
    catalog: Catalog, rates: ServiceRates, policy: str
) -> tuple[list[Prediction], Prediction]:
    if policy == "freshness_window":
        combined = predict_catalog(catalog, rates, allow_unstable=True)
        return list(combined.per_item), combined.system
    window = max(rates.aoi_floor, float(catalog.windows[0]))
    system = predict_for_policy(
        LoadPoint(catalog.total_arrival_rate, window, rates), policy, allow_unstable=True
    )
    per_item = []
    for lam_c in catalog.arrival_rates:
        item = predict_for_policy(
            LoadPoint(float(lam_c), window, rates), policy, allow_unstable=True
        )
        per_item.append(dataclasses.replace(item, mean_delay=system.mean_delay))
    return per_item, system


def _sim_cells(stats: ItemStats | None) -> dict:
    if stats is None or stats.count == 0:
        return {}
    return {
        "sim_refresh_frac": stats.refresh_fraction,
        "sim_refresh_frac_hw": _HALF_WIDTH * stats.refresh_fraction_se,
        "sim_aoi_s": stats.mean_aoi,
        "sim_aoi_hw": _HALF_WIDTH * stats.mean_aoi_se,
        "sim_delay_s": stats.mean_delay,
        "sim_delay_hw": _HALF_WIDTH * stats.mean_delay_se,
    }


def _point_rows(
    param: str,
    value: float,
    catalog: Catalog,
    rates: ServiceRates,
    policy: str,
    report: SimReport | None,
    diverged: bool,
) -> list[dict]:
    per_item, system = _analytic_predictions(catalog, rates, policy)
    if diverged:
        status = "diverged"
    elif math.isfinite(system.mean_delay):
        status = "ok"
    else:
        status = UNSTABLE_TOKEN

    def row(item_id: int, pred: Prediction, stats: ItemStats | None) -> dict:
        cells = {
            "sweep_param": param,
            "sweep_value": value,
            "item_id": float(item_id),
            "analytic_p": pred.refresh_probability,
            "analytic_refresh_freq": pred.refresh_frequency,
            "analytic_aoi_s": pred.mean_aoi,
            "analytic_delay_s": pred.mean_delay,
            "status": status,
        }
        cells.update(_sim_cells(stats))
        return cells

    rows = [row(AGGREGATE_ID, system, report.aggregate if report else None)]
    for pred, item_id in zip(per_item, catalog.item_ids):
        stats = None
        if report is not None:
            stats = next(s for s in report.per_item if s.item_id == item_id)
        rows.append(row(item_id, pred, stats))
    return rows


def _print_table(rows: list[dict], columns) -> None:
    widths = [max(len(c), 12) for c in columns]
    print("  ".join(c.rjust(w) for c, w in zip(columns, widths)))
    for r in rows:
        print("  ".join(_cell(r.get(c)).rjust(w)[:26] for c, w in zip(columns, widths)))


def cmd_rates(scenario: Scenario) -> int:
    rates = scenario.service_rates()
    print(f"mu_d = {rates.mu_d!r} /s | mean delivery time {1e3 / rates.mu_d!r} ms")
    print(f"mu_r = {rates.mu_r!r} /s | mean fetch time {1e3 / rates.mu_r!r} ms")
    print(
        f"aoi_floor = {rates.aoi_floor!r} s | {1e3 * rates.aoi_floor!r} ms"
    )
    return 0


def _run_points(scenario: Scenario, rates: ServiceRates, simulate: bool, args):
    policy = args.policy or scenario.policy
    seed = scenario.seed if args.seed is None else args.seed
    replications = (
        scenario.replications if args.replications is None else args.replications
    )
    rows: list[dict] = []
    for param, value in _sweep_points(scenario):
        if param == "aoi_budget":
            raise AoiCacheError("aoi_budget sweeps apply to the optimize command")
        catalog = scenario.catalog(**_catalog_overrides(param, value))
        report = None
        diverged = False
        if simulate:
            config = SimConfig(
                seed=seed,
                rates=rates,
                catalog=catalog,
                request_budget=scenario.request_budget,
                warmup_fraction=scenario.warmup_fraction,
                policy=policy,
                queue_cap=scenario.queue_cap,
            )
            try:
                if replications >= 2:
                    report = replicate(config, replications)
                else:
                    report = run_simulation(config)
            except QueueDivergence:
                diverged = True
        rows.extend(
            _point_rows(param, value, catalog, rates, policy, report, diverged)
        )
    return rows, seed


def _bounds_summary(scenario: Scenario, rates: ServiceRates) -> None:
    for param, value in _sweep_points(scenario):
        rate = value if param == "total_arrival_rate" else scenario.total_arrival_rate
        d_max, d_min = delay_bounds(rates, rate)
        if d_max is not None and d_min is not None:
            print(
                f"arrival_rate = {rate!r} /s: d_max = {d_max!r} s, d_min = {d_min!r} s,"
                f" d_min/d_max = {d_min / d_max!r}"
            )
        else:
            print(f"arrival_rate = {rate!r} /s: delay bounds {UNSTABLE_TOKEN}")


def cmd_analyze(scenario: Scenario, args, name: str) -> int:
    rates = scenario.service_rates()
    rows, seed = _run_points(scenario, rates, simulate=False, args=args)
    _print_table(rows, SIM_COLUMNS)
    _bounds_summary(scenario, rates)
    out = Path(args.out) / f"{name}_s{seed}.csv"
    _write_csv(out, SIM_COLUMNS, rows)
    print(f"wrote {out}")
    return 0


def cmd_simulate(scenario: Scenario, args, name: str) -> int:
    rates = scenario.service_rates()
    rows, seed = _run_points(scenario, rates, simulate=True, args=args)
    _print_table(rows, SIM_COLUMNS)
    out = Path(args.out) / f"{name}_s{seed}.csv"
    _write_csv(out, SIM_COLUMNS, rows)
    print(f"wrote {out}")
    return 0


def _optimize_rows(
    problem: OptProblem,
    param: str,
    value: float,
    result: OptResult,
    confirm_report: SimReport | None,
) -> list[dict]:
    status = result.status

    def row(item_id, lam, window, pred: Prediction, serves, stats) -> dict:
        cells = {
            "sweep_param": param,
            "sweep_value": value,
            "item_id": float(item_id),
            "arrival_rate_rps": lam,
            "window_s": window,
            "cycle_serves": serves,
            "refresh_prob": pred.refresh_probability,
            "refresh_freq_rps": pred.refresh_frequency,
            "analytic_aoi_s": pred.mean_aoi,
            "analytic_delay_s": pred.mean_delay,
            "status": status,
        }
        if stats is not None and stats.count > 0:
            cells.update(
                {
                    "sim_aoi_s": stats.mean_aoi,
                    "sim_aoi_hw": _HALF_WIDTH * stats.mean_aoi_se,
                    "sim_delay_s": stats.mean_delay,
                    "sim_delay_hw": _HALF_WIDTH * stats.mean_delay_se,
                }
            )
        return cells

    rows = [
        row(
            AGGREGATE_ID,
            problem.total_arrival_rate,
            None,
            result.predicted,
            float(result.predicted.direct_serves_per_cycle),
            confirm_report.aggregate if confirm_report else None,
        )
    ]
    for idx, (lam, window, serves, pred) in enumerate(
        zip(
            problem.arrival_rates,
            result.windows,
            result.cycle_serves,
            result.per_item,
        )
    ):
        item_id = idx + 1
        stats = None
        if confirm_report is not None:
            stats = next(
                (s for s in confirm_report.per_item if s.item_id == item_id), None
            )
        rows.append(row(item_id, float(lam), float(window), pred, float(serves), stats))
    return rows


def _opt_overrides(param: str, value: float) -> dict:
    if param == "aoi_budget":
        return {"aoi_budget": value}
    if param == "item_count":
        return {"item_count": int(value)}
    if param == "zipf_concentration":
        return {"zipf_concentration": value}
    if param == "total_arrival_rate":
        return {"total_arrival_rate": value}
    return {}


def cmd_optimize(scenario: Scenario, args, name: str) -> int:
    rates = scenario.service_rates()
    seed = scenario.seed if args.seed is None else args.seed
    replications = (
        scenario.replications if args.replications is None else args.replications
    )
    rows: list[dict] = []
    any_infeasible = False
    for param, value in _sweep_points(scenario):
        if param == "window":
            raise AoiCacheError("window sweeps apply to analyze/simulate commands")
        problem = scenario.opt_problem(rates, **_opt_overrides(param, value))
        result = solve(problem)
        if result.status == STATUS_INFEASIBLE:
            any_infeasible = True
            print(
                f"infeasible: aoi_budget {problem.aoi_budget!r} s below the minimal"
                f" feasible value {rates.aoi_floor!r} s (the AoI floor)",
                file=sys.stderr,
            )
        confirm_report = None
        if args.confirm and result.status in (STATUS_OPTIMAL,):
            catalog = Catalog.from_popularities(
                problem.arrival_rates / problem.arrival_rates.sum(),
                problem.total_arrival_rate,
                result.windows,
            )
            config = SimConfig(
                seed=seed,
                rates=rates,
                catalog=catalog,
                request_budget=scenario.request_budget,
                warmup_fraction=scenario.warmup_fraction,
                policy="freshness_window",
                queue_cap=scenario.queue_cap,
            )
            try:
                if replications >= 2:
                    confirm_report = replicate(config, replications)
                else:
                    confirm_report = run_simulation(config)
            except QueueDivergence:
                confirm_report = None
        rows.extend(_optimize_rows(problem, param, value, result, confirm_report))
        print(
            f"{param}={value!r}: status={result.status}"
            f" dual_price={result.dual_price!r}"
            f" predicted_aoi={result.predicted.mean_aoi!r}"
            f" predicted_delay={result.predicted.mean_delay!r}"
            f" budget_slack={result.budget_slack!r}"
        )
    _print_table(rows, OPT_COLUMNS)
    out = Path(args.out) / f"{name}_s{seed}.csv"
    _write_csv(out, OPT_COLUMNS, rows)
    print(f"wrote {out}")
    return 1 if any_infeasible else 0


def _dispatch(scenario: Scenario, command: str, args, name: str) -> int:
    if command == "rates":
        return cmd_rates(scenario)
    if command == "analyze":
        return cmd_analyze(scenario, args, name)
    if command == "simulate":
        return cmd_simulate(scenario, args, name)
    if command == "optimize":
        return cmd_optimize(scenario, args, name)
    raise AoiCacheError(f"unknown command {command!r}")


def _infer_command(scenario: Scenario) -> str:
    if scenario.command is not None:
        return scenario.command
    if scenario.aoi_budget is not None:
        return "optimize"
    if scenario.window is not None or scenario.windows is not None:
        return "simulate"
    return "rates"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoicache",
        description="Freshness-aware edge-cache refreshing: model, simulator, optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        if scenario_required:
            p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument(
            "--replications", type=int, default=None, help="override replication count"
        )
        p.add_argument("--policy", default=None, help="override refresh policy")
        p.add_argument(
            "--confirm",
            action="store_true",
            help="simulate at the optimized windows (optimize only)",
        )

    for name in ("rates", "analyze", "simulate", "optimize"):
        common(sub.add_parser(name))
    preset = sub.add_parser("preset", help="run a named built-in scenario")
    preset.add_argument("name", help=f"one of: {', '.join(preset_names())}")
    common(preset, scenario_required=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            scenario = load_preset(args.name)
            command = _infer_command(scenario)
            return _dispatch(scenario, command, args, args.name)
        scenario = load_scenario(args.scenario)
        return _dispatch(scenario, args.command, args, Path(args.scenario).stem)
    except (AoiCacheError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
