"""Flat sectioned key/value scenario files and the built-in presets.

A scenario collects everything one experiment needs: either a radio block
(service rates derived from physics) or direct rates, a catalog block, a
simulation block, and optional sweep / optimize blocks.  The format is a
plain text file of `[section]` headers and `key = value` lines; `#` or `;`
start a comment.  No nesting, so any tooling can parse or generate it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .desim import POLICIES
from .errors import ScenarioError
from .model import (
    BITS_PER_KB,
    Catalog,
    RadioConfig,
    ServiceRates,
    dbm_to_watts,
    derive_service_rates,
    zipf_popularities,
)
from .optimizer import OptProblem

SWEEP_PARAMS = (
    "window",
    "total_arrival_rate",
    "item_count",
    "zipf_concentration",
    "aoi_budget",
)

COMMANDS = ("rates", "analyze", "simulate", "optimize")

_SECTIONS = ("radio", "rates", "catalog", "simulation", "sweep", "optimize", "run")


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario; exactly one of radio / rates must be present."""

    radio: RadioConfig | None = None
    rates: ServiceRates | None = None
    item_count: int = 1
    zipf_concentration: float = 0.0
    total_arrival_rate: float = 1000.0
    window: float | None = None
    windows: tuple[float, ...] | None = None
    popularities: tuple[float, ...] | None = None
    seed: int = 1
    request_budget: int = 100_000
    warmup_fraction: float = 0.1
    replications: int = 8
    policy: str = "freshness_window"
    queue_cap: int = 10_000_000
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = field(default_factory=tuple)
    aoi_budget: float | None = None
    command: str | None = None

    def __post_init__(self):
        if (self.radio is None) == (self.rates is None):
            raise ScenarioError("exactly one of [radio] and [rates] must be given")
        if self.item_count < 1:
            raise ScenarioError("item_count must be >= 1")
        if self.policy not in POLICIES:
            raise ScenarioError(f"policy must be one of {POLICIES}")
        if self.sweep_param is not None and self.sweep_param not in SWEEP_PARAMS:
            raise ScenarioError(
                f"sweep parameter {self.sweep_param!r} not in {SWEEP_PARAMS}"
            )
        if self.sweep_param is not None and not self.sweep_values:
            raise ScenarioError("sweep block needs a values list")
        if self.popularities is not None and len(self.popularities) != self.item_count:
            raise ScenarioError("popularities length must equal item_count")
        if self.windows is not None and len(self.windows) != self.item_count:
            raise ScenarioError("windows length must equal item_count")
        if self.command is not None and self.command not in COMMANDS:
            raise ScenarioError(f"run command must be one of {COMMANDS}")

    def service_rates(self) -> ServiceRates:
        if self.rates is not None:
            return self.rates
        return derive_service_rates(self.radio)

    def _popularity_vector(self, item_count: int, concentration: float) -> np.ndarray:
        if self.popularities is not None:
            return np.asarray(self.popularities, dtype=float)
        return zipf_popularities(item_count, concentration)

    def catalog(
        self,
        window: float | None = None,
        item_count: int | None = None,
        zipf_concentration: float | None = None,
        total_arrival_rate: float | None = None,
    ) -> Catalog:
        """Catalog built from the scenario's catalog block, with sweep overrides."""
        count = self.item_count if item_count is None else item_count
        conc = (
            self.zipf_concentration
            if zipf_concentration is None
            else zipf_concentration
        )
        rate = (
            self.total_arrival_rate
            if total_arrival_rate is None
            else total_arrival_rate
        )
        if count != self.item_count and self.popularities is not None:
            raise ScenarioError("cannot override item_count with explicit popularities")
        pops = self._popularity_vector(count, conc)
        if window is not None:
            wins = window
        elif self.windows is not None:
            wins = np.asarray(self.windows, dtype=float)
        elif self.window is not None:
            wins = self.window
        else:
            raise ScenarioError("catalog needs a window (or windows) entry")
        return Catalog.from_popularities(pops, rate, wins)

    def opt_problem(
        self,
        rates: ServiceRates,
        aoi_budget: float | None = None,
        item_count: int | None = None,
        zipf_concentration: float | None = None,
        total_arrival_rate: float | None = None,
    ) -> OptProblem:
        budget = self.aoi_budget if aoi_budget is None else aoi_budget
        if budget is None:
            raise ScenarioError("optimize needs an aoi_budget entry")
        count = self.item_count if item_count is None else item_count
        conc = (
            self.zipf_concentration
            if zipf_concentration is None
            else zipf_concentration
        )
        rate = (
            self.total_arrival_rate
            if total_arrival_rate is None
            else total_arrival_rate
        )
        pops = self._popularity_vector(count, conc)
        return OptProblem(
            arrival_rates=rate * pops,
            rates=rates,
            aoi_budget=float(budget),
            total_arrival_rate=float(rate),
        )


def _parse_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ScenarioError(f"line {lineno}: entry before any [section] header")
        key, value = line.split("=", 1)
        sections[current][key.strip().lower()] = (value.strip(), lineno)
    return sections


class _Block:
    """One section with typed accessors that blame the offending line."""

    def __init__(self, name: str, entries: dict[str, tuple[str, int]]):
        self.name = name
        self.entries = dict(entries)

    def take(self, key: str) -> tuple[str | None, int | None]:
        if key in self.entries:
            return self.entries.pop(key)
        return None, None

    def take_float(self, key: str, default=None):
        raw, lineno = self.take(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ScenarioError(f"line {lineno}: {key} must be a number, got {raw!r}")

    def take_int(self, key: str, default=None):
        raw, lineno = self.take(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(f"line {lineno}: {key} must be an integer, got {raw!r}")

    def take_str(self, key: str, default=None):
        raw, _ = self.take(key)
        return default if raw is None else raw

    def take_floats(self, key: str):
        raw, lineno = self.take(key)
        if raw is None:
            return None
        try:
            return tuple(float(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise ScenarioError(
                f"line {lineno}: {key} must be a comma-separated number list"
            )

    def reject_leftovers(self):
        for key, (_, lineno) in self.entries.items():
            raise ScenarioError(f"line {lineno}: unknown key {key!r} in [{self.name}]")


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; errors name the offending line."""
    sections = _parse_sections(text)

    radio = None
    if "radio" in sections:
        block = _Block("radio", sections["radio"])
        size_bits = block.take_float("content_size_bits")
        size_kb = block.take_float("content_size_kb")
        if (size_bits is None) == (size_kb is None):
            raise ScenarioError(
                "[radio] needs exactly one of content_size_bits / content_size_kb"
            )
        noise_w = block.take_float("noise_watts")
        noise_dbm = block.take_float("noise_dbm")
        if (noise_w is None) == (noise_dbm is None):
            raise ScenarioError("[radio] needs exactly one of noise_watts / noise_dbm")
        radio = RadioConfig(
            coverage_radius=block.take_float("coverage_radius"),
            bandwidth=block.take_float("bandwidth"),
            content_size=size_bits if size_bits is not None else size_kb * BITS_PER_KB,
            path_loss_exponent=block.take_float("path_loss_exponent"),
            noise_power=noise_w if noise_w is not None else dbm_to_watts(noise_dbm),
            bs_tx_power=block.take_float("bs_tx_power"),
            source_tx_power=block.take_float("source_tx_power"),
        )
        block.reject_leftovers()

    rates = None
    if "rates" in sections:
        block = _Block("rates", sections["rates"])
        rates = ServiceRates(
            mu_d=block.take_float("mu_d"), mu_r=block.take_float("mu_r")
        )
        block.reject_leftovers()

    catalog = _Block("catalog", sections.get("catalog", {}))
    popularities = catalog.take_floats("popularities")
    item_count = catalog.take_int(
        "item_count", len(popularities) if popularities else 1
    )
    zipf_concentration = catalog.take_float("zipf_concentration", 0.0)
    total_arrival_rate = catalog.take_float("total_arrival_rate", 1000.0)
    window = catalog.take_float("window")
    windows = catalog.take_floats("windows")
    catalog.reject_leftovers()

    sim = _Block("simulation", sections.get("simulation", {}))
    seed = sim.take_int("seed", 1)
    request_budget = sim.take_int("request_budget", 100_000)
    warmup_fraction = sim.take_float("warmup_fraction", 0.1)
    replications = sim.take_int("replications", 8)
    policy = sim.take_str("policy", "freshness_window")
    queue_cap = sim.take_int("queue_cap", 10_000_000)
    sim.reject_leftovers()

    sweep_param = None
    sweep_values: tuple[float, ...] = ()
    if "sweep" in sections:
        block = _Block("sweep", sections["sweep"])
        sweep_param = block.take_str("parameter")
        sweep_values = block.take_floats("values") or ()
        block.reject_leftovers()

    aoi_budget = None
    if "optimize" in sections:
        block = _Block("optimize", sections["optimize"])
        aoi_budget = block.take_float("aoi_budget")
        block.reject_leftovers()

    command = None
    if "run" in sections:
        block = _Block("run", sections["run"])
        command = block.take_str("command")
        block.reject_leftovers()

    return Scenario(
        radio=radio,
        rates=rates,
        item_count=item_count,
        zipf_concentration=zipf_concentration,
        total_arrival_rate=total_arrival_rate,
        window=window,
        windows=windows,
        popularities=popularities,
        seed=seed,
        request_budget=request_budget,
        warmup_fraction=warmup_fraction,
        replications=replications,
        policy=policy,
        queue_cap=queue_cap,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        aoi_budget=aoi_budget,
        command=command,
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read())


def dump_scenario(scenario: Scenario) -> str:
    """Canonical text for a scenario; parse_scenario round-trips it."""
    lines: list[str] = []
    if scenario.radio is not None:
        r = scenario.radio
        lines += [
            "[radio]",
            f"coverage_radius = {r.coverage_radius!r}",
            f"bandwidth = {r.bandwidth!r}",
            f"content_size_bits = {r.content_size!r}",
            f"path_loss_exponent = {r.path_loss_exponent!r}",
            f"noise_watts = {r.noise_power!r}",
            f"bs_tx_power = {r.bs_tx_power!r}",
            f"source_tx_power = {r.source_tx_power!r}",
            "",
        ]
    if scenario.rates is not None:
        lines += [
            "[rates]",
            f"mu_d = {scenario.rates.mu_d!r}",
            f"mu_r = {scenario.rates.mu_r!r}",
            "",
        ]
    lines += [
        "[catalog]",
        f"item_count = {scenario.item_count}",
        f"zipf_concentration = {scenario.zipf_concentration!r}",
        f"total_arrival_rate = {scenario.total_arrival_rate!r}",
    ]
    if scenario.popularities is not None:
        lines.append(
            "popularities = " + ", ".join(repr(p) for p in scenario.popularities)
        )
    if scenario.window is not None:
        lines.append(f"window = {scenario.window!r}")
    if scenario.windows is not None:
        lines.append("windows = " + ", ".join(repr(w) for w in scenario.windows))
    lines += [
        "",
        "[simulation]",
        f"seed = {scenario.seed}",
        f"request_budget = {scenario.request_budget}",
        f"warmup_fraction = {scenario.warmup_fraction!r}",
        f"replications = {scenario.replications}",
        f"policy = {scenario.policy}",
        f"queue_cap = {scenario.queue_cap}",
        "",
    ]
    if scenario.sweep_param is not None:
        lines += [
            "[sweep]",
            f"parameter = {scenario.sweep_param}",
            "values = " + ", ".join(repr(v) for v in scenario.sweep_values),
            "",
        ]
    if scenario.aoi_budget is not None:
        lines += ["[optimize]", f"aoi_budget = {scenario.aoi_budget!r}", ""]
    if scenario.command is not None:
        lines += ["[run]", f"command = {scenario.command}", ""]
    return "\n".join(lines)


def preset_names() -> tuple[str, ...]:
    root = resources.files(__package__) / "presets"
    names = sorted(
        entry.name[: -len(".scn")]
        for entry in root.iterdir()
        if entry.name.endswith(".scn")
    )
    return tuple(names)


def load_preset(name: str) -> Scenario:
    root = resources.files(__package__) / "presets"
    candidate = root / f"{name}.scn"
    if not candidate.is_file():
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return parse_scenario(candidate.read_text(encoding="utf-8"))
