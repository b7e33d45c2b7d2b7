"""Scenario files: a typed key tree validated against a single schema.

A scenario is a nested mapping (YAML); keys mirror module config names.
Unknown keys are rejected with their dotted path so typos die loudly, and
scale-dependent defaults (desk vs paper) resolve in one place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import yaml


class ScenarioError(ValueError):
    """Invalid scenario content; `path` is the dotted key that failed."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class Field:
    key: str
    typ: type
    default: Any          # None means: resolved by run.scale
    help: str


SCHEMA: tuple[Field, ...] = (
    Field("run.scale", str, "desk", "experiment scale: desk | paper"),
    Field("run.seed", int, None, "master seed (or pass --seed)"),
    Field("run.rounds", int, None, "simulation rounds (desk 3, paper 10)"),
    Field("run.duration_s", float, None,
          "measured seconds per round (desk 60, paper 600)"),
    Field("run.warmup_s", float, 2.0, "settling time before flows start"),
    Field("run.jitter_s", float, 5.0, "flow start jitter window length"),
    Field("area.n_cells", int, 3, "number of base stations in a row"),
    Field("area.cell_radius_m", float, 500.0, "cell disc radius"),
    Field("area.henb_spacing_m", float, 1000.0, "base station spacing"),
    Field("area.epc_offset_m", float, 1500.0,
          "core distance beyond the first base station"),
    Field("apps.ues_per_cell", int, None,
          "terminals per cell (desk 50, paper 250)"),
    Field("apps.voice_sessions_per_cell", int, None,
          "two-way intracell calls per cell (desk 4, paper 20)"),
    Field("apps.video_ul_per_cell", int, None,
          "uplink video streams per cell (desk 1, paper 5)"),
    Field("apps.video_dl_per_cell", int, None,
          "downlink video streams per cell (desk 1, paper 5)"),
    Field("apps.intercell_sessions_per_pair", int, None,
          "two-way calls per adjacent cell pair (desk 2, paper 10)"),
    Field("backhaul.capacity_bps", float, 20e6, "backhaul link rate"),
    Field("backhaul.hop_delay_us", int, 2_000, "per-hop forwarding delay"),
    Field("backhaul.max_range_m", float, 1_600.0,
          "planning cap on backhaul link length"),
    Field("backhaul.dma_capacity_bytes", int, 16 * 1024 * 1024,
          "disruption holding buffer size per destination"),
    Field("cell.n_rb", int, 50, "resource blocks per cell"),
    Field("cell.tdd_config", int, 1, "TDD uplink/downlink configuration"),
    Field("cell.bits_per_symbol", int, 4, "modulation order (16-QAM: 4)"),
    Field("cell.code_rate", float, 1.0 / 3.0, "effective code rate"),
    Field("gw.budget", float, 10.0, "gateway function resource budget"),
    Field("outage.link", str, "", "backhaul link to cut, e.g. epc-henb1"),
    Field("outage.at_s", float, 0.0, "outage start (measurement-relative)"),
    Field("outage.duration_s", float, 0.0, "outage length in seconds"),
    Field("fig7.m", int, 75, "terminals per drop"),
    Field("fig7.drops", int, 2000, "Monte Carlo drops per grid point"),
    Field("fig7.q_start", float, 0.05, "activity grid start"),
    Field("fig7.q_stop", float, 1.0, "activity grid stop (inclusive)"),
    Field("fig7.q_step", float, 0.05, "activity grid step"),
    Field("fig7.phis", list, [0.8, 0.92], "coverage fractions to sweep"),
)

_BY_KEY = {f.key: f for f in SCHEMA}

SCALE_DEFAULTS: dict[str, dict[str, Any]] = {
    "desk": {
        "run.rounds": 3,
        "run.duration_s": 60.0,
        "apps.ues_per_cell": 50,
        "apps.voice_sessions_per_cell": 4,
        "apps.video_ul_per_cell": 1,
        "apps.video_dl_per_cell": 1,
        "apps.intercell_sessions_per_pair": 2,
    },
    "paper": {
        "run.rounds": 10,
        "run.duration_s": 600.0,
        "apps.ues_per_cell": 250,
        "apps.voice_sessions_per_cell": 20,
        "apps.video_ul_per_cell": 5,
        "apps.video_dl_per_cell": 5,
        "apps.intercell_sessions_per_pair": 10,
    },
}


def _flatten(tree: dict, prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in tree.items():
        if not isinstance(key, str):
            raise ScenarioError(prefix.rstrip("."),
                                f"non-string key {key!r}")
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{path}."))
        else:
            flat[path] = value
    return flat


def _check_type(path: str, value: Any, typ: type) -> Any:
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ScenarioError(path, "expected int, got bool")
    if not isinstance(value, typ):
        raise ScenarioError(
            path, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


class Scenario:
    """Validated configuration with scale-aware default resolution."""

    def __init__(self, overrides: Optional[dict[str, Any]] = None):
        self.values: dict[str, Any] = {}
        for path, value in sorted((overrides or {}).items()):
            field = _BY_KEY.get(path)
            if field is None:
                raise ScenarioError(path, "unknown key")
            self.values[path] = _check_type(path, value, field.typ)
        scale = self.values.get("run.scale", _BY_KEY["run.scale"].default)
        if scale not in SCALE_DEFAULTS:
            raise ScenarioError("run.scale",
                                f"must be one of {sorted(SCALE_DEFAULTS)}")

    @property
    def scale(self) -> str:
        return self.values.get("run.scale", "desk")

    def get(self, key: str) -> Any:
        field = _BY_KEY.get(key)
        if field is None:
            raise KeyError(key)
        if key in self.values:
            return self.values[key]
        if field.default is None:
            scaled = SCALE_DEFAULTS[self.scale].get(key)
            return scaled
        return field.default

    @property
    def seed(self) -> Optional[int]:
        return self.get("run.seed")

    def with_values(self, **overrides: Any) -> "Scenario":
        merged = dict(self.values)
        merged.update(overrides)
        return Scenario(merged)


def parse_scenario(tree: Any) -> Scenario:
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ScenarioError("", "scenario root must be a mapping")
    return Scenario(_flatten(tree))


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            tree = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError("", f"not parseable: {exc}") from exc
    return parse_scenario(tree)


def describe_schema() -> str:
    """Key-by-key listing with defaults, used by the CLI help text."""
    lines = []
    for field in SCHEMA:
        default = field.default
        if default is None:
            desk = SCALE_DEFAULTS["desk"].get(field.key)
            paper = SCALE_DEFAULTS["paper"].get(field.key)
            if desk is None:
                shown = "none"
            else:
                shown = f"desk {desk} / paper {paper}"
        else:
            shown = repr(default)
        lines.append(f"  {field.key:<38} {field.typ.__name__:<6}"
                     f" default {shown}: {field.help}")
    return "\n".join(lines)
