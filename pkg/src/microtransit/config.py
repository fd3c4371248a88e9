"""Scenario configuration: YAML file plus overrides, validation and seed derivation."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dispatch import EPOCHS, SECONDS
from .engine import ConfigError, SflConfig, SimParams
from .metrics import DEFAULT_RATES, RIDERS, SERVICE_HOURS, TRIPS
from .network import CONTINUE, REVERSE
from .routing import RoutingParams

OUTPUT_ENV = "MICROTRANSIT_OUT"

DEFAULTS: dict[str, Any] = {
    "zone": {"name": None, "dir": None, "synthetic": None, "synthetic_seed": 0},
    "scenario": {"fleet": 4, "sfl": "I", "multiplier": 1, "seed": 0},
    "params": {
        "epoch_length_s": 30.0,
        "delta_s": 420.0,
        "demand_window_s": 3600.0,
        "driver_threshold_s": 300.0,
        "capacity": 6,
        "detour_factor": 1.5,
        "detour_slack_s": 300.0,
        "max_pickup_wait_s": 1800.0,
        "max_requests_per_route": 4,
        "penalty_time_unit": SECONDS,
        "mid_edge_mode": REVERSE,
        "window_slack_s": 600.0,
        "node_limit": 1_000_000,
        "rebalance": True,
    },
    "driver": {"responses": None, "zero_delay": False},
    "cost": {"rate": 35, "rates": list(DEFAULT_RATES), "hours": SERVICE_HOURS, "denominator": RIDERS},
    "sweep": {"fleets": None, "sfls": ["I", "II", "III", "IV"], "multipliers": [1, 2, 3], "seeds": None,
              "workers": 1},
    "output": None,
    "audit": False,
}

# fleet sizes per zone shape in the published experiment grid
ZONE_FLEETS = {"belvedere": [3, 4, 5], "west_atlanta": [5, 6, 7]}


def _line_map(text: str) -> dict[tuple, int]:
    """Dotted key path -> 1-based line of that key in the YAML source."""
    out: dict[tuple, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    if root is not None:
        walk(root, ())
    return out


@dataclass
class ScenarioConfig:
    data: dict
    source: str = "<defaults>"
    lines: dict = None

    # -- construction -----------------------------------------------------------

    @classmethod
    def defaults(cls) -> "ScenarioConfig":
        return cls(copy.deepcopy(DEFAULTS), lines={})

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ScenarioConfig":
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark else source
            raise ConfigError(f"{where}: {getattr(exc, 'problem', exc)}") from None
        lines = _line_map(text)
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}:1: top level must be a mapping")
        data = copy.deepcopy(DEFAULTS)
        for key, val in raw.items():
            if key not in data:
                raise ConfigError(f"{source}:{lines.get((key,), '?')}: unknown section {key!r}; "
                                  f"allowed: {', '.join(sorted(DEFAULTS))}")
            if isinstance(DEFAULTS[key], dict):
                if not isinstance(val, dict):
                    raise ConfigError(f"{source}:{lines.get((key,), '?')}: section {key!r} must be a mapping")
                for sub, v in val.items():
                    if sub not in DEFAULTS[key]:
                        raise ConfigError(f"{source}:{lines.get((key, sub), '?')}: unknown key {key}.{sub}; "
                                          f"allowed: {', '.join(sorted(DEFAULTS[key]))}")
                    data[key][sub] = v
            else:
                data[key] = val
        cfg = cls(data, source, lines)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        cfg = cls.from_text(p.read_text(), str(p))
        # relative zone paths are relative to the config file
        if cfg.data["zone"]["dir"] and not Path(cfg.data["zone"]["dir"]).is_absolute():
            cfg.data["zone"]["dir"] = str((p.parent / cfg.data["zone"]["dir"]).resolve())
        if cfg.data["driver"]["responses"] and not Path(cfg.data["driver"]["responses"]).is_absolute():
            cfg.data["driver"]["responses"] = str((p.parent / cfg.data["driver"]["responses"]).resolve())
        return cfg

    def override(self, dotted: Mapping[str, Any]) -> "ScenarioConfig":
        """Flag values win over the file; ``None`` means the flag was not given."""
        data = copy.deepcopy(self.data)
        for key, val in dotted.items():
            if val is None:
                continue
            head, _, sub = key.partition(".")
            if sub:
                data[head][sub] = val
            else:
                data[head] = val
        cfg = ScenarioConfig(data, self.source, self.lines)
        cfg.validate(flags=set(k for k, v in dotted.items() if v is not None))
        return cfg

    # -- validation ---------------------------------------------------------------

    def _where(self, *path, flags=frozenset()) -> str:
        if ".".join(path) in flags:
            return f"--{path[-1].replace('_', '-')}"
        line = (self.lines or {}).get(tuple(path))
        return f"{self.source}:{line}" if line else self.source

    def validate(self, flags=frozenset()) -> None:
        d = self.data

        def fail(path, msg):
            raise ConfigError(f"{self._where(*path, flags=flags)}: {msg}")

        def pos_int(path, v):
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                fail(path, f"{'.'.join(path)} must be a positive integer, got {v!r}")

        def pos_num(path, v):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                fail(path, f"{'.'.join(path)} must be a positive number, got {v!r}")

        sc = d["scenario"]
        pos_int(("scenario", "fleet"), sc["fleet"])
        pos_int(("scenario", "multiplier"), sc["multiplier"])
        if isinstance(sc["seed"], bool) or not isinstance(sc["seed"], int) or sc["seed"] < 0:
            fail(("scenario", "seed"), f"scenario.seed must be a non-negative integer, got {sc['seed']!r}")
        try:
            SflConfig.parse(sc["sfl"])
        except ConfigError as exc:
            fail(("scenario", "sfl"), str(exc))

        p = d["params"]
        for key in ("epoch_length_s", "delta_s", "demand_window_s", "detour_factor"):
            pos_num(("params", key), p[key])
        for key in ("driver_threshold_s", "detour_slack_s", "max_pickup_wait_s", "window_slack_s"):
            v = p[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                fail(("params", key), f"params.{key} must be a non-negative number, got {v!r}")
        for key in ("capacity", "max_requests_per_route", "node_limit"):
            pos_int(("params", key), p[key])
        if p["penalty_time_unit"] not in (SECONDS, EPOCHS):
            fail(("params", "penalty_time_unit"), f"penalty_time_unit must be {SECONDS} or {EPOCHS}")
        if p["mid_edge_mode"] not in (CONTINUE, REVERSE):
            fail(("params", "mid_edge_mode"), f"mid_edge_mode must be {CONTINUE} or {REVERSE}")

        c = d["cost"]
        if c["denominator"] not in (TRIPS, RIDERS):
            fail(("cost", "denominator"), f"cost.denominator must be {TRIPS} or {RIDERS}, got {c['denominator']!r}")
        pos_num(("cost", "hours"), c["hours"])

        z = d["zone"]
        if z["synthetic"] is not None and z["synthetic"] not in ZONE_FLEETS:
            fail(("zone", "synthetic"), f"zone.synthetic must be one of {', '.join(ZONE_FLEETS)}")

        sw = d["sweep"]
        for axis in ("fleets", "sfls", "multipliers", "seeds"):
            v = sw[axis]
            if v is None:
                continue
            if not isinstance(v, list) or not v:
                fail(("sweep", axis), f"sweep.{axis} must be a non-empty list")
            for item in v:
                if axis == "sfls":
                    try:
                        SflConfig.parse(item)
                    except ConfigError as exc:
                        fail(("sweep", axis), str(exc))
                elif axis == "seeds":
                    if not isinstance(item, int) or isinstance(item, bool) or item < 0:
                        fail(("sweep", axis), f"sweep.seeds entries must be non-negative integers, got {item!r}")
                else:
                    pos_int(("sweep", axis), item)
        pos_int(("sweep", "workers"), sw["workers"])

    # -- views ------------------------------------------------------------------------

    @property
    def zone_name(self) -> str:
        z = self.data["zone"]
        if z["name"]:
            return str(z["name"])
        if z["synthetic"]:
            return z["synthetic"]
        return Path(z["dir"]).name if z["dir"] else "zone"

    def sim_params(self) -> SimParams:
        p = self.data["params"]
        routing = RoutingParams(capacity=p["capacity"], detour_factor=float(p["detour_factor"]),
                                detour_slack_s=float(p["detour_slack_s"]),
                                max_pickup_wait_s=float(p["max_pickup_wait_s"]),
                                max_requests=p["max_requests_per_route"], mid_edge_mode=p["mid_edge_mode"])
        return SimParams(epoch_length=float(p["epoch_length_s"]), delta=float(p["delta_s"]),
                         penalty_time_unit=p["penalty_time_unit"], demand_window=float(p["demand_window_s"]),
                         driver_threshold=float(p["driver_threshold_s"]), routing=routing,
                         rebalance=bool(p["rebalance"]), node_limit=p["node_limit"])

    def constants(self) -> dict:
        """Every design constant that shapes the result, echoed into reports."""
        out = self.sim_params().describe()
        c, p = self.data["cost"], self.data["params"]
        out.update(window_slack_s=float(p["window_slack_s"]), cost_rate=c["rate"], cost_rates=list(c["rates"]),
                   service_hours=c["hours"], cost_denominator=c["denominator"], node_limit=p["node_limit"],
                   driver_responses="zero" if self.data["driver"]["zero_delay"] else
                   ("file" if self.data["driver"]["responses"] else "synthetic"),
                   initial_placement="round-robin by stop id, remainder to lowest ids",
                   travel_time_calibration="as ingested (per zone)",
                   user_ids="kept from pool days")
        return out

    def grid(self) -> list[tuple[int, str, int, int]]:
        sw, sc = self.data["sweep"], self.data["scenario"]
        fleets = sw["fleets"] or ZONE_FLEETS.get(self.zone_name, [sc["fleet"]])
        sfls = sw["sfls"]
        if not sfls:
            raise ConfigError(f"{self._where('sweep', 'sfls')}: SFL axis is empty")
        mults = sw["multipliers"]
        seeds = sw["seeds"] or [sc["seed"]]
        return [(f, SflConfig.parse(s).level.value, m, sd) for f in fleets for s in sfls for m in mults
                for sd in seeds]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any JSON-able parts; independent of Python's hash salt."""
    blob = json.dumps([str(p) for p in parts], separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


def scenario_seed(master: int, zone: str, fleet: int, sfl: str, multiplier: int) -> int:
    return derive_seed("scenario", master, zone, fleet, sfl, multiplier)


def demand_seed(master: int, zone: str, multiplier: int) -> int:
    # shared by every fleet size and SFL so they face the same sampled day
    return derive_seed("demand", master, zone, multiplier)
