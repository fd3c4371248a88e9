"""Command line: run one scenario, sweep a grid, generate instances, replay logs, cost tables."""
from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import OUTPUT_ENV, ScenarioConfig, demand_seed, scenario_seed
from .demand import DemandDay, DemandError, read_requests, scale_ridership, write_requests
from .engine import (ConfigError, DriverModel, EventLog, SimulationError, SimulationResult, read_response_times,
                     simulate, synthetic_response_times)
from .metrics import (DEFAULT_RATES, RIDERS, TRIPS, DemandLevel, MetricsReport, build_report, cost_table,
                      cost_table_csv, report_csv, report_json)
from .network import NetworkError, Zone, load_zone, save_zone
from .synthetic import BELVEDERE, WEST_ATLANTA, ZoneShape, make_instance

EXIT_CONFIG = 2
EXIT_INVARIANT = 3

SHAPES = {"belvedere": BELVEDERE, "west_atlanta": WEST_ATLANTA}

# published trip and rider counts behind the cost tables, per ridership level
COST_PRESETS = {
    "belvedere": [DemandLevel("1x", 39, 43, (3, 4, 5)), DemandLevel("2x", 78, 82, (3, 4, 5)),
                  DemandLevel("3x", 117, 122, (3, 4, 5))],
    "west_atlanta": [DemandLevel("1x", 82, 89, (5, 6, 7)), DemandLevel("2x", 164, 182, (5, 6, 7)),
                     DemandLevel("3x", 246, 270, (5, 6, 7))],
}


# --- instances -------------------------------------------------------------------

@dataclass
class Instance:
    zone: Zone
    base: DemandDay
    pool: list[DemandDay]


def write_instance(inst: Instance, directory, binary: bool = False) -> list[Path]:
    d = Path(directory)
    paths = list(save_zone(inst.zone, d, binary).values())
    write_requests(d / "requests.csv", inst.base)
    paths.append(d / "requests.csv")
    if inst.pool:
        (d / "pool").mkdir(exist_ok=True)
        for k, day in enumerate(inst.pool):
            p = d / "pool" / f"day_{k:02d}.csv"
            write_requests(p, day)
            paths.append(p)
    return paths


def read_instance(directory, name: str | None = None) -> Instance:
    d = Path(directory)
    if not (d / "stops.csv").exists():
        raise ConfigError(f"{d}: no stops.csv")
    if (d / "matrix.bin").exists():
        zone = load_zone(d / "stops.csv", d / "matrix.bin", name=name or d.name)
    else:
        zone = load_zone(d / "stops.csv", d / "time.csv", d / "distance.csv", name=name or d.name)
    base = read_requests(d / "requests.csv")
    pool = [read_requests(p) for p in sorted((d / "pool").glob("*.csv"))] if (d / "pool").is_dir() else []
    return Instance(zone, base, pool)


@functools.lru_cache(maxsize=8)
def _synthetic_instance(shape: str, seed: int) -> Instance:
    zone, base, pool = make_instance(SHAPES[shape], seed)
    return Instance(zone, base, pool)


def load_instance(cfg: ScenarioConfig) -> Instance:
    z = cfg.data["zone"]
    if z["dir"]:
        return read_instance(z["dir"], cfg.zone_name)
    if z["synthetic"]:
        return _synthetic_instance(z["synthetic"], int(z["synthetic_seed"]))
    raise ConfigError(f"{cfg.source}: zone.dir or zone.synthetic is required")


@functools.lru_cache(maxsize=1)
def _default_responses() -> tuple[float, ...]:
    return synthetic_response_times()


def driver_model(cfg: ScenarioConfig) -> DriverModel:
    drv, threshold = cfg.data["driver"], float(cfg.data["params"]["driver_threshold_s"])
    if drv["zero_delay"]:
        return DriverModel((0.0,), threshold)
    if drv["responses"]:
        return DriverModel(read_response_times(drv["responses"]), threshold)
    return DriverModel(_default_responses(), threshold)


# --- one scenario --------------------------------------------------------------------

@dataclass
class RunOutput:
    report: MetricsReport
    result: SimulationResult
    day: DemandDay
    audit: list[str]


def run_scenario(cfg: ScenarioConfig, inst: Instance | None = None) -> RunOutput:
    """Load, scale demand, simulate and measure; no filesystem writes."""
    inst = inst or load_instance(cfg)
    sc = cfg.data["scenario"]
    zone_name = cfg.zone_name
    fleet, sfl, mult, master = sc["fleet"], str(sc["sfl"]).upper(), sc["multiplier"], sc["seed"]
    d_seed = demand_seed(master, zone_name, mult)
    s_seed = scenario_seed(master, zone_name, fleet, sfl, mult)
    day = scale_ridership(inst.base, inst.pool, mult, d_seed, inst.zone.matrix,
                          float(cfg.data["params"]["window_slack_s"]))
    audit: list[str] = []
    hook = (lambda kind, line: audit.append(json.dumps({"kind": kind, "record": json.loads(line)},
                                                        sort_keys=True))) if cfg.data["audit"] else None
    result = simulate(inst.zone, day, fleet, sfl, cfg.sim_params(), driver_model(cfg), s_seed, hook)
    scenario = {"zone": zone_name, "fleet": fleet, "sfl": sfl, "multiplier": mult, "seed": master,
                "scenario_seed": s_seed, "demand_seed": d_seed, "requests": len(day),
                "epochs": result.epochs, "suboptimal_epochs": result.suboptimal_epochs}
    if day.shortfall:
        scenario["shortfall"] = {"target": day.shortfall.target, "achieved": day.shortfall.achieved}
    constants = cfg.constants()
    result.log.meta = {"scenario": scenario, "constants": constants}
    report = build_report(result.log, scenario, constants, fleet)
    if day.shortfall:
        report.flags = report.flags + ("pool-shortfall",)
    return RunOutput(report, result, day, audit)


def scenario_tag(zone: str, fleet: int, sfl: str, mult: int, seed: int) -> str:
    return f"{zone}_V{fleet}_SFL{sfl}_x{mult}_s{seed}"


def write_run(out: RunOutput, directory) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"events.jsonl": out.result.log.to_jsonl(), "report.csv": report_csv([out.report]),
             "report.json": report_json(out.report)}
    if out.audit:
        files["audit.jsonl"] = "\n".join(out.audit) + "\n"
    paths = []
    for name, text in files.items():
        (d / name).write_text(text)
        paths.append(d / name)
    write_requests(d / "requests.csv", out.day, with_tags=True)
    paths.append(d / "requests.csv")
    return paths


def _output_dir(cfg: ScenarioConfig) -> Path:
    return Path(cfg.data["output"] or os.environ.get(OUTPUT_ENV) or "out")


# --- sweep -----------------------------------------------------------------------------

def _sweep_one(data: dict, source: str, point: tuple, out_root: str | None) -> dict:
    fleet, sfl, mult, seed = point
    cfg = ScenarioConfig(data, source, {})
    cfg = cfg.override({"scenario.fleet": fleet, "scenario.sfl": sfl, "scenario.multiplier": mult,
                        "scenario.seed": seed})
    base = {"zone": cfg.zone_name, "fleet": fleet, "sfl": sfl, "multiplier": mult, "seed": seed}
    try:
        out = run_scenario(cfg)
        if out_root:
            write_run(out, Path(out_root) / scenario_tag(cfg.zone_name, fleet, sfl, mult, seed))
        row = out.report.row()
        row.update(status="ok", error="")
        return row
    except (SimulationError, ConfigError, DemandError, NetworkError, ValueError) as exc:
        return {**base, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def sweep(cfg: ScenarioConfig, out_root=None, workers: int | None = None) -> list[dict]:
    """Every grid point, merged in grid order whatever order they finish in."""
    grid = cfg.grid()
    workers = workers or cfg.data["sweep"]["workers"]
    job = functools.partial(_sweep_one, cfg.data, cfg.source, out_root=str(out_root) if out_root else None)
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(job, grid))
    else:
        rows = [job(p) for p in grid]
    return rows


def sweep_csv(rows: list[dict]) -> str:
    # rows are already flattened; keep grid order, failures included
    return report_csv([], rows)


# --- argument parsing ------------------------------------------------------------------

def _csv_list(kind):
    def parse(text: str):
        items = [t.strip() for t in text.split(",") if t.strip()]
        return [kind(t) for t in items]
    return parse


def _rates(text: str) -> list:
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        out, v = [], lo
        while v <= hi + 1e-9:
            out.append(int(v) if float(v).is_integer() else v)
            v += step
        return out
    return [int(x) if float(x).is_integer() else float(x) for x in _csv_list(float)(text)]


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML scenario file")
    p.add_argument("--zone-dir", help="instance directory (stops.csv, matrices, requests.csv, pool/)")
    p.add_argument("--synthetic", choices=sorted(SHAPES), help="use a generated instance of this shape")
    p.add_argument("--synthetic-seed", type=int)
    p.add_argument("--zone-name")
    p.add_argument("--fleet", type=int)
    p.add_argument("--sfl")
    p.add_argument("--multiplier", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./out)")
    p.add_argument("--audit", action="store_true", default=None, help="dump dispatch/rebalance records")
    p.add_argument("--epoch-length", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--demand-window", type=float)
    p.add_argument("--driver-threshold", type=float)
    p.add_argument("--capacity", type=int)
    p.add_argument("--detour-factor", type=float)
    p.add_argument("--detour-slack", type=float)
    p.add_argument("--max-pickup-wait", type=float)
    p.add_argument("--penalty-time-unit", choices=["seconds", "epochs"])
    p.add_argument("--mid-edge-mode", choices=["continue", "reverse"])
    p.add_argument("--no-rebalance", action="store_true", default=None)
    p.add_argument("--zero-delay", action="store_true", default=None, help="driver responses D={0}")
    p.add_argument("--driver-responses", help="CSV of driver response times in seconds")
    p.add_argument("--cost-rate", type=float)
    p.add_argument("--hours", type=float)
    p.add_argument("--cost-denominator", choices=[TRIPS, RIDERS])


def _overrides(a: argparse.Namespace) -> dict:
    num = lambda v: None if v is None else (int(v) if float(v).is_integer() else v)  # noqa: E731
    return {
        "zone.dir": a.zone_dir, "zone.synthetic": a.synthetic, "zone.synthetic_seed": a.synthetic_seed,
        "zone.name": a.zone_name,
        "scenario.fleet": a.fleet, "scenario.sfl": a.sfl, "scenario.multiplier": a.multiplier, "scenario.seed": a.seed,
        "output": a.out, "audit": a.audit,
        "params.epoch_length_s": a.epoch_length, "params.delta_s": a.delta, "params.demand_window_s": a.demand_window,
        "params.driver_threshold_s": a.driver_threshold, "params.capacity": a.capacity,
        "params.detour_factor": a.detour_factor, "params.detour_slack_s": a.detour_slack,
        "params.max_pickup_wait_s": a.max_pickup_wait, "params.penalty_time_unit": a.penalty_time_unit,
        "params.mid_edge_mode": a.mid_edge_mode, "params.rebalance": False if a.no_rebalance else None,
        "driver.zero_delay": a.zero_delay, "driver.responses": a.driver_responses,
        "cost.rate": num(a.cost_rate), "cost.hours": num(a.hours), "cost.denominator": a.cost_denominator,
    }


def _config(a: argparse.Namespace, extra: dict | None = None) -> ScenarioConfig:
    cfg = ScenarioConfig.load(a.config) if a.config else ScenarioConfig.defaults()
    ov = _overrides(a)
    ov.update(extra or {})
    return cfg.override(ov)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="microtransit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    _scenario_flags(p)

    p = sub.add_parser("sweep", help="simulate a fleet x SFL x multiplier x seed grid")
    _scenario_flags(p)
    p.add_argument("--fleets", type=_csv_list(int))
    p.add_argument("--sfls", type=_csv_list(str))
    p.add_argument("--multipliers", type=_csv_list(int))
    p.add_argument("--seeds", type=_csv_list(int))
    p.add_argument("--workers", type=int)

    p = sub.add_parser("gen-synthetic", help="write a synthetic instance")
    p.add_argument("--shape", choices=sorted(SHAPES) + ["custom"], default="belvedere")
    p.add_argument("--stops", type=int)
    p.add_argument("--idle", type=int)
    p.add_argument("--requests", type=int)
    p.add_argument("--bbox", type=_csv_list(float), help="lat_min,lat_max,lon_min,lon_max")
    p.add_argument("--span", type=float, help="service span in seconds")
    p.add_argument("--pool-days", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="write the matrix container instead of CSVs")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="recompute the report from a saved event log")
    p.add_argument("log")
    p.add_argument("--out", help="directory for report.csv/report.json (default: print CSV)")

    p = sub.add_parser("cost-table", help="cost per trip over rates, fleets and demand levels")
    p.add_argument("--zone", choices=sorted(COST_PRESETS), default="belvedere")
    p.add_argument("--levels", help="label:trips:riders:fleet|fleet,... overriding the zone preset")
    p.add_argument("--rates", type=_rates, default=list(DEFAULT_RATES), help="a,b,c or lo:hi:step")
    p.add_argument("--hours", type=float, default=13)
    p.add_argument("--cost-denominator", choices=[TRIPS, RIDERS], default=RIDERS)
    p.add_argument("--out", help="CSV path (default: stdout)")
    return ap


def _parse_levels(text: str) -> list[DemandLevel]:
    out = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 4:
            raise ConfigError(f"level {chunk!r} must be label:trips:riders:fleet|fleet")
        label, trips, riders, fleets = parts
        out.append(DemandLevel(label, int(trips), int(riders), tuple(int(f) for f in fleets.split("|"))))
    return out


# --- commands ---------------------------------------------------------------------------

def cmd_run(a) -> int:
    cfg = _config(a)
    out = run_scenario(cfg)
    sc = cfg.data["scenario"]
    d = _output_dir(cfg) / scenario_tag(cfg.zone_name, sc["fleet"], str(sc["sfl"]).upper(), sc["multiplier"],
                                        sc["seed"])
    write_run(out, d)
    print(report_csv([out.report]), end="")
    print(f"wrote {d}", file=sys.stderr)
    return 0


def cmd_sweep(a) -> int:
    extra = {"sweep.fleets": a.fleets, "sweep.sfls": a.sfls, "sweep.multipliers": a.multipliers,
             "sweep.seeds": a.seeds, "sweep.workers": a.workers}
    if a.sfls is not None and not a.sfls:
        raise ConfigError("--sfls: SFL axis is empty")
    cfg = _config(a, extra)
    root = _output_dir(cfg)
    rows = sweep(cfg, root)
    root.mkdir(parents=True, exist_ok=True)
    (root / "sweep.csv").write_text(sweep_csv(rows))
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows) - len(failed)} of {len(rows)} scenarios ok; wrote {root / 'sweep.csv'}", file=sys.stderr)
    for r in failed:
        print(f"failed: {scenario_tag(r['zone'], r['fleet'], r['sfl'], r['multiplier'], r['seed'])}: {r['error']}",
              file=sys.stderr)
    return EXIT_INVARIANT if failed else 0


def cmd_gen(a) -> int:
    shape = SHAPES.get(a.shape, ZoneShape(0, 0, 0, name="custom"))
    changes = {"n_stops": a.stops, "n_idle": a.idle, "n_requests": a.requests, "span_s": a.span,
               "pool_days": a.pool_days, "bbox": tuple(a.bbox) if a.bbox else None}
    from dataclasses import replace
    shape = replace(shape, **{k: v for k, v in changes.items() if v is not None})
    if shape.n_stops < 2 or shape.n_requests < 0:
        raise ConfigError("--stops must be at least 2 and --requests non-negative")
    if shape.n_idle > shape.n_stops:
        raise ConfigError(f"idle count {shape.n_idle} exceeds stop count {shape.n_stops}")
    if shape.bbox and len(shape.bbox) != 4:
        raise ConfigError("--bbox needs four numbers")
    zone, base, pool = make_instance(shape, a.seed)
    paths = write_instance(Instance(zone, base, pool), a.out, a.binary)
    print(f"wrote {len(paths)} files to {a.out}", file=sys.stderr)
    return 0


def cmd_replay(a) -> int:
    log = EventLog.read(a.log)
    sc, consts = log.meta.get("scenario", {}), log.meta.get("constants", {})
    report = build_report(log, sc, consts, sc.get("fleet"))
    if sc.get("shortfall"):
        report.flags = report.flags + ("pool-shortfall",)
    if a.out:
        d = Path(a.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.csv").write_text(report_csv([report]))
        (d / "report.json").write_text(report_json(report))
    else:
        print(report_csv([report]), end="")
    return 0


def cmd_cost_table(a) -> int:
    levels = _parse_levels(a.levels) if a.levels else COST_PRESETS[a.zone]
    hours = int(a.hours) if float(a.hours).is_integer() else a.hours
    header, rows = cost_table(levels, a.rates, hours, a.cost_denominator)
    text = cost_table_csv(header, rows)
    if a.out:
        Path(a.out).write_text(text)
    else:
        print(text, end="")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "gen-synthetic": cmd_gen, "replay": cmd_replay,
            "cost-table": cmd_cost_table}


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return COMMANDS[a.command](a)
    except (ConfigError, DemandError, NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
