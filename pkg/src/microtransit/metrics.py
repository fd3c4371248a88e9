"""Service statistics from an event log, and cost-per-trip tables."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

SERVICE_HOURS = 13
TRIPS = "trips"
RIDERS = "riders"
DEFAULT_RATES = tuple(range(20, 51, 5))


class IncompleteLogError(ValueError):
    def __init__(self, missing: Sequence[int]):
        self.missing = sorted(missing)
        head = ", ".join(map(str, self.missing[:20]))
        more = f" (+{len(self.missing) - 20} more)" if len(self.missing) > 20 else ""
        super().__init__(f"requests never completed: {head}{more}")


class UndefinedCostError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    std: float
    p95: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "std": self.std, "p95": self.p95, "min": self.min, "max": self.max}


EMPTY_SUMMARY = Summary(0, 0.0, 0.0, 0.0, 0.0, 0.0)


def nearest_rank(values: Sequence[float], pct: float) -> float:
    """Smallest value with at least ``pct`` percent of the sample at or below it."""
    if not values:
        raise ValueError("percentile of an empty sample")
    xs = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(xs) - 1e-12))
    return xs[rank - 1]


def summarize(values: Sequence[float]) -> Summary:
    if not values:
        return EMPTY_SUMMARY
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return Summary(n, mean, math.sqrt(var), nearest_rank(values, 95), min(values), max(values))


# --- per-request times -----------------------------------------------------------

@dataclass
class TripTimes:
    requested: dict[int, dict]
    pickup: dict[int, float]
    dropoff: dict[int, float]

    @property
    def missing(self) -> list[int]:
        return sorted(r for r in self.requested if r not in self.dropoff or r not in self.pickup)

    def waits(self) -> dict[int, float]:
        return {r: self.pickup[r] - self.requested[r]["e"] for r in sorted(self.requested)}

    def rides(self) -> dict[int, float]:
        return {r: self.dropoff[r] - self.pickup[r] for r in sorted(self.requested)}


def trip_times(log: Iterable[dict]) -> TripTimes:
    req, pu, do = {}, {}, {}
    for rec in log:
        kind = rec["type"]
        if kind == "request_received":
            req[rec["request"]] = rec
        elif kind == "pickup":
            pu[rec["request"]] = rec["t"]
        elif kind == "dropoff":
            do[rec["request"]] = rec["t"]
    return TripTimes(req, pu, do)


def _complete(log) -> TripTimes:
    tt = trip_times(log)
    if tt.missing:
        raise IncompleteLogError(tt.missing)
    return tt


def waiting_stats(log) -> Summary:
    """Pickup minus earliest pickup time, per request."""
    return summarize(list(_complete(log).waits().values()))


def travel_stats(log) -> Summary:
    """In-vehicle time, dropoff minus pickup, per request."""
    return summarize(list(_complete(log).rides().values()))


# --- distances -------------------------------------------------------------------

@dataclass
class Odometer:
    odometer_km: float = 0.0
    empty_km: float = 0.0
    loaded_km: float = 0.0
    shared_km: float = 0.0

    def add(self, km: float, riders: int) -> None:
        self.odometer_km += km
        if riders == 0:
            self.empty_km += km
        else:
            self.loaded_km += km
            if riders >= 2:
                self.shared_km += km

    def as_dict(self) -> dict:
        return {"odometer_km": self.odometer_km, "empty_km": self.empty_km,
                "loaded_km": self.loaded_km, "shared_km": self.shared_km}


def distances(log: Iterable[dict], fleet: int | None = None) -> dict[int, Odometer]:
    """Per-shuttle distance, split by load, from completed and cut-short legs."""
    out: dict[int, Odometer] = {v: Odometer() for v in range(fleet)} if fleet else {}
    for rec in log:
        if rec["type"] in ("arrival", "divert"):
            out.setdefault(rec["shuttle"], Odometer()).add(rec["km"], rec["riders"])
    return out


@dataclass(frozen=True)
class Rate:
    value: float
    flag: str | None = None


def ridesharing_rate(log_or_odometers) -> Rate:
    """Share of fleet distance driven with two or more riders aboard."""
    odo = log_or_odometers if isinstance(log_or_odometers, Mapping) else distances(log_or_odometers)
    total = math.fsum(o.odometer_km for o in odo.values())
    shared = math.fsum(o.shared_km for o in odo.values())
    if total <= 0:
        return Rate(0.0, "zero-distance")
    return Rate(min(1.0, max(0.0, shared / total)))


# --- cost ------------------------------------------------------------------------

def cost_per_trip_exact(rate, hours, fleet: int, served: int) -> Fraction:
    if served <= 0:
        raise UndefinedCostError("cost per trip is undefined when nothing was served")
    return Fraction(str(rate)) * Fraction(str(hours)) * fleet / served


def round_half_up(x: Fraction, places: int = 2) -> Decimal:
    q = Decimal(1).scaleb(-places)
    return (Decimal(x.numerator) / Decimal(x.denominator)).quantize(q, rounding=ROUND_HALF_UP) \
        if x.denominator != 1 else Decimal(x.numerator).quantize(q)


def cost_per_trip(rate, hours=SERVICE_HOURS, fleet: int = 1, riders_served: int = 1) -> float:
    """``rate * hours * fleet / riders_served`` rounded half-up to cents."""
    return float(round_half_up(cost_per_trip_exact(rate, hours, fleet, riders_served)))


@dataclass(frozen=True)
class DemandLevel:
    label: str
    trips: int
    riders: int
    fleets: tuple[int, ...]


def cost_table(levels: Sequence[DemandLevel], rates: Sequence = DEFAULT_RATES, hours=SERVICE_HOURS,
               denominator: str = RIDERS) -> tuple[list[str], list[list]]:
    """Rows of rate then one cell per (demand level, fleet size), table style."""
    if denominator not in (TRIPS, RIDERS):
        raise ValueError(f"denominator must be {TRIPS!r} or {RIDERS!r}")
    header = ["rate"] + [f"{lv.label}_V{v}" for lv in levels for v in lv.fleets]
    rows = []
    for rate in rates:
        row = [rate]
        for lv in levels:
            n = lv.riders if denominator == RIDERS else lv.trips
            row.extend(cost_per_trip(rate, hours, v, n) for v in lv.fleets)
        rows.append(row)
    return header, rows


def cost_table_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[0]] + [f"{c:.2f}" for c in row[1:]])
    return buf.getvalue()


# --- report ----------------------------------------------------------------------

REPORT_COLUMNS = ("zone", "fleet", "sfl", "multiplier", "seed", "mean_wait_s", "std_wait_s", "p95_wait_s",
                  "mean_travel_s", "std_travel_s", "p95_travel_s", "total_km", "empty_km", "shared_km",
                  "rideshare_rate", "trips", "riders", "cost_per_trip", "cost_rate", "cost_denominator",
                  "end_time_s", "flags")


@dataclass
class MetricsReport:
    scenario: dict
    wait: Summary
    travel: Summary
    per_shuttle: dict[int, Odometer]
    rideshare: Rate
    trips: int
    riders: int
    waits: dict[int, float] = field(default_factory=dict)
    rides: dict[int, float] = field(default_factory=dict)
    cost_rows: list[tuple] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    end_time: float = 0.0
    flags: tuple[str, ...] = ()

    @property
    def total_km(self) -> float:
        return math.fsum(o.odometer_km for o in self.per_shuttle.values())

    @property
    def empty_km(self) -> float:
        return math.fsum(o.empty_km for o in self.per_shuttle.values())

    @property
    def shared_km(self) -> float:
        return math.fsum(o.shared_km for o in self.per_shuttle.values())

    def row(self) -> dict:
        s = self.scenario
        rate = self.constants.get("cost_rate")
        cost = dict(self.cost_rows).get(rate, "") if rate is not None else ""
        return {"zone": s.get("zone", ""), "fleet": s.get("fleet", ""), "sfl": s.get("sfl", ""),
                "multiplier": s.get("multiplier", ""), "seed": s.get("seed", ""),
                "mean_wait_s": _fmt(self.wait.mean), "std_wait_s": _fmt(self.wait.std),
                "p95_wait_s": _fmt(self.wait.p95), "mean_travel_s": _fmt(self.travel.mean),
                "std_travel_s": _fmt(self.travel.std), "p95_travel_s": _fmt(self.travel.p95),
                "total_km": _fmt(self.total_km), "empty_km": _fmt(self.empty_km),
                "shared_km": _fmt(self.shared_km), "rideshare_rate": _fmt(self.rideshare.value),
                "trips": self.trips, "riders": self.riders,
                "cost_per_trip": "" if cost == "" else f"{cost:.2f}", "cost_rate": "" if rate is None else rate,
                "cost_denominator": self.constants.get("cost_denominator", RIDERS), "end_time_s": _fmt(self.end_time),
                "flags": ";".join(self.flags)}

    def to_json(self) -> dict:
        return {"scenario": self.scenario, "constants": self.constants,
                "wait_s": self.wait.as_dict(), "travel_s": self.travel.as_dict(),
                "fleet_km": {"odometer_km": self.total_km, "empty_km": self.empty_km, "shared_km": self.shared_km},
                "per_shuttle": {str(v): o.as_dict() for v, o in sorted(self.per_shuttle.items())},
                "rideshare_rate": self.rideshare.value, "trips": self.trips, "riders": self.riders,
                "cost_table": [{"rate": r, "cost_per_trip": c} for r, c in self.cost_rows],
                "per_request": {str(r): {"wait_s": self.waits[r], "travel_s": self.rides[r]} for r in sorted(self.waits)},
                "end_time_s": self.end_time, "flags": list(self.flags)}


def _fmt(x: float) -> str:
    # fixed precision keeps the CSV stable across platforms
    return f"{x:.6f}"


def build_report(log, scenario: Mapping | None = None, constants: Mapping | None = None,
                 fleet: int | None = None) -> MetricsReport:
    """Everything the report needs, read off the event log alone."""
    records = list(log)
    scenario = dict(scenario or {})
    constants = dict(constants or {})
    fleet = fleet if fleet is not None else scenario.get("fleet")
    tt = trip_times(records)
    if tt.missing:
        raise IncompleteLogError(tt.missing)
    waits, rides = tt.waits(), tt.rides()
    odo = distances(records, fleet)
    share = ridesharing_rate(odo)
    trips = len(tt.requested)
    riders = sum(int(r.get("riders", 1)) for r in tt.requested.values())
    flags = []
    if share.flag:
        flags.append(share.flag)
    if not trips:
        flags.append("empty-demand")

    denom = constants.get("cost_denominator", RIDERS)
    served = riders if denom == RIDERS else trips
    rates = constants.get("cost_rates", list(DEFAULT_RATES))
    hours = constants.get("service_hours", SERVICE_HOURS)
    cost_rows = []
    if served and fleet:
        cost_rows = [(rate, cost_per_trip(rate, hours, fleet, served)) for rate in rates]
    elif fleet:
        flags.append("cost-undefined")
    end = max((r["t"] for r in records), default=0.0)
    return MetricsReport(scenario, summarize(list(waits.values())), summarize(list(rides.values())), odo, share,
                         trips, riders, waits, rides, cost_rows, constants, end, tuple(flags))


def report_csv(reports: Iterable[MetricsReport], extra_rows: Iterable[dict] = ()) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(REPORT_COLUMNS) + ["status", "error"], lineterminator="\n")
    w.writeheader()
    for rep in reports:
        row = rep.row()
        row.update(status="ok", error="")
        w.writerow(row)
    for row in extra_rows:
        w.writerow({k: row.get(k, "") for k in w.fieldnames})
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"


def emit_report(report: MetricsReport, out_dir, stem: str = "report") -> list:
    """Write ``<stem>.csv`` and ``<stem>.json`` under ``out_dir``; returns the paths."""
    from pathlib import Path
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}.json"]
    paths[0].write_text(report_csv([report]))
    paths[1].write_text(report_json(report))
    return paths
