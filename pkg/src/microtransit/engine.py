"""Discrete-event simulation of a shuttle fleet under epoch-based dispatch.

One ``Simulator`` runs one scenario: it batches requests every epoch, builds
candidate routes for the shuttles that can take work, solves the route-selection
problem, commits the chosen routes and rebalances idle shuttles. Shuttle
functionality levels (SFL) switch driver delays, mid-leg re-routing and shift-wise
idle-stop relocation on or off.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from .demand import SERVICE_SPAN_S, DemandDay, Request, RequestState, batch_epoch
from .dispatch import PenaltyParams, MasterInstance, solve_master, update_penalties
from .dispatch import audit_record as dispatch_audit
from .network import CONTINUE, Location, MidEdge, TravelMatrix, Zone
from .rebalance import audit_record as rebalance_audit
from .rebalance import rebalance_step, recent_requests
from .routing import (ActionKind, Availability, Onboard, Route, RouteStopAction, RoutingParams,
                      generate_routes)

EVENTLOG_SCHEMA = "microtransit.eventlog"
EVENTLOG_VERSION = 1
SHIFT_STARTS_S = (0.0, 7 * 3600.0)


class SimulationError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


class Sfl(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


@dataclass(frozen=True)
class SflConfig:
    level: Sfl

    @classmethod
    def parse(cls, text) -> "SflConfig":
        try:
            return cls(Sfl(str(text).strip().upper()))
        except ValueError:
            raise ConfigError(f"unknown SFL {text!r}; allowed: {', '.join(s.value for s in Sfl)}") from None

    @property
    def driver_delay(self) -> bool:
        return self.level is Sfl.I

    @property
    def human_driver(self) -> bool:
        return self.level in (Sfl.I, Sfl.II)

    @property
    def rerouting(self) -> bool:
        return self.level in (Sfl.III, Sfl.IV)

    @property
    def idle_relocation(self) -> bool:
        return self.level is Sfl.IV


# --- driver response ---------------------------------------------------------------

@dataclass(frozen=True)
class DriverModel:
    samples: tuple[float, ...]
    threshold: float = 300.0

    def __post_init__(self):
        if not self.samples:
            raise ConfigError("driver response sample set D is empty")


def sample_driver_delay(model: DriverModel, rng: np.random.Generator) -> float:
    """Uniform draw over the multiset of samples, capped at the threshold."""
    if not model.samples:
        raise ConfigError("driver response sample set D is empty")
    d = model.samples[int(rng.integers(len(model.samples)))]
    return float(min(d, model.threshold))


def synthetic_response_times(n: int = 1619, mean: float = 43.14, median: float = 18.0,
                             threshold: float = 300.0, sigma_low: float = 1.0) -> tuple[float, ...]:
    """Whole-second response times from a two-piece lognormal with the given median.

    The lower half uses ``sigma_low``; the upper-half spread is solved so the mean
    after capping at ``threshold`` matches ``mean``. Samples are quantile midpoints,
    so the set is deterministic.
    """
    mu = math.log(median)
    q = (np.arange(n) + 0.5) / n

    def draw(sigma_high):
        z = stats.norm.ppf(q)
        return np.minimum(np.exp(mu + np.where(z < 0, sigma_low, sigma_high) * z), threshold)

    sigma_high = optimize.brentq(lambda s: draw(s).mean() - mean, 0.05, 5.0)
    return tuple(float(v) for v in np.round(draw(sigma_high)))


def read_response_times(path) -> tuple[float, ...]:
    import csv
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    start = 1 if rows and not rows[0][0].replace(".", "", 1).isdigit() else 0
    return tuple(float(r[0]) for r in rows[start:] if r)


# --- event log ---------------------------------------------------------------------

class EventLog:
    def __init__(self, meta: dict | None = None):
        self.records: list[dict] = []
        # scenario echo carried in the header so a persisted log is self-describing
        self.meta: dict = dict(meta or {})

    def add(self, t: float, kind: str, **fields) -> None:
        if self.records and t < self.records[-1]["t"] - 1e-9:
            raise SimulationError(f"event {kind} at t={t} precedes {self.records[-1]}")
        rec = {"t": t, "type": kind}
        rec.update(fields)
        self.records.append(rec)

    def extend_sorted(self, items: list[tuple]) -> None:
        for item in sorted(items, key=lambda x: (x[0], x[1], x[2])):
            self.add(item[0], item[3], **item[4])

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def of_type(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["type"] == kind]

    def to_jsonl(self) -> str:
        head = json.dumps({"schema": EVENTLOG_SCHEMA, "version": EVENTLOG_VERSION, **self.meta}, sort_keys=True)
        return "\n".join([head] + [json.dumps(r, sort_keys=True) for r in self.records]) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "EventLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("schema") != EVENTLOG_SCHEMA:
            raise ValueError("not an event log")
        if head.get("version") != EVENTLOG_VERSION:
            raise ValueError(f"unsupported event log version {head.get('version')}")
        log = cls({k: v for k, v in head.items() if k not in ("schema", "version")})
        log.records = [json.loads(ln) for ln in lines[1:]]
        return log

    @classmethod
    def read(cls, path) -> "EventLog":
        return cls.from_jsonl(Path(path).read_text())


# --- shuttle state -----------------------------------------------------------------

DRIVE, WAIT, DELAY, ACT = "drive", "wait", "delay", "act"


@dataclass
class Move:
    kind: str
    t0: float
    t1: float
    u: int | None = None
    v: int | None = None
    f0: float = 0.0
    f1: float = 1.0
    km: float = 0.0
    action: RouteStopAction | None = None
    departed: bool = False

    def fraction_at(self, t: float) -> float:
        if self.t1 <= self.t0:
            return self.f1
        w = min(max((t - self.t0) / (self.t1 - self.t0), 0.0), 1.0)
        return self.f0 + (self.f1 - self.f0) * w


class Status(str, enum.Enum):
    IDLE = "idle-at-stop"
    DEADHEADING = "deadheading"
    SERVING = "serving"
    AWAITING = "awaiting-driver-response"


@dataclass
class ShuttleState:
    id: int
    stop: int
    time: float = 0.0
    onboard: dict[int, float] = field(default_factory=dict)  # request id -> pickup time
    riders: int = 0
    plan: list[Move] = field(default_factory=list)
    odometer_km: float = 0.0
    empty_km: float = 0.0
    shared_km: float = 0.0
    loaded_km: float = 0.0

    def service_actions(self) -> list[RouteStopAction]:
        return [m.action for m in self.plan
                if m.kind == ACT and m.action.kind is not ActionKind.REPOSITION]

    @property
    def has_service(self) -> bool:
        return bool(self.onboard) or any(m.kind == ACT and m.action.kind is not ActionKind.REPOSITION
                                         for m in self.plan)

    @property
    def is_idle(self) -> bool:
        """No riders now and none planned (repositioning still counts as idle)."""
        return not self.has_service

    @property
    def reposition_target(self) -> int | None:
        for m in reversed(self.plan):
            if m.kind == ACT and m.action.kind is ActionKind.REPOSITION:
                return m.action.stop
        return None

    @property
    def status(self) -> Status:
        if not self.plan:
            return Status.IDLE
        if self.plan[0].kind == DELAY:
            return Status.AWAITING
        return Status.SERVING if self.has_service else Status.DEADHEADING

    @property
    def plan_end(self) -> tuple[int, float]:
        if not self.plan:
            return self.stop, self.time
        last = self.plan[-1]
        stop = last.action.stop if last.kind == ACT else (last.v if last.f1 == 1.0 else last.u)
        return stop, last.t1

    def location_at(self, t: float) -> Location:
        stop = self.stop
        for m in self.plan:
            if m.kind == DRIVE:
                if t < m.t1:
                    return _point(m.u, m.v, m.fraction_at(t))
                stop = m.v if m.f1 == 1.0 else m.u
            elif m.t0 >= t:
                return stop
        return stop


def predicted_location(shuttle: ShuttleState, t: float) -> Location:
    """Where the shuttle will be at ``t`` if it follows its current plan."""
    return shuttle.location_at(t)


def build_moves(start: Location, t: float, actions: Sequence[RouteStopAction], matrix: TravelMatrix,
                requests: dict[int, Request], mode: str) -> list[Move]:
    moves: list[Move] = []
    here = start
    for act in actions:
        if isinstance(here, MidEdge):
            a, b, f = here.origin, here.dest, here.fraction
            _, _, how = matrix.leg(here, act.stop, mode)
            t_ab, d_ab = matrix.time(a, b), matrix.dist(a, b)
            end, span = (b, 1.0 - f) if how == CONTINUE else (a, f)
            f1 = 1.0 if how == CONTINUE else 0.0
            moves.append(Move(DRIVE, t, t + span * t_ab, a, b, f, f1, span * d_ab))
            t += span * t_ab
            here = end
        if here != act.stop:
            dt = matrix.time(here, act.stop)
            moves.append(Move(DRIVE, t, t + dt, here, act.stop, 0.0, 1.0, matrix.dist(here, act.stop)))
            t += dt
            here = act.stop
        if act.kind is ActionKind.PICKUP:
            e = requests[act.request].e
            if e > t:
                moves.append(Move(WAIT, t, e))
                t = e
        moves.append(Move(ACT, t, t, action=act))
    return moves


# --- idle stop relocation ---------------------------------------------------------------

def relocate_idle_stops(requests: Iterable[Request], shift_bounds: Sequence[float],
                        current: Sequence[int]) -> dict[float, tuple[int, ...]]:
    """Idle stops per shift: the most frequent pickup stops of that shift.

    Ties go to the stop whose first request came earliest, then the smaller id.
    Short shifts are padded with the previous shift's idle stops in id order.
    """
    reqs = sorted(requests, key=lambda r: (r.e, r.id))
    k = len(current)
    bounds = list(shift_bounds)
    out: dict[float, tuple[int, ...]] = {}
    prev = sorted(current)
    for i, start in enumerate(bounds):
        end = bounds[i + 1] if i + 1 < len(bounds) else math.inf
        counts: dict[int, int] = {}
        first: dict[int, float] = {}
        for r in reqs:
            if start <= r.e < end:
                counts[r.p] = counts.get(r.p, 0) + 1
                first.setdefault(r.p, r.e)
        ranked = sorted(counts, key=lambda s: (-counts[s], first[s], s))[:k]
        for s in prev:
            if len(ranked) >= k:
                break
            if s not in ranked:
                ranked.append(s)
        chosen = tuple(sorted(ranked))
        out[start] = chosen
        prev = list(chosen)
    return out


# --- simulator -----------------------------------------------------------------------

@dataclass(frozen=True)
class SimParams:
    epoch_length: float = 30.0
    delta: float = 420.0
    penalty_time_unit: str = "seconds"
    demand_window: float = 3600.0
    driver_threshold: float = 300.0
    routing: RoutingParams = RoutingParams()
    service_span: float = SERVICE_SPAN_S
    shift_starts: tuple[float, ...] = SHIFT_STARTS_S
    max_extension: float = 24 * 3600.0
    rebalance: bool = True
    node_limit: int = 1_000_000

    def describe(self) -> dict:
        r = self.routing
        return {"epoch_length_s": self.epoch_length, "delta_s": self.delta,
                "penalty_time_unit": self.penalty_time_unit, "demand_window_s": self.demand_window,
                "driver_threshold_s": self.driver_threshold, "capacity": r.capacity,
                "detour_factor": r.detour_factor, "detour_slack_s": r.detour_slack_s,
                "max_pickup_wait_s": r.max_pickup_wait_s, "max_requests_per_route": r.max_requests,
                "mid_edge_mode": r.mid_edge_mode, "service_span_s": self.service_span,
                "shift_starts_s": list(self.shift_starts), "rebalance": self.rebalance}


@dataclass
class SimulationResult:
    log: EventLog
    shuttles: list[ShuttleState]
    demand: DemandDay
    epochs: int
    end_time: float
    idle_history: list[tuple[float, tuple[int, ...]]]
    suboptimal_epochs: int = 0


def initial_positions(n_shuttles: int, idle_stops: Sequence[int]) -> list[int]:
    """Round-robin over idle stops by id; any remainder lands on the lowest ids."""
    stops = sorted(idle_stops)
    return [stops[i % len(stops)] for i in range(n_shuttles)]


class Simulator:
    def __init__(self, zone: Zone, demand: DemandDay, n_shuttles: int, sfl: SflConfig,
                 params: SimParams = SimParams(), driver: DriverModel | None = None, seed: int = 0,
                 audit: Callable[[str, str], None] | None = None):
        if n_shuttles < 1:
            raise ConfigError(f"fleet size must be positive, got {n_shuttles}")
        self.zone = zone
        self.matrix = zone.matrix
        self.demand = demand
        self.sfl = sfl
        self.params = params
        self.driver = driver or DriverModel((0.0,), params.driver_threshold)
        self.rng = np.random.default_rng(seed)
        self.audit = audit
        self.requests = {r.id: r for r in demand}
        problems = demand.validate(self.matrix, span=params.service_span)
        if problems:
            raise ConfigError("; ".join(problems))

        self.idle_stops = tuple(zone.idle_stops)
        self.idle_plan: dict[float, tuple[int, ...]] = {}
        if sfl.idle_relocation:
            self.idle_plan = relocate_idle_stops(demand, params.shift_starts, self.idle_stops)
        self.idle_history: list[tuple[float, tuple[int, ...]]] = []

        self.state = {r: RequestState.PENDING for r in self.requests}
        self.pending: list[Request] = []
        self.completed = 0
        self.t = 0.0
        self.log = EventLog()
        self._shift_idx = 0
        self._apply_shift(0.0, initial=True)
        self.shuttles = [ShuttleState(i, s, 0.0) for i, s in enumerate(initial_positions(n_shuttles, self.idle_stops))]
        self.suboptimal_epochs = 0

    # -- helpers -------------------------------------------------------------------

    @property
    def mode(self) -> str:
        return self.params.routing.mid_edge_mode

    def _apply_shift(self, t: float, initial: bool = False) -> None:
        starts = self.params.shift_starts
        while self._shift_idx < len(starts) and starts[self._shift_idx] <= t + 1e-9:
            start = starts[self._shift_idx]
            self._shift_idx += 1
            self.log.add(t, "shift_start", shift=self._shift_idx, scheduled=start)
            if start in self.idle_plan:
                new = self.idle_plan[start]
                if new != self.idle_stops:
                    self.idle_stops = new
                self.log.add(t, "idle_stop_relocation", stops=list(self.idle_stops))
            self.idle_history.append((t, self.idle_stops))

    def _advance(self, T: float, arrivals: Sequence[Request] = ()) -> None:
        """Move every shuttle along its plan up to time ``T`` and log what happened."""
        items: list[tuple] = []
        for r in arrivals:
            items.append((r.e, -1, r.id, "request_received",
                          {"request": r.id, "user": r.user_id, "p": r.p, "d": r.d, "e": r.e, "riders": r.riders}))
        for sh in self.shuttles:
            seq = 0
            while sh.plan:
                m = sh.plan[0]
                if m.kind == DRIVE and not m.departed and m.t0 < T:
                    m.departed = True
                    items.append((m.t0, sh.id, seq, "departure",
                                  {"shuttle": sh.id, "from": m.u if m.f0 == 0.0 else _edge_point(m.u, m.v, m.f0),
                                   "to": m.v if m.f1 == 1.0 else m.u}))
                    seq += 1
                if m.t1 > T:
                    break
                sh.plan.pop(0)
                if m.kind == DRIVE:
                    if not m.departed:
                        items.append((m.t0, sh.id, seq, "departure",
                                      {"shuttle": sh.id, "from": m.u if m.f0 == 0.0 else _edge_point(m.u, m.v, m.f0),
                                       "to": m.v if m.f1 == 1.0 else m.u}))
                        seq += 1
                    stop = m.v if m.f1 == 1.0 else m.u
                    self._account(sh, m.km)
                    items.append((m.t1, sh.id, seq, "arrival",
                                  {"shuttle": sh.id, "stop": stop, "km": m.km, "riders": sh.riders}))
                    seq += 1
                    sh.stop = stop
                elif m.kind == ACT:
                    act = m.action
                    if act.kind is ActionKind.PICKUP:
                        r = self.requests[act.request]
                        sh.onboard[r.id] = m.t0
                        sh.riders += r.riders
                        self.state[r.id] = RequestState.PICKED_UP
                        items.append((m.t0, sh.id, seq, "pickup",
                                      {"shuttle": sh.id, "request": r.id, "stop": act.stop, "riders": r.riders}))
                    elif act.kind is ActionKind.DROPOFF:
                        r = self.requests[act.request]
                        sh.onboard.pop(r.id)
                        sh.riders -= r.riders
                        self.state[r.id] = RequestState.COMPLETED
                        self.completed += 1
                        items.append((m.t0, sh.id, seq, "dropoff",
                                      {"shuttle": sh.id, "request": r.id, "stop": act.stop, "riders": r.riders}))
                    seq += 1
            sh.time = T
        self.log.extend_sorted(items)

    def _account(self, sh: ShuttleState, km: float) -> None:
        sh.odometer_km += km
        if sh.riders == 0:
            sh.empty_km += km
        else:
            sh.loaded_km += km
            if sh.riders >= 2:
                sh.shared_km += km

    def _divert(self, sh: ShuttleState, T: float) -> Location:
        """Cut the plan at ``T``; a leg in progress is split and its travelled part booked."""
        loc = sh.location_at(T)
        if sh.plan and sh.plan[0].kind == DRIVE and sh.plan[0].t0 < T < sh.plan[0].t1:
            m = sh.plan[0]
            f = m.fraction_at(T)
            km = abs(f - m.f0) * self.matrix.dist(m.u, m.v)
            self._account(sh, km)
            self.log.add(T, "divert", shuttle=sh.id, at=_edge_point(m.u, m.v, f), km=km, riders=sh.riders,
                         was_heading_to=m.v if m.f1 == 1.0 else m.u)
        sh.plan = []
        if not isinstance(loc, MidEdge):
            sh.stop = loc
        return loc

    def availability(self, T: float) -> list[Availability]:
        cap = self.params.routing.capacity
        out = []
        for sh in self.shuttles:
            if self.sfl.rerouting:
                loc = predicted_location(sh, T)
                onboard = tuple(Onboard(r, t) for r, t in sorted(sh.onboard.items()))
                committed = tuple(sh.service_actions())
                out.append(Availability(sh.id, loc, T, onboard, committed,
                                        frozenset(a.request for a in committed), sh.riders < cap))
            else:
                stop, free = sh.plan_end
                out.append(Availability(sh.id, stop, max(T, free)))
        return out

    def _delay_for(self, sh: ShuttleState, T: float) -> float | None:
        """Driver response delay for an instruction issued now; None when no driver responds."""
        if not self.sfl.human_driver or not sh.is_idle:
            return None
        d = sample_driver_delay(self.driver, self.rng) if self.sfl.driver_delay else 0.0
        self.log.add(T, "driver_response", shuttle=sh.id, delay=d)
        return d

    def _commit(self, sh: ShuttleState, route: Route, T: float) -> None:
        new_ids = sorted(route.served)
        for rid in new_ids:
            self.state[rid] = RequestState.ASSIGNED
            self.log.add(T, "assigned", request=rid, shuttle=sh.id)
        if self.sfl.rerouting:
            loc = self._divert(sh, T)
            sh.plan = build_moves(loc, T, route.actions, self.matrix, self.requests, self.mode)
            return
        delay = self._delay_for(sh, T) or 0.0
        stop, free = sh.plan_end
        start = max(T, free)
        extra = [Move(DELAY, start, start + delay)] if delay > 0 else []
        sh.plan.extend(extra + build_moves(stop, start + delay, route.actions, self.matrix, self.requests,
                                           self.mode))

    def _dispatch(self, epoch: int, T: float) -> None:
        if not self.pending:
            return
        pen = update_penalties(self.pending, epoch * self.params.epoch_length,
                               PenaltyParams(self.params.delta, self.params.epoch_length,
                                             self.params.penalty_time_unit))
        fleet = self.availability(T)
        cands = generate_routes(self.pending, fleet, self.matrix, self.params.routing, self.requests, T)
        inst = MasterInstance(cands, pen)
        sol = solve_master(inst, self.params.node_limit)
        if not sol.optimal:
            self.suboptimal_epochs += 1
        if self.audit:
            self.audit("dispatch", dispatch_audit(epoch, T, inst, sol))
        self.log.add(T, "epoch_solve", epoch=epoch, pending=len(self.pending),
                     routes=sum(len(v) for v in cands.values()), objective=sol.objective,
                     served=sorted(set().union(*(r.served for r in sol.selected.values()))),
                     optimal=sol.optimal)
        for sh in self.shuttles:
            route = sol.selected[sh.id]
            if route.served:
                self._commit(sh, route, T)
        self.pending = [r for r in self.pending if r.id in sol.unserved]

    def _rebalance(self, T: float) -> None:
        idle_set = set(self.idle_stops)
        movable = {}
        for sh in self.shuttles:
            if not sh.is_idle:
                continue
            if sh.plan:
                # committed deadheads only re-enter when shuttles may change course
                if not self.sfl.rerouting:
                    continue
                movable[sh.id] = predicted_location(sh, T)
            elif sh.stop not in idle_set:
                movable[sh.id] = sh.stop
        if not movable:
            return
        recent = recent_requests(self.demand, T, self.params.demand_window)
        plan, counts, alloc = rebalance_step(movable, recent, self.idle_stops, self.matrix,
                                             self.params.demand_window, T, self.mode)
        if self.audit:
            self.audit("rebalance", rebalance_audit(T, counts, alloc, plan))
        for vid in sorted(plan.moves):
            sh = self.shuttles[vid]
            target = plan.moves[vid]
            if sh.plan and sh.reposition_target == target:
                continue
            self.log.add(T, "rebalance_move", shuttle=vid, stop=target)
            act = RouteStopAction(target, ActionKind.REPOSITION)
            if self.sfl.rerouting:
                loc = self._divert(sh, T)
                sh.plan = build_moves(loc, T, [act], self.matrix, self.requests, self.mode)
            else:
                delay = self._delay_for(sh, T) or 0.0
                extra = [Move(DELAY, T, T + delay)] if delay > 0 else []
                sh.plan = extra + build_moves(sh.stop, T + delay, [act], self.matrix, self.requests, self.mode)

    # -- main loop -------------------------------------------------------------------

    def step_epoch(self, epoch: int) -> None:
        length = self.params.epoch_length
        T = (epoch + 1) * length
        new = batch_epoch(self.demand, epoch, length)
        self._advance(T, new)
        self.t = T
        self.pending.extend(new)
        self._apply_shift(T)
        self._dispatch(epoch, T)
        if self.params.rebalance:
            self._rebalance(T)

    def run(self) -> SimulationResult:
        length = self.params.epoch_length
        n_service = int(math.ceil(self.params.service_span / length))
        limit = n_service + int(math.ceil(self.params.max_extension / length))
        epoch = 0
        while epoch < n_service or self.completed < len(self.requests):
            if epoch >= limit:
                missing = sorted(r for r, s in self.state.items() if s is not RequestState.COMPLETED)
                raise SimulationError(f"requests {missing[:20]} unfinished after horizon extension")
            self.step_epoch(epoch)
            epoch += 1
        # let repositioning legs finish so odometers are complete
        end = max([self.t] + [sh.plan_end[1] for sh in self.shuttles])
        self._advance(end)
        self.t = end
        self.check_terminal()
        return SimulationResult(self.log, self.shuttles, self.demand, epoch, end, self.idle_history,
                                self.suboptimal_epochs)

    def check_terminal(self) -> None:
        problems = []
        for sh in self.shuttles:
            if sh.riders or sh.onboard:
                problems.append(f"shuttle {sh.id} ends with {sh.riders} riders onboard")
            closure = sh.empty_km + sh.loaded_km
            if abs(closure - sh.odometer_km) > 1e-9 * max(1.0, sh.odometer_km):
                problems.append(f"shuttle {sh.id} distance closure off: {closure} vs {sh.odometer_km}")
        left = [r for r, s in self.state.items() if s is not RequestState.COMPLETED]
        if left:
            problems.append(f"requests not completed: {sorted(left)[:20]}")
        if problems:
            raise SimulationError("; ".join(problems))


def _edge_point(u: int, v: int, f: float) -> list:
    return [u, v, f]


def _point(u: int, v: int, f: float) -> Location:
    if f <= 0.0:
        return u
    if f >= 1.0:
        return v
    return MidEdge(u, v, f)


def simulate(zone: Zone, demand: DemandDay, n_shuttles: int, sfl, params: SimParams = SimParams(),
             driver: DriverModel | None = None, seed: int = 0, audit=None) -> SimulationResult:
    if not isinstance(sfl, SflConfig):
        sfl = SflConfig.parse(sfl)
    return Simulator(zone, demand, n_shuttles, sfl, params, driver, seed, audit).run()
