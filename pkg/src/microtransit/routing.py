"""Shuttle routes: timing, feasibility and candidate generation by cheapest insertion."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .demand import Request
from .network import REVERSE, Location, TravelMatrix


class InfeasibleRouteError(ValueError):
    pass


class ActionKind(str, enum.Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"
    REPOSITION = "reposition"


@dataclass(frozen=True)
class RouteStopAction:
    stop: int
    kind: ActionKind
    request: int | None = None

    def __repr__(self):
        tag = "" if self.request is None else f"#{self.request}"
        return f"{self.kind.value[:4]}{tag}@{self.stop}"


def pickup(r: Request) -> RouteStopAction:
    return RouteStopAction(r.p, ActionKind.PICKUP, r.id)


def dropoff(r: Request) -> RouteStopAction:
    return RouteStopAction(r.d, ActionKind.DROPOFF, r.id)


@dataclass(frozen=True)
class RoutingParams:
    capacity: int = 6
    detour_factor: float = 1.5
    detour_slack_s: float = 300.0
    max_pickup_wait_s: float = 1800.0
    max_requests: int = 4
    max_routes_per_shuttle: int = 5000
    mid_edge_mode: str = REVERSE


@dataclass(frozen=True)
class Onboard:
    """A rider group already in the shuttle when the route starts."""

    request: int
    picked_up_at: float


@dataclass(frozen=True)
class Route:
    shuttle: int
    start_time: float
    start_location: Location
    actions: tuple[RouteStopAction, ...] = ()
    c_r: float = 0.0
    served: frozenset = frozenset()
    onboard: tuple[Onboard, ...] = ()
    decision_time: float | None = None
    id: tuple = ()

    @property
    def is_null(self) -> bool:
        return not self.served


@dataclass
class Schedule:
    arrivals: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    legs: list[tuple[float, float, str]] = field(default_factory=list)
    pickup: dict[int, float] = field(default_factory=dict)
    dropoff: dict[int, float] = field(default_factory=dict)
    occupancy: list[int] = field(default_factory=list)
    c_r: float = 0.0
    end_time: float = 0.0
    end_location: Location = None


def _run(route: Route, matrix: TravelMatrix, requests: Mapping[int, Request],
         params: RoutingParams) -> tuple[Schedule, str | None]:
    """Time the route; return the schedule and the first violated rule (or None)."""
    sched = Schedule(end_time=route.start_time, end_location=route.start_location)
    load = sum(requests[o.request].riders for o in route.onboard)
    picked = {o.request: o.picked_up_at for o in route.onboard}
    if load > params.capacity:
        return sched, f"{load} riders onboard exceed capacity {params.capacity}"
    decided = route.start_time if route.decision_time is None else route.decision_time
    t, here, wait_total = route.start_time, route.start_location, 0.0
    problem = None

    for act in route.actions:
        dt, dkm, how = matrix.leg(here, act.stop, params.mid_edge_mode) if here != act.stop else (0.0, 0.0, "stay")
        arrive = t + dt
        sched.legs.append((dt, dkm, how))
        sched.arrivals.append(arrive)
        if act.kind is ActionKind.PICKUP:
            r = requests[act.request]
            if act.request in picked:
                problem = problem or f"request {act.request} picked up twice"
            at = max(arrive, r.e)
            picked[act.request] = at
            sched.pickup[act.request] = at
            wait_total += at - r.e
            load += r.riders
            if load > params.capacity:
                problem = problem or f"capacity {params.capacity} exceeded at pickup of {act.request}"
            if at - max(r.e, decided) > params.max_pickup_wait_s + 1e-9:
                problem = problem or f"request {act.request} waits {at - max(r.e, decided):.0f}s in route"
        elif act.kind is ActionKind.DROPOFF:
            r = requests[act.request]
            at = arrive
            if act.request not in picked:
                problem = problem or f"dropoff of {act.request} precedes its pickup"
            else:
                ride = at - picked[act.request]
                bound = params.detour_factor * matrix.time(r.p, r.d) + params.detour_slack_s
                if ride > bound + 1e-9:
                    problem = problem or f"request {act.request} rides {ride:.0f}s > {bound:.0f}s"
                del picked[act.request]
            sched.dropoff[act.request] = at
            load -= r.riders
        else:
            at = arrive
        sched.times.append(at)
        sched.occupancy.append(load)
        t, here = at, act.stop

    if picked:
        problem = problem or f"requests {sorted(picked)} never dropped off"
    sched.c_r = wait_total
    sched.end_time = t
    sched.end_location = here
    return sched, problem


def simulate_route(route: Route, matrix: TravelMatrix, requests: Mapping[int, Request],
                   params: RoutingParams = RoutingParams()) -> Schedule:
    """Timestamps for every action; raises ``InfeasibleRouteError`` on any violation.

    Pickup happens at ``max(arrival, e)``; the shuttle waits when early.
    """
    sched, problem = _run(route, matrix, requests, params)
    if problem:
        raise InfeasibleRouteError(problem)
    return sched


# --- candidate generation ------------------------------------------------------

@dataclass(frozen=True)
class Availability:
    """Where and when a shuttle can start a new route, and what it must still do."""

    shuttle: int
    location: Location
    time: float
    onboard: tuple[Onboard, ...] = ()
    committed: tuple[RouteStopAction, ...] = ()
    committed_requests: frozenset = frozenset()
    accepts_new: bool = True


def _insertions(base: Sequence[RouteStopAction], r: Request):
    pu, do = pickup(r), dropoff(r)
    n = len(base)
    for i in range(n + 1):
        for j in range(i, n + 1):
            yield tuple(base[:i]) + (pu,) + tuple(base[i:j]) + (do,) + tuple(base[j:])


def cheapest_insertion(route: Route, r: Request, matrix: TravelMatrix, requests: Mapping[int, Request],
                       params: RoutingParams) -> Route | None:
    """Best feasible way to add ``r`` to ``route``, ranked by waiting cost then finish time."""
    best, best_key = None, None
    for actions in _insertions(route.actions, r):
        cand = Route(route.shuttle, route.start_time, route.start_location, actions,
                     onboard=route.onboard, decision_time=route.decision_time)
        sched, problem = _run(cand, matrix, requests, params)
        if problem:
            continue
        key = (sched.c_r, sched.end_time)
        if best_key is None or key < best_key:
            best_key = key
            best = Route(cand.shuttle, cand.start_time, cand.start_location, actions, sched.c_r,
                         route.served | {r.id}, cand.onboard, cand.decision_time)
    return best


def generate_routes(unserved: Sequence[Request], fleet: Sequence[Availability], matrix: TravelMatrix,
                    params: RoutingParams = RoutingParams(), requests: Mapping[int, Request] | None = None,
                    decision_time: float | None = None) -> dict[int, list[Route]]:
    """Candidate routes per shuttle: the null route, every feasible single-request
    route and pooled routes grown by cheapest insertion up to ``params.max_requests``.

    Pooled sets are grown in (e, id) order so each request subset is built once.
    """
    lookup = dict(requests or {})
    for r in unserved:
        lookup[r.id] = r
    order = sorted(unserved, key=lambda r: (r.e, r.id))
    rank = {r.id: k for k, r in enumerate(order)}
    out = {}
    for av in fleet:
        null_route = Route(av.shuttle, av.time, av.location, tuple(av.committed), 0.0, frozenset(),
                           av.onboard, decision_time)
        sched, _ = _run(null_route, matrix, lookup, params)
        null_route = Route(av.shuttle, av.time, av.location, tuple(av.committed), sched.c_r,
                           frozenset(), av.onboard, decision_time)
        routes = [null_route]
        if av.accepts_new and order:
            frontier = [null_route]
            for _depth in range(params.max_requests):
                grown = []
                for base in frontier:
                    last = max((rank[i] for i in base.served), default=-1)
                    for r in order[last + 1:]:
                        if len(routes) + len(grown) >= params.max_routes_per_shuttle:
                            break
                        nxt = cheapest_insertion(base, r, matrix, lookup, params)
                        if nxt is not None:
                            grown.append(nxt)
                if not grown:
                    break
                routes.extend(grown)
                frontier = grown
        routes.sort(key=lambda rt: (len(rt.served), sorted(rank[i] for i in rt.served)))
        out[av.shuttle] = [Route(rt.shuttle, rt.start_time, rt.start_location, rt.actions, rt.c_r, rt.served,
                                 rt.onboard, rt.decision_time, (av.shuttle, k))
                           for k, rt in enumerate(routes)]
    return out
