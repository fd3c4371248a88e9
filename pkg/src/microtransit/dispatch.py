"""Epoch optimisation: unserved-request penalties and the route-selection master problem."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .demand import Request
from .routing import Route

SECONDS = "seconds"
EPOCHS = "epochs"


class PenaltyOverflowWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PenaltyParams:
    delta: float = 420.0
    epoch_length: float = 30.0
    time_unit: str = SECONDS

    def __post_init__(self):
        if not self.delta > 0 or not self.epoch_length > 0:
            raise ValueError("delta and epoch_length must be positive")
        if self.time_unit not in (SECONDS, EPOCHS):
            raise ValueError(f"time_unit must be {SECONDS!r} or {EPOCHS!r}")


def penalty(delta: float, length: float, tau_time: float, e: float, time_unit: str = SECONDS) -> float:
    """``delta * 2 ** ((2*tau_time - e) / (10*length))``.

    ``tau_time`` is the start of the current epoch and ``e`` the earliest pickup,
    both in seconds since service start. With ``time_unit="epochs"`` both are
    first divided by the epoch length. Returns ``inf`` (with a warning) when the
    value is not representable.
    """
    if time_unit == EPOCHS:
        tau_time, e = tau_time / length, e / length
    exponent = (2.0 * tau_time - e) / (10.0 * length)
    try:
        value = delta * 2.0 ** exponent
    except OverflowError:
        value = math.inf
    if math.isinf(value):
        warnings.warn(f"penalty overflow at exponent {exponent}", PenaltyOverflowWarning, stacklevel=2)
    return value


def update_penalties(unserved: Iterable[Request], tau_time: float, params: PenaltyParams) -> dict[int, float]:
    return {r.id: penalty(params.delta, params.epoch_length, tau_time, r.e, params.time_unit)
            for r in unserved}


@dataclass
class MasterInstance:
    routes: dict[int, list[Route]]
    penalties: dict[int, float]
    shuttles: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.shuttles:
            self.shuttles = tuple(sorted(self.routes))
        for v in self.shuttles:
            if not self.routes.get(v):
                raise ValueError(f"shuttle {v} has no candidate route")
        for v, rs in self.routes.items():
            for r in rs:
                extra = set(r.served) - set(self.penalties)
                if extra:
                    raise ValueError(f"route {r.id} serves requests {sorted(extra)} not in the instance")

    def to_json(self) -> dict:
        return {
            "penalties": {str(k): v for k, v in sorted(self.penalties.items())},
            "routes": {str(v): [{"id": list(r.id), "c_r": r.c_r, "served": sorted(r.served)} for r in rs]
                       for v, rs in sorted(self.routes.items())},
        }


@dataclass
class MasterSolution:
    selected: dict[int, Route]
    unserved: frozenset
    objective: float
    optimal: bool = True
    nodes: int = 0
    exact_objective: Fraction = field(default=Fraction(0), repr=False)

    def to_json(self) -> dict:
        return {"selected": {str(v): list(r.id) for v, r in sorted(self.selected.items())},
                "unserved": sorted(self.unserved), "objective": self.objective,
                "optimal": self.optimal, "nodes": self.nodes}


def objective_of(selected: Iterable[Route], unserved: Iterable[int], penalties: Mapping[int, float]) -> Fraction:
    """Exact value of waiting cost plus penalties, from the float inputs."""
    total = Fraction(0)
    for r in selected:
        total += Fraction(r.c_r)
    for n in unserved:
        total += _exact(penalties[n])
    return total


# stands in for an overflowed penalty; larger than any finite double
_HUGE = Fraction(2) ** 1100


def _exact(x: float) -> Fraction:
    return _HUGE if math.isinf(x) else Fraction(x)


def solve_master(inst: MasterInstance, node_limit: int = 1_000_000) -> MasterSolution:
    """Pick one route per shuttle so no request is served twice, minimising
    waiting cost plus penalties of requests left unserved.

    Depth-first branch and bound over shuttles in id order, each shuttle's
    routes in list order, so the first optimum found is the lexicographically
    smallest one. Arithmetic is exact (rationals) so ties are real ties.
    """
    shuttles = list(inst.shuttles)
    routes = [inst.routes[v] for v in shuttles]
    costs = [[Fraction(r.c_r) for r in rs] for rs in routes]
    served = [[frozenset(r.served) for r in rs] for rs in routes]
    pen = {n: _exact(g) for n, g in inst.penalties.items()}
    m = len(shuttles)

    # min route cost and coverable requests of shuttles k.. onwards
    min_rest = [Fraction(0)] * (m + 1)
    cover_rest = [frozenset()] * (m + 1)
    for k in range(m - 1, -1, -1):
        min_rest[k] = min_rest[k + 1] + min(costs[k])
        cover_rest[k] = cover_rest[k + 1].union(*served[k])
    all_req = frozenset(pen)

    best_val: Fraction | None = None
    best_pick: list[int] | None = None
    nodes = 0
    exhausted = False
    pick = [0] * m

    def bound(k: int, acc: Fraction, covered: frozenset) -> Fraction:
        stranded = all_req - covered - cover_rest[k]
        return acc + min_rest[k] + sum((pen[n] for n in stranded), Fraction(0))

    def dfs(k: int, acc: Fraction, covered: frozenset):
        nonlocal best_val, best_pick, nodes, exhausted
        nodes += 1
        if nodes > node_limit:
            exhausted = True
            return
        if k == m:
            val = acc + sum((pen[n] for n in all_req - covered), Fraction(0))
            if best_val is None or val < best_val:
                best_val, best_pick = val, pick.copy()
            return
        for i, s in enumerate(served[k]):
            if s & covered:
                continue
            nacc = acc + costs[k][i]
            ncov = covered | s
            if best_val is not None and bound(k + 1, nacc, ncov) >= best_val:
                continue
            pick[k] = i
            dfs(k + 1, nacc, ncov)
            if exhausted:
                return

    dfs(0, Fraction(0), frozenset())
    if best_pick is None:
        # budget ran out before any leaf; index 0 is the null route by construction
        best_pick = [0] * m
    selected = {v: routes[k][best_pick[k]] for k, v in enumerate(shuttles)}
    covered = frozenset().union(*(r.served for r in selected.values()))
    unserved = all_req - covered
    exact = objective_of(selected.values(), unserved, inst.penalties)
    return MasterSolution(selected, unserved, _to_float(exact), optimal=not exhausted, nodes=nodes,
                          exact_objective=exact)


def _to_float(x: Fraction) -> float:
    return math.inf if x >= _HUGE else float(x)


def audit_record(epoch: int, t: float, inst: MasterInstance, sol: MasterSolution) -> str:
    return json.dumps({"epoch": epoch, "t": t, "instance": inst.to_json(), "solution": sol.to_json()},
                      sort_keys=True)
