"""Idle-shuttle rebalancing: recent demand per idle stop, target counts, and who goes where."""
from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .demand import Request
from .network import REVERSE, Location, TravelMatrix, nearest_idle_map

HALF = Fraction(1, 2)


class RebalanceError(ValueError):
    pass


@dataclass(frozen=True)
class DemandCounts:
    gamma: dict[int, int]
    window: float = 3600.0
    as_of: float = 0.0

    @property
    def total(self) -> int:
        return sum(self.gamma.values())


@dataclass
class Allocation:
    zeta: dict[int, int]
    objective: float
    exact_objective: Fraction = field(repr=False, default=Fraction(0))
    alternatives: list[dict[int, int]] = field(default_factory=list)
    tied: tuple[int, ...] = ()
    lower: dict[int, int] = field(default_factory=dict)

    @property
    def has_ties(self) -> bool:
        return bool(self.tied)


@dataclass
class RelocationPlan:
    moves: dict[int, int]
    total_travel: float = 0.0

    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.moves.values():
            out[s] = out.get(s, 0) + 1
        return out


def recent_requests(requests: Iterable[Request], as_of: float, window: float) -> list[Request]:
    """Requests with ``e`` in ``(as_of - window, as_of]``."""
    return [r for r in requests if as_of - window < r.e <= as_of]


def compute_gamma(recent: Iterable[Request], idle_stops: Iterable[int], matrix: TravelMatrix,
                  window: float = 3600.0, as_of: float = 0.0) -> DemandCounts:
    idle = sorted(idle_stops)
    nearest = nearest_idle_map(matrix, idle)
    gamma = {s: 0 for s in idle}
    for r in recent:
        gamma[nearest[r.p]] += 1
    return DemandCounts(gamma, window, as_of)


def ratio_objective(gamma: Mapping[int, int], zeta: Mapping[int, int]) -> Fraction:
    """Sum of requests per allocated shuttle, an empty stop counting as half a shuttle."""
    return sum((Fraction(gamma[s]) / max(HALF, Fraction(zeta.get(s, 0))) for s in gamma), Fraction(0))


def _gain(g: int, z: int) -> Fraction:
    # saving from adding the (z+1)-th shuttle at a stop with demand g
    return Fraction(g) if z == 0 else Fraction(g, z * (z + 1))


def allocate(gamma, k: int) -> Allocation:
    """Shuttle counts per idle stop minimising the ratio objective with ``sum == k``.

    Per-stop cost ``g / max(1/2, z)`` has strictly shrinking savings in ``z``
    (g, g/2, g/6, ...), so taking the ``k`` largest savings is optimal. Every
    optimum takes all savings above the k-th largest and some of the savings equal
    to it; those equal savings come from distinct stops, which are the tied stops.
    """
    if isinstance(gamma, DemandCounts):
        gamma = gamma.gamma
    if k < 0:
        raise RebalanceError(f"k must be >= 0, got {k}")
    stops = sorted(gamma)
    if not stops:
        if k:
            raise RebalanceError("no idle stops to allocate to")
        return Allocation({}, 0.0, Fraction(0), [{}])
    zero = {s: 0 for s in stops}
    if k == 0:
        obj = ratio_objective(gamma, zero)
        return Allocation(zero, float(obj), obj, [dict(zero)])

    if all(gamma[s] == 0 for s in stops):
        # every allocation scores 0; keep to the balanced ones, handed out round-robin by id
        base, extra = divmod(k, len(stops))
        zeta = {s: base + (1 if i < extra else 0) for i, s in enumerate(stops)}
        tied = tuple(stops) if extra else ()
        lower = {s: base for s in tied}
        alts = ([{s: base + (1 if s in combo else 0) for s in stops}
                 for combo in itertools.combinations(stops, extra)] if extra else [dict(zeta)])
        return Allocation(zeta, 0.0, Fraction(0), alts, tied, lower)

    heap = [(-_gain(gamma[s], 0), s) for s in stops]
    heapq.heapify(heap)
    zeta = dict(zero)
    last = None
    for _ in range(k):
        neg, s = heapq.heappop(heap)
        last = -neg
        zeta[s] += 1
        heapq.heappush(heap, (-_gain(gamma[s], zeta[s]), s))

    base = {}
    for s in stops:
        z = 0
        while gamma[s] > 0 and _gain(gamma[s], z) > last:
            z += 1
        base[s] = z
    tied = tuple(s for s in stops if gamma[s] > 0 and _gain(gamma[s], base[s]) == last)
    r = k - sum(base.values())
    alts = [{s: base[s] + (1 if s in combo else 0) for s in stops} for combo in itertools.combinations(tied, r)]
    if len(alts) == 1:
        tied = ()
    obj = ratio_objective(gamma, zeta)
    return Allocation(zeta, float(obj), obj, alts, tied, {s: base[s] for s in tied})


# --- relocation assignment -------------------------------------------------------

def travel_costs(shuttles: Mapping[int, Location], idle_stops: Sequence[int], matrix: TravelMatrix,
                 mode: str = REVERSE) -> tuple[list[int], list[int], np.ndarray]:
    vs = sorted(shuttles)
    ss = sorted(idle_stops)
    rho = np.array([[matrix.leg(shuttles[v], s, mode)[0] for s in ss] for v in vs], dtype=float).reshape(len(vs), len(ss))
    return vs, ss, rho


def _match(rho: np.ndarray, counts: Sequence[int]) -> tuple[list[int], float]:
    """Min-cost placement of every row onto stop columns with exactly ``counts[j]`` rows each."""
    slots = [j for j, c in enumerate(counts) for _ in range(c)]
    n = rho.shape[0]
    if len(slots) != n:
        raise RebalanceError(f"{len(slots)} slots for {n} shuttles")
    if n == 0:
        return [], 0.0
    cost = rho[:, slots]
    rows, cols = linear_sum_assignment(cost)
    placed = [0] * n
    for i, c in zip(rows, cols):
        placed[i] = slots[c]
    # a shuttle already sitting on a stop keeps it whenever that costs nothing extra
    for i in range(n):
        for j in range(rho.shape[1]):
            if rho[i, j] != 0 or placed[i] == j:
                continue
            for u in range(n):
                if u != i and placed[u] == j and rho[u, placed[i]] + rho[i, j] <= rho[u, j] + rho[i, placed[i]]:
                    placed[u], placed[i] = placed[i], j
                    break
    return placed, math.fsum(rho[i, placed[i]] for i in range(n))


def assign(alloc: Allocation, shuttles: Mapping[int, Location], matrix: TravelMatrix,
           idle_stops: Sequence[int] | None = None, mode: str = REVERSE) -> RelocationPlan:
    """Send each shuttle to one idle stop, meeting the allocated counts at least travel time.

    With tied stops, each tied stop may take its lower count or one more; every
    admissible count vector is matched and the cheapest is kept (first on ties).
    """
    stops = sorted(idle_stops if idle_stops is not None else alloc.zeta)
    vs, ss, rho = travel_costs(shuttles, stops, matrix, mode)
    return assign_costs(alloc, vs, ss, rho)


def assign_costs(alloc: Allocation, vs: Sequence[int], ss: Sequence[int], rho: np.ndarray) -> RelocationPlan:
    k = len(vs)
    if alloc.tied:
        fixed = sum(alloc.zeta[s] for s in ss if s not in alloc.tied)
        low = sum(alloc.lower[s] for s in alloc.tied)
        r = k - fixed - low
        if not 0 <= r <= len(alloc.tied):
            raise RebalanceError(f"tied bounds admit {fixed + low}..{fixed + low + len(alloc.tied)} shuttles, got {k}")
        options = []
        for combo in itertools.combinations(alloc.tied, r):
            options.append([alloc.zeta[s] if s not in alloc.tied else alloc.lower[s] + (s in combo) for s in ss])
    else:
        counts = [alloc.zeta.get(s, 0) for s in ss]
        if sum(counts) != k:
            raise RebalanceError(f"allocation places {sum(counts)} shuttles but {k} are idle")
        options = [counts]

    best = None
    for counts in options:
        placed, total = _match(rho, counts)
        if best is None or total < best[1]:
            best = (placed, total)
    placed, total = best
    return RelocationPlan({v: ss[placed[i]] for i, v in enumerate(vs)}, total)


def rebalance_step(off_stop_idle: Mapping[int, Location], recent: Iterable[Request], idle_stops: Sequence[int],
                   matrix: TravelMatrix, window: float = 3600.0, as_of: float = 0.0,
                   mode: str = REVERSE) -> tuple[RelocationPlan, DemandCounts, Allocation]:
    """Demand counts, then target counts, then a relocation for every idle shuttle off an idle stop."""
    counts = compute_gamma(recent, idle_stops, matrix, window, as_of)
    alloc = allocate(counts, len(off_stop_idle))
    if not off_stop_idle:
        return RelocationPlan({}, 0.0), counts, alloc
    plan = assign(alloc, off_stop_idle, matrix, idle_stops, mode)
    return plan, counts, alloc


def audit_record(t: float, counts: DemandCounts, alloc: Allocation, plan: RelocationPlan) -> str:
    return json.dumps({"t": t, "gamma": {str(s): g for s, g in counts.gamma.items()},
                       "zeta": {str(s): z for s, z in alloc.zeta.items()}, "tied": list(alloc.tied),
                       "moves": {str(v): s for v, s in plan.moves.items()}, "travel": plan.total_travel},
                      sort_keys=True)
