"""Trip requests, epoch batching and ridership scaling."""
from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .network import TravelMatrix, nearest_idle_map

SERVICE_START_H = 6
SERVICE_END_H = 19
SERVICE_SPAN_S = (SERVICE_END_H - SERVICE_START_H) * 3600
MAX_RIDERS = 4
WINDOW_SLACK_S = 600.0

REQUEST_FIELDS = ["id", "user_id", "p", "d", "e_seconds", "riders"]


class DemandError(ValueError):
    pass


class RequestState(str, enum.Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    PICKED_UP = "picked_up"
    COMPLETED = "completed"


@dataclass(frozen=True)
class Request:
    id: int
    user_id: str
    p: int
    d: int
    e: float
    riders: int = 1
    p_idle: int | None = None

    def __post_init__(self):
        if self.p == self.d:
            raise DemandError(f"request {self.id}: pickup equals dropoff ({self.p})")
        if not 1 <= self.riders <= MAX_RIDERS:
            raise DemandError(f"request {self.id}: riders={self.riders} outside 1..{MAX_RIDERS}")
        if self.e < 0:
            raise DemandError(f"request {self.id}: negative earliest pickup {self.e}")


@dataclass(frozen=True)
class Shortfall:
    target: int
    achieved: int
    reason: str


@dataclass(frozen=True)
class DemandDay:
    requests: tuple[Request, ...]
    source_tags: tuple[str, ...] = ()
    shortfall: Shortfall | None = None
    _starts: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        order = sorted(range(len(self.requests)), key=lambda i: (self.requests[i].e, self.requests[i].id))
        tags = self.source_tags or ("base",) * len(self.requests)
        if len(tags) != len(self.requests):
            raise DemandError("source_tags length differs from requests")
        reqs = tuple(self.requests[i] for i in order)
        ids = [r.id for r in reqs]
        if len(set(ids)) != len(ids):
            raise DemandError("duplicate request ids")
        object.__setattr__(self, "requests", reqs)
        object.__setattr__(self, "source_tags", tuple(tags[i] for i in order))
        object.__setattr__(self, "_starts", tuple(r.e for r in reqs))

    def __len__(self):
        return len(self.requests)

    def __iter__(self):
        return iter(self.requests)

    @property
    def users(self) -> int:
        return sum(r.riders for r in self.requests)

    def with_idle_mapping(self, matrix: TravelMatrix, idle_stops: Iterable[int]) -> "DemandDay":
        nearest = nearest_idle_map(matrix, idle_stops)
        return replace(self, requests=tuple(replace(r, p_idle=nearest[r.p]) for r in self.requests))

    def validate(self, matrix: TravelMatrix | None = None, span: float | None = SERVICE_SPAN_S) -> list[str]:
        problems = []
        for r in self.requests:
            if span is not None and not 0 <= r.e <= span:
                problems.append(f"request {r.id}: e={r.e} outside service day [0, {span}]")
            if matrix is not None:
                for s in (r.p, r.d):
                    if s not in matrix.index:
                        problems.append(f"request {r.id}: unknown stop {s}")
        return problems


def batch_epoch(day: DemandDay, tau: int, length: float) -> list[Request]:
    """Requests with ``e`` in ``[tau*length, (tau+1)*length)``."""
    if tau < 0 or length <= 0:
        raise ValueError("tau must be >= 0 and length > 0")
    lo = bisect.bisect_left(day._starts, tau * length)
    hi = bisect.bisect_left(day._starts, (tau + 1) * length)
    return list(day.requests[lo:hi])


def trip_window(r: Request, matrix: TravelMatrix, slack: float = WINDOW_SLACK_S) -> tuple[float, float]:
    return r.e, r.e + matrix.time(r.p, r.d) + slack


def _overlaps(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def scale_ridership(base: DemandDay, pool: Sequence[DemandDay], multiplier: int, seed,
                    matrix: TravelMatrix, slack: float = WINDOW_SLACK_S) -> DemandDay:
    """Grow ``base`` to ``multiplier`` times its trip count with trips drawn from ``pool``.

    Candidates are visited in a seeded uniform order without replacement. A trip
    from a user who already travels that day is accepted only if its time window
    overlaps none of that user's accepted windows. Sampled trips get fresh ids
    after the largest base id and keep their time of day.
    """
    if int(multiplier) != multiplier or multiplier < 1:
        raise DemandError(f"multiplier must be a positive integer, got {multiplier}")
    if multiplier == 1:
        return base
    if not pool:
        raise DemandError("a non-empty pool is required when multiplier > 1")

    target = multiplier * len(base)
    windows: dict[str, list[tuple[float, float]]] = {}
    for r in base:
        windows.setdefault(r.user_id, []).append(trip_window(r, matrix, slack))

    candidates = [(k, r) for k, day in enumerate(pool) for r in day]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(candidates))

    accepted, tags = list(base.requests), list(base.source_tags)
    next_id = max((r.id for r in base), default=0) + 1
    for i in order:
        if len(accepted) >= target:
            break
        k, r = candidates[i]
        w = trip_window(r, matrix, slack)
        held = windows.setdefault(r.user_id, [])
        if any(_overlaps(w, h) for h in held):
            continue
        held.append(w)
        accepted.append(replace(r, id=next_id))
        tags.append(f"pool{k}:{r.id}")
        next_id += 1

    shortfall = None
    if len(accepted) < target:
        shortfall = Shortfall(target, len(accepted), "pool exhausted before target was reached")
    return DemandDay(tuple(accepted), tuple(tags), shortfall)


# --- I/O ---------------------------------------------------------------------

def read_requests(path) -> DemandDay:
    reqs, tags, problems = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in REQUEST_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise DemandError(f"{path}: missing columns {missing}")
        has_tag = "source_tag" in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            try:
                reqs.append(Request(int(row["id"]), row["user_id"].strip(), int(row["p"]), int(row["d"]),
                                    float(row["e_seconds"]), int(row["riders"])))
                tags.append(row["source_tag"] if has_tag else "base")
            except (ValueError, TypeError) as exc:
                problems.append(f"{path}:{lineno}: {exc}")
    if problems:
        raise DemandError("; ".join(problems))
    return DemandDay(tuple(reqs), tuple(tags))


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_requests(path, day: DemandDay, with_tags: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_FIELDS + (["source_tag"] if with_tags else []))
        for r, tag in zip(day.requests, day.source_tags):
            row = [r.id, r.user_id, r.p, r.d, _fmt_num(r.e), r.riders]
            w.writerow(row + ([tag] if with_tags else []))


def epoch_count(span: float, length: float) -> int:
    return int(math.ceil(span / length))
