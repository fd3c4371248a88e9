"""Stops, travel matrices, idle-stop lookup and congestion calibration."""
from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np


class NetworkError(ValueError):
    """Raised when a zone fails validation. ``problems`` lists every failure found."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) if self.problems else "invalid network")


class CalibrationError(ValueError):
    pass


class StopKind(str, enum.Enum):
    FIXED_TRANSIT = "fixed-transit"
    REACH_VIRTUAL = "reach-virtual"


@dataclass(frozen=True)
class Stop:
    id: int
    lat: float
    lon: float
    kind: StopKind = StopKind.REACH_VIRTUAL
    is_idle: bool = False


@dataclass(frozen=True)
class MidEdge:
    """A point part-way along the leg ``origin -> dest``; ``fraction`` is measured in travel time."""

    origin: int
    dest: int
    fraction: float

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction {self.fraction} outside [0, 1]")


Location = Union[int, MidEdge]

# how a shuttle sitting on a leg reaches a third stop
CONTINUE = "continue"
REVERSE = "reverse"


class TravelMatrix:
    """Dense travel-time (seconds) and distance (km) matrices indexed by stop id."""

    def __init__(self, stop_ids: Sequence[int], time: np.ndarray, distance: np.ndarray):
        self.stop_ids = tuple(int(s) for s in stop_ids)
        self.index = {s: i for i, s in enumerate(self.stop_ids)}
        self.time_s = np.ascontiguousarray(time, dtype=np.float64)
        self.dist_km = np.ascontiguousarray(distance, dtype=np.float64)
        problems = validate_matrix(self.stop_ids, self.time_s, self.dist_km)
        if problems:
            raise NetworkError(problems)
        self.time_s.setflags(write=False)
        self.dist_km.setflags(write=False)
        # plain lists: scalar lookups on the routing hot path are far cheaper than numpy indexing
        self._t = self.time_s.tolist()
        self._d = self.dist_km.tolist()

    def __len__(self):
        return len(self.stop_ids)

    def __eq__(self, other):
        if not isinstance(other, TravelMatrix):
            return NotImplemented
        return (self.stop_ids == other.stop_ids
                and np.array_equal(self.time_s, other.time_s)
                and np.array_equal(self.dist_km, other.dist_km))

    def _i(self, stop: int) -> int:
        try:
            return self.index[stop]
        except KeyError:
            raise NetworkError([f"unknown stop id {stop!r}"]) from None

    def time(self, a: int, b: int) -> float:
        try:
            return self._t[self.index[a]][self.index[b]]
        except KeyError:
            self._i(a), self._i(b)
            raise

    def dist(self, a: int, b: int) -> float:
        try:
            return self._d[self.index[a]][self.index[b]]
        except KeyError:
            self._i(a), self._i(b)
            raise

    def leg(self, origin, dest: int, mode: str = REVERSE) -> tuple[float, float, str]:
        """Time, distance and direction taken from ``origin`` (stop or MidEdge) to stop ``dest``.

        From a mid-edge point the shuttle either finishes its leg first or, in
        ``reverse`` mode, may turn back to the leg origin when that is strictly faster.
        """
        if not isinstance(origin, MidEdge):
            return self.time(origin, dest), self.dist(origin, dest), CONTINUE
        a, b, f = origin.origin, origin.dest, origin.fraction
        t_ab, d_ab = self.time(a, b), self.dist(a, b)
        fwd_t = (1.0 - f) * t_ab + self.time(b, dest)
        fwd_d = (1.0 - f) * d_ab + self.dist(b, dest)
        if mode == REVERSE:
            back_t = f * t_ab + self.time(a, dest)
            if back_t < fwd_t:
                return back_t, f * d_ab + self.dist(a, dest), REVERSE
        return fwd_t, fwd_d, CONTINUE


def validate_matrix(stop_ids: Sequence[int], time: np.ndarray, dist: np.ndarray) -> list[str]:
    problems = []
    n = len(stop_ids)
    if len(set(stop_ids)) != n:
        seen, dups = set(), []
        for s in stop_ids:
            if s in seen:
                dups.append(s)
            seen.add(s)
        problems.append(f"duplicate stop ids {sorted(set(dups))}")
    for name, m in (("time", time), ("distance", dist)):
        if m.shape != (n, n):
            problems.append(f"{name} matrix has shape {m.shape}, expected ({n}, {n})")
            continue
        for i, j in zip(*np.nonzero(~np.isfinite(m))):
            problems.append(f"{name}[{stop_ids[i]},{stop_ids[j]}] is not finite")
        for i, j in zip(*np.nonzero(m < 0)):
            problems.append(f"{name}[{stop_ids[i]},{stop_ids[j]}] = {m[i, j]} is negative")
        for i in np.nonzero(np.diag(m) != 0)[0]:
            problems.append(f"{name}[{stop_ids[i]},{stop_ids[i]}] diagonal is {m[i, i]}, expected 0")
    return problems


@dataclass(frozen=True)
class Zone:
    name: str
    stops: tuple[Stop, ...]
    matrix: TravelMatrix

    @property
    def idle_stops(self) -> tuple[int, ...]:
        return tuple(sorted(s.id for s in self.stops if s.is_idle))

    @property
    def stop_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.stops)


def nearest_idle_stop(p: int, matrix: TravelMatrix, idle_stops: Iterable[int]) -> int:
    idle = sorted(idle_stops)
    if not idle:
        raise NetworkError(["idle stop set is empty"])
    j = matrix._i(p)
    best, best_t = None, None
    for s in idle:
        t = matrix.time_s[matrix._i(s), j]
        if best_t is None or t < best_t:
            best, best_t = s, t
    return best


def nearest_idle_map(matrix: TravelMatrix, idle_stops: Iterable[int]) -> dict[int, int]:
    """``nearest_idle_stop`` for every stop, vectorised."""
    idle = sorted(idle_stops)
    if not idle:
        raise NetworkError(["idle stop set is empty"])
    rows = matrix.time_s[[matrix._i(s) for s in idle], :]
    # argmin returns the first minimum, i.e. the smallest id since ``idle`` is sorted
    winners = np.argmin(rows, axis=0)
    return {sid: idle[winners[k]] for k, sid in enumerate(matrix.stop_ids)}


# --- calibration -------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationModel:
    slope: float
    intercept: float
    outlier_rule: str = "residual > 3*IQR of least-median-of-squares residuals, then OLS refit"
    n_used: int = 0
    n_excluded: int = 0

    def apply(self, baseline_seconds):
        """Calibrated time, never negative. Works on scalars and arrays."""
        out = np.maximum(self.slope * np.asarray(baseline_seconds, dtype=float) + self.intercept, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def apply_matrix(self, time: np.ndarray) -> np.ndarray:
        out = self.apply(time)
        np.fill_diagonal(out, 0.0)
        return out


def _lms(x: np.ndarray, y: np.ndarray, fit_intercept: bool, max_pairs: int = 5000) -> tuple[float, float]:
    """Least-median-of-squares line over elemental fits (point pairs, or single points
    through the origin) with positive slope. Ties keep the first pair in x order."""
    if not fit_intercept:
        nz = x != 0
        cands = np.stack([y[nz] / x[nz], np.zeros(int(nz.sum()))], axis=1)
    else:
        i, j = np.triu_indices(len(x), k=1)
        ok = x[j] != x[i]
        i, j = i[ok], j[ok]
        if len(i) > max_pairs:
            # fixed draw over the sorted points keeps the fit deterministic and order-free
            pick = np.sort(np.random.default_rng(0).choice(len(i), max_pairs, replace=False))
            i, j = i[pick], j[pick]
        slope = (y[j] - y[i]) / (x[j] - x[i])
        cands = np.stack([slope, y[i] - slope * x[i]], axis=1)
    # observed time must grow with baseline time; a falling line can only come from glitches
    pos = cands[:, 0] > 0
    if pos.any():
        cands = cands[pos]
    best, best_med = (1.0, 0.0), np.inf
    for lo in range(0, len(cands), 500):
        c = cands[lo:lo + 500]
        med = np.median((y[None, :] - c[:, :1] * x[None, :] - c[:, 1:]) ** 2, axis=1)
        k = int(np.argmin(med))
        if med[k] < best_med:
            best_med, best = med[k], (float(c[k, 0]), float(c[k, 1]))
    return best


def _ols(x: np.ndarray, y: np.ndarray, fit_intercept: bool) -> tuple[float, float]:
    if not fit_intercept:
        return float(np.dot(x, y) / np.dot(x, x)), 0.0
    xm, ym = x.mean(), y.mean()
    slope = float(np.dot(x - xm, y - ym) / np.dot(x - xm, x - xm))
    return slope, float(ym - slope * xm)


def calibrate(points: Iterable[tuple[float, float]], fit_intercept: bool = True) -> CalibrationModel:
    """Fit ``observed = slope * baseline + intercept`` after dropping glitch points.

    A robust first pass (least median of squares) gives residuals; points whose absolute residual
    exceeds three interquartile ranges of the residuals are dropped and the rest
    are fitted by ordinary least squares.
    """
    pts = sorted((float(b), float(o)) for b, o in points)
    if len(pts) < 2:
        raise CalibrationError(f"need at least 2 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.all(x == x[0]):
        raise CalibrationError("baseline values are all equal")

    slope0, icpt0 = _lms(x, y, fit_intercept)
    resid = y - (slope0 * x + icpt0)
    q1, q3 = np.percentile(resid, [25, 75], method="lower")
    floor = 1e-9 * max(1.0, float(np.median(np.abs(y))))
    keep = np.abs(resid) <= max(3.0 * (q3 - q1), floor)

    xk, yk = x[keep], y[keep]
    if len(xk) < 2 or np.all(xk == xk[0]):
        raise CalibrationError(f"only {len(xk)} usable point(s) remain after outlier exclusion")
    slope, icpt = _ols(xk, yk, fit_intercept)
    if not slope > 0:
        raise CalibrationError(f"fitted slope {slope} is not positive")
    return CalibrationModel(slope=slope, intercept=icpt, n_used=int(keep.sum()),
                            n_excluded=int((~keep).sum()))


def read_calibration_csv(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["baseline_seconds"]), float(r["observed_seconds"]))
                for r in csv.DictReader(fh)]


# --- zone I/O ----------------------------------------------------------------

STOP_FIELDS = ["id", "lat", "lon", "kind", "is_idle"]
MATRIX_MAGIC = b"MTXZ"
MATRIX_VERSION = 1


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y", "t"):
        return True
    if t in ("0", "false", "no", "n", "f", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_stops(path) -> tuple[list[Stop], list[str]]:
    stops, problems = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in STOP_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            return [], [f"{path}: missing columns {missing}"]
        for lineno, row in enumerate(reader, start=2):
            try:
                stops.append(Stop(int(row["id"]), float(row["lat"]), float(row["lon"]),
                                  StopKind(row["kind"].strip()), _parse_bool(row["is_idle"])))
            except (ValueError, TypeError) as exc:
                problems.append(f"{path}:{lineno}: {exc}")
    return stops, problems


def write_stops(path, stops: Sequence[Stop]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STOP_FIELDS)
        for s in stops:
            w.writerow([s.id, repr(s.lat), repr(s.lon), s.kind.value, int(s.is_idle)])


def read_matrix_csv(path) -> tuple[list[int], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = [int(v) for v in rows[0][1:]]
    row_ids = [int(r[0]) for r in rows[1:]]
    if row_ids != header:
        raise NetworkError([f"{path}: row ids do not match column ids"])
    data = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    return header, data.reshape(len(row_ids), len(header))


def write_matrix_csv(path, stop_ids: Sequence[int], m: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(stop_ids))
        for sid, row in zip(stop_ids, m):
            w.writerow([sid] + [repr(float(v)) for v in row])


def write_matrix_bin(path, matrix: TravelMatrix) -> None:
    n = len(matrix)
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC + bytes([MATRIX_VERSION]) + struct.pack("<I", n))
        fh.write(np.asarray(matrix.stop_ids, dtype="<i8").tobytes())
        fh.write(matrix.time_s.astype("<f8").tobytes())
        fh.write(matrix.dist_km.astype("<f8").tobytes())


def read_matrix_bin(path) -> tuple[list[int], np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != MATRIX_MAGIC:
        raise NetworkError([f"{path}: bad magic header"])
    if raw[4] != MATRIX_VERSION:
        raise NetworkError([f"{path}: unsupported version {raw[4]}"])
    (n,) = struct.unpack("<I", raw[5:9])
    off = 9
    ids = np.frombuffer(raw, dtype="<i8", count=n, offset=off).tolist()
    off += 8 * n
    time = np.frombuffer(raw, dtype="<f8", count=n * n, offset=off).reshape(n, n).copy()
    off += 8 * n * n
    dist = np.frombuffer(raw, dtype="<f8", count=n * n, offset=off).reshape(n, n).copy()
    return ids, time, dist


def build_zone(stops: Sequence[Stop], ids: Sequence[int], time: np.ndarray, dist: np.ndarray,
               name: str = "zone", problems: Sequence[str] = ()) -> Zone:
    problems = list(problems)
    stop_ids = [s.id for s in stops]
    if len(set(stop_ids)) != len(stop_ids):
        dups = sorted({s for s in stop_ids if stop_ids.count(s) > 1})
        problems.append(f"duplicate stop ids in stops file: {dups}")
    if not any(s.is_idle for s in stops):
        problems.append("no idle stops flagged")
    if list(ids) != stop_ids:
        if len(ids) != len(stop_ids):
            problems.append(f"matrix covers {len(ids)} stops but stops file lists {len(stop_ids)}")
        else:
            problems.append("matrix stop ids differ from stops file order")
    problems.extend(validate_matrix(list(ids), np.asarray(time, float), np.asarray(dist, float)))
    if problems:
        raise NetworkError(problems)
    return Zone(name, tuple(stops), TravelMatrix(ids, time, dist))


def load_zone(stops_file, matrix_file, distance_file=None, name: str | None = None) -> Zone:
    """Load and validate a zone.

    ``matrix_file`` is either a binary container (time and distance together) or a
    CSV of seconds, in which case ``distance_file`` holds the kilometre CSV.
    """
    stops, problems = read_stops(stops_file)
    if Path(matrix_file).read_bytes()[:4] == MATRIX_MAGIC:
        ids, time, dist = read_matrix_bin(matrix_file)
    else:
        if distance_file is None:
            raise NetworkError(["a distance matrix file is required with a CSV time matrix"])
        ids, time = read_matrix_csv(matrix_file)
        dist_ids, dist = read_matrix_csv(distance_file)
        if dist_ids != ids:
            problems.append("time and distance matrices list different stop ids")
    return build_zone(stops, ids, time, dist, name or Path(stops_file).stem, problems)


def save_zone(zone: Zone, directory, binary: bool = False) -> dict[str, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = {"stops": d / "stops.csv"}
    write_stops(out["stops"], zone.stops)
    if binary:
        out["matrix"] = d / "matrix.bin"
        write_matrix_bin(out["matrix"], zone.matrix)
    else:
        out["time"], out["distance"] = d / "time.csv", d / "distance.csv"
        write_matrix_csv(out["time"], zone.matrix.stop_ids, zone.matrix.time_s)
        write_matrix_csv(out["distance"], zone.matrix.stop_ids, zone.matrix.dist_km)
    return out
