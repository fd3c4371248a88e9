"""Synthetic zones and demand days shaped like the pilot zones."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import SERVICE_SPAN_S, DemandDay, Request
from .network import CalibrationModel, Stop, StopKind, TravelMatrix, Zone

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class ZoneShape:
    n_stops: int
    n_idle: int
    n_requests: int
    # lat_min, lat_max, lon_min, lon_max
    bbox: tuple[float, float, float, float] = (33.70, 33.78, -84.30, -84.20)
    fixed_share: float = 0.66
    speed_kmh: float = 32.0
    detour: float = 1.3
    span_s: float = SERVICE_SPAN_S
    repeat_user_share: float = 0.3
    pool_days: int = 10
    name: str = "synthetic"


BELVEDERE = ZoneShape(465, 4, 39, (33.73, 33.79, -84.29, -84.21), 308 / 465, name="belvedere")
WEST_ATLANTA = ZoneShape(485, 3, 82, (33.72, 33.79, -84.46, -84.39), 374 / 485, name="west_atlanta")
# travel-time scaling toward congested conditions
DEFAULT_CALIBRATION = CalibrationModel(slope=1.25, intercept=30.0, outlier_rule="synthetic")


def haversine_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp, dl = p2 - p1, np.radians(lon2 - lon1)
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(a))


def make_zone(shape: ZoneShape, seed, calibration: CalibrationModel = DEFAULT_CALIBRATION) -> Zone:
    """Random stops in the bounding box with road-like metric travel times.

    Distances are great-circle times a detour factor, so they obey the triangle
    inequality; times scale distance by speed and then the (affine, increasing)
    calibration, which keeps the inequality.
    """
    if shape.n_idle > shape.n_stops:
        raise ValueError(f"idle count {shape.n_idle} exceeds stop count {shape.n_stops}")
    if shape.n_idle < 1:
        raise ValueError("at least one idle stop is required")
    rng = np.random.default_rng(seed)
    lat0, lat1, lon0, lon1 = shape.bbox
    lat = np.round(rng.uniform(lat0, lat1, shape.n_stops), 6)
    lon = np.round(rng.uniform(lon0, lon1, shape.n_stops), 6)
    n_fixed = int(round(shape.fixed_share * shape.n_stops))
    idle = set(rng.choice(shape.n_stops, size=shape.n_idle, replace=False).tolist())
    stops = tuple(Stop(i + 1, float(lat[i]), float(lon[i]),
                       StopKind.FIXED_TRANSIT if i < n_fixed else StopKind.REACH_VIRTUAL, i in idle)
                  for i in range(shape.n_stops))
    km = shape.detour * haversine_km(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    km = np.round(km, 4)
    np.fill_diagonal(km, 0.0)
    base_s = km / shape.speed_kmh * 3600.0
    time = np.round(calibration.apply_matrix(base_s), 1)
    np.fill_diagonal(time, 0.0)
    ids = [s.id for s in stops]
    return Zone(shape.name, stops, TravelMatrix(ids, time, km))


def _time_of_day(rng, n: int, span: float) -> np.ndarray:
    # morning and afternoon peaks over a flat base
    mix = rng.choice(3, size=n, p=[0.35, 0.35, 0.30])
    t = np.where(mix == 0, rng.normal(0.15 * span, 0.08 * span, n),
                 np.where(mix == 1, rng.normal(0.75 * span, 0.08 * span, n), rng.uniform(0, span, n)))
    return np.clip(np.round(t), 0, span - 1)


def make_day(zone: Zone, n_requests: int, seed, span: float = SERVICE_SPAN_S, users: int | None = None,
             user_prefix: str = "u", id_start: int = 1) -> DemandDay:
    rng = np.random.default_rng(seed)
    ids = np.array(zone.stop_ids)
    # a few popular origins (stations) draw a larger share
    weights = rng.pareto(1.5, len(ids)) + 0.05
    weights /= weights.sum()
    users = users or max(1, int(round(n_requests * 0.8)))
    times = _time_of_day(rng, n_requests, span)
    riders = rng.choice([1, 2, 3, 4], size=n_requests, p=[0.9, 0.07, 0.02, 0.01])
    reqs = []
    for k in range(n_requests):
        p = int(rng.choice(ids, p=weights))
        d = int(rng.choice(ids))
        while d == p:
            d = int(rng.choice(ids))
        reqs.append(Request(id_start + k, f"{user_prefix}{int(rng.integers(users))}", p, d, float(times[k]),
                            int(riders[k])))
    return DemandDay(tuple(reqs))


def make_instance(shape: ZoneShape, seed) -> tuple[Zone, DemandDay, list[DemandDay]]:
    """Zone, base day and pool of preceding days; pool days share the user population."""
    ss = np.random.SeedSequence(seed)
    s_zone, s_day, *s_pool = ss.spawn(2 + shape.pool_days)
    zone = make_zone(shape, s_zone)
    users = max(1, int(round(shape.n_requests / (1 + shape.repeat_user_share))))
    base = make_day(zone, shape.n_requests, s_day, shape.span_s, users)
    pool = [make_day(zone, shape.n_requests, s, shape.span_s, users, id_start=1)
            for s in s_pool]
    return zone, base, pool
