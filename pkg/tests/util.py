import numpy as np

from microtransit.network import Stop, StopKind, TravelMatrix, Zone


def tiny_zone(times, idle, km_per_s=1 / 60.0, name="tiny"):
    """Zone over stops 1..n from a square time matrix; distances scale with time."""
    t = np.asarray(times, dtype=float)
    ids = list(range(1, len(t) + 1))
    stops = tuple(Stop(i, 33.7 + i * 1e-3, -84.3, StopKind.REACH_VIRTUAL, i in idle) for i in ids)
    return Zone(name, stops, TravelMatrix(ids, t, t * km_per_s))


def line_zone(n, step, idle):
    pos = np.arange(n)
    return tiny_zone(np.abs(np.subtract.outer(pos, pos)) * step, idle)
