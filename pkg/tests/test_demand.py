import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microtransit.demand import (DemandDay, DemandError, Request, batch_epoch, read_requests, scale_ridership,
                                 trip_window, write_requests)
from microtransit.network import TravelMatrix, calibrate
from microtransit.synthetic import BELVEDERE, make_instance


def line_matrix(n=4, step=100.0):
    ids = list(range(1, n + 1))
    t = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) * step
    return TravelMatrix(ids, t, t / 100)


def test_batch_epoch_interval():
    day = DemandDay((Request(1, "u", 1, 2, 45.0),))
    assert [r.id for r in batch_epoch(day, 1, 30)] == [1]
    assert batch_epoch(day, 0, 30) == [] and batch_epoch(day, 2, 30) == []


def test_batch_epoch_boundary_belongs_to_later_epoch():
    day = DemandDay((Request(1, "u", 1, 2, 60.0),))
    assert batch_epoch(day, 1, 30) == []
    assert [r.id for r in batch_epoch(day, 2, 30)] == [1]


def test_batch_epoch_empty_day():
    day = DemandDay(())
    assert all(batch_epoch(day, t, 30) == [] for t in range(100))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 46799), max_size=40))
def test_batches_partition_the_day(times):
    day = DemandDay(tuple(Request(i + 1, f"u{i}", 1, 2, float(e)) for i, e in enumerate(times)))
    seen = [r.id for tau in range(1560) for r in batch_epoch(day, tau, 30)]
    assert sorted(seen) == sorted(r.id for r in day)


def test_request_validation():
    with pytest.raises(DemandError):
        Request(1, "u", 3, 3, 0.0)
    with pytest.raises(DemandError):
        Request(1, "u", 1, 2, 0.0, riders=5)
    with pytest.raises(DemandError):
        Request(1, "u", 1, 2, -1.0)


def test_multiplier_one_is_identity():
    _, base, pool = make_instance(BELVEDERE, 1)
    zone, _, _ = make_instance(BELVEDERE, 1)
    assert scale_ridership(base, pool, 1, 9, zone.matrix) is base


@pytest.mark.parametrize("mult,target", [(2, 78), (3, 117)])
def test_belvedere_scaling_counts(mult, target):
    zone, base, pool = make_instance(BELVEDERE, 4)
    assert len(base) == 39
    day = scale_ridership(base, pool, mult, 5, zone.matrix)
    assert len(day) == target and day.shortfall is None
    # base trips kept, sampled trips keep their time of day
    assert set(r.id for r in base) <= set(r.id for r in day)
    lookup = {(k, r.id): r for k, d in enumerate(pool) for r in d}
    for r, tag in zip(day.requests, day.source_tags):
        if tag.startswith("pool"):
            k, orig = tag[4:].split(":")
            src = lookup[(int(k), int(orig))]
            assert (src.e, src.p, src.d, src.user_id) == (r.e, r.p, r.d, r.user_id)


def test_scaled_user_windows_never_overlap():
    zone, base, pool = make_instance(BELVEDERE, 4)
    day = scale_ridership(base, pool, 3, 5, zone.matrix)
    base_ids = {r.id for r in base}
    by_user = {}
    for r in day:
        by_user.setdefault(r.user_id, []).append(r)
    for rs in by_user.values():
        sampled = [r for r in rs if r.id not in base_ids]
        for s in sampled:
            ws = trip_window(s, zone.matrix)
            for o in rs:
                if o is s:
                    continue
                wo = trip_window(o, zone.matrix)
                assert ws[1] < wo[0] or wo[1] < ws[0]


def test_overlapping_candidate_rejected():
    m = line_matrix()
    # user u holds [300, 600]: e=300, T(1,4)=300, no slack
    base = DemandDay((Request(1, "u", 1, 4, 300.0),))
    clash = Request(7, "u", 1, 4, 100.0)       # window [100, 400] overlaps
    other = Request(8, "w", 1, 2, 100.0)
    day = scale_ridership(base, [DemandDay((clash, other))], 2, 0, m, slack=0.0)
    assert sorted(r.user_id for r in day) == ["u", "w"]


def test_pool_exhaustion_reports_shortfall():
    m = line_matrix()
    base = DemandDay((Request(1, "u", 1, 4, 300.0), Request(2, "v", 2, 3, 50.0)))
    day = scale_ridership(base, [DemandDay((Request(1, "x", 1, 2, 10.0),))], 3, 0, m)
    assert len(day) == 3
    assert day.shortfall.target == 6 and day.shortfall.achieved == 3


def test_scaling_is_seeded():
    zone, base, pool = make_instance(BELVEDERE, 2)
    a = scale_ridership(base, pool, 3, 11, zone.matrix)
    b = scale_ridership(base, pool, 3, 11, zone.matrix)
    c = scale_ridership(base, pool, 3, 12, zone.matrix)
    assert a == b and a.source_tags != c.source_tags


def test_requests_round_trip(tmp_path):
    zone, base, pool = make_instance(BELVEDERE, 3)
    day = scale_ridership(base, pool, 2, 1, zone.matrix)
    write_requests(tmp_path / "r.csv", day, with_tags=True)
    back = read_requests(tmp_path / "r.csv")
    assert back.requests == day.requests and back.source_tags == day.source_tags


def test_users_counts_riders():
    day = DemandDay((Request(1, "a", 1, 2, 0.0, 3), Request(2, "b", 1, 2, 5.0)))
    assert day.users == 4


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(30, 3000), st.floats(0.5, 2.0)), min_size=3, max_size=30))
def test_calibration_order_free(pairs):
    pts = [(x, x * k) for x, k in pairs]
    try:
        a = calibrate(pts)
    except Exception as exc:
        with pytest.raises(type(exc)):
            calibrate(list(reversed(pts)))
        return
    b = calibrate(list(reversed(pts)))
    assert (a.slope, a.intercept, a.n_used) == (b.slope, b.intercept, b.n_used)
