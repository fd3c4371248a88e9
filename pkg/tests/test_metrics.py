import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from microtransit.engine import EventLog
from microtransit.metrics import (REPORT_COLUMNS, IncompleteLogError, UndefinedCostError, build_report,
                                  cost_per_trip, cost_per_trip_exact, cost_table, distances, nearest_rank,
                                  report_csv, ridesharing_rate, summarize, travel_stats, waiting_stats)

FIXTURES = Path(__file__).parent / "fixtures"


def trip_log(trips):
    """trips: (id, e, pickup, dropoff) tuples."""
    items = []
    for rid, e, pu, do in trips:
        items.append((e, 0, "request_received", {"request": rid, "e": e, "riders": 1}))
        items.append((pu, 1, "pickup", {"shuttle": 0, "request": rid, "riders": 1}))
        items.append((do, 2, "dropoff", {"shuttle": 0, "request": rid, "riders": 1}))
    log = EventLog()
    for t, _, kind, fields in sorted(items, key=lambda x: (x[0], x[1])):
        log.add(t, kind, **fields)
    return log


def legs(*pairs):
    log = EventLog()
    for i, (km, riders) in enumerate(pairs):
        log.add(float(i), "arrival", shuttle=0, stop=1, km=km, riders=riders)
    return log


def test_wait_statistics_example():
    log = trip_log([(1, 0.0, 60.0, 100.0), (2, 0.0, 120.0, 200.0), (3, 0.0, 180.0, 300.0)])
    s = waiting_stats(log)
    assert s.mean == 120 and s.std == pytest.approx(48.98979, abs=1e-4) and s.p95 == 180


def test_travel_is_dropoff_minus_pickup():
    log = trip_log([(1, 0.0, 60.0, 100.0), (2, 10.0, 20.0, 220.0)])
    assert travel_stats(log).mean == 120


def test_nearest_rank():
    assert nearest_rank(list(range(1, 21)), 95) == 19
    assert nearest_rank([5.0], 95) == 5
    assert summarize([]).n == 0


def test_empty_day_gives_empty_report():
    rep = build_report(EventLog(), {"fleet": 3}, {}, 3)
    assert rep.trips == 0 and rep.wait.n == 0
    assert "empty-demand" in rep.flags and "cost-undefined" in rep.flags
    assert rep.rideshare.value == 0 and rep.rideshare.flag == "zero-distance"


def test_incomplete_log_names_requests():
    log = trip_log([(1, 0.0, 60.0, 100.0)])
    log.add(200.0, "request_received", request=7, e=200.0, riders=1)
    with pytest.raises(IncompleteLogError, match="7") as err:
        waiting_stats(log)
    assert err.value.missing == [7]


def test_rideshare_examples():
    assert ridesharing_rate(legs((10.0, 1), (5.0, 0))).value == 0
    assert ridesharing_rate(legs((10.0, 2), (5.0, 3))).value == 1
    assert ridesharing_rate(legs((10.0, 1), (10.0, 3), (0.0, 0))).value == 0.5
    assert ridesharing_rate(legs((10.0, 1), (10.0, 2), (20.0, 0))).value == 0.25


def test_distance_closure_split():
    odo = distances(legs((3.0, 0), (4.0, 1), (5.0, 2)), fleet=2)
    o = odo[0]
    assert o.empty_km + o.loaded_km == o.odometer_km == 12 and o.shared_km == 5
    assert odo[1].odometer_km == 0


def test_cost_examples():
    assert cost_per_trip(20, 13, 3, 43) == 18.14
    assert cost_per_trip(20, 13, 5, 89) == 14.61
    assert cost_per_trip(55, 13, 3, 43) == 49.88
    assert cost_per_trip(0, 13, 3, 43) == 0


def test_cost_zero_riders():
    with pytest.raises(UndefinedCostError):
        cost_per_trip(20, 13, 3, 0)


def test_cost_linear_in_rate():
    for r in (20, 35, 50):
        assert cost_per_trip_exact(2 * r, 13, 4, 43) == 2 * cost_per_trip_exact(r, 13, 4, 43)
    assert cost_per_trip_exact(20, 13, 3, 43) == Fraction(780, 43)


def test_cost_rounds_half_up():
    # 1 * 1 * 1 / 8 = 0.125 -> 0.13, where round-half-even would give 0.12
    assert cost_per_trip(1, 1, 1, 8) == 0.13


def test_cost_table_reproduces_base_belvedere_grid():
    from microtransit.cli import COST_PRESETS
    rows = list(csv.reader(open(FIXTURES / "cost_belvedere_20_50.csv")))
    header, got = cost_table(COST_PRESETS["belvedere"], [20, 25, 30, 35, 40, 45, 50])
    assert header == rows[0]
    cells = [(float(want), have) for r, g in zip(rows[1:], got) for want, have in zip(r[1:4], g[1:4])]
    assert len(cells) == 21
    assert all(abs(w - h) <= 0.01 for w, h in cells)


def test_cost_table_trip_denominator():
    from microtransit.metrics import DemandLevel
    _, rows = cost_table([DemandLevel("1x", 39, 43, (3,))], [20], denominator="trips")
    assert rows[0][1] == 20.0


def test_report_round_trip_through_jsonl():
    log = trip_log([(1, 0.0, 60.0, 100.0), (2, 0.0, 120.0, 200.0)])
    log.add(300.0, "arrival", shuttle=0, stop=2, km=4.0, riders=0)
    back = EventLog.from_jsonl(log.to_jsonl())
    a = build_report(log, {"fleet": 1}, {"cost_rate": 35}, 1)
    b = build_report(back, {"fleet": 1}, {"cost_rate": 35}, 1)
    assert a.row() == b.row()
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_report_csv_column_order():
    log = trip_log([(1, 0.0, 60.0, 100.0)])
    text = report_csv([build_report(log, {"zone": "z", "fleet": 2}, {"cost_rate": 35}, 2)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == list(REPORT_COLUMNS) + ["status", "error"]
    row = dict(zip(rows[0], rows[1]))
    assert row["cost_per_trip"] == f"{35 * 13 * 2:.2f}" and row["status"] == "ok"
    assert not math.isnan(float(row["mean_wait_s"]))
