import numpy as np
import pytest

from microtransit.demand import DemandDay, Request
from microtransit.engine import (ACT, DRIVE, ConfigError, DriverModel, EventLog, Move, ShuttleState, SflConfig,
                                 SimParams, SimulationError, Simulator, Status, predicted_location,
                                 relocate_idle_stops, sample_driver_delay, simulate, synthetic_response_times)
from microtransit.network import MidEdge
from microtransit.routing import ActionKind, RouteStopAction

from .util import line_zone, tiny_zone

ZERO = DriverModel((0.0,))


def three_stops():
    # idle stop 1; 1->2 is 120 s, 2->3 is 300 s
    return tiny_zone([[0, 120, 420], [120, 0, 300], [420, 300, 0]], idle={1})


def pickups(log):
    return {r["request"]: r["t"] for r in log.of_type("pickup")}


def test_quiescent_step():
    sim = Simulator(three_stops(), DemandDay(()), 2, SflConfig.parse("II"), driver=ZERO)
    before = [(s.stop, s.riders, list(s.plan)) for s in sim.shuttles]
    sim.step_epoch(0)
    sim.step_epoch(1)
    assert [(s.stop, s.riders, list(s.plan)) for s in sim.shuttles] == before
    assert sim.t == 60 and not sim.log.of_type("departure")


def test_one_request_sfl2_timing():
    day = DemandDay((Request(1, "u", 2, 3, 45.0),))
    res = simulate(three_stops(), day, 1, "II", driver=ZERO)
    # batched in [30, 60), dispatched at 60, 120 s drive
    assert pickups(res.log)[1] == 180


def test_one_request_sfl1_delay_is_additive():
    day = DemandDay((Request(1, "u", 2, 3, 45.0),))
    res = simulate(three_stops(), day, 1, "I", driver=DriverModel((60.0,)))
    assert pickups(res.log)[1] == 240
    assert res.log.of_type("driver_response")[0]["delay"] == 60


def test_delay_applies_only_when_idle():
    # second request arrives while the shuttle is busy; no new driver response for it
    day = DemandDay((Request(1, "u", 2, 3, 45.0), Request(2, "v", 3, 2, 100.0)))
    res = simulate(three_stops(), day, 1, "I", driver=DriverModel((60.0,)))
    responses = res.log.of_type("driver_response")
    assigned = {r["request"]: r["t"] for r in res.log.of_type("assigned")}
    busy_at = [r["t"] for r in responses if r["t"] == assigned[2]]
    assert not busy_at


def test_predicted_location_examples():
    sh = ShuttleState(0, 1)
    assert predicted_location(sh, 0) == 1 and predicted_location(sh, 1e6) == 1
    sh.plan = [Move(DRIVE, 0.0, 300.0, 1, 2, 0.0, 1.0, 5.0),
               Move(ACT, 300.0, 300.0, action=RouteStopAction(2, ActionKind.REPOSITION))]
    loc = predicted_location(sh, 100.0)
    assert isinstance(loc, MidEdge) and (loc.origin, loc.dest) == (1, 2)
    assert loc.fraction == pytest.approx(1 / 3)
    assert predicted_location(sh, 400.0) == 2


def _deadheading(sfl):
    zone = tiny_zone([[0, 600], [600, 0]], idle={2})
    sim = Simulator(zone, DemandDay(()), 1, SflConfig.parse(sfl), driver=ZERO)
    sh = sim.shuttles[0]
    sh.stop = 1
    sh.plan = [Move(DRIVE, 0.0, 600.0, 1, 2, 0.0, 1.0, 10.0),
               Move(ACT, 600.0, 600.0, action=RouteStopAction(2, ActionKind.REPOSITION))]
    return sim


def test_availability_commitment_vs_reroute():
    av2 = _deadheading("II").availability(120.0)[0]
    assert av2.location == 2 and av2.time == 600.0
    av3 = _deadheading("III").availability(120.0)[0]
    assert isinstance(av3.location, MidEdge) and av3.location.fraction == pytest.approx(0.2)
    assert av3.time == 120.0 and av3.committed == ()


def test_full_shuttle_takes_no_new_work():
    sim = _deadheading("III")
    sh = sim.shuttles[0]
    sh.riders = 6
    assert not sim.availability(120.0)[0].accepts_new
    sh.riders = 5
    assert sim.availability(120.0)[0].accepts_new


def test_status_labels():
    sim = _deadheading("II")
    assert sim.shuttles[0].status is Status.DEADHEADING
    assert ShuttleState(1, 1).status is Status.IDLE


def test_driver_delay_degenerate_and_clamped():
    rng = np.random.default_rng(0)
    assert {sample_driver_delay(ZERO, rng) for _ in range(100)} == {0.0}
    assert sample_driver_delay(DriverModel((900.0,), 300.0), rng) == 300.0
    with pytest.raises(ConfigError):
        DriverModel(())


def test_driver_delay_multiset_law():
    rng = np.random.default_rng(123)
    draws = [sample_driver_delay(DriverModel((10.0, 10.0, 40.0)), rng) for _ in range(100_000)]
    p10 = draws.count(10.0) / len(draws)
    assert abs(p10 - 2 / 3) <= 0.01 and abs((1 - p10) - 1 / 3) <= 0.01


def test_synthetic_response_summary():
    d = np.array(synthetic_response_times())
    assert len(d) == 1619
    assert np.median(d) == 18
    assert d.mean() == pytest.approx(43.14, abs=0.05)
    assert d.max() <= 300


def _req(i, p, e):
    return Request(i, f"u{i}", p, 9 if p != 9 else 8, e)


def test_relocation_single_origin_pads():
    reqs = [_req(i, 5, 100.0 * i) for i in range(1, 6)]
    out = relocate_idle_stops(reqs, [0.0], [1, 2, 3])
    assert out[0.0] == (1, 2, 5)


def test_relocation_top_k():
    origins = ["a"] * 5 + ["b"] * 3 + ["c"] * 3 + ["d"]
    ids = {"a": 4, "b": 6, "c": 2, "d": 7}
    reqs = [_req(i, ids[o], 10.0 * i) for i, o in enumerate(origins, 1)]
    out = relocate_idle_stops(reqs, [0.0], [1, 3, 5])
    assert out[0.0] == tuple(sorted((4, 6, 2)))


def test_relocation_tie_prefers_earlier_first_request():
    reqs = [_req(1, 6, 50.0), _req(2, 2, 60.0), _req(3, 6, 70.0), _req(4, 2, 80.0)]
    assert relocate_idle_stops(reqs, [0.0], [1]) == {0.0: (6,)}


@pytest.mark.parametrize("sfl", ["I", "II", "III"])
def test_idle_stops_fixed_below_sfl4(sfl):
    zone = line_zone(6, 60.0, idle={1, 6})
    day = DemandDay(tuple(_req(i, 3, 25200.0 + 30 * i) for i in range(1, 5)) + (Request(9, "z", 2, 3, 100.0),))
    day = DemandDay(tuple(r if r.d <= 6 else Request(r.id, r.user_id, r.p, 5, r.e) for r in day))
    res = simulate(zone, day, 2, sfl, driver=ZERO)
    assert {stops for _, stops in res.idle_history} == {(1, 6)}
    assert not res.log.of_type("idle_stop_relocation")


def test_sfl4_relocates_at_shift_start():
    zone = line_zone(6, 60.0, idle={1, 6})
    day = DemandDay((Request(1, "a", 2, 5, 100.0), Request(2, "b", 2, 4, 200.0),
                     Request(3, "c", 3, 1, 25300.0), Request(4, "d", 3, 1, 25400.0), Request(5, "e", 4, 1, 25500.0)))
    res = simulate(zone, day, 2, "IV", driver=ZERO)
    hist = dict(res.idle_history)
    assert hist[0.0] == (1, 2) and hist[25200.0] == (3, 4)
    # initial placement is round-robin over the shift-one idle stops
    first = res.log.of_type("idle_stop_relocation")[0]
    assert first["t"] == 0 and first["stops"] == [1, 2]


def test_event_log_round_trip_and_order():
    log = EventLog({"scenario": {"zone": "z"}})
    log.add(0.0, "shift_start", shift=1)
    log.add(5.0, "pickup", request=1)
    back = EventLog.from_jsonl(log.to_jsonl())
    assert back.records == log.records and back.meta == log.meta
    with pytest.raises(SimulationError):
        log.add(1.0, "pickup", request=2)


def test_event_log_rejects_foreign_files():
    with pytest.raises(ValueError):
        EventLog.from_jsonl('{"schema": "other", "version": 1}\n')
    with pytest.raises(ValueError):
        EventLog.from_jsonl('{"schema": "microtransit.eventlog", "version": 2}\n')


def test_timestamps_non_decreasing_in_a_busy_run():
    from microtransit.synthetic import ZoneShape, make_instance
    zone, base, _ = make_instance(ZoneShape(30, 3, 40, name="t", pool_days=0), 3)
    for sfl in "I", "III":
        res = simulate(zone, base, 3, sfl, SimParams(), DriverModel(synthetic_response_times()), seed=1)
        ts = [r["t"] for r in res.log]
        assert ts == sorted(ts)


def test_rejects_empty_fleet():
    with pytest.raises(ConfigError):
        Simulator(three_stops(), DemandDay(()), 0, SflConfig.parse("I"))


def test_rejects_unknown_sfl():
    with pytest.raises(ConfigError, match="I, II, III, IV"):
        SflConfig.parse("V")


def test_horizon_extension_finishes_late_trips():
    zone = tiny_zone([[0, 1500], [1500, 0]], idle={1})
    day = DemandDay((Request(1, "u", 2, 1, 46790.0),))
    res = simulate(zone, day, 1, "II", driver=ZERO)
    assert res.end_time > 46800 and res.log.of_type("dropoff")


def test_horizon_extension_limit():
    zone = tiny_zone([[0, 1500], [1500, 0]], idle={1})
    day = DemandDay((Request(1, "u", 2, 1, 46790.0),))
    with pytest.raises(SimulationError, match="unfinished"):
        simulate(zone, day, 1, "II", SimParams(max_extension=600.0), driver=ZERO)
