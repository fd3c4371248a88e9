import math
import random
import warnings
from fractions import Fraction

import pytest

from microtransit.demand import Request
from microtransit.dispatch import (EPOCHS, MasterInstance, PenaltyOverflowWarning, PenaltyParams, penalty,
                                   solve_master, update_penalties)
from microtransit.routing import Route

from .oracles import brute_master, penalty_hp


def route(v, k, cost, served=()):
    return Route(v, 0.0, 1, (), float(cost), frozenset(served), id=(v, k))


def test_penalty_exponent_zero():
    assert penalty(420, 30, 300, 600) == 420


def test_penalty_exponent_one():
    assert penalty(420, 30, 450, 600) == 840


def test_penalty_doubles_per_five_epochs():
    for e in (0, 70, 1234):
        assert penalty(420, 30, 600 + 150, e) == pytest.approx(2 * penalty(420, 30, 600, e), rel=1e-12)


def test_penalty_matches_high_precision():
    rng = random.Random(3)
    for _ in range(200):
        d, l = rng.uniform(1, 1000), rng.uniform(5, 120)
        tau, e = rng.uniform(0, 40000), rng.uniform(0, 40000)
        assert penalty(d, l, tau, e) == pytest.approx(float(penalty_hp(d, l, tau, e)), rel=1e-12)


def test_penalty_epoch_unit():
    # in epochs, tau=10, e=20 gives exponent 0
    assert penalty(420, 30, 300, 600, EPOCHS) == 420


def test_penalty_overflow_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = penalty(420, 1, 1e6, 0)
    assert math.isinf(g) and any(issubclass(w.category, PenaltyOverflowWarning) for w in caught)


def test_update_penalties():
    p = PenaltyParams()
    assert update_penalties([], 0, p) == {}
    a, b = Request(1, "u", 1, 2, 100.0), Request(2, "v", 1, 2, 200.0)
    g = update_penalties([a, b], 900, p)
    assert g[1] > g[2]
    assert update_penalties([a], 900 + 150, p)[1] == pytest.approx(2 * g[1], rel=1e-12)


def test_master_all_null():
    inst = MasterInstance({0: [route(0, 0, 0)]}, {1: 420.0, 2: 100.0})
    sol = solve_master(inst)
    assert sol.objective == 520 and sol.unserved == {1, 2}


def test_master_serves_cheaper_than_penalty():
    inst = MasterInstance({0: [route(0, 0, 0), route(0, 1, 120, {1})]}, {1: 420.0})
    sol = solve_master(inst)
    assert sol.selected[0].id == (0, 1) and sol.objective == 120


def test_master_pooled_wins():
    rs = [route(0, 0, 0), route(0, 1, 150, {1}), route(0, 2, 160, {2}), route(0, 3, 400, {1, 2})]
    sol = solve_master(MasterInstance({0: rs}, {1: 420.0, 2: 420.0}))
    assert sol.selected[0].id == (0, 3) and sol.objective == 400


def test_master_ties_take_smallest_indices():
    rs0 = [route(0, 0, 0), route(0, 1, 100, {1})]
    rs1 = [route(1, 0, 0), route(1, 1, 100, {1})]
    sol = solve_master(MasterInstance({0: rs0, 1: rs1}, {1: 500.0}))
    # (0, 1) precedes (1, 0)
    assert sol.selected[0].id == (0, 0) and sol.selected[1].id == (1, 1)


def test_master_rejects_unknown_request():
    with pytest.raises(ValueError):
        MasterInstance({0: [route(0, 0, 0), route(0, 1, 1, {9})]}, {1: 1.0})


def test_master_node_limit_flags_suboptimal():
    rng = random.Random(0)
    routes = {v: [route(v, 0, 0)] + [route(v, k, rng.randint(1, 99), {rng.randint(1, 8)}) for k in range(1, 8)]
              for v in range(5)}
    sol = solve_master(MasterInstance(routes, {n: 1000.0 for n in range(1, 9)}), node_limit=5)
    assert not sol.optimal


def test_master_huge_penalties_stay_exact():
    # penalties near 1e23 next to costs of a few hundred seconds
    g = penalty(420, 30, 46800, 0)
    rs = [route(0, 0, 0), route(0, 1, 300.5, {1}), route(0, 2, 300.25, {2})]
    sol = solve_master(MasterInstance({0: rs}, {1: g, 2: g}))
    assert sol.selected[0].id == (0, 2)
    best, _ = brute_master([[(r.c_r, set(r.served)) for r in rs]], {1: g, 2: g})
    assert sol.exact_objective == best


def test_master_matches_brute_force_small():
    rng = random.Random(42)
    for _ in range(50):
        n_req = rng.randint(1, 5)
        pen = {n: float(rng.choice([rng.randint(50, 900), rng.uniform(10, 1e6)])) for n in range(1, n_req + 1)}
        routes = {}
        for v in range(rng.randint(1, 3)):
            rs = [route(v, 0, 0)]
            for k in range(1, rng.randint(1, 6)):
                served = set(rng.sample(range(1, n_req + 1), rng.randint(1, min(2, n_req))))
                rs.append(route(v, k, rng.randint(0, 600), served))
            routes[v] = rs
        sol = solve_master(MasterInstance(routes, pen))
        best, arg = brute_master([[(r.c_r, set(r.served)) for r in routes[v]] for v in sorted(routes)], pen)
        assert sol.exact_objective == best
        assert tuple(sol.selected[v].id[1] for v in sorted(routes)) == arg
        assert isinstance(sol.exact_objective, Fraction)
