"""Brute-force references, written without touching the code under test."""
from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath


def compositions(k: int, parts: int):
    """Every tuple of ``parts`` non-negative ints summing to ``k``."""
    if parts == 0:
        if k == 0:
            yield ()
        return
    for bars in itertools.combinations(range(k + parts - 1), parts - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + parts - 1 - prev - 1)
        yield tuple(out)


def ratio(gamma, zeta) -> Fraction:
    total = Fraction(0)
    for g, z in zip(gamma, zeta):
        total += Fraction(g) * (2 if z == 0 else Fraction(1, z))
    return total


def brute_allocate(gamma, k):
    """(best objective, list of optimal count tuples) over all compositions."""
    scored = [(ratio(gamma, z), z) for z in compositions(k, len(gamma))]
    best = min(s for s, _ in scored)
    return best, [z for s, z in scored if s == best]


def brute_assign(rho, lo, hi):
    """Least exact total over all maps shuttle -> stop with lo[j] <= count[j] <= hi[j]."""
    n, m = len(rho), len(rho[0]) if rho else 0
    exact = [[Fraction(x) for x in row] for row in rho]
    best = None
    for counts in compositions(n, m):
        if any(c < a or c > b for c, a, b in zip(counts, lo, hi)):
            continue
        slots = [j for j, c in enumerate(counts) for _ in range(c)]
        # every distinct ordering of the slot multiset is one shuttle -> stop map
        for choice in set(itertools.permutations(slots)):
            total = sum((exact[i][j] for i, j in enumerate(choice)), Fraction(0))
            if best is None or total < best:
                best = total
    return best


def brute_master(routes_per_shuttle, penalties):
    """Exhaustive product over one route per shuttle.

    ``routes_per_shuttle`` is a list (shuttle order) of lists of (cost, served set).
    Returns (best exact objective, index tuple of the lexicographically first optimum).
    """
    best, arg = None, None
    for pick in itertools.product(*[range(len(rs)) for rs in routes_per_shuttle]):
        seen, ok = set(), True
        cost = Fraction(0)
        for rs, i in zip(routes_per_shuttle, pick):
            c, served = rs[i]
            if seen & served:
                ok = False
                break
            seen |= served
            cost += Fraction(c)
        if not ok:
            continue
        cost += sum((Fraction(g) for n, g in penalties.items() if n not in seen), Fraction(0))
        if best is None or cost < best:
            best, arg = cost, pick
    return best, arg


def penalty_hp(delta, length, tau_time, e):
    """Penalty at 50 significant digits."""
    with mpmath.workdps(50):
        return mpmath.mpf(delta) * mpmath.power(2, (2 * mpmath.mpf(tau_time) - mpmath.mpf(e)) / (10 * mpmath.mpf(length)))
