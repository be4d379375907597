"""The exact LP core, cross-checked against an independent float solver."""

import random
from fractions import Fraction as F

import pytest
from scipy.optimize import linprog

from probterm.simplex import LPStatus, RowRel, solve


def test_bounded_maximum():
    r = solve(1, [True], [({0: F(1)}, RowRel.LE, F(3))], {0: F(1)})
    assert r.status is LPStatus.OPTIMAL and r.x == [F(3)] and r.value == 3


def test_unbounded():
    r = solve(1, [True], [], {0: F(1)})
    assert r.status is LPStatus.UNBOUNDED


def test_infeasible():
    r = solve(1, [True], [({0: F(1)}, RowRel.LE, F(-1))], {})
    assert r.status is LPStatus.INFEASIBLE


def test_free_variable_negative_optimum():
    rows = [({0: F(1)}, RowRel.GE, F(-5)), ({0: F(1)}, RowRel.LE, F(-2))]
    r = solve(1, [False], rows, {0: F(1)})
    assert r.status is LPStatus.OPTIMAL and r.x == [F(-2)]


def test_equalities_and_redundant_rows():
    rows = [({0: F(1), 1: F(1)}, RowRel.EQ, F(4)),
            ({0: F(2), 1: F(2)}, RowRel.EQ, F(8)),  # redundant copy
            ({0: F(1), 1: F(-1)}, RowRel.EQ, F(0))]
    r = solve(2, [True, True], rows, {0: F(1)})
    assert r.status is LPStatus.OPTIMAL and r.x == [F(2), F(2)]


def test_exact_fractional_vertex():
    # max x + y  s.t. 3x + y <= 1, x + 3y <= 1  ->  vertex (1/4, 1/4)
    rows = [({0: F(3), 1: F(1)}, RowRel.LE, F(1)),
            ({0: F(1), 1: F(3)}, RowRel.LE, F(1))]
    r = solve(2, [True, True], rows, {0: F(1), 1: F(1)})
    assert r.x == [F(1, 4), F(1, 4)] and r.value == F(1, 2)


def test_degenerate_cycling_guard():
    # classic Beale-style degeneracy; Bland's rule must terminate
    rows = [({0: F(1, 4), 1: F(-8), 2: F(-1), 3: F(9)}, RowRel.LE, F(0)),
            ({0: F(1, 2), 1: F(-12), 2: F(-1, 2), 3: F(3)}, RowRel.LE, F(0)),
            ({2: F(1)}, RowRel.LE, F(1))]
    obj = {0: F(3, 4), 1: F(-20), 2: F(1, 2), 3: F(-6)}
    r = solve(4, [True] * 4, rows, obj)
    assert r.status is LPStatus.OPTIMAL and r.value == F(5, 4)


def test_pivot_cap():
    rows = [({0: F(1), 1: F(1)}, RowRel.LE, F(10)),
            ({0: F(1), 1: F(-1)}, RowRel.GE, F(-10))]
    r = solve(2, [True, True], rows, {0: F(1), 1: F(1)}, pivot_cap=0)
    assert r.status is LPStatus.PIVOT_CAP


def _scipy_status(n, nonneg, rows, obj):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for coeffs, rel, b in rows:
        vec = [float(coeffs.get(j, 0)) for j in range(n)]
        if rel is RowRel.LE:
            A_ub.append(vec); b_ub.append(float(b))
        elif rel is RowRel.GE:
            A_ub.append([-v for v in vec]); b_ub.append(-float(b))
        else:
            A_eq.append(vec); b_eq.append(float(b))
    bounds = [(0, None) if nn else (None, None) for nn in nonneg]
    return linprog([-float(obj.get(j, 0)) for j in range(n)],
                   A_ub=A_ub or None, b_ub=b_ub or None,
                   A_eq=A_eq or None, b_eq=b_eq or None,
                   bounds=bounds, method="highs")


def _ray_is_certificate(n, nonneg, rows, obj, x, ray):
    for j in range(n):
        if nonneg[j] and ray[j] < 0:
            return False
    for coeffs, rel, b in rows:
        vr = sum((c * ray[j] for j, c in coeffs.items()), F(0))
        if rel is RowRel.LE and vr > 0:
            return False
        if rel is RowRel.GE and vr < 0:
            return False
        if rel is RowRel.EQ and vr != 0:
            return False
    return sum((c * ray[j] for j, c in obj.items()), F(0)) > 0


def test_randomized_against_scipy():
    rng = random.Random(42)
    for trial in range(400):
        n = rng.randint(1, 4)
        m = rng.randint(1, 6)
        nonneg = [rng.random() < 0.7 for _ in range(n)]
        rows = [({j: F(rng.randint(-4, 4)) for j in range(n)},
                 rng.choice([RowRel.LE, RowRel.GE, RowRel.EQ]),
                 F(rng.randint(-6, 6))) for _ in range(m)]
        obj = {j: F(rng.randint(-3, 3)) for j in range(n)}
        mine = solve(n, nonneg, rows, obj)
        if mine.status is LPStatus.OPTIMAL:
            sp = _scipy_status(n, nonneg, rows, obj)
            assert sp.status == 0, trial
            assert abs(float(mine.value) + sp.fun) < 1e-6, trial
        elif mine.status is LPStatus.INFEASIBLE:
            sp = _scipy_status(n, nonneg, rows, {})
            assert sp.status == 2, trial
        else:
            # exact unboundedness certificate: feasible point + improving ray
            assert _ray_is_certificate(n, nonneg, rows, obj, mine.x, mine.ray), trial


def test_row_permutation_invariance_of_value():
    rng = random.Random(9)
    for _ in range(40):
        n, m = 3, 5
        rows = [({j: F(rng.randint(-3, 3)) for j in range(n)}, RowRel.LE,
                 F(rng.randint(0, 8))) for _ in range(m)]
        rows.append(({j: F(1) for j in range(n)}, RowRel.LE, F(20)))
        obj = {j: F(rng.randint(0, 3)) for j in range(n)}
        base = solve(n, [True] * n, rows, obj)
        if base.status is not LPStatus.OPTIMAL:
            continue
        shuffled = rows[:]
        rng.shuffle(shuffled)
        again = solve(n, [True] * n, shuffled, obj)
        assert again.status is LPStatus.OPTIMAL
        assert again.value == base.value


def test_resubstitution_is_exact():
    # verify=True (the default) asserts exact satisfaction internally; a
    # deliberately fractional optimum exercises it
    rows = [({0: F(7), 1: F(3)}, RowRel.LE, F(1)),
            ({0: F(-2), 1: F(9)}, RowRel.LE, F(1)),
            ({0: F(1), 1: F(1)}, RowRel.GE, F(-5))]
    r = solve(2, [False, False], rows, {0: F(5), 1: F(1)})
    assert r.status is LPStatus.OPTIMAL
    assert 7 * r.x[0] + 3 * r.x[1] <= 1 and -2 * r.x[0] + 9 * r.x[1] <= 1
    assert 5 * r.x[0] + r.x[1] == r.value
