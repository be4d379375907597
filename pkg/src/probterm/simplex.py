"""Exact two-phase simplex over rationals.

Dedicated to certificate synthesis and checking, where a float LP would
poison the Farkas witnesses: every pivot is performed with
`fractions.Fraction`, so feasibility, unboundedness and optima are exact
and the returned vertex can be re-substituted into the constraints
without tolerance. Pivoting uses Bland's rule throughout (no cycling,
deterministic), entering on the lowest eligible column index and leaving
on the lowest basic index among minimum ratios.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_PIVOT_CAP = 10 ** 6


class RowRel(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "=="


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    PIVOT_CAP = "pivot-cap"


@dataclass
class SimplexResult:
    status: LPStatus
    x: Optional[List[Fraction]] = None
    value: Optional[Fraction] = None
    ray: Optional[List[Fraction]] = None  # improving direction when unbounded


class _Tableau:
    """Dense tableau with explicit basis bookkeeping."""

    def __init__(self, rows: List[List[Fraction]], rhs: List[Fraction],
                 basis: List[int], ncols: int):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.ncols = ncols
        self.pivots = 0

    def pivot(self, r: int, c: int) -> None:
        prow = self.rows[r]
        piv = prow[c]
        if piv != ONE:
            inv = ONE / piv
            self.rows[r] = prow = [v * inv for v in prow]
            self.rhs[r] *= inv
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row[c]
            if f == 0:
                continue
            self.rows[i] = [a - f * b for a, b in zip(row, prow)]
            self.rhs[i] -= f * self.rhs[r]
        self.basis[r] = c
        self.pivots += 1

    def maximize(self, cost: List[Fraction], pivot_cap: int,
                 allowed: Optional[set] = None) -> Tuple[str, Fraction, List[Fraction]]:
        """Run simplex on the current basis for the given objective.

        Returns (outcome, value, reduced_cost_row); outcome is one of
        "optimal", "unbounded", "cap". `allowed` restricts entering
        columns (used to fence artificial columns out of phase 2).
        """
        red = list(cost)
        value = ZERO
        for i, b in enumerate(self.basis):
            f = red[b]
            if f != 0:
                row = self.rows[i]
                red = [a - f * v for a, v in zip(red, row)]
                value += f * self.rhs[i]

        while True:
            enter = -1
            for j in range(self.ncols):
                if red[j] > 0 and (allowed is None or j in allowed):
                    enter = j
                    break
            if enter < 0:
                return "optimal", value, red
            leave = -1
            best: Optional[Fraction] = None
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a > 0:
                    ratio = self.rhs[i] / a
                    if best is None or ratio < best or \
                            (ratio == best and self.basis[i] < self.basis[leave]):
                        best = ratio
                        leave = i
            if leave < 0:
                self._ray_col = enter
                return "unbounded", value, red
            if self.pivots >= pivot_cap:
                return "cap", value, red
            f = red[enter]
            self.pivot(leave, enter)
            red = [a - f * v for a, v in zip(red, self.rows[leave])]
            value += f * self.rhs[leave]


def solve(num_vars: int,
          nonneg: Sequence[bool],
          rows: Sequence[Tuple[Dict[int, Fraction], RowRel, Fraction]],
          objective: Dict[int, Fraction],
          pivot_cap: int = DEFAULT_PIVOT_CAP,
          verify: bool = True) -> SimplexResult:
    """Maximize `objective` subject to `rows` over `num_vars` variables.

    Variables with nonneg[j] False are free (internally split). The
    result's assignment, when optimal, satisfies every row exactly; this
    is re-checked unless `verify` is disabled.
    """
    # column layout: one column per nonneg var, two per free var
    col_of: List[Tuple[int, int]] = []  # (pos_col, neg_col); neg_col=-1 if nonneg
    ncols = 0
    for j in range(num_vars):
        if nonneg[j]:
            col_of.append((ncols, -1))
            ncols += 1
        else:
            col_of.append((ncols, ncols + 1))
            ncols += 2

    trows: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    slack_sign: List[int] = []
    for coeffs, rel, b in rows:
        row = [ZERO] * ncols
        for j, c in coeffs.items():
            if c == 0:
                continue
            pos, neg = col_of[j]
            row[pos] += c
            if neg >= 0:
                row[neg] -= c
        trows.append(row)
        rhs.append(b)
        slack_sign.append({RowRel.LE: 1, RowRel.GE: -1, RowRel.EQ: 0}[rel])

    # one slack column per inequality
    for i, sign in enumerate(slack_sign):
        if sign:
            for r in trows:
                r.append(ZERO)
            trows[i][ncols] = Fraction(sign)
            slack_sign[i] = ncols
            ncols += 1
        else:
            slack_sign[i] = -1

    # make all right-hand sides nonnegative
    for i in range(len(trows)):
        if rhs[i] < 0:
            trows[i] = [-v for v in trows[i]]
            rhs[i] = -rhs[i]

    # starting basis: slack where it survived with +1, else artificial
    basis: List[int] = []
    art_cols: List[int] = []
    for i in range(len(trows)):
        s = slack_sign[i]
        if s >= 0 and trows[i][s] == 1:
            basis.append(s)
        else:
            for r in trows:
                r.append(ZERO)
            trows[i][ncols] = ONE
            basis.append(ncols)
            art_cols.append(ncols)
            ncols += 1

    tab = _Tableau(trows, rhs, basis, ncols)

    if art_cols:
        phase1 = [ZERO] * ncols
        for c in art_cols:
            phase1[c] = Fraction(-1)
        outcome, value, _ = tab.maximize(phase1, pivot_cap)
        if outcome == "cap":
            return SimplexResult(LPStatus.PIVOT_CAP)
        if value < 0:
            return SimplexResult(LPStatus.INFEASIBLE)
        art_set = set(art_cols)
        # pivot leftover artificials out; rows where nothing pivots are redundant
        drop: List[int] = []
        for i in range(len(tab.rows)):
            if tab.basis[i] in art_set:
                col = next((j for j in range(tab.ncols)
                            if j not in art_set and tab.rows[i][j] != 0), None)
                if col is None:
                    drop.append(i)
                else:
                    tab.pivot(i, col)
        for i in reversed(drop):
            del tab.rows[i], tab.rhs[i], tab.basis[i]

    allowed = set(range(ncols)) - set(art_cols)
    cost = [ZERO] * ncols
    for j, c in objective.items():
        pos, neg = col_of[j]
        cost[pos] += c
        if neg >= 0:
            cost[neg] -= c
    outcome, value, _ = tab.maximize(cost, pivot_cap, allowed=allowed)
    if outcome == "cap":
        return SimplexResult(LPStatus.PIVOT_CAP)

    colval = [ZERO] * ncols
    for i, b in enumerate(tab.basis):
        colval[b] = tab.rhs[i]
    x = []
    for j in range(num_vars):
        pos, neg = col_of[j]
        x.append(colval[pos] - (colval[neg] if neg >= 0 else ZERO))

    if outcome == "unbounded":
        rc = tab._ray_col
        dcol = [ZERO] * ncols
        dcol[rc] = ONE
        for i, b in enumerate(tab.basis):
            dcol[b] = -tab.rows[i][rc]
        ray = []
        for j in range(num_vars):
            pos, neg = col_of[j]
            ray.append(dcol[pos] - (dcol[neg] if neg >= 0 else ZERO))
        return SimplexResult(LPStatus.UNBOUNDED, x=x, ray=ray)

    if verify:
        _check_solution(num_vars, nonneg, rows, objective, x, value)
    return SimplexResult(LPStatus.OPTIMAL, x=x, value=value)


def _check_solution(num_vars, nonneg, rows, objective, x, value) -> None:
    for j in range(num_vars):
        if nonneg[j] and x[j] < 0:
            raise AssertionError(f"nonneg variable {j} got {x[j]}")
    for coeffs, rel, b in rows:
        lhs = sum((c * x[j] for j, c in coeffs.items()), ZERO)
        ok = lhs <= b if rel is RowRel.LE else lhs >= b if rel is RowRel.GE else lhs == b
        if not ok:
            raise AssertionError(f"row violated exactly: {lhs} {rel.value} {b}")
    obj = sum((c * x[j] for j, c in objective.items()), ZERO)
    if obj != value:
        raise AssertionError(f"objective mismatch: {obj} != {value}")
