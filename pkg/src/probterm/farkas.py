"""Farkas-lemma encoding and polyhedral queries.

The duality step at the heart of template synthesis: a universally
quantified implication

    for all x:  A x <= b   implies   c(x) >= d

(with c, d affine in the template unknowns) holds, whenever the
antecedent is satisfiable, exactly when nonnegative multipliers lam exist
with  lam^T A = -c  and  lam^T b <= -d.  Strict inequalities follow the
standard protocol: if the antecedent is infeasible with stricts honored
the implication is vacuous and dropped, otherwise stricts are relaxed to
non-strict before encoding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .linear import LinConstraint, LinExpr, Polyhedron, Rel
from .rationals import rat, RationalLike
from . import simplex
from .simplex import LPStatus, RowRel

ZERO = Fraction(0)
ONE = Fraction(1)


class StrictNotRelaxed(Exception):
    """A strict inequality reached the Farkas encoder unrelaxed."""


class Affine:
    """Linear form over named LP unknowns plus a rational constant."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Dict[str, Fraction] | None = None,
                 const: RationalLike = 0):
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}
        self.const = rat(const)

    @staticmethod
    def of(name: str, coeff: RationalLike = 1) -> "Affine":
        return Affine({name: rat(coeff)})

    @staticmethod
    def constant(value: RationalLike) -> "Affine":
        return Affine({}, value)

    def __add__(self, other: "Affine") -> "Affine":
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, ZERO) + v
        return Affine(t, self.const + other.const)

    def __sub__(self, other: "Affine") -> "Affine":
        return self + other.scale(-1)

    def scale(self, f: RationalLike) -> "Affine":
        f = rat(f)
        return Affine({k: v * f for k, v in self.terms.items()}, self.const * f)

    def is_zero(self) -> bool:
        return not self.terms and self.const == 0

    def value(self, assignment: Dict[str, Fraction]) -> Fraction:
        return self.const + sum((v * assignment[k] for k, v in self.terms.items()), ZERO)

    def __repr__(self):
        return f"Affine({self.terms}, {self.const})"


@dataclass
class LPConstraint:
    form: Affine            # form rel 0
    rel: RowRel

    def pretty(self) -> str:
        inner = " + ".join(f"{v}*{k}" for k, v in sorted(self.form.terms.items()))
        return f"{inner or 0} + {self.form.const} {self.rel.value} 0"


@dataclass
class LPProblem:
    """An LP over named unknowns; objective is always maximized.

    Unknowns registered nonnegative keep a >= 0 bound (all Farkas
    multipliers do); the rest are free.
    """
    names: List[str] = field(default_factory=list)
    nonneg: List[bool] = field(default_factory=list)
    constraints: List[LPConstraint] = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    _index: Dict[str, int] = field(default_factory=dict)
    _fresh: itertools.count = field(default_factory=itertools.count)

    def add_var(self, name: str, nonneg: bool = False) -> str:
        if name in self._index:
            raise ValueError(f"unknown {name!r} already registered")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.nonneg.append(nonneg)
        return name

    def fresh_multiplier(self, tag: str = "lam") -> str:
        return self.add_var(f"{tag}.{next(self._fresh)}", nonneg=True)

    def add_constraint(self, form: Affine, rel: RowRel) -> None:
        for name in form.terms:
            if name not in self._index:
                raise KeyError(f"unregistered unknown {name!r}")
        self.constraints.append(LPConstraint(form, rel))

    def num_vars(self) -> int:
        return len(self.names)

    def num_constraints(self) -> int:
        return len(self.constraints)


@dataclass
class LPSolution:
    status: LPStatus
    assignment: Optional[Dict[str, Fraction]] = None
    value: Optional[Fraction] = None


def solve_lp(lp: LPProblem, pivot_cap: int = simplex.DEFAULT_PIVOT_CAP,
             verify: bool = True) -> LPSolution:
    """Exact optimum of the named LP; deterministic for identical input."""
    rows = []
    for c in lp.constraints:
        coeffs = {lp._index[k]: v for k, v in c.form.terms.items()}
        rows.append((coeffs, c.rel, -c.form.const))
    obj = {lp._index[k]: v for k, v in lp.objective.terms.items()}
    res = simplex.solve(lp.num_vars(), lp.nonneg, rows, obj,
                        pivot_cap=pivot_cap, verify=verify)
    if res.status is not LPStatus.OPTIMAL:
        return LPSolution(res.status)
    assignment = {name: res.x[i] for i, name in enumerate(lp.names)}
    return LPSolution(LPStatus.OPTIMAL, assignment, res.value + lp.objective.const)


# -- polyhedral queries ----------------------------------------------------


def _poly_rows(p: Polyhedron, extra_gap: Optional[int] = None):
    """Rows (coeffs, rel, rhs) for `p`; strict rows get `+ gap` when an
    extra gap-variable index is supplied (used to witness strictness)."""
    rows = []
    for c in p.constraints:
        coeffs = dict(c.lhs.coeffs)
        rhs = -c.lhs.constant
        if c.rel is Rel.EQ:
            rows.append((coeffs, RowRel.EQ, rhs))
        elif c.rel is Rel.LE:
            rows.append((coeffs, RowRel.LE, rhs))
        else:
            if extra_gap is not None:
                coeffs = dict(coeffs)
                coeffs[extra_gap] = coeffs.get(extra_gap, ZERO) + ONE
            rows.append((coeffs, RowRel.LE, rhs))
    return rows


def check_feasible(p: Polyhedron) -> Tuple[bool, Optional[Dict[int, Fraction]]]:
    """Rational satisfiability of `p` with strict inequalities honored.

    Maximizes a shared slack under every strict row; the system has a
    rational point iff the non-strict relaxation is feasible and the
    optimal slack is positive. Returns a witness point when feasible.
    """
    nvars = max((i for c in p.constraints for i in c.lhs.coeffs), default=-1) + 1
    has_strict = p.has_strict()
    if not has_strict:
        rows = _poly_rows(p)
        res = simplex.solve(nvars, [False] * nvars, rows, {})
        if res.status is LPStatus.INFEASIBLE:
            return False, None
        return True, {i: res.x[i] for i in range(nvars)}
    gap = nvars
    rows = _poly_rows(p, extra_gap=gap)
    rows.append(({gap: ONE}, RowRel.LE, ONE))
    nonneg = [False] * nvars + [True]
    res = simplex.solve(nvars + 1, nonneg, rows, {gap: ONE})
    if res.status is LPStatus.INFEASIBLE or res.value == 0:
        return False, None
    return True, {i: res.x[i] for i in range(nvars)}


def entails(p: Polyhedron, c: LinConstraint) -> Tuple[bool, Optional[Dict[int, Fraction]]]:
    """Does every rational point of `p` satisfy `c`?

    Decided by maximizing c's left-hand side over `p` (equalities as two
    inequalities). When the answer is no, a counterexample point inside
    `p` (strict constraints included) is returned.
    """
    if c.rel is Rel.EQ:
        ok1, w1 = entails(p, LinConstraint.le(c.lhs))
        if not ok1:
            return False, w1
        return entails(p, LinConstraint.le(-c.lhs))
    if c.rel is Rel.LT:
        raise ValueError("entailment of strict consequents is not supported")

    feasible, _ = check_feasible(p)
    if not feasible:
        return True, None
    # sup of a linear form over the (nonempty) set equals its max over the
    # non-strict relaxation
    relaxed = p.relax_strict()
    nvars = max((i for q in (relaxed.constraints + [c]) for i in q.lhs.coeffs),
                default=-1) + 1
    rows = _poly_rows(relaxed)
    obj = dict(c.lhs.coeffs)
    res = simplex.solve(nvars, [False] * nvars, rows, obj)
    if res.status is LPStatus.OPTIMAL and res.value + c.lhs.constant <= 0:
        return True, None
    # violated: exhibit a point of p itself with lhs > 0
    witness_sys = Polyhedron(p.constraints + [LinConstraint.lt(-c.lhs)])
    _, w = check_feasible(witness_sys)
    return False, w


# -- the implication encoder ------------------------------------------------


@dataclass
class FarkasImplication:
    """`antecedent` (concrete rationals, possibly over fresh universal
    variables) implies `consequent(x) >= 0`, with the consequent given as
    per-variable affine forms over the template unknowns."""
    antecedent: Polyhedron
    consequent_coeffs: Dict[int, Affine]
    consequent_const: Affine

    @staticmethod
    def concrete(antecedent: Polyhedron, e: LinExpr) -> "FarkasImplication":
        """Implication with a fully concrete consequent e(x) >= 0."""
        return FarkasImplication(
            antecedent,
            {i: Affine.constant(v) for i, v in e.coeffs.items()},
            Affine.constant(e.constant))


def encode_implication(f: FarkasImplication, lp: LPProblem,
                       tag: str = "lam") -> List[str]:
    """Emit the multiplier system for `f` into `lp`; returns the fresh
    multiplier names.

    Precondition: the antecedent passed `check_feasible` and contains no
    strict rows (callers relax after the feasibility screen).
    """
    if f.antecedent.has_strict():
        raise StrictNotRelaxed(f.antecedent.pretty())

    # antecedent rows as A x <= b (equalities split)
    a_rows: List[Tuple[Dict[int, Fraction], Fraction]] = []
    for cons in f.antecedent.constraints:
        for half in cons.split_eq():
            a_rows.append((dict(half.lhs.coeffs), -half.lhs.constant))

    lams = [lp.fresh_multiplier(tag) for _ in a_rows]

    var_ids = set(f.consequent_coeffs)
    for coeffs, _ in a_rows:
        var_ids |= set(coeffs)

    # lam^T A = -c, per program variable
    for i in sorted(var_ids):
        form = f.consequent_coeffs.get(i, Affine())
        for lam, (coeffs, _) in zip(lams, a_rows):
            a = coeffs.get(i, ZERO)
            if a != 0:
                form = form + Affine.of(lam, a)
        lp.add_constraint(form, RowRel.EQ)

    # lam^T b <= -d, where the consequent reads c^T x - (-const) >= 0;
    # emitted as  const - lam^T b >= 0
    form = f.consequent_const
    for lam, (_, b) in zip(lams, a_rows):
        if b != 0:
            form = form - Affine.of(lam, b)
    lp.add_constraint(form, RowRel.GE)
    return lams


def dump_lp(lp: LPProblem) -> str:
    """Text dump in the common solver-exchange (CPLEX LP) format, for
    cross-checking against external solvers."""

    def term_str(form: Affine) -> str:
        parts = []
        for name, v in form.terms.items():
            safe = name.replace("[", "(").replace("]", ")").replace(".", "_")
            parts.append(f"{'+' if v >= 0 else '-'} {abs(v)} {safe}")
        return " ".join(parts) if parts else "0 dummy"

    lines = ["Maximize", f" obj: {term_str(lp.objective)}", "Subject To"]
    for k, c in enumerate(lp.constraints):
        op = {RowRel.LE: "<=", RowRel.GE: ">=", RowRel.EQ: "="}[c.rel]
        lines.append(f" c{k}: {term_str(c.form)} {op} {-c.form.const}")
    lines.append("Bounds")
    for name, nn in zip(lp.names, lp.nonneg):
        safe = name.replace("[", "(").replace("]", ")").replace(".", "_")
        lines.append(f" {safe} >= 0" if nn else f" {safe} free")
    lines.append("End")
    return "\n".join(lines) + "\n"
