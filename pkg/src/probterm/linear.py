"""Linear expressions, constraints, polyhedra and DNF predicates.

These are the atoms everything else is assembled from: ranking-map
components, guards, invariants and update right-hand sides are all linear
expressions with exact rational coefficients over the program variables
(identified by index). Constraints are normalized to ``lhs rel 0``.
"""

from __future__ import annotations

import enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence

from .rationals import rat, RationalLike

ZERO = Fraction(0)
ONE = Fraction(1)


class EncodingBlowup(Exception):
    """DNF expansion exceeded the configured disjunct cap."""


class LinExpr:
    """Affine expression ``constant + sum(coeffs[i] * x_i)``.

    Zero coefficients are never stored, so structural equality coincides
    with mathematical equality.
    """

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Mapping[int, RationalLike] | None = None,
                 constant: RationalLike = 0):
        cs: Dict[int, Fraction] = {}
        if coeffs:
            for i, c in coeffs.items():
                c = rat(c)
                if c != 0:
                    cs[int(i)] = c
        self.coeffs = cs
        self.constant = rat(constant)

    @staticmethod
    def const(value: RationalLike) -> "LinExpr":
        return LinExpr({}, value)

    @staticmethod
    def var(index: int, coeff: RationalLike = 1) -> "LinExpr":
        return LinExpr({index: coeff})

    def coeff(self, index: int) -> Fraction:
        return self.coeffs.get(index, ZERO)

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "LinExpr") -> "LinExpr":
        cs = dict(self.coeffs)
        for i, c in other.coeffs.items():
            cs[i] = cs.get(i, ZERO) + c
        return LinExpr(cs, self.constant + other.constant)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + other.scale(-1)

    def __neg__(self) -> "LinExpr":
        return self.scale(-1)

    def scale(self, factor: RationalLike) -> "LinExpr":
        f = rat(factor)
        return LinExpr({i: c * f for i, c in self.coeffs.items()},
                       self.constant * f)

    def shift(self, delta: RationalLike) -> "LinExpr":
        return LinExpr(self.coeffs, self.constant + rat(delta))

    def substitute(self, index: int, replacement: "LinExpr") -> "LinExpr":
        """Replace variable `index` by `replacement`."""
        c = self.coeffs.get(index)
        if c is None:
            return self
        rest = {i: v for i, v in self.coeffs.items() if i != index}
        return LinExpr(rest, self.constant) + replacement.scale(c)

    def rename(self, index: int, new_index: int) -> "LinExpr":
        return self.substitute(index, LinExpr.var(new_index))

    def evaluate(self, values: Sequence[Fraction] | Mapping[int, Fraction]) -> Fraction:
        total = self.constant
        for i, c in self.coeffs.items():
            total += c * values[i]
        return total

    def max_abs_coeff(self) -> Fraction:
        """Largest |coefficient|, constant term excluded; 0 if none."""
        return max((abs(c) for c in self.coeffs.values()), default=ZERO)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LinExpr) and self.coeffs == other.coeffs
                and self.constant == other.constant)

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.constant))

    def pretty(self, names: Sequence[str] | None = None) -> str:
        parts = []
        for i in sorted(self.coeffs):
            c = self.coeffs[i]
            name = names[i] if names else f"x{i}"
            if c == 1:
                parts.append(name)
            elif c == -1:
                parts.append(f"-{name}")
            else:
                parts.append(f"{c}*{name}")
        if self.constant != 0 or not parts:
            parts.append(str(self.constant))
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
        return out

    def __repr__(self):
        return f"LinExpr({self.pretty()})"


class Rel(enum.Enum):
    LE = "<="
    LT = "<"
    EQ = "=="


class LinConstraint:
    """Normalized atomic constraint ``lhs rel 0``."""

    __slots__ = ("lhs", "rel")

    def __init__(self, lhs: LinExpr, rel: Rel):
        self.lhs = lhs
        self.rel = rel

    @staticmethod
    def le(lhs: LinExpr) -> "LinConstraint":
        return LinConstraint(lhs, Rel.LE)

    @staticmethod
    def lt(lhs: LinExpr) -> "LinConstraint":
        return LinConstraint(lhs, Rel.LT)

    @staticmethod
    def eq(lhs: LinExpr) -> "LinConstraint":
        return LinConstraint(lhs, Rel.EQ)

    def satisfied(self, values) -> bool:
        v = self.lhs.evaluate(values)
        if self.rel is Rel.LE:
            return v <= 0
        if self.rel is Rel.LT:
            return v < 0
        return v == 0

    def negate(self) -> List["LinConstraint"]:
        """Negation as a disjunction (list) of atomic constraints.

        not(e <= 0) is (-e < 0); not(e < 0) is (-e <= 0); equalities are
        split into two inequalities first, giving a two-way disjunction.
        """
        if self.rel is Rel.LE:
            return [LinConstraint(-self.lhs, Rel.LT)]
        if self.rel is Rel.LT:
            return [LinConstraint(-self.lhs, Rel.LE)]
        return [LinConstraint(-self.lhs, Rel.LT), LinConstraint(self.lhs, Rel.LT)]

    def split_eq(self) -> List["LinConstraint"]:
        if self.rel is Rel.EQ:
            return [LinConstraint(self.lhs, Rel.LE), LinConstraint(-self.lhs, Rel.LE)]
        return [self]

    def __eq__(self, other):
        return (isinstance(other, LinConstraint) and self.lhs == other.lhs
                and self.rel is other.rel)

    def __hash__(self):
        return hash((self.lhs, self.rel))

    def pretty(self, names=None) -> str:
        return f"{self.lhs.pretty(names)} {self.rel.value} 0"

    def __repr__(self):
        return f"LinConstraint({self.pretty()})"


class Polyhedron:
    """Conjunction of linear constraints; the empty conjunction is `true`."""

    __slots__ = ("constraints",)

    def __init__(self, constraints: Iterable[LinConstraint] = ()):
        self.constraints = list(constraints)

    @staticmethod
    def true() -> "Polyhedron":
        return Polyhedron()

    def conjoin(self, other: "Polyhedron") -> "Polyhedron":
        return Polyhedron(self.constraints + other.constraints)

    def satisfied(self, values) -> bool:
        return all(c.satisfied(values) for c in self.constraints)

    def has_strict(self) -> bool:
        return any(c.rel is Rel.LT for c in self.constraints)

    def relax_strict(self) -> "Polyhedron":
        return Polyhedron(LinConstraint(c.lhs, Rel.LE) if c.rel is Rel.LT else c
                          for c in self.constraints)

    def variables(self) -> set:
        out = set()
        for c in self.constraints:
            out |= set(c.lhs.coeffs)
        return out

    def __eq__(self, other):
        return isinstance(other, Polyhedron) and self.constraints == other.constraints

    def pretty(self, names=None) -> str:
        if not self.constraints:
            return "true"
        return " and ".join(c.pretty(names) for c in self.constraints)

    def __repr__(self):
        return f"Polyhedron({self.pretty()})"


class Predicate:
    """Disjunctive normal form: satisfaction set is the union of disjuncts.

    An empty disjunct list denotes `false` (it arises from negating a
    tautology and keeps the DNF algebra closed).
    """

    __slots__ = ("disjuncts",)

    def __init__(self, disjuncts: Iterable[Polyhedron] = ()):
        self.disjuncts = list(disjuncts)

    @staticmethod
    def true() -> "Predicate":
        return Predicate([Polyhedron.true()])

    @staticmethod
    def false() -> "Predicate":
        return Predicate([])

    @staticmethod
    def of_constraints(constraints: Iterable[LinConstraint]) -> "Predicate":
        return Predicate([Polyhedron(constraints)])

    def is_false(self) -> bool:
        return not self.disjuncts

    def is_true(self) -> bool:
        return any(not d.constraints for d in self.disjuncts)

    def satisfied(self, values) -> bool:
        return any(d.satisfied(values) for d in self.disjuncts)

    def disjoin(self, other: "Predicate") -> "Predicate":
        return Predicate(self.disjuncts + other.disjuncts)

    def conjoin(self, other: "Predicate", cap: int = 4096) -> "Predicate":
        out = []
        for a in self.disjuncts:
            for b in other.disjuncts:
                out.append(a.conjoin(b))
                if len(out) > cap:
                    raise EncodingBlowup(f"DNF conjunction exceeds {cap} disjuncts")
        return Predicate(out)

    def variables(self) -> set:
        out = set()
        for d in self.disjuncts:
            out |= d.variables()
        return out

    def __eq__(self, other):
        return isinstance(other, Predicate) and self.disjuncts == other.disjuncts

    def pretty(self, names=None) -> str:
        if not self.disjuncts:
            return "false"
        if len(self.disjuncts) == 1:
            return self.disjuncts[0].pretty(names)
        return " or ".join(f"({d.pretty(names)})" for d in self.disjuncts)

    def __repr__(self):
        return f"Predicate({self.pretty()})"


DEFAULT_DNF_CAP = 4096


def negate_predicate(pred: Predicate, cap: int = DEFAULT_DNF_CAP) -> Predicate:
    """DNF of the complement of `pred`.

    The complement of a DNF is a conjunction of clause complements, each a
    disjunction of atom negations; distributing back to DNF can blow up,
    hence the cap.
    """
    result = Predicate.true()
    for poly in pred.disjuncts:
        atoms: List[LinConstraint] = []
        for c in poly.constraints:
            for split in c.split_eq():
                atoms.extend(split.negate())
        clause = Predicate([Polyhedron([a]) for a in atoms])
        result = result.conjoin(clause, cap=cap)
    return result


def negate_guards_to_dnf(guards: Sequence[Predicate], cap: int = DEFAULT_DNF_CAP) -> Predicate:
    """DNF of ``not (g1 or ... or gn)``; `true` for an empty guard list."""
    union = Predicate([])
    for g in guards:
        union = union.disjoin(g)
    if not guards:
        return Predicate.true()
    return negate_predicate(union, cap=cap)
