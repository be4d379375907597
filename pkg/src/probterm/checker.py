"""Independent certificate verification.

Re-derives, transition by transition, the side conditions that make a
(program, invariant, certificate) triple a valid termination witness,
discharging every universally quantified inequality through the exact
entailment oracle. No code is shared with synthesis beyond the domain
types, the pre-expectation algebra and the entailment backend, so a bug
in the synthesis LP cannot vouch for itself.

Checked per transition tau at level j >= 1, on every satisfiable
disjunct of invariant /\ guard:

  decrease           expected value of component j after tau <= value - 1
  unaffected         components j' < j do not increase in expectation
  nonneg             components j' <= j are nonnegative at the source
  expected-nonneg    minimal one-step expectation of components j' <= j is
                     nonnegative; for probabilistic branches restricted to
                     successor states whose enabled transitions all have
                     level < j' (three-case split on the branch targets)
  sampling-coeff-zero  (general mode) components left of j keep a zero
                     coefficient on the variable written by an
                     unbounded-support sampling transition, at its target
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .farkas import entails
from .linear import LinConstraint, LinExpr, Polyhedron, Predicate, negate_guards_to_dnf
from .model import (Certificate, CertificateMode, Invariant, PCFG, ProbBranch,
                    Transition, check_bsp, check_linpp_star)
from .preexp import max_pre, min_pre, pre_pb_restricted


class StructuralMismatch(Exception):
    """Certificate does not structurally fit the program."""


class Stuck(Exception):
    """A non-terminal state with no enabled transition has no level."""


@dataclass
class ConditionReport:
    transition: str
    condition: str
    component: int
    status: str                       # "ok" | "violated"
    counterexample: Optional[Dict[str, str]] = None

    def as_dict(self) -> dict:
        out = {"transition": self.transition, "condition": self.condition,
               "component": self.component, "status": self.status}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


@dataclass
class CheckReport:
    accepted: bool
    mode: str
    conditions: List[ConditionReport]
    meaning: str

    @property
    def violations(self) -> List[ConditionReport]:
        return [c for c in self.conditions if c.status == "violated"]

    def as_dict(self) -> dict:
        return {"verdict": "accepted" if self.accepted else "rejected",
                "mode": self.mode,
                "meaning": self.meaning,
                "conditions": [c.as_dict() for c in self.conditions]}


_MEANING = {
    CertificateMode.BSP_COMPLETE:
        "all side conditions verified; the map (shift already applied) is a "
        "linear lexicographic ranking certificate, so the program terminates "
        "with probability 1 under every scheduler",
    CertificateMode.GENERAL_SOUND:
        "all side conditions verified; they imply the existence of a "
        "piecewise-linear ranking certificate and hence termination with "
        "probability 1. The piecewise map itself is not constructed: its "
        "cutoff constant depends on distribution tail mass that the program "
        "text does not determine, so this step is accepted from theory",
}


def _structural_check(p: PCFG, c: Certificate) -> None:
    missing = [loc for loc in p.locations if loc not in c.lem.components]
    if missing:
        raise StructuralMismatch(f"certificate has no components at {missing}")
    nvars = len(p.variables)
    for loc, vec in c.lem.components.items():
        if loc not in p.locations:
            raise StructuralMismatch(f"certificate mentions unknown location {loc!r}")
        for e in vec:
            bad = [i for i in e.coeffs if not 0 <= i < nvars]
            if bad:
                raise StructuralMismatch(f"component at {loc} uses variable index {bad[0]}")
    tids = {t.id for t in p.transitions}
    for tid in c.levels:
        if tid not in tids:
            raise StructuralMismatch(f"level map mentions unknown transition {tid!r}")
    for t in p.transitions:
        lvl = c.levels.get(t.id)
        if lvl is None:
            raise StructuralMismatch(f"transition {t.id} has no level")
        if not 0 <= lvl <= c.dimension:
            raise StructuralMismatch(f"level {lvl} of {t.id} outside 0..{c.dimension}")
        is_terminal_loop = (t.source == p.terminal_location
                            and t.destinations() == [t.source])
        if is_terminal_loop != (lvl == 0):
            raise StructuralMismatch(
                f"level 0 is reserved for terminal self-loops (transition {t.id})")


def _component_map(c: Certificate, j: int) -> Dict[str, LinExpr]:
    return {loc: vec[j - 1] for loc, vec in c.lem.components.items()}


def _feasible_antecedents(inv: Polyhedron, guard: Predicate) -> List[Polyhedron]:
    return [inv.conjoin(d) for d in guard.disjuncts]


def check_certificate(p: PCFG, inv: Invariant, c: Certificate) -> CheckReport:
    """Full verification; raises StructuralMismatch for shape errors and
    otherwise reports every checked condition with an exact counterexample
    point for each violation."""
    _structural_check(p, c)
    conditions: List[ConditionReport] = []

    def names(witness: Optional[Dict[int, Fraction]]) -> Optional[Dict[str, str]]:
        if witness is None:
            return None
        return {p.variables[i]: str(v) for i, v in witness.items()
                if 0 <= i < len(p.variables)}

    def record(tid: str, cond: str, comp: int, ok: bool, witness=None) -> None:
        conditions.append(ConditionReport(tid, cond, comp,
                                          "ok" if ok else "violated",
                                          None if ok else names(witness)))

    def entailed(ante: Polyhedron, nonneg_expr: LinExpr):
        """nonneg_expr >= 0 on ante?"""
        return entails(ante, LinConstraint.le(-nonneg_expr))

    if c.mode is CertificateMode.BSP_COMPLETE:
        bounded, _ = check_bsp(p)
        record("*", "program-shape", 0, bounded)
    else:
        record("*", "program-shape", 0, check_linpp_star(p))

    # membership predicate of "every enabled transition has level < j"
    ranked_pred_cache: Dict[Tuple[str, int], Predicate] = {}

    def below_level_pred(loc: str, j: int) -> Predicate:
        key = (loc, j)
        if key not in ranked_pred_cache:
            guards = [t.guard() for t in p.outgoing(loc) if c.levels[t.id] >= j]
            ranked_pred_cache[key] = negate_guards_to_dnf(guards)
        return ranked_pred_cache[key]

    for t in p.non_terminal_transitions():
        j = c.levels[t.id]
        src_inv = inv.at(t.source)
        antecedents = _feasible_antecedents(src_inv, t.guard())
        eta_j = _component_map(c, j)
        here_j = eta_j[t.source]
        pre_j = max_pre(eta_j, t)
        for ante in antecedents:
            ok, w = entailed(ante, here_j - pre_j - LinExpr.const(1))
            record(t.id, "decrease", j, ok, w)
            for jp in range(1, j):
                eta = _component_map(c, jp)
                ok, w = entailed(ante, eta[t.source] - max_pre(eta, t))
                record(t.id, "unaffected", jp, ok, w)
            for jp in range(1, j + 1):
                eta = _component_map(c, jp)
                ok, w = entailed(ante, eta[t.source])
                record(t.id, "nonneg", jp, ok, w)
            if not t.is_pb:
                for jp in range(1, j + 1):
                    eta = _component_map(c, jp)
                    ok, w = entailed(ante, min_pre(eta, t))
                    record(t.id, "expected-nonneg", jp, ok, w)
        if t.is_pb:
            k = t.kind
            for jp in range(1, j + 1):
                eta = _component_map(c, jp)
                in_set = {k.dest1: below_level_pred(k.dest1, jp),
                          k.dest2: below_level_pred(k.dest2, jp)}
                for ctx, expr in pre_pb_restricted(eta, t, in_set):
                    for ante in antecedents:
                        for disj in ctx.disjuncts:
                            ok, w = entailed(ante.conjoin(disj), expr)
                            record(t.id, "expected-nonneg", jp, ok, w)
        if c.mode is CertificateMode.GENERAL_SOUND and t.samples_unbounded():
            target = t.kind.dest
            var = t.kind.update.target
            for jp in range(1, j):
                coeff = c.lem.at(target, jp).coeff(var)
                ok = coeff == 0
                conditions.append(ConditionReport(
                    t.id, "sampling-coeff-zero", jp, "ok" if ok else "violated",
                    None if ok else {p.variables[var]: f"coefficient {coeff} at {target}"}))

    conditions.sort(key=lambda r: (r.transition, r.condition, r.component))
    accepted = all(r.status == "ok" for r in conditions)
    return CheckReport(accepted, c.mode.value, conditions,
                       _MEANING[c.mode] if accepted else "certificate rejected")


def state_level(p: PCFG, c: Certificate, location: str,
                values: Sequence[Fraction]) -> int:
    """Largest level among transitions enabled at the state; 0 at the
    terminal location. Raises Stuck when nothing is enabled elsewhere."""
    if location == p.terminal_location:
        return 0
    enabled = [t for t in p.outgoing(location) if t.guard().satisfied(values)]
    if not enabled:
        raise Stuck(f"no transition enabled at {location} with {list(values)}")
    return max(c.levels[t.id] for t in enabled)
