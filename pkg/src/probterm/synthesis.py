"""Iterative synthesis of lexicographic ranking certificates.

Each iteration fixes one fresh linear template per location and solves a
single LP asking the template to (1) be nonnegative wherever an unranked
transition is enabled, (2) never increase in expectation across any
unranked transition, (3) have nonnegative one-step expectation across
unranked non-branching transitions, (4) have nonnegative expectation
across unranked probabilistic branches when restricted to already-ranked
successor states, and (5) decrease by eps_tau across as many unranked
transitions as possible, maximizing the sum of the eps variables. All
universally quantified conditions become existential multiplier systems
via the Farkas encoder; demonic interval assignments are handled by a
fresh universally quantified variable bounded to the interval, which
simultaneously over-approximates the supremum in the decrease conditions
and under-approximates the infimum in the nonnegativity ones.

Transitions whose eps is positive at the optimum are 1-ranked after
scaling the template by 1/min(positive eps); by additivity of ranking
maps this prunes the unique maximal rankable set, which is what makes
the bounded-support procedure a decision procedure of minimal dimension.

Programs that sample from unbounded-support distributions go through the
variant procedure: templates first keep a zero coefficient on every
variable written by an unbounded-sampling transition at that transition's
target location; when no progress is possible, the procedure tries to
unlock one such coefficient at a time, forcing the unlocked transition
(and every other unbounded-sampling transition into the same target) to
be 1-ranked by the new component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Set, Tuple

from .farkas import (Affine, FarkasImplication, LPProblem, check_feasible,
                     encode_implication, solve_lp)
from .linear import (EncodingBlowup, LinExpr, Polyhedron, Predicate,
                     negate_guards_to_dnf)
from .model import (Certificate, CertificateMode, ExprUpdate, GuardedStep,
                    Invariant, LevelMap, LinExprMap, NoUpdate, NondetUpdate,
                    PCFG, ProbBranch, Transition, check_bsp, check_linpp_star)
from .simplex import LPStatus

ZERO = Fraction(0)
ONE = Fraction(1)


class NotLinPPStar(Exception):
    """A probabilistic branch and a sampling transition share a target."""


class MissingBoundedSupport(Exception):
    """The bounded-support procedure was invoked on an unbounded program."""


@dataclass(frozen=True)
class TemplateRestriction:
    """Extra structure imposed on one iteration's LP."""
    zero_coeffs: frozenset = frozenset()   # {(location, var index)} pinned to 0
    forced_rank: frozenset = frozenset()   # {transition id} with eps == 1
    forced_zero_eps: frozenset = frozenset()  # {transition id} with eps == 0

    @staticmethod
    def none() -> "TemplateRestriction":
        return TemplateRestriction()


class _Template:
    """Linear expression over program variables whose coefficients are
    affine forms in the LP unknowns."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Dict[int, Affine], const: Affine):
        self.coeffs = coeffs
        self.const = const

    def substitute(self, index: int, e: LinExpr) -> "_Template":
        c = self.coeffs.get(index)
        if c is None or c.is_zero():
            return self
        coeffs = {i: a for i, a in self.coeffs.items() if i != index}
        for j, w in e.coeffs.items():
            coeffs[j] = coeffs.get(j, Affine()) + c.scale(w)
        return _Template(coeffs, self.const + c.scale(e.constant))

    def shift(self, delta: Fraction) -> "_Template":
        return _Template(dict(self.coeffs), self.const + Affine.constant(delta))

    def scale(self, f: Fraction) -> "_Template":
        return _Template({i: a.scale(f) for i, a in self.coeffs.items()},
                         self.const.scale(f))

    def __add__(self, other: "_Template") -> "_Template":
        coeffs = dict(self.coeffs)
        for i, a in other.coeffs.items():
            coeffs[i] = coeffs.get(i, Affine()) + a
        return _Template(coeffs, self.const + other.const)

    def __sub__(self, other: "_Template") -> "_Template":
        return self + other.scale(-1)

    def plus_unknown(self, name: str, coeff: Fraction) -> "_Template":
        return _Template(dict(self.coeffs), self.const + Affine.of(name, coeff))

    def concretize(self, assignment: Dict[str, Fraction]) -> LinExpr:
        return LinExpr({i: a.value(assignment) for i, a in self.coeffs.items()},
                       self.const.value(assignment))


@dataclass
class SynthesisLP:
    """One iteration's LP plus the bookkeeping to read a component back."""
    lp: LPProblem
    templates: Dict[str, _Template]
    eps_names: Dict[str, str]
    dropped_implications: int = 0
    emitted_implications: int = 0

    def component_at(self, assignment: Dict[str, Fraction]) -> Dict[str, LinExpr]:
        return {loc: t.concretize(assignment) for loc, t in self.templates.items()}


def _expand_antecedents(inv: Polyhedron, guard: Predicate,
                        context: Predicate | None = None) -> List[Polyhedron]:
    pred = guard if context is None else guard.conjoin(context)
    return [inv.conjoin(d) for d in pred.disjuncts]


def _template_pre(templates: Dict[str, _Template], tau: Transition,
                  universal_index: int) -> Tuple[_Template, List[Polyhedron]]:
    """Template pre-expectation across `tau` and the extra antecedent rows
    (interval bounds for the universal variable, when demonic)."""
    if isinstance(tau.kind, ProbBranch):
        k = tau.kind
        return (templates[k.dest1].scale(k.p1) + templates[k.dest2].scale(k.p2), [])
    step = tau.kind
    dest = templates[step.dest]
    u = step.update
    if isinstance(u, NoUpdate):
        return dest, []
    if isinstance(u, ExprUpdate):
        rhs = u.base
        if u.sample is not None:
            coeff, dist = u.sample
            rhs = rhs.shift(coeff * dist.mean)
        return dest.substitute(u.target, rhs), []
    # demonic interval: universally quantified fresh variable in [lo, hi]
    y = LinExpr.var(universal_index)
    from .linear import LinConstraint
    bounds = Polyhedron([LinConstraint.le(LinExpr.const(u.lo) - y),
                         LinConstraint.le(y - LinExpr.const(u.hi))])
    return dest.substitute(u.target, y), [bounds]


def build_lp(p: PCFG, inv: Invariant, unranked: List[str],
             restrict: TemplateRestriction = TemplateRestriction.none(),
             dnf_cap: int = 4096) -> SynthesisLP:
    """Assemble the LP for one iteration over the `unranked` transition
    ids. Antecedent disjuncts that fail the exact feasibility screen are
    dropped (their implications are vacuous); a transition all of whose
    antecedents drop has an unconstrained eps and is ranked for free.
    """
    if not unranked:
        raise ValueError("no unranked transitions left")
    lp = LPProblem()
    templates: Dict[str, _Template] = {}
    nvars = len(p.variables)
    for loc in p.locations:
        coeffs: Dict[int, Affine] = {}
        for i, vname in enumerate(p.variables):
            if (loc, i) in restrict.zero_coeffs:
                continue
            coeffs[i] = Affine.of(lp.add_var(f"c[{loc}][{vname}]"))
        const = Affine.of(lp.add_var(f"c[{loc}].const"))
        templates[loc] = _Template(coeffs, const)

    eps_names: Dict[str, str] = {}
    order = [t for t in p.transitions if t.id in set(unranked)]
    for t in order:
        eps_names[t.id] = lp.add_var(f"eps[{t.id}]", nonneg=True)

    from .simplex import RowRel
    out = SynthesisLP(lp, templates, eps_names)

    def emit(antecedent: Polyhedron, expr: _Template, tag: str) -> None:
        feasible, _ = check_feasible(antecedent)
        if not feasible:
            out.dropped_implications += 1
            return
        impl = FarkasImplication(antecedent.relax_strict(), expr.coeffs, expr.const)
        encode_implication(impl, lp, tag=tag)
        out.emitted_implications += 1

    # membership predicate of the already-ranked state set, per location:
    # no transition still unranked is enabled there
    ranked_states: Dict[str, Predicate] = {}
    unranked_set = set(unranked)

    def ranked_state_pred(loc: str) -> Predicate:
        if loc not in ranked_states:
            guards = [t.guard() for t in p.outgoing(loc) if t.id in unranked_set]
            ranked_states[loc] = negate_guards_to_dnf(guards, cap=dnf_cap)
        return ranked_states[loc]

    for t in order:
        src_inv = inv.at(t.source)
        pre, extra = _template_pre(templates, t, nvars)
        here = templates[t.source]
        eps = eps_names[t.id]
        for ante in _expand_antecedents(src_inv, t.guard()):
            # (1) nonnegative where enabled
            emit(ante, here, f"nn.{t.id}")
            ante_u = ante
            for b in extra:
                ante_u = ante_u.conjoin(b)
            # (2) never increasing in expectation
            emit(ante_u, here - pre, f"ua.{t.id}")
            # (3) nonnegative one-step expectation (not for branches)
            if not t.is_pb:
                emit(ante_u, pre, f"en.{t.id}")
            # (5) decrease by eps
            emit(ante_u, (here - pre).plus_unknown(eps, Fraction(-1)), f"rk.{t.id}")
        # (4) restricted expectation across unranked probabilistic branches
        if t.is_pb:
            k = t.kind
            g1 = ranked_state_pred(k.dest1)
            g2 = ranked_state_pred(k.dest2)
            from .linear import negate_predicate
            cases = [
                (g1.conjoin(g2, cap=dnf_cap),
                 templates[k.dest1].scale(k.p1) + templates[k.dest2].scale(k.p2)),
                (g1.conjoin(negate_predicate(g2, cap=dnf_cap), cap=dnf_cap),
                 templates[k.dest1].scale(k.p1)),
                (negate_predicate(g1, cap=dnf_cap).conjoin(g2, cap=dnf_cap),
                 templates[k.dest2].scale(k.p2)),
            ]
            for ctx, expr in cases:
                if ctx.is_false():
                    continue
                for ante in _expand_antecedents(src_inv, t.guard(), ctx):
                    emit(ante, expr, f"eb.{t.id}")

    objective = Affine()
    for t in order:
        name = eps_names[t.id]
        lp.add_constraint(Affine.of(name) - Affine.constant(1), RowRel.LE)
        if t.id in restrict.forced_rank:
            lp.add_constraint(Affine.of(name) - Affine.constant(1), RowRel.EQ)
        if t.id in restrict.forced_zero_eps:
            lp.add_constraint(Affine.of(name), RowRel.EQ)
        objective = objective + Affine.of(name)
    lp.objective = objective
    return out


# -- the iterative loop -------------------------------------------------------


@dataclass
class IterationRecord:
    index: int
    unranked_before: List[str]
    ranked: List[str]
    lp_unknowns: int
    lp_constraints: int
    objective: Optional[Fraction]
    tau0: Optional[str] = None
    warning: Optional[str] = None

    def as_dict(self) -> dict:
        return {"iteration": self.index,
                "unranked": len(self.unranked_before),
                "lp_unknowns": self.lp_unknowns,
                "lp_constraints": self.lp_constraints,
                "objective": None if self.objective is None else str(self.objective),
                "ranked": self.ranked,
                "tau0": self.tau0,
                "warning": self.warning}


@dataclass
class IterationState:
    unranked: List[str]
    components: List[Dict[str, LinExpr]] = field(default_factory=list)
    history: List[IterationRecord] = field(default_factory=list)


@dataclass
class SynthesisResult:
    certificate: Optional[Certificate]
    history: List[IterationRecord]
    failure: Optional[str] = None

    @property
    def found(self) -> bool:
        return self.certificate is not None


ProgressFn = Callable[[dict], None]


def _try_iteration(p: PCFG, inv: Invariant, state: IterationState,
                   restrict: TemplateRestriction, index: int,
                   tau0: Optional[str] = None) -> Optional[IterationRecord]:
    """Solve one iteration LP; on ranking progress, update `state` and
    return the record, else return None."""
    slp = build_lp(p, inv, state.unranked, restrict)
    sol = solve_lp(slp.lp)
    warning = None
    if sol.status is LPStatus.PIVOT_CAP:
        warning = "pivot cap reached; treating iteration as unranking"
    if sol.status is not LPStatus.OPTIMAL:
        return None if warning is None else IterationRecord(
            index, list(state.unranked), [], slp.lp.num_vars(),
            slp.lp.num_constraints(), None, tau0, warning)
    eps_values = {tid: sol.assignment[name] for tid, name in slp.eps_names.items()}
    ranked = [tid for tid in state.unranked if eps_values[tid] > 0]
    if not ranked:
        return None
    scale = ONE / min(eps_values[tid] for tid in ranked)
    component = {loc: e.scale(scale)
                 for loc, e in slp.component_at(sol.assignment).items()}
    state.components.append(component)
    state.unranked = [tid for tid in state.unranked if tid not in set(ranked)]
    record = IterationRecord(index, None, ranked, slp.lp.num_vars(),
                             slp.lp.num_constraints(), sol.value, tau0)
    return record


def extract_level_map(p: PCFG, history: List[IterationRecord]) -> LevelMap:
    """Transition level = index of the iteration that ranked it; terminal
    self-loops sit at level 0."""
    levels: LevelMap = {}
    for rec in history:
        for tid in rec.ranked:
            levels[tid] = rec.index
    for t in p.transitions:
        if t.source == p.terminal_location:
            levels[t.id] = 0
    return levels


def _assemble(p: PCFG, state: IterationState, mode: CertificateMode,
              history: List[IterationRecord], shift: Fraction) -> Certificate:
    dim = len(state.components)
    components = {loc: [comp[loc] for comp in state.components] for loc in p.locations}
    lem = LinExprMap(dim, components)
    if shift:
        lem = lem.shifted(shift)
    return Certificate(lem, extract_level_map(p, history), shift, mode)


def synthesize_bsp(p: PCFG, inv: Invariant,
                   progress: ProgressFn | None = None) -> SynthesisResult:
    """Decision procedure for programs whose distributions all have
    bounded support: returns a complete certificate or the definitive
    answer that none exists for this invariant.

    On success every component is raised by 2*N*max|coefficient| with N
    the common support bound, which turns the weak expectation conditions
    established by the LPs into the unrestricted ones the certificate
    promises.
    """
    bounded, support_bound = check_bsp(p)
    if not bounded:
        raise MissingBoundedSupport("program samples from an unbounded-support "
                                    "distribution; use the general procedure")
    state = IterationState([t.id for t in p.non_terminal_transitions()])
    index = 0
    while state.unranked:
        index += 1
        before = list(state.unranked)
        record = _try_iteration(p, inv, state, TemplateRestriction.none(), index)
        if record is None or not record.ranked:
            failure = "an iteration ranked no transition: no linear certificate " \
                      "of this shape exists for the given invariant"
            if record is not None:
                record.unranked_before = before
                state.history.append(record)
            return SynthesisResult(None, state.history, failure)
        record.unranked_before = before
        state.history.append(record)
        if progress:
            progress(record.as_dict())
    max_coeff = max((e.max_abs_coeff() for comp in state.components
                     for e in comp.values()), default=ZERO)
    shift = 2 * support_bound * max_coeff
    cert = _assemble(p, state, CertificateMode.BSP_COMPLETE, state.history, shift)
    return SynthesisResult(cert, state.history)


def synthesize_general(p: PCFG, inv: Invariant,
                       progress: ProgressFn | None = None) -> SynthesisResult:
    """Sound procedure for programs that may sample from unbounded-support
    distributions (requires that no probabilistic branch shares a target
    location with a sampling transition).

    A returned certificate witnesses the side conditions (including the
    zero-coefficient discipline for unbounded-sampling targets) from
    which termination with probability one follows; absence of a
    certificate means "unknown", not non-termination.
    """
    if not check_linpp_star(p):
        raise NotLinPPStar("a probabilistic branch and a sampling transition "
                           "share a target location")
    unbounded = [t.id for t in p.non_terminal_transitions() if t.samples_unbounded()]

    def pair(tid: str) -> Tuple[str, int]:
        t = p.transition(tid)
        return (t.kind.dest, t.kind.update.target)

    state = IterationState([t.id for t in p.non_terminal_transitions()])
    index = 0
    while state.unranked:
        index += 1
        before = list(state.unranked)
        unb_here = [tid for tid in unbounded if tid in state.unranked]
        zeros = frozenset(pair(tid) for tid in unb_here)
        record = _try_iteration(p, inv, state,
                                TemplateRestriction(zero_coeffs=zeros), index)
        if record is not None and record.ranked:
            record.unranked_before = before
            state.history.append(record)
            if progress:
                progress(record.as_dict())
            continue
        found = False
        for tau0 in unb_here:
            target, var = pair(tau0)
            cohort = frozenset(tid for tid in unb_here
                               if p.transition(tid).kind.dest == target)
            restrict = TemplateRestriction(
                zero_coeffs=zeros - {(target, var)},
                forced_rank=cohort)
            record = _try_iteration(p, inv, state, restrict, index, tau0=tau0)
            if record is not None and record.ranked:
                record.unranked_before = before
                state.history.append(record)
                if progress:
                    progress(record.as_dict())
                found = True
                break
        if not found:
            return SynthesisResult(None, state.history,
                                   "no component can rank further transitions "
                                   "under the zero-coefficient discipline")
    cert = _assemble(p, state, CertificateMode.GENERAL_SOUND, state.history, ZERO)
    return SynthesisResult(cert, state.history)
