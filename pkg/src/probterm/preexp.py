"""One-step pre-expectation of ranking-map components.

For a component eta (one linear expression per location) and a transition
tau, the maximal/minimal pre-expectation is the expected value of eta
right after executing tau, with demonic interval assignments resolved to
the worst/best endpoint. All functions here work on concrete rational
coefficients (the checker's side); synthesis re-derives the same algebra
over template unknowns and handles intervals with fresh universally
quantified variables instead of endpoints.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Tuple

from .linear import LinExpr, Polyhedron, Predicate, negate_predicate
from .model import ExprUpdate, GuardedStep, NondetUpdate, NoUpdate, ProbBranch, Transition

ComponentMap = Dict[str, LinExpr]  # location -> linear expression


class UnresolvedEndpoint(Exception):
    """Endpoint resolution was asked of a symbolic-coefficient component."""


def _expr_pre(eta_dest: LinExpr, update) -> LinExpr:
    if isinstance(update, NoUpdate):
        return eta_dest
    assert isinstance(update, ExprUpdate)
    rhs = update.base
    if update.sample is not None:
        coeff, dist = update.sample
        rhs = rhs.shift(coeff * dist.mean)
    return eta_dest.substitute(update.target, rhs)


def _nondet_pre(eta_dest: LinExpr, update: NondetUpdate, maximize: bool) -> LinExpr:
    c = eta_dest.coeff(update.target)
    if maximize:
        endpoint = update.hi if c >= 0 else update.lo
    else:
        endpoint = update.lo if c >= 0 else update.hi
    return eta_dest.substitute(update.target, LinExpr.const(endpoint))


def max_pre(eta: ComponentMap, tau: Transition) -> LinExpr:
    """Maximal pre-expectation of `eta` across `tau`, as a function of the
    pre-state variables.

    Probabilistic branches average the destination components; sampling
    updates substitute the distribution's mean; demonic intervals resolve
    to the endpoint maximizing the component.
    """
    if isinstance(tau.kind, ProbBranch):
        k = tau.kind
        return eta[k.dest1].scale(k.p1) + eta[k.dest2].scale(k.p2)
    step = tau.kind
    dest = eta[step.dest]
    if isinstance(step.update, NondetUpdate):
        return _nondet_pre(dest, step.update, maximize=True)
    return _expr_pre(dest, step.update)


def min_pre(eta: ComponentMap, tau: Transition) -> LinExpr:
    """As `max_pre` but demonic intervals resolve to the minimizing
    endpoint; identical to `max_pre` for all other transition shapes."""
    if isinstance(tau.kind, ProbBranch):
        return max_pre(eta, tau)
    step = tau.kind
    dest = eta[step.dest]
    if isinstance(step.update, NondetUpdate):
        return _nondet_pre(dest, step.update, maximize=False)
    return _expr_pre(dest, step.update)


def pre_pb_restricted(eta: ComponentMap, tau: Transition,
                      in_set: Dict[str, Predicate]) -> List[Tuple[Predicate, LinExpr]]:
    """Case split of the pre-expectation of a probabilistic branch
    restricted to successor states inside `in_set`.

    `in_set` gives, per location, the membership predicate of the
    restriction set. With G1/G2 the membership predicates at the two
    branch targets, the restricted pre-expectation equals

        G1 and G2      ->  p1*eta(dest1) + p2*eta(dest2)
        G1 and not G2  ->  p1*eta(dest1)
        not G1 and G2  ->  p2*eta(dest2)

    and 0 on the remaining case. Cases whose context is syntactically
    `false` are omitted (restriction over an empty successor set).
    """
    if not isinstance(tau.kind, ProbBranch):
        raise ValueError(f"transition {tau.id} is not a probabilistic branch")
    k = tau.kind
    g1 = in_set.get(k.dest1, Predicate.true())
    g2 = in_set.get(k.dest2, Predicate.true())
    not_g1 = negate_predicate(g1)
    not_g2 = negate_predicate(g2)
    both = eta[k.dest1].scale(k.p1) + eta[k.dest2].scale(k.p2)
    cases = [
        (g1.conjoin(g2), both),
        (g1.conjoin(not_g2), eta[k.dest1].scale(k.p1)),
        (not_g1.conjoin(g2), eta[k.dest2].scale(k.p2)),
    ]
    return [(ctx, e) for ctx, e in cases if not ctx.is_false()]
