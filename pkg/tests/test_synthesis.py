"""The iterative certificate search, on fixtures and adversarial cases."""

import json
from fractions import Fraction as F

import pytest

from probterm import (CertificateMode, Invariant, MissingBoundedSupport,
                      NotLinPPStar, TemplateRestriction, build_lp,
                      check_certificate, extract_level_map, solve_lp,
                      synthesize_bsp, synthesize_general)
from probterm.pcfg_io import certificate_to_json
from probterm.simplex import LPStatus

from conftest import load_fixture


def ranked_at_optimum(p, inv, unranked, restrict=TemplateRestriction()):
    slp = build_lp(p, inv, unranked, restrict)
    sol = solve_lp(slp.lp)
    assert sol.status is LPStatus.OPTIMAL
    return [tid for tid in unranked if sol.assignment[slp.eps_names[tid]] > 0], sol


def test_first_iteration_ranks_exactly_the_exit(fig1b):
    # with every transition unranked, templates must be nonnegative on
    # every guard, which pins them to constants; only the exit can drop
    p, inv = fig1b
    unranked = [t.id for t in p.non_terminal_transitions()]
    ranked, sol = ranked_at_optimum(p, inv, unranked)
    assert ranked == ["t0"]
    assert sol.value == 1


def test_guard_infeasible_transition_ranked_for_free():
    p, inv = load_fixture("countdown")
    doc_p = p
    # add an unreachable-guard transition: x >= 0 and x <= -1
    from probterm import (GuardedStep, LinConstraint, LinExpr, NoUpdate,
                          Polyhedron, Predicate, Transition)
    dead_guard = Predicate([Polyhedron([
        LinConstraint.le(LinExpr({0: F(-1)})),
        LinConstraint.le(LinExpr({0: F(1)}, F(1)))])])
    doc_p.transitions.append(
        Transition("tdead", "l0", GuardedStep("out", dead_guard, NoUpdate())))
    unranked = [t.id for t in doc_p.non_terminal_transitions()]
    ranked, _ = ranked_at_optimum(doc_p, inv, unranked)
    assert "tdead" in ranked


def test_forced_zero_eps_blocks_ranking(fig1b):
    p, inv = fig1b
    unranked = [t.id for t in p.non_terminal_transitions()]
    ranked, sol = ranked_at_optimum(
        p, inv, unranked, TemplateRestriction(forced_zero_eps=frozenset({"t0"})))
    assert ranked == [] and sol.value == 0


def test_build_lp_requires_work(fig1b):
    with pytest.raises(ValueError):
        build_lp(fig1b[0], fig1b[1], [])


# -- the bounded-support procedure ---------------------------------------------------


def test_fig1b_bsp_certificate(fig1b):
    p, inv = fig1b
    res = synthesize_bsp(p, inv)
    assert res.found
    cert = res.certificate
    assert cert.dimension <= 3
    assert cert.mode is CertificateMode.BSP_COMPLETE
    assert check_certificate(p, inv, cert).accepted
    # iterations strictly shrink the unranked set
    sizes = [len(r.unranked_before) for r in res.history]
    assert sizes == sorted(sizes, reverse=True) and len(set(sizes)) == len(sizes)
    assert extract_level_map(p, res.history) == cert.levels


def test_fig1b_bsp_shift_is_support_times_maxcoeff(fig1b):
    p, inv = fig1b
    res = synthesize_bsp(p, inv)
    cert = res.certificate
    # undo the shift and recompute: shift = 2 * N * max |coefficient|
    unshifted = cert.lem.shifted(-cert.shift)
    assert cert.shift == 2 * F(7) * unshifted.max_abs_coeff()


def test_determinism_bit_identical(fig1b):
    p, inv = fig1b
    a = synthesize_bsp(p, inv)
    b = synthesize_bsp(p, inv)
    ja = json.dumps(certificate_to_json(a.certificate, p), sort_keys=True)
    jb = json.dumps(certificate_to_json(b.certificate, p), sort_keys=True)
    assert ja == jb


def test_bsp_rejects_unbounded_program(fig1a):
    p, inv = fig1a
    with pytest.raises(MissingBoundedSupport):
        synthesize_bsp(p, inv)


def test_divergent_loop_has_no_certificate():
    p, inv = load_fixture("diverge_const")
    res = synthesize_bsp(p, inv)
    assert not res.found and "no" in res.failure


def test_divergent_increment_has_no_certificate():
    p, inv = load_fixture("diverge_inc")
    res = synthesize_bsp(p, inv)
    assert not res.found


def test_straightline_dimension_one():
    p, inv = load_fixture("straightline")
    res = synthesize_bsp(p, inv)
    assert res.found and res.certificate.dimension == 1
    assert check_certificate(p, inv, res.certificate).accepted
    levels = set(res.certificate.levels.values())
    assert levels == {1}


def test_countdown_component_is_x_plus_one():
    p, inv = load_fixture("countdown")
    res = synthesize_bsp(p, inv)
    assert res.found
    cert = res.certificate
    # the loop transition's ranking component at the loop head is exactly
    # x + 1 (after scaling; no shift, the program draws nothing)
    assert cert.shift == 0
    loop = next(t for t in p.transitions if t.kind.dest == t.source)
    j = cert.levels[loop.id]
    comp = cert.lem.at("l0", j)
    assert comp.coeffs == {p.var_index("x"): F(1)} and comp.constant == 1
    assert check_certificate(p, inv, cert).accepted


def test_bernoulli_walk_certificate():
    p, inv = load_fixture("bern_walk")
    res = synthesize_bsp(p, inv)
    assert res.found
    assert check_certificate(p, inv, res.certificate).accepted
    # support bound comes from the coin's [0, 1] support
    from probterm import check_bsp
    assert check_bsp(p) == (True, F(1))


def test_branching_fixture_with_demonic_and_probabilistic_choice():
    p, inv = load_fixture("branching")
    res = synthesize_bsp(p, inv)
    assert res.found
    assert check_certificate(p, inv, res.certificate).accepted
    # the probabilistic branch is ranked at some level >= 1
    pb = next(t for t in p.transitions if t.is_pb)
    assert res.certificate.levels[pb.id] >= 1


def test_branch_into_ranked_region_constrains_the_lp():
    """A coin flip straight back to the loop head makes the restricted
    branch-expectation condition non-vacuous: the ranking component at the
    head must stay nonnegative on the already-ranked exit region, which
    pins its constant to its slope (value 0 at x = -1)."""
    p, inv = load_fixture("prob_join")
    res = synthesize_bsp(p, inv)
    assert res.found and res.certificate.dimension == 2
    rep = check_certificate(p, inv, res.certificate)
    assert rep.accepted
    pb = next(t for t in p.transitions if t.is_pb)
    comp = res.certificate.levels[pb.id]
    head = res.certificate.lem.at("l0", comp)
    assert head.evaluate([F(-1), F(0)]) >= 0  # nonneg where only the exit ran
    assert head.evaluate([F(-1), F(0)]) == 0  # and the LP made it tight


def test_pruned_set_is_maximal(fig1b):
    """Forcing any single ranked transition's eps to zero must not stop the
    remaining ones from ranking (additivity argument)."""
    p, inv = fig1b
    res = synthesize_bsp(p, inv)
    unranked = [t.id for t in p.non_terminal_transitions()]
    for rec in res.history:
        for banned in rec.ranked:
            if len(rec.ranked) == 1:
                continue
            ranked, _ = ranked_at_optimum(
                p, inv, unranked, TemplateRestriction(forced_zero_eps=frozenset({banned})))
            assert set(ranked) == set(rec.ranked) - {banned}
        unranked = [tid for tid in unranked if tid not in set(rec.ranked)]


# -- the general procedure -------------------------------------------------------------


def test_fig1a_general_certificate(fig1a):
    p, inv = fig1a
    res = synthesize_general(p, inv)
    assert res.found
    cert = res.certificate
    assert cert.mode is CertificateMode.GENERAL_SOUND and cert.shift == 0
    assert check_certificate(p, inv, cert).accepted
    # the sampling self-loop needed the coefficient unlock
    assert any(r.tau0 == "t2" for r in res.history)
    # components left of the self-loop's level have no x at l1
    x = p.var_index("x")
    for j in range(1, cert.levels["t2"]):
        assert cert.lem.at("l1", j).coeff(x) == 0


def test_zero_drift_walk_no_witness():
    p, inv = load_fixture("zero_drift_walk")
    res = synthesize_general(p, inv)
    assert not res.found
    assert "zero-coefficient" in res.failure


def test_general_equals_bsp_on_bounded_programs(fig1b):
    p, inv = fig1b
    general = synthesize_general(p, inv)
    bounded = synthesize_bsp(p, inv)
    assert general.found and bounded.found
    # same components up to the final shift, which the general mode omits
    assert general.certificate.shift == 0
    assert general.certificate.lem.components == \
        bounded.certificate.lem.shifted(-bounded.certificate.shift).components
    assert general.certificate.levels == bounded.certificate.levels


def test_general_requires_target_separation():
    from probterm import (DistributionSpec, ExprUpdate, GuardedStep, LinExpr,
                          PCFG, Predicate, ProbBranch, Transition)
    d = DistributionSpec.normal(0, 1)
    p = PCFG(["x"], ["a", "b", "out"], "a", "out", [
        Transition("t0", "a", ProbBranch("b", F(1, 2), "out", F(1, 2))),
        Transition("t1", "b", GuardedStep("b", Predicate.true(),
                                          ExprUpdate(0, LinExpr({0: 1}),
                                                     (F(1), d)))),
    ])
    with pytest.raises(NotLinPPStar):
        synthesize_general(p, Invariant({}))


def test_level_map_levels_terminal_loops_zero():
    from probterm import GuardedStep, NoUpdate, PCFG, Predicate, Transition
    p, inv = load_fixture("countdown")
    p.transitions.append(Transition("tloop", "out",
                                    GuardedStep("out", Predicate.true(), NoUpdate())))
    res = synthesize_bsp(p, inv)
    assert res.found
    assert res.certificate.levels["tloop"] == 0
    assert check_certificate(p, inv, res.certificate).accepted
