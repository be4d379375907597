"""Randomized cross-module soundness: generated programs go through
parse -> lower -> synthesize -> check -> simulate. Every certificate the
search produces must survive the independent checker, and the certified
program must terminate empirically; programs without certificates must
still parse, lower, validate and simulate without error."""

import random
from fractions import Fraction as F

from probterm import (Invariant, UniformRandom, check_bsp, check_certificate,
                      estimate_termination, lower_to_pcfg, parse_program,
                      synthesize_bsp, synthesize_general, validate_pcfg)


def gen_program(rng: random.Random) -> str:
    vars_ = ["x", "y"]

    def num(lo=-3, hi=3):
        return rng.randint(lo, hi)

    def update():
        v = rng.choice(vars_)
        roll = rng.random()
        if roll < 0.25:
            lo = num(-4, 0)
            return f"{v} := ndet[{lo}, {lo + rng.randint(0, 3)}]"
        if roll < 0.55:
            # bounded noise, drift biased downward
            a = rng.randint(-6, -1)
            b = rng.randint(0, 2)
            return f"{v} := {v} + {num(-2, 0)} + sample(unif({a}, {b}))"
        if roll < 0.65:
            return f"{v} := {v} - 1 + sample(bern(1/2))"
        return f"{v} := {v} + {num(-3, 1)}"

    def guard():
        v = rng.choice(vars_)
        op = rng.choice([">=", ">", "<="])
        g = f"{v} {op} {num(-2, 2)}"
        if rng.random() < 0.3:
            w = rng.choice(vars_)
            g += f" and {w} {rng.choice(['>=', '<='])} {num(-2, 2)}"
        return g

    def stmt(depth):
        roll = rng.random()
        if depth <= 0 or roll < 0.45:
            return update()
        if roll < 0.6:
            return (f"while {guard()} do {stmt(depth - 1)}; {update()} od")
        if roll < 0.75:
            return (f"if {guard()} then {stmt(depth - 1)} "
                    f"else {stmt(depth - 1)} fi")
        if roll < 0.9:
            p = rng.choice(["1/4", "1/2", "3/4"])
            return (f"if prob({p}) then {stmt(depth - 1)} "
                    f"else {stmt(depth - 1)} fi")
        return (f"if * then {stmt(depth - 1)} else {stmt(depth - 1)} fi")

    return f"while {guard()} do {stmt(2)} od"


def test_random_programs_pipeline_sound():
    rng = random.Random(20240809)
    found = 0
    refused = 0
    for trial in range(60):
        src = gen_program(rng)
        program = parse_program(src)
        p = lower_to_pcfg(program)
        assert validate_pcfg(p) == [], src
        bounded, _ = check_bsp(p)
        result = (synthesize_bsp if bounded else synthesize_general)(p, Invariant({}))
        if not result.found:
            refused += 1
            continue
        found += 1
        report = check_certificate(p, Invariant({}), result.certificate)
        assert report.accepted, (src, [str(v) for v in report.violations])
        init = [F(rng.randint(-2, 3)) for _ in p.variables]
        est = estimate_termination(p, init, UniformRandom(), runs=25,
                                   step_cap=50_000, seed=trial)
        assert est.fraction >= 0.9, (src, init, est)
    # the batch must actually exercise both outcomes
    assert found >= 10, found
    assert refused >= 5, refused


def test_random_certificates_levels_cover_all_transitions():
    rng = random.Random(7777)
    covered = 0
    while covered < 10:
        src = gen_program(rng)
        p = lower_to_pcfg(parse_program(src))
        bounded, _ = check_bsp(p)
        result = (synthesize_bsp if bounded else synthesize_general)(p, Invariant({}))
        if not result.found:
            continue
        cert = result.certificate
        for t in p.non_terminal_transitions():
            assert 1 <= cert.levels[t.id] <= cert.dimension
        assert len(result.history) == cert.dimension
        covered += 1
