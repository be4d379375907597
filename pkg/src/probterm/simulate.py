"""Monte-Carlo execution of programs under pluggable schedulers.

State is kept in exact rationals; sampled floats are converted exactly,
so guard evaluation and invariant audits never suffer rounding. Each run
owns an rng substream derived from (master seed, run index), which makes
aggregates reproducible and order-independent, and lets runs execute in
separate processes without coordination.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .linear import LinExpr
from .model import (Certificate, ExprUpdate, GuardedStep, Invariant, NoUpdate,
                    NondetUpdate, PCFG, ProbBranch, Transition)
from .preexp import max_pre

ZERO = Fraction(0)

DEFAULT_ESTIMATE_CAP = 10 ** 6
DEFAULT_AUDIT_CAP = 10 ** 4


def run_rng(seed: int, run_index: int):
    """The per-run substream: numpy PCG64 seeded on (seed, run index)."""
    return np.random.default_rng([seed, run_index])


# -- schedulers ---------------------------------------------------------------


class Scheduler:
    """Resolves demonic choices: which enabled transition fires, and which
    value a demonic interval assignment takes."""

    name = "scheduler"

    def choose(self, enabled: List[Transition], values, rng) -> Transition:
        raise NotImplementedError

    def ndet_value(self, t: Transition, values, rng) -> Fraction:
        u = t.kind.update
        return u.lo + (u.hi - u.lo) * Fraction(float(rng.random()))


class UniformRandom(Scheduler):
    """Uniform over enabled transitions, uniform over demonic intervals.

    Consumes one uniform draw only when the choice is real (two or more
    enabled transitions), which keeps its draw sequence aligned with the
    AST reference interpreter.
    """

    name = "uniform"

    def choose(self, enabled, values, rng):
        if len(enabled) == 1:
            return enabled[0]
        return enabled[int(rng.random() * len(enabled))]


class FixedPriority(Scheduler):
    """Deterministic transition choice by a fixed id ordering; demonic
    values by `ndet_mode` in {"uniform", "lo", "hi"}."""

    name = "fixed"

    def __init__(self, ordering: Sequence[str] = (), ndet_mode: str = "uniform"):
        self.ordering = list(ordering)
        if ndet_mode not in ("uniform", "lo", "hi"):
            raise ValueError(f"unknown ndet mode {ndet_mode!r}")
        self.ndet_mode = ndet_mode

    def _rank(self, tid: str) -> Tuple[int, str]:
        try:
            return (self.ordering.index(tid), tid)
        except ValueError:
            return (len(self.ordering), tid)

    def choose(self, enabled, values, rng):
        return min(enabled, key=lambda t: self._rank(t.id))

    def ndet_value(self, t, values, rng):
        u = t.kind.update
        if self.ndet_mode == "lo":
            return u.lo
        if self.ndet_mode == "hi":
            return u.hi
        return super().ndet_value(t, values, rng)


class Adversarial(Scheduler):
    """Greedy heuristic against a certificate: among enabled transitions,
    take the one with the largest expected value of the component ranking
    the current state; demonic intervals pick the endpoint maximizing
    that component at the target. A heuristic only, no worst-case claim.
    """

    name = "adversarial"

    def __init__(self, certificate: Certificate):
        self.certificate = certificate

    def _component(self, j: int) -> Dict[str, LinExpr]:
        return {loc: vec[j - 1]
                for loc, vec in self.certificate.lem.components.items()}

    def choose(self, enabled, values, rng):
        j = max(self.certificate.levels.get(t.id, 0) for t in enabled)
        if j == 0:
            return enabled[0]
        eta = self._component(j)
        return max(enabled, key=lambda t: (max_pre(eta, t).evaluate(values), t.id))

    def ndet_value(self, t, values, rng):
        u = t.kind.update
        j = self.certificate.levels.get(t.id, 0)
        if j == 0:
            return super().ndet_value(t, values, rng)
        eta = self._component(j)[t.kind.dest]
        return u.hi if eta.coeff(u.target) >= 0 else u.lo


# -- trajectories ---------------------------------------------------------------


@dataclass
class TrajectoryReport:
    terminated: bool
    steps: int
    stuck: bool
    final_location: str
    final_values: List[Fraction]
    taken: List[str] = field(default_factory=list)
    states: Optional[List[Tuple[str, List[Fraction]]]] = None
    draws: int = 0

    def as_dict(self) -> dict:
        return {"terminated": self.terminated, "steps": self.steps,
                "stuck": self.stuck, "final_location": self.final_location,
                "final_values": [str(v) for v in self.final_values],
                "draws": self.draws}


def step_once(p: PCFG, location: str, values: List[Fraction],
              t: Transition, sched: Scheduler, rng) -> Tuple[str, List[Fraction], int]:
    """Execute `t` from (location, values); returns the successor state
    and the number of random draws consumed."""
    if isinstance(t.kind, ProbBranch):
        k = t.kind
        dest = k.dest1 if Fraction(float(rng.random())) < k.p1 else k.dest2
        return dest, values, 1
    step = t.kind
    u = step.update
    if isinstance(u, NoUpdate):
        return step.dest, values, 0
    values = list(values)
    if isinstance(u, ExprUpdate):
        v = u.base.evaluate(values)
        draws = 0
        if u.sample is not None:
            coeff, dist = u.sample
            v += coeff * dist.sample(rng)
            draws = 1
        values[u.target] = v
        return step.dest, values, draws
    values[u.target] = sched.ndet_value(t, values, rng)
    return step.dest, values, 1


def run_trajectory(p: PCFG, init: Sequence[Fraction], sched: Scheduler,
                   step_cap: int, rng=None, seed: int = 0, run_index: int = 0,
                   location: Optional[str] = None,
                   record_states: bool = True) -> TrajectoryReport:
    """One run under the program's small-step semantics: stop at the
    terminal location, at the step cap, or when no transition is enabled
    (reported as stuck, never raised)."""
    if rng is None:
        rng = run_rng(seed, run_index)
    loc = location or p.init_location
    values = [Fraction(v) for v in init]
    states = [(loc, list(values))] if record_states else None
    taken: List[str] = []
    draws = 0
    steps = 0
    stuck = False
    while loc != p.terminal_location and steps < step_cap:
        enabled = [t for t in p.outgoing(loc) if t.guard().satisfied(values)]
        if not enabled:
            stuck = True
            break
        if len(enabled) > 1:
            t = sched.choose(enabled, values, rng)
            if isinstance(sched, UniformRandom):
                draws += 1
        else:
            t = enabled[0]
        loc, values, d = step_once(p, loc, values, t, sched, rng)
        draws += d
        steps += 1
        taken.append(t.id)
        if record_states:
            states.append((loc, list(values)))
    return TrajectoryReport(loc == p.terminal_location, steps, stuck, loc,
                            values, taken, states, draws)


# -- aggregation -----------------------------------------------------------------


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> Tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return (lo, hi)


@dataclass
class TerminationEstimate:
    fraction: float
    interval: Tuple[float, float]
    runs: int
    terminated: int
    stuck: int
    mean_steps: float

    def as_dict(self) -> dict:
        return {"fraction": self.fraction,
                "wilson95": [self.interval[0], self.interval[1]],
                "runs": self.runs, "terminated": self.terminated,
                "stuck": self.stuck, "mean_steps": self.mean_steps}


def _estimate_block(args):
    p, init, sched, step_cap, seed, lo, hi = args
    term = stuck = 0
    total_steps = 0
    for idx in range(lo, hi):
        r = run_trajectory(p, init, sched, step_cap, rng=run_rng(seed, idx),
                           record_states=False)
        term += r.terminated
        stuck += r.stuck
        total_steps += r.steps
    return term, stuck, total_steps


def estimate_termination(p: PCFG, init: Sequence[Fraction], sched: Scheduler,
                         runs: int, step_cap: int = DEFAULT_ESTIMATE_CAP,
                         seed: int = 0, threads: int = 1) -> TerminationEstimate:
    """i.i.d. trajectory aggregate with seeded substreams; the result is a
    pure function of (program, init, scheduler, runs, cap, seed),
    regardless of thread count."""
    if runs < 1:
        raise ValueError("need at least one run")
    init = [Fraction(v) for v in init]
    if threads <= 1:
        term, stuck, total_steps = _estimate_block((p, init, sched, step_cap, seed, 0, runs))
    else:
        bounds = np.linspace(0, runs, threads + 1, dtype=int)
        blocks = [(p, init, sched, step_cap, seed, int(lo), int(hi))
                  for lo, hi in zip(bounds[:-1], bounds[1:]) if lo < hi]
        term = stuck = total_steps = 0
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            for t, s, ts in pool.map(_estimate_block, blocks):
                term += t
                stuck += s
                total_steps += ts
    return TerminationEstimate(term / runs, wilson_interval(term, runs), runs,
                               term, stuck, total_steps / runs)


# -- the leftward-nonnegativity counterexample process -----------------------------


COUNTEREXAMPLE_ANALYTIC = 0.4224238098267952
"""Limit of 1 - prod_{t>=0}(1 - 2^-t/4), the probability that the
documented one-dimensional counterexample process ever takes its
down-step (equivalently, that it stops). Computed independently by
series summation; the classical coarse bound is 1/2."""


def counterexample_analytic(horizon: int = 200) -> Fraction:
    """Partial-product value of the stopping probability; the tail beyond
    `horizon` contributes less than 2**-(horizon-1)."""
    prod = Fraction(1)
    for t in range(horizon):
        prod *= 1 - Fraction(1, 4) / 2 ** t
    return 1 - prod


@dataclass
class CounterexampleReport:
    empirical: float
    runs: int
    horizon: int
    residual_bound: float

    def as_dict(self) -> dict:
        return {"empirical": self.empirical, "runs": self.runs,
                "analytic": COUNTEREXAMPLE_ANALYTIC,
                "horizon": self.horizon, "residual_bound": self.residual_bound}


def counterexample_process(seed: int, runs: int, horizon: int = 60,
                           chunk: int = 100_000) -> CounterexampleReport:
    """Simulate the process that starts at 1, and while nonnegative at
    step t jumps down by 2/p_t with probability p_t = 2**-t/4, else up by
    1/(1-p_t). A down-step lands strictly below 0 (the climb is at most
    linear while the drop is exponential), so the process stops iff a
    down-step ever fires; runs are truncated at `horizon` steps, which
    leaves under sum_{t>horizon} p_t < 2**-(horizon+1) residual
    probability unaccounted.
    """
    rng = np.random.default_rng(seed)
    p_t = 0.25 * np.power(2.0, -np.arange(horizon + 1, dtype=np.float64))
    stopped = 0
    remaining = runs
    while remaining > 0:
        n = min(chunk, remaining)
        u = rng.random((n, horizon + 1))
        stopped += int((u < p_t).any(axis=1).sum())
        remaining -= n
    return CounterexampleReport(stopped / runs, runs, horizon,
                                float(2.0 ** (-horizon - 1)))


# -- dynamic audits ------------------------------------------------------------------


@dataclass
class InvariantViolation:
    run: int
    step: int
    location: str
    values: List[Fraction]

    def as_dict(self) -> dict:
        return {"run": self.run, "step": self.step, "location": self.location,
                "values": [str(v) for v in self.values]}


def audit_invariant(p: PCFG, inv: Invariant,
                    trajectories: Sequence[TrajectoryReport]) -> List[InvariantViolation]:
    """Exact refutation check: every visited state must satisfy the
    invariant. Violations disprove invariance; none found proves nothing.
    """
    out = []
    for run, traj in enumerate(trajectories):
        if traj.states is None:
            raise ValueError("trajectory was recorded without states")
        for step, (loc, values) in enumerate(traj.states):
            if not inv.at(loc).satisfied(values):
                out.append(InvariantViolation(run, step, loc, list(values)))
    return out


@dataclass
class DynamicsFlag:
    run: int
    step: int
    kind: str          # "nonneg" | "decrease"
    component: int
    detail: str

    def as_dict(self) -> dict:
        return {"run": self.run, "step": self.step, "kind": self.kind,
                "component": self.component, "detail": self.detail}


@dataclass
class DynamicsAudit:
    flags: List[DynamicsFlag]
    audited_steps: int

    @property
    def clean(self) -> bool:
        return not self.flags


def audit_certificate_dynamics(p: PCFG, inv: Invariant, cert: Certificate,
                               trajectories: Sequence[TrajectoryReport],
                               seed: int = 0, resamples: int = 200,
                               max_steps_per_run: int = 100,
                               sigma_tolerance: float = 5.0) -> DynamicsAudit:
    """Empirical cross-examination of an accepted certificate.

    At each audited step: the components up to the state's level must be
    nonnegative pointwise (exact check), and the component ranking the
    taken transition must decrease by one in conditional expectation,
    estimated by resampling successors. Deterministic transitions are
    checked exactly; stochastic ones are flagged only beyond
    `sigma_tolerance` standard errors. Demonic values are resampled
    uniformly, matching the default scheduler.
    """
    from .checker import state_level, Stuck

    flags: List[DynamicsFlag] = []
    audited = 0
    sched = UniformRandom()
    for run, traj in enumerate(trajectories):
        if traj.states is None:
            raise ValueError("trajectory was recorded without states")
        rng = run_rng(seed, run)
        limit = min(len(traj.taken), max_steps_per_run)
        for step in range(limit):
            loc, values = traj.states[step]
            audited += 1
            try:
                level = state_level(p, cert, loc, values)
            except Stuck:
                continue
            for j in range(1, level + 1):
                v = cert.lem.at(loc, j).evaluate(values)
                if v < 0:
                    flags.append(DynamicsFlag(run, step, "nonneg", j,
                                              f"component {j} = {v} at {loc}"))
            t = p.transition(traj.taken[step])
            j = cert.levels[t.id]
            if j == 0:
                continue
            eta = {l: vec[j - 1] for l, vec in cert.lem.components.items()}
            here = eta[loc].evaluate(values)
            stochastic = t.is_pb or (isinstance(t.kind.update, ExprUpdate)
                                     and t.kind.update.sample is not None) \
                or isinstance(t.kind.update, NondetUpdate)
            k = resamples if stochastic else 1
            samples = []
            for _ in range(k):
                dest, vals2, _ = step_once(p, loc, values, t, sched, rng)
                samples.append(eta[dest].evaluate(vals2))
            mean = sum(samples, ZERO) / len(samples)
            if stochastic and len(samples) > 1:
                fm = float(mean)
                var = sum((float(s) - fm) ** 2 for s in samples) / (len(samples) - 1)
                se = math.sqrt(var / len(samples))
            else:
                se = 0.0
            if float(mean) > float(here - 1) + sigma_tolerance * se:
                flags.append(DynamicsFlag(
                    run, step, "decrease", j,
                    f"mean {float(mean):.4f} vs bound {float(here - 1):.4f} "
                    f"(se {se:.4f}) across {t.id}"))
    return DynamicsAudit(flags, audited)
