"""Command-line pipeline: parse -> synthesize -> check -> simulate.

Exit codes are a stable contract:
  0  success / certificate found / certificate accepted
  1  negative verdict (no witness, certificate rejected)
  2  source syntax error (parse)
  3  precondition or input failure (malformed files, structural mismatch,
     program class violations, encoding blowup)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import pcfg_io
from .checker import StructuralMismatch, check_certificate
from .linear import EncodingBlowup
from .lowering import lower_to_pcfg
from .model import Invariant, check_bsp, check_linpp_star, validate_pcfg
from .rationals import rat
from .simulate import (Adversarial, FixedPriority, UniformRandom,
                       counterexample_process, estimate_termination,
                       COUNTEREXAMPLE_ANALYTIC)
from .source import ProgramSyntaxError, parse_program
from .synthesis import (MissingBoundedSupport, NotLinPPStar, synthesize_bsp,
                        synthesize_general)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_SYNTAX = 2
EXIT_PRECONDITION = 3


def _emit(doc: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(doc, indent=2))
    else:
        print(human)


def cmd_parse(args) -> int:
    try:
        with open(args.source) as f:
            text = f.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        program = parse_program(text)
    except ProgramSyntaxError as e:
        _emit({"ok": False, "error": str(e)}, args.json, f"syntax error: {e}")
        return EXIT_SYNTAX
    p = lower_to_pcfg(program)
    diagnostics = validate_pcfg(p)
    if diagnostics:
        for d in diagnostics:
            print(f"invalid pCFG: {d}", file=sys.stderr)
        return EXIT_PRECONDITION
    pcfg_io.dump_pcfg(p, args.out)
    if args.emit_dot:
        with open(args.emit_dot, "w") as f:
            f.write(pcfg_io.pcfg_to_dot(p))
    _emit({"ok": True, "out": args.out, "variables": p.variables,
           "locations": len(p.locations), "transitions": len(p.transitions)},
          args.json,
          f"wrote {args.out}: {len(p.locations)} locations, "
          f"{len(p.transitions)} transitions, variables {', '.join(p.variables)}")
    return EXIT_OK


def _load_inputs(args, need_invariant: bool = True):
    p = pcfg_io.load_pcfg(args.pcfg)
    diagnostics = validate_pcfg(p)
    if diagnostics:
        raise pcfg_io.FormatError("; ".join(str(d) for d in diagnostics))
    inv = Invariant({})
    if need_invariant and getattr(args, "invariant", None):
        inv = pcfg_io.load_invariant(args.invariant, p)
    return p, inv


def cmd_synthesize(args) -> int:
    try:
        p, inv = _load_inputs(args)
    except pcfg_io.FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION

    mode = args.mode
    if mode == "auto":
        mode = "bsp" if check_bsp(p)[0] else "general"

    progress = None
    if args.progress:
        progress = lambda rec: print(json.dumps(rec), file=sys.stderr)

    try:
        if mode == "bsp":
            result = synthesize_bsp(p, inv, progress=progress)
        else:
            result = synthesize_general(p, inv, progress=progress)
    except (NotLinPPStar, MissingBoundedSupport, EncodingBlowup) as e:
        _emit({"outcome": "error", "mode": mode, "detail": str(e)}, args.json,
              f"precondition failure: {e}")
        return EXIT_PRECONDITION

    iterations = [rec.as_dict() for rec in result.history]
    if not result.found:
        if mode == "bsp":
            detail = ("no LinGLexRSM map exists for this invariant: " + result.failure)
            verdict = "no-certificate"
        else:
            detail = ("termination UNKNOWN (the method is sound, not complete): "
                      + result.failure)
            verdict = "unknown"
        _emit({"outcome": "no-witness", "verdict": verdict, "mode": mode,
               "detail": detail, "iterations": iterations},
              args.json, detail)
        return EXIT_NEGATIVE

    cert = result.certificate
    pcfg_io.dump_certificate(cert, p, args.out)
    if args.dump_lp:
        # re-build the first iteration's LP for external cross-checking
        from .farkas import dump_lp
        from .synthesis import build_lp
        first = build_lp(p, inv, [t.id for t in p.non_terminal_transitions()])
        os.makedirs(args.dump_lp, exist_ok=True)
        with open(os.path.join(args.dump_lp, "iteration1.lp"), "w") as f:
            f.write(dump_lp(first.lp))
    _emit({"outcome": "certificate", "mode": mode, "dimension": cert.dimension,
           "shift": str(cert.shift), "out": args.out, "iterations": iterations},
          args.json,
          f"certificate of dimension {cert.dimension} written to {args.out} "
          f"(mode {cert.mode.value}, shift {cert.shift})")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        p, inv = _load_inputs(args)
        cert = pcfg_io.load_certificate(args.certificate, p)
    except pcfg_io.FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    try:
        report = check_certificate(p, inv, cert)
    except StructuralMismatch as e:
        _emit({"verdict": "structural-mismatch", "detail": str(e)}, args.json,
              f"structural mismatch: {e}")
        return EXIT_PRECONDITION
    doc = report.as_dict()
    if report.accepted:
        _emit(doc, args.json, f"accepted ({report.mode}): {report.meaning}")
        return EXIT_OK
    lines = [f"rejected ({report.mode}):"]
    for v in report.violations:
        lines.append(f"  {v.transition}: {v.condition} of component {v.component}"
                     + (f" at {v.counterexample}" if v.counterexample else ""))
    _emit(doc, args.json, "\n".join(lines))
    return EXIT_NEGATIVE


def _write_traces(p, init, sched, args) -> None:
    """Per-run records: JSON lines and/or a (run, terminated, steps) CSV."""
    from .simulate import run_rng, run_trajectory
    jf = open(args.trace_out, "w") if args.trace_out else None
    cf = open(args.csv, "w") if args.csv else None
    if cf:
        cf.write("run,terminated,steps\n")
    try:
        for idx in range(args.runs):
            r = run_trajectory(p, init, sched, args.cap,
                               rng=run_rng(args.seed, idx), record_states=False)
            if jf:
                rec = {"run": idx, **r.as_dict()}
                jf.write(json.dumps(rec) + "\n")
            if cf:
                cf.write(f"{idx},{int(r.terminated)},{r.steps}\n")
    finally:
        if jf:
            jf.close()
        if cf:
            cf.close()


def _parse_init(text: str, variables) -> list:
    values = {name: Fraction(0) for name in variables}
    if text:
        for part in text.split(","):
            name, _, val = part.partition("=")
            name = name.strip()
            if name not in values:
                raise ValueError(f"unknown variable {name!r} in --init")
            values[name] = rat(val.strip())
    return [values[name] for name in variables]


def cmd_simulate(args) -> int:
    if args.counterexample_builtin:
        rep = counterexample_process(args.seed, args.runs)
        doc = rep.as_dict()
        _emit(doc, args.json,
              f"empirical P[stop] = {rep.empirical:.6f} over {rep.runs} runs "
              f"(series value {COUNTEREXAMPLE_ANALYTIC:.10f}, "
              f"truncation residual < {rep.residual_bound:.2e})")
        return EXIT_OK
    try:
        p, _ = _load_inputs(args, need_invariant=False)
        init = _parse_init(args.init, p.variables)
    except (pcfg_io.FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION

    if args.scheduler == "uniform":
        sched = UniformRandom()
    elif args.scheduler == "fixed":
        sched = FixedPriority([t.id for t in p.transitions], ndet_mode=args.ndet)
    else:
        try:
            cert = pcfg_io.load_certificate(args.certificate, p)
        except (TypeError, pcfg_io.FormatError) as e:
            print(f"error: adversarial scheduler needs --certificate ({e})",
                  file=sys.stderr)
            return EXIT_PRECONDITION
        sched = Adversarial(cert)

    threads = args.threads or int(os.environ.get("PROBTERM_THREADS", "1"))
    if args.trace_out or args.csv:
        _write_traces(p, init, sched, args)
    est = estimate_termination(p, init, sched, args.runs, args.cap,
                               seed=args.seed, threads=threads)
    doc = est.as_dict()
    doc["scheduler"] = args.scheduler
    doc["seed"] = args.seed
    _emit(doc, args.json,
          f"terminated {est.terminated}/{est.runs} runs "
          f"(fraction {est.fraction:.4f}, 95% Wilson "
          f"[{est.interval[0]:.4f}, {est.interval[1]:.4f}], "
          f"mean steps {est.mean_steps:.1f}, stuck {est.stuck})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="probterm",
        description="Prove almost-sure termination of linear probabilistic "
                    "programs via lexicographic ranking-supermartingale "
                    "certificates.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_parse = sub.add_parser("parse", help="compile source to the pCFG format")
    p_parse.add_argument("source")
    p_parse.add_argument("-o", "--out", required=True)
    p_parse.add_argument("--emit-dot", metavar="PATH",
                         help="also write a graph description of the pCFG")
    p_parse.add_argument("--json", action="store_true")
    p_parse.set_defaults(fn=cmd_parse)

    p_syn = sub.add_parser("synthesize", help="search for a termination certificate")
    p_syn.add_argument("pcfg")
    p_syn.add_argument("-i", "--invariant", help="invariant side-car file")
    p_syn.add_argument("-o", "--out", required=True)
    p_syn.add_argument("--mode", choices=["auto", "bsp", "general"], default="auto")
    p_syn.add_argument("--progress", action="store_true",
                       help="emit per-iteration JSON records on stderr")
    p_syn.add_argument("--dump-lp", metavar="DIR",
                       help="write the first iteration's LP in solver-exchange format")
    p_syn.add_argument("--json", action="store_true")
    p_syn.set_defaults(fn=cmd_synthesize)

    p_chk = sub.add_parser("check", help="verify a certificate independently")
    p_chk.add_argument("pcfg")
    p_chk.add_argument("certificate")
    p_chk.add_argument("-i", "--invariant")
    p_chk.add_argument("--json", action="store_true")
    p_chk.set_defaults(fn=cmd_check)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo termination estimate")
    p_sim.add_argument("pcfg", nargs="?")
    p_sim.add_argument("--init", default="", help='e.g. "x=5, y=3" (others 0)')
    p_sim.add_argument("--runs", type=int, default=2000)
    p_sim.add_argument("--cap", type=int, default=10 ** 6)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--scheduler", choices=["uniform", "fixed", "adversarial"],
                       default="uniform")
    p_sim.add_argument("--ndet", choices=["uniform", "lo", "hi"], default="uniform")
    p_sim.add_argument("--certificate", help="for the adversarial scheduler")
    p_sim.add_argument("--threads", type=int, default=0,
                       help="worker processes (default $PROBTERM_THREADS or 1)")
    p_sim.add_argument("--trace-out", metavar="PATH",
                       help="write one JSON line per run")
    p_sim.add_argument("--csv", metavar="PATH",
                       help="write a run,terminated,steps table")
    p_sim.add_argument("--counterexample-builtin", action="store_true",
                       help="run the built-in stopping-probability counterexample "
                            "process instead of a program")
    p_sim.add_argument("--json", action="store_true")
    p_sim.set_defaults(fn=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate" and not args.counterexample_builtin and not args.pcfg:
        print("error: simulate needs a pcfg file (or --counterexample-builtin)",
              file=sys.stderr)
        return EXIT_PRECONDITION
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
