"""JSON interchange for programs, invariants and certificates.

All rationals travel as "p/q" strings, interval ends as "p/q" or
"-inf"/"inf", distributions as {kind, params, mean, support}. The exact
grammar is documented in docs/formats.md; `load(dump(x))` is the
identity for every object round-tripped here.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Dict, List, Optional

from .distributions import DistKind, DistributionSpec
from .linear import LinConstraint, LinExpr, Polyhedron, Predicate, Rel
from .model import (Certificate, CertificateMode, ExprUpdate, GuardedStep,
                    Invariant, LinExprMap, NoUpdate, NondetUpdate, PCFG,
                    ProbBranch, Transition)
from .rationals import format_bound, format_rational, parse_bound, rat
from .source import parse_constraint_strings


class FormatError(Exception):
    """Malformed interchange document; `path` points at the offender."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(obj, key, path, expected=None):
    if not isinstance(obj, dict) or key not in obj:
        raise FormatError(f"missing key {key!r}", path)
    value = obj[key]
    if expected is not None and not isinstance(value, expected):
        raise FormatError(f"key {key!r} has wrong type", f"{path}.{key}")
    return value


def _rat(text, path) -> Fraction:
    try:
        return rat(text)
    except (ValueError, TypeError, ZeroDivisionError) as e:
        raise FormatError(f"bad rational {text!r}: {e}", path)


# -- linear expressions ------------------------------------------------------


def linexpr_to_json(e: LinExpr, variables: List[str]) -> Dict[str, str]:
    out = {variables[i]: format_rational(c) for i, c in sorted(e.coeffs.items())}
    out["const"] = format_rational(e.constant)
    return out


def linexpr_from_json(obj, variables: List[str], path: str) -> LinExpr:
    if not isinstance(obj, dict):
        raise FormatError("linear expression must be an object", path)
    coeffs = {}
    const = Fraction(0)
    for key, val in obj.items():
        if key == "const":
            const = _rat(val, f"{path}.const")
        else:
            if key not in variables:
                raise FormatError(f"unknown variable {key!r}", f"{path}.{key}")
            coeffs[variables.index(key)] = _rat(val, f"{path}.{key}")
    return LinExpr(coeffs, const)


_REL_TO_STR = {Rel.LE: "<=", Rel.LT: "<", Rel.EQ: "=="}
_STR_TO_REL = {v: k for k, v in _REL_TO_STR.items()}


def constraint_to_json(c: LinConstraint, variables: List[str]):
    return {"expr": linexpr_to_json(c.lhs, variables), "rel": _REL_TO_STR[c.rel]}


def constraint_from_json(obj, variables, path) -> LinConstraint:
    rel = _get(obj, "rel", path, str)
    if rel not in _STR_TO_REL:
        raise FormatError(f"bad relation {rel!r}", f"{path}.rel")
    return LinConstraint(linexpr_from_json(_get(obj, "expr", path), variables,
                                           f"{path}.expr"),
                         _STR_TO_REL[rel])


def predicate_to_json(p: Predicate, variables):
    return [[constraint_to_json(c, variables) for c in poly.constraints]
            for poly in p.disjuncts]


def predicate_from_json(obj, variables, path) -> Predicate:
    if not isinstance(obj, list):
        raise FormatError("predicate must be a list of disjuncts", path)
    disjuncts = []
    for i, disj in enumerate(obj):
        if not isinstance(disj, list):
            raise FormatError("disjunct must be a list of constraints", f"{path}[{i}]")
        disjuncts.append(Polyhedron([constraint_from_json(c, variables, f"{path}[{i}][{j}]")
                                     for j, c in enumerate(disj)]))
    return Predicate(disjuncts)


# -- distributions ------------------------------------------------------------


def dist_to_json(d: DistributionSpec):
    params: Dict[str, object] = {}
    if d.kind is DistKind.NORMAL:
        params = {"mean": format_rational(d.param("mean")),
                  "stddev": format_rational(d.param("stddev"))}
    elif d.kind is DistKind.UNIFORM:
        params = {"lo": format_rational(d.param("lo")),
                  "hi": format_rational(d.param("hi"))}
    elif d.kind is DistKind.BERNOULLI:
        params = {"p": format_rational(d.param("p"))}
    elif d.kind is DistKind.DISCRETE:
        params = {"values": [[format_rational(v), format_rational(p)]
                             for v, p in d.param("values")]}
    else:
        params = {"sampler": d.param("sampler")}
    return {"kind": d.kind.value, "params": params,
            "mean": format_rational(d.mean),
            "support": [format_bound(d.support_lo, lower=True),
                        format_bound(d.support_hi, lower=False)]}


def dist_from_json(obj, path) -> DistributionSpec:
    kind = _get(obj, "kind", path, str)
    params = _get(obj, "params", path, dict)
    try:
        if kind == "normal":
            d = DistributionSpec.normal(_rat(_get(params, "mean", path), path),
                                        _rat(_get(params, "stddev", path), path))
        elif kind == "uniform":
            d = DistributionSpec.uniform(_rat(_get(params, "lo", path), path),
                                         _rat(_get(params, "hi", path), path))
        elif kind == "bernoulli":
            d = DistributionSpec.bernoulli(_rat(_get(params, "p", path), path))
        elif kind == "discrete":
            vals = _get(params, "values", path, list)
            d = DistributionSpec.discrete([(_rat(v, path), _rat(p, path))
                                           for v, p in vals])
        elif kind == "custom":
            support = _get(obj, "support", path, list)
            d = DistributionSpec.custom(_get(params, "sampler", path, str),
                                        _rat(_get(obj, "mean", path), path),
                                        parse_bound(support[0]), parse_bound(support[1]))
        else:
            raise FormatError(f"unknown distribution kind {kind!r}", f"{path}.kind")
    except ValueError as e:
        raise FormatError(str(e), path)
    # declared mean/support, when present, must agree with the analytic ones
    if "mean" in obj and _rat(obj["mean"], f"{path}.mean") != d.mean:
        raise FormatError(f"declared mean {obj['mean']} differs from analytic mean "
                          f"{format_rational(d.mean)}", f"{path}.mean")
    if "support" in obj and kind != "custom":
        lo, hi = obj["support"]
        if (parse_bound(lo), parse_bound(hi)) != (d.support_lo, d.support_hi):
            raise FormatError("declared support differs from analytic support",
                              f"{path}.support")
    return d


# -- updates and transitions ---------------------------------------------------


def update_to_json(u, variables):
    if isinstance(u, NoUpdate):
        return {"kind": "none"}
    if isinstance(u, ExprUpdate):
        out = {"kind": "expr", "target": variables[u.target],
               "base": linexpr_to_json(u.base, variables)}
        if u.sample is not None:
            coeff, dist = u.sample
            out["sample"] = {"coeff": format_rational(coeff), "dist": dist_to_json(dist)}
        return out
    return {"kind": "ndet", "target": variables[u.target],
            "lo": format_rational(u.lo), "hi": format_rational(u.hi)}


def update_from_json(obj, variables, path):
    kind = _get(obj, "kind", path, str)
    if kind == "none":
        return NoUpdate()
    target = _get(obj, "target", path, str)
    if target not in variables:
        raise FormatError(f"unknown variable {target!r}", f"{path}.target")
    idx = variables.index(target)
    if kind == "expr":
        base = linexpr_from_json(_get(obj, "base", path), variables, f"{path}.base")
        sample = None
        if "sample" in obj:
            s = obj["sample"]
            sample = (_rat(_get(s, "coeff", f"{path}.sample"), f"{path}.sample.coeff"),
                      dist_from_json(_get(s, "dist", f"{path}.sample"), f"{path}.sample.dist"))
        return ExprUpdate(idx, base, sample)
    if kind == "ndet":
        lo = _rat(_get(obj, "lo", path), f"{path}.lo")
        hi = _rat(_get(obj, "hi", path), f"{path}.hi")
        return NondetUpdate(idx, lo, hi)
    raise FormatError(f"unknown update kind {kind!r}", f"{path}.kind")


def pcfg_to_json(p: PCFG) -> dict:
    transitions = []
    for t in p.transitions:
        if isinstance(t.kind, ProbBranch):
            k = t.kind
            transitions.append({"id": t.id, "source": t.source, "kind": "pb",
                                "dest1": k.dest1, "p1": format_rational(k.p1),
                                "dest2": k.dest2, "p2": format_rational(k.p2)})
        else:
            k = t.kind
            transitions.append({"id": t.id, "source": t.source, "kind": "npb",
                                "dest": k.dest,
                                "guard": predicate_to_json(k.guard, p.variables),
                                "update": update_to_json(k.update, p.variables)})
    return {"variables": list(p.variables), "locations": list(p.locations),
            "init": p.init_location, "terminal": p.terminal_location,
            "transitions": transitions}


def pcfg_from_json(doc) -> PCFG:
    variables = _get(doc, "variables", "$", list)
    if "const" in variables:
        raise FormatError("'const' cannot be a variable name", "$.variables")
    locations = _get(doc, "locations", "$", list)
    init = _get(doc, "init", "$", str)
    terminal = _get(doc, "terminal", "$", str)
    transitions = []
    for i, tj in enumerate(_get(doc, "transitions", "$", list)):
        path = f"$.transitions[{i}]"
        tid = _get(tj, "id", path, str)
        source = _get(tj, "source", path, str)
        kind = _get(tj, "kind", path, str)
        if kind == "pb":
            k = ProbBranch(_get(tj, "dest1", path, str), _rat(_get(tj, "p1", path), f"{path}.p1"),
                           _get(tj, "dest2", path, str), _rat(_get(tj, "p2", path), f"{path}.p2"))
        elif kind == "npb":
            guard = predicate_from_json(_get(tj, "guard", path), variables, f"{path}.guard")
            update = update_from_json(_get(tj, "update", path), variables, f"{path}.update")
            k = GuardedStep(_get(tj, "dest", path, str), guard, update)
        else:
            raise FormatError(f"unknown transition kind {kind!r}", f"{path}.kind")
        transitions.append(Transition(tid, source, k))
    return PCFG(variables, locations, init, terminal, transitions)


def load_pcfg(path: str) -> PCFG:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"not valid JSON: {e}")
    return pcfg_from_json(doc)


def dump_pcfg(p: PCFG, path: str) -> None:
    with open(path, "w") as f:
        json.dump(pcfg_to_json(p), f, indent=2)
        f.write("\n")


# -- invariants ----------------------------------------------------------------


def invariant_from_json(doc, p: PCFG) -> Invariant:
    if not isinstance(doc, dict):
        raise FormatError("invariant file must map locations to constraint lists")
    by_loc = {}
    for loc, items in doc.items():
        if loc not in p.locations:
            raise FormatError(f"unknown location {loc!r}", f"$.{loc}")
        if not isinstance(items, list):
            raise FormatError("expected a list of constraint strings", f"$.{loc}")
        try:
            by_loc[loc] = parse_constraint_strings(items, p.variables)
        except Exception as e:
            raise FormatError(str(e), f"$.{loc}")
    return Invariant(by_loc)


def load_invariant(path: str, p: PCFG) -> Invariant:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"not valid JSON: {e}")
    return invariant_from_json(doc, p)


# -- certificates ---------------------------------------------------------------


def certificate_to_json(c: Certificate, p: PCFG) -> dict:
    return {
        "dimension": c.dimension,
        "components": {loc: [linexpr_to_json(e, p.variables) for e in vec]
                       for loc, vec in c.lem.components.items()},
        "levels": {tid: lvl for tid, lvl in sorted(c.levels.items())},
        "shift": format_rational(c.shift),
        "mode": c.mode.value,
    }


def certificate_from_json(doc, p: PCFG) -> Certificate:
    dim = _get(doc, "dimension", "$", int)
    comps_json = _get(doc, "components", "$", dict)
    components = {}
    for loc, vec in comps_json.items():
        if loc not in p.locations:
            raise FormatError(f"unknown location {loc!r}", f"$.components.{loc}")
        if not isinstance(vec, list) or len(vec) != dim:
            raise FormatError(f"expected {dim} expressions", f"$.components.{loc}")
        components[loc] = [linexpr_from_json(e, p.variables, f"$.components.{loc}[{i}]")
                           for i, e in enumerate(vec)]
    levels_json = _get(doc, "levels", "$", dict)
    levels = {}
    for tid, lvl in levels_json.items():
        if not isinstance(lvl, int):
            raise FormatError("level must be an integer", f"$.levels.{tid}")
        levels[tid] = lvl
    mode_str = _get(doc, "mode", "$", str)
    try:
        mode = CertificateMode(mode_str)
    except ValueError:
        raise FormatError(f"unknown mode {mode_str!r}", "$.mode")
    shift = _rat(_get(doc, "shift", "$"), "$.shift")
    try:
        lem = LinExprMap(dim, components)
        return Certificate(lem, levels, shift, mode)
    except ValueError as e:
        raise FormatError(str(e))


def load_certificate(path: str, p: PCFG) -> Certificate:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"not valid JSON: {e}")
    return certificate_from_json(doc, p)


def dump_certificate(c: Certificate, p: PCFG, path: str) -> None:
    with open(path, "w") as f:
        json.dump(certificate_to_json(c, p), f, indent=2)
        f.write("\n")


# -- graph description ------------------------------------------------------------


def pcfg_to_dot(p: PCFG) -> str:
    lines = ["digraph pcfg {", "  rankdir=LR;"]
    for loc in p.locations:
        shape = "doublecircle" if loc == p.terminal_location else "circle"
        lines.append(f'  "{loc}" [shape={shape}];')
    for t in p.transitions:
        if isinstance(t.kind, ProbBranch):
            k = t.kind
            mid = f"{t.id}_split"
            lines.append(f'  "{mid}" [shape=point];')
            lines.append(f'  "{t.source}" -> "{mid}" [label="{t.id}"];')
            lines.append(f'  "{mid}" -> "{k.dest1}" [label="{k.p1}"];')
            lines.append(f'  "{mid}" -> "{k.dest2}" [label="{k.p2}"];')
        else:
            k = t.kind
            label = f"{t.id}: {k.guard.pretty(p.variables)}"
            if not isinstance(k.update, NoUpdate):
                label += f" / {k.update.pretty(p.variables)}"
            lines.append(f'  "{t.source}" -> "{k.dest}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
