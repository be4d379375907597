"""Parser for the small imperative probabilistic source language.

Statements: `skip`, `x := <linear expr>` (optionally containing one
`sample(<dist>)` term), `x := ndet[lo, hi]`, sequencing with `;`,
`while <pred> do ... od`, and three `if` forms -- `if <pred>`,
`if prob(p)` (probabilistic branch) and `if *` (demonic branch) -- each
with a mandatory `else` and closing `fi`. Predicates are Boolean
combinations of linear comparisons. The full grammar lives in
docs/lang.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .distributions import DistributionSpec
from .linear import (LinConstraint, LinExpr, Polyhedron, Predicate, Rel,
                     negate_predicate)


class ProgramSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class NonLinearExpression(ProgramSyntaxError):
    pass


class MultipleSamplesInAssignment(ProgramSyntaxError):
    pass


# -- AST -------------------------------------------------------------------


@dataclass
class Skip:
    pass


@dataclass
class Assign:
    var: str
    base: LinExpr                       # over variable indices
    sample: Optional[Tuple[Fraction, DistributionSpec]] = None


@dataclass
class AssignNdet:
    var: str
    lo: Fraction
    hi: Fraction


@dataclass
class Seq:
    stmts: List["Stmt"]


@dataclass
class While:
    cond: Predicate
    body: "Stmt"


@dataclass
class IfCond:
    cond: Predicate
    then: "Stmt"
    els: "Stmt"


@dataclass
class IfProb:
    p: Fraction
    then: "Stmt"
    els: "Stmt"


@dataclass
class IfNdet:
    then: "Stmt"
    els: "Stmt"


Stmt = Skip | Assign | AssignNdet | Seq | While | IfCond | IfProb | IfNdet


@dataclass
class SourceProgram:
    body: Stmt
    variables: List[str] = field(default_factory=list)


# -- tokenizer ---------------------------------------------------------------

KEYWORDS = {"while", "do", "od", "if", "then", "else", "fi", "skip",
            "prob", "ndet", "sample", "and", "or", "not", "true", "false"}

SYMBOLS = [":=", "<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/",
           "(", ")", "[", "]", ",", ";", ":"]


@dataclass
class Token:
    kind: str      # "num" | "ident" | "kw" | symbol itself | "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    toks: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1; line += 1; col = 1
            continue
        if ch.isspace():
            i += 1; col += 1
            continue
        if ch == "#":  # comment to end of line
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            toks.append(Token("num", text[i:j], line, col))
            col += j - i; i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            col += j - i; i = j
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token(sym, sym, line, col))
                col += len(sym); i += len(sym)
                break
        else:
            raise ProgramSyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.pos = 0
        self.vars: List[str] = []

    # token plumbing

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ProgramSyntaxError(f"expected {want!r}, found {t.text or t.kind!r}",
                                     t.line, t.col)
        return self.next()

    def err(self, message: str, cls=ProgramSyntaxError):
        t = self.peek()
        raise cls(message, t.line, t.col)

    def var_index(self, name: str) -> int:
        if name not in self.vars:
            if name == "const":
                self.err("'const' is reserved and cannot name a variable")
            self.vars.append(name)
        return self.vars.index(name)

    # statements

    def parse_program(self) -> SourceProgram:
        if self.at("eof"):
            return SourceProgram(Skip(), [])
        body = self.parse_seq()
        self.expect("eof")
        return SourceProgram(body, list(self.vars))

    def parse_seq(self) -> Stmt:
        stmts = [self.parse_stmt()]
        while self.at(";"):
            self.next()
            if self.at("eof") or self.at("kw", "od") or self.at("kw", "fi") \
                    or self.at("kw", "else"):
                break  # tolerate a trailing semicolon
            stmts.append(self.parse_stmt())
        return stmts[0] if len(stmts) == 1 else Seq(stmts)

    def parse_stmt(self) -> Stmt:
        if self.at("kw", "skip"):
            self.next()
            return Skip()
        if self.at("kw", "while"):
            self.next()
            cond = self.parse_predicate()
            self.expect("kw", "do")
            body = self.parse_seq()
            self.expect("kw", "od")
            return While(cond, body)
        if self.at("kw", "if"):
            return self.parse_if()
        if self.at("ident"):
            return self.parse_assign()
        self.err("expected a statement")

    def parse_if(self) -> Stmt:
        self.expect("kw", "if")
        if self.at("*"):
            self.next()
            head: Stmt | None = None
        elif self.at("kw", "prob"):
            self.next()
            self.expect("(")
            p = self.parse_signed_number()
            self.expect(")")
            if not 0 < p < 1:
                self.err(f"branch probability {p} outside (0, 1)")
            head = ("prob", p)
        else:
            head = ("cond", self.parse_predicate())
        self.expect("kw", "then")
        then = self.parse_seq()
        self.expect("kw", "else")
        els = self.parse_seq()
        self.expect("kw", "fi")
        if head is None:
            return IfNdet(then, els)
        if head[0] == "prob":
            return IfProb(head[1], then, els)
        return IfCond(head[1], then, els)

    def parse_assign(self) -> Stmt:
        name = self.expect("ident").text
        idx = self.var_index(name)
        self.expect(":=")
        if self.at("kw", "ndet"):
            self.next()
            self.expect("[")
            lo = self.parse_signed_number()
            self.expect(",")
            hi = self.parse_signed_number()
            self.expect("]")
            if lo > hi:
                self.err(f"empty interval [{lo}, {hi}]")
            return AssignNdet(name, lo, hi)
        expr, samples = self.parse_expr()
        if len(samples) > 1:
            self.err("at most one sample term per assignment",
                     MultipleSamplesInAssignment)
        _ = idx
        return Assign(name, expr, samples[0] if samples else None)

    # predicates (built directly in disjunctive normal form)

    def parse_predicate(self) -> Predicate:
        pred = self.parse_and()
        while self.at("kw", "or"):
            self.next()
            pred = pred.disjoin(self.parse_and())
        return pred

    def parse_and(self) -> Predicate:
        pred = self.parse_patom()
        while self.at("kw", "and"):
            self.next()
            pred = pred.conjoin(self.parse_patom())
        return pred

    def parse_patom(self) -> Predicate:
        if self.at("kw", "not"):
            self.next()
            return negate_predicate(self.parse_patom())
        if self.at("kw", "true"):
            self.next()
            return Predicate.true()
        if self.at("kw", "false"):
            self.next()
            return Predicate.false()
        if self.at("("):
            # either a parenthesized predicate or the start of a comparison
            snapshot = self.pos
            self.next()
            try:
                inner = self.parse_predicate()
                self.expect(")")
                return inner
            except ProgramSyntaxError:
                self.pos = snapshot
        return self.parse_comparison()

    def parse_comparison(self) -> Predicate:
        lhs, s1 = self.parse_expr()
        op = self.peek()
        if op.kind not in ("<=", "<", ">=", ">", "==", "!="):
            self.err("expected a comparison operator")
        self.next()
        rhs, s2 = self.parse_expr()
        if s1 or s2:
            self.err("sampling is not allowed inside predicates")
        diff = lhs - rhs
        if op.kind == "<=":
            return Predicate.of_constraints([LinConstraint.le(diff)])
        if op.kind == "<":
            return Predicate.of_constraints([LinConstraint.lt(diff)])
        if op.kind == ">=":
            return Predicate.of_constraints([LinConstraint.le(-diff)])
        if op.kind == ">":
            return Predicate.of_constraints([LinConstraint.lt(-diff)])
        if op.kind == "==":
            return Predicate.of_constraints([LinConstraint.eq(diff)])
        return Predicate([Polyhedron([LinConstraint.lt(diff)]),
                          Polyhedron([LinConstraint.lt(-diff)])])

    # linear expressions, tracking sample terms

    def parse_expr(self):
        expr, samples = self.parse_term()
        while self.at("+") or self.at("-"):
            neg = self.next().kind == "-"
            rhs, rs = self.parse_term()
            if neg:
                rhs = -rhs
                rs = [(-c, d) for c, d in rs]
            expr = expr + rhs
            samples = samples + rs
        return expr, samples

    def parse_term(self):
        expr, samples = self.parse_factor()
        while self.at("*") or self.at("/"):
            op = self.next().kind
            rhs, rs = self.parse_factor()
            if op == "*":
                if rhs.is_constant() and not rs:
                    expr = expr.scale(rhs.constant)
                    samples = [(c * rhs.constant, d) for c, d in samples]
                elif expr.is_constant() and not samples:
                    samples = [(c * expr.constant, d) for c, d in rs]
                    expr = rhs.scale(expr.constant)
                else:
                    self.err("product of two non-constant expressions",
                             NonLinearExpression)
            else:
                if not (rhs.is_constant() and not rs):
                    self.err("division by a non-constant", NonLinearExpression)
                if rhs.constant == 0:
                    self.err("division by zero")
                expr = expr.scale(1 / rhs.constant)
                samples = [(c / rhs.constant, d) for c, d in samples]
        return expr, samples

    def parse_factor(self):
        t = self.peek()
        if t.kind == "-":
            self.next()
            e, s = self.parse_factor()
            return -e, [(-c, d) for c, d in s]
        if t.kind == "num":
            self.next()
            return LinExpr.const(Fraction(t.text)), []
        if t.kind == "ident":
            self.next()
            return LinExpr.var(self.var_index(t.text)), []
        if t.kind == "(":
            self.next()
            e, s = self.parse_expr()
            self.expect(")")
            return e, s
        if t.kind == "kw" and t.text == "sample":
            self.next()
            self.expect("(")
            dist = self.parse_distribution()
            self.expect(")")
            return LinExpr.const(0), [(Fraction(1), dist)]
        self.err("expected an expression")

    def parse_signed_number(self) -> Fraction:
        neg = False
        while self.at("-") or self.at("+"):
            neg ^= self.next().kind == "-"
        t = self.expect("num")
        value = Fraction(t.text)
        if self.at("/"):
            self.next()
            denom = Fraction(self.expect("num").text)
            if denom == 0:
                self.err("zero denominator")
            value /= denom
        return -value if neg else value

    def parse_distribution(self) -> DistributionSpec:
        t = self.expect("ident")
        name = t.text.lower()
        self.expect("(")
        if name in ("norm", "normal", "gaussian"):
            mean = self.parse_signed_number()
            self.expect(",")
            std = self.parse_signed_number()
            self.expect(")")
            return DistributionSpec.normal(mean, std)
        if name in ("unif", "uniform"):
            lo = self.parse_signed_number()
            self.expect(",")
            hi = self.parse_signed_number()
            self.expect(")")
            return DistributionSpec.uniform(lo, hi)
        if name in ("bern", "bernoulli"):
            p = self.parse_signed_number()
            self.expect(")")
            return DistributionSpec.bernoulli(p)
        if name == "discrete":
            pairs = []
            while True:
                v = self.parse_signed_number()
                self.expect(":")
                pr = self.parse_signed_number()
                pairs.append((v, pr))
                if self.at(","):
                    self.next()
                    continue
                break
            self.expect(")")
            return DistributionSpec.discrete(pairs)
        raise ProgramSyntaxError(f"unknown distribution {t.text!r}", t.line, t.col)


def parse_program(text: str) -> SourceProgram:
    """Parse source text into an AST; raises ProgramSyntaxError (or its
    NonLinearExpression / MultipleSamplesInAssignment refinements) with
    line/column on the first error."""
    return _Parser(tokenize(text)).parse_program()


def parse_constraint_strings(items: List[str], variables: List[str]) -> Polyhedron:
    """Parse invariant side-car entries like ``"x >= -7"`` against a fixed
    variable table; conjunction semantics, atoms only."""
    constraints: List[LinConstraint] = []
    for s in items:
        parser = _Parser(tokenize(s))
        parser.vars = list(variables)
        pred = parser.parse_comparison()
        parser.expect("eof")
        if parser.vars != list(variables):
            unknown = [v for v in parser.vars if v not in variables]
            raise ValueError(f"constraint {s!r} uses undeclared variables {unknown}")
        if len(pred.disjuncts) != 1:
            raise ValueError(f"constraint {s!r} must be a single atom")
        constraints.extend(pred.disjuncts[0].constraints)
    return Polyhedron(constraints)
