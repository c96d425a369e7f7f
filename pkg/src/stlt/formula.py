"""Signal temporal logic formulas in positive normal form.

Grammar (whitespace insignificant)::

    phi := "T" | ident | "!" ident
         | phi "&" phi | phi "|" phi
         | phi "U[" num "," num "]" phi
         | "F[" num "," num "]" phi
         | "G[" num "," num "]" phi
         | "(" phi ")"

Precedence, tightest first: unary temporal operators, then U, then &,
then |.  Negation is only permitted directly on a predicate name, so
formulas are in positive normal form by construction.  The letters F, G
and U act as operators only when immediately followed by "[", otherwise
they lex as ordinary identifiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

__all__ = [
    "Interval",
    "Formula",
    "TrueFormula",
    "Predicate",
    "NegPredicate",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Always",
    "FormulaError",
    "parse",
    "to_desired_form",
    "horizon",
    "is_desired_form",
    "conj",
    "disj",
]

# Rewriting conjunctions over disjunctions can blow up combinatorially,
# so to_desired_form refuses to grow a formula past this many nodes.
MAX_DESIRED_FORM_NODES = 10_000


class FormulaError(ValueError):
    """Raised for malformed formula text or unsupported rewrites."""


@dataclass(frozen=True)
class Interval:
    """Closed time interval [lo, hi] attached to a temporal operator."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise FormulaError("interval bounds must be finite")
        if self.lo < 0:
            raise FormulaError("interval lower bound must be nonnegative")
        if self.lo > self.hi:
            raise FormulaError(
                "empty interval [%g,%g]: lower bound exceeds upper bound"
                % (self.lo, self.hi)
            )

    def __str__(self):
        return "[%s,%s]" % (_fmt_num(self.lo), _fmt_num(self.hi))


class Formula:
    """Base class for formula nodes.  Nodes are immutable and compare
    structurally."""

    def __str__(self):
        return _format(self, _PREC_OR)

    def __and__(self, other):
        return conj([self, other])

    def __or__(self, other):
        return disj([self, other])


@dataclass(frozen=True)
class TrueFormula(Formula):
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Predicate(Formula):
    name: str
    __str__ = Formula.__str__


@dataclass(frozen=True)
class NegPredicate(Formula):
    name: str
    __str__ = Formula.__str__


@dataclass(frozen=True)
class And(Formula):
    children: tuple
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Or(Formula):
    children: tuple
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula
    interval: Interval
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula
    interval: Interval
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Always(Formula):
    child: Formula
    interval: Interval
    __str__ = Formula.__str__


def conj(children) -> Formula:
    """N-ary conjunction that flattens nested Ands and drops singletons."""
    flat = []
    for c in children:
        if isinstance(c, And):
            flat.extend(c.children)
        else:
            flat.append(c)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(children) -> Formula:
    """N-ary disjunction that flattens nested Ors and drops singletons."""
    flat = []
    for c in children:
        if isinstance(c, Or):
            flat.extend(c.children)
        else:
            flat.append(c)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


# ---------------------------------------------------------------------------
# Parsing


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, pos: int | None = None):
        at = self.pos if pos is None else pos
        raise FormulaError("%s at position %d: %r" % (message, at, self.text))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error("expected %r" % ch)
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        if self.pos == start:
            self.error("expected identifier")
        return self.text[start : self.pos]

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isdigit() or self.text[self.pos] in "+-.eE"
        ):
            self.pos += 1
        if self.pos == start:
            self.error("expected number")
        try:
            return float(self.text[start : self.pos])
        except ValueError:
            self.error("bad number %r" % self.text[start : self.pos], start)

    def interval(self) -> Interval:
        start = self.pos
        self.expect("[")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        try:
            return Interval(lo, hi)
        except FormulaError as exc:
            self.error(str(exc), start)

    def parse_or(self) -> Formula:
        parts = [self.parse_and()]
        while self.peek() == "|":
            self.pos += 1
            parts.append(self.parse_and())
        return disj(parts)

    def parse_and(self) -> Formula:
        parts = [self.parse_until()]
        while self.peek() == "&":
            self.pos += 1
            parts.append(self.parse_until())
        return conj(parts)

    def parse_until(self) -> Formula:
        left = self.parse_unary()
        # U is right associative; chains of U are rare either way.
        if self._at_operator("U"):
            self.pos += 1
            iv = self.interval()
            right = self.parse_until()
            return Until(left, right, iv)
        return left

    def _at_operator(self, letter: str) -> bool:
        """True when `letter` at the cursor starts a temporal operator,
        which requires an immediately following "["."""
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != letter:
            return False
        nxt = self.pos + 1
        return nxt < len(self.text) and self.text[nxt] == "["

    def parse_unary(self) -> Formula:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            inner = self.parse_or()
            self.expect(")")
            return inner
        if ch == "!":
            bang = self.pos
            self.pos += 1
            if self.peek() == "(" or self._at_operator("F") or self._at_operator("G"):
                self.error(
                    "negation only applies to a predicate in positive normal form",
                    bang,
                )
            return NegPredicate(self.ident())
        if self._at_operator("F"):
            self.pos += 1
            iv = self.interval()
            return Eventually(self.parse_unary(), iv)
        if self._at_operator("G"):
            self.pos += 1
            iv = self.interval()
            return Always(self.parse_unary(), iv)
        name = self.ident()
        if name == "T":
            return TrueFormula()
        return Predicate(name)


def parse(text: str) -> Formula:
    """Parse formula text, raising FormulaError with a position on bad input."""
    p = _Parser(text)
    phi = p.parse_or()
    p.skip_ws()
    if p.pos != len(text):
        p.error("unexpected trailing input")
    return phi


# ---------------------------------------------------------------------------
# Printing


_PREC_OR, _PREC_AND, _PREC_UNTIL, _PREC_UNARY = 0, 1, 2, 3


def _fmt_num(x: float) -> str:
    return "%.17g" % x if x != int(x) else "%d" % int(x)


def _format(phi: Formula, ctx: int) -> str:
    if isinstance(phi, TrueFormula):
        return "T"
    if isinstance(phi, Predicate):
        return phi.name
    if isinstance(phi, NegPredicate):
        return "!" + phi.name
    if isinstance(phi, Or):
        text = " | ".join(_format(c, _PREC_OR + 1) for c in phi.children)
        prec = _PREC_OR
    elif isinstance(phi, And):
        text = " & ".join(_format(c, _PREC_AND + 1) for c in phi.children)
        prec = _PREC_AND
    elif isinstance(phi, Until):
        text = "%s U%s %s" % (
            _format(phi.left, _PREC_UNTIL + 1),
            phi.interval,
            _format(phi.right, _PREC_UNTIL + 1),
        )
        prec = _PREC_UNTIL
    elif isinstance(phi, Eventually):
        text = "F%s %s" % (phi.interval, _format(phi.child, _PREC_UNARY))
        prec = _PREC_UNARY
    elif isinstance(phi, Always):
        text = "G%s %s" % (phi.interval, _format(phi.child, _PREC_UNARY))
        prec = _PREC_UNARY
    else:
        raise TypeError("not a formula: %r" % (phi,))
    if prec < ctx:
        return "(" + text + ")"
    return text


# ---------------------------------------------------------------------------
# Desired form


def _count_nodes(phi: Formula) -> int:
    if isinstance(phi, (And, Or)):
        return 1 + sum(_count_nodes(c) for c in phi.children)
    if isinstance(phi, Until):
        return 1 + _count_nodes(phi.left) + _count_nodes(phi.right)
    if isinstance(phi, (Eventually, Always)):
        return 1 + _count_nodes(phi.child)
    return 1


def to_desired_form(phi: Formula) -> Formula:
    """Rewrite into the form accepted by tree construction.

    The result contains no Until operator, every disjunction sits above
    all conjunctions and temporal operators, and in particular no Always
    has a disjunction anywhere beneath it without an intervening
    conjunction pulled apart.  Rewrites used:

      phi1 U[a,b] phi2      ->  G[0,b] phi1 & F[a,b] phi2
      F[a,b](phi1 | phi2)   ->  F[a,b] phi1 | F[a,b] phi2   (same for G)
      phi & (psi1 | psi2)   ->  (phi & psi1) | (phi & psi2)

    The rewrite is idempotent.  A FormulaError is raised if distribution
    would exceed MAX_DESIRED_FORM_NODES nodes.
    """
    out = _desire(phi)
    if _count_nodes(out) > MAX_DESIRED_FORM_NODES:
        raise FormulaError(
            "desired-form rewrite exceeds %d nodes" % MAX_DESIRED_FORM_NODES
        )
    return out


def _desire(phi: Formula) -> Formula:
    if isinstance(phi, (TrueFormula, Predicate, NegPredicate)):
        return phi
    if isinstance(phi, Until):
        rewritten = conj(
            [
                Always(phi.left, Interval(0.0, phi.interval.hi)),
                Eventually(phi.right, phi.interval),
            ]
        )
        return _desire(rewritten)
    if isinstance(phi, (Eventually, Always)):
        child = _desire(phi.child)
        op = type(phi)
        if isinstance(child, Or):
            return disj([op(c, phi.interval) for c in child.children])
        return op(child, phi.interval)
    if isinstance(phi, Or):
        return disj([_desire(c) for c in phi.children])
    if isinstance(phi, And):
        groups = []
        for c in phi.children:
            d = _desire(c)
            groups.append(d.children if isinstance(d, Or) else (d,))
        n_combos = 1
        for g in groups:
            n_combos *= len(g)
        if n_combos > MAX_DESIRED_FORM_NODES:
            raise FormulaError(
                "desired-form rewrite exceeds %d nodes" % MAX_DESIRED_FORM_NODES
            )
        combos = [conj(list(combo)) for combo in product(*groups)]
        return disj(combos)
    raise TypeError("not a formula: %r" % (phi,))


def is_desired_form(phi: Formula, top: bool = True) -> bool:
    """Check the structural invariants produced by to_desired_form."""
    if isinstance(phi, (TrueFormula, Predicate, NegPredicate)):
        return True
    if isinstance(phi, Until):
        return False
    if isinstance(phi, Or):
        return top and all(is_desired_form(c, top=False) for c in phi.children)
    if isinstance(phi, And):
        return all(is_desired_form(c, top=False) for c in phi.children)
    if isinstance(phi, (Eventually, Always)):
        return is_desired_form(phi.child, top=False)
    return False


# ---------------------------------------------------------------------------
# Horizon


def horizon(phi: Formula) -> float:
    """Largest future time the formula can reference, from nesting of
    the temporal interval upper bounds."""
    if isinstance(phi, (TrueFormula, Predicate, NegPredicate)):
        return 0.0
    if isinstance(phi, (And, Or)):
        return max(horizon(c) for c in phi.children)
    if isinstance(phi, Until):
        return phi.interval.hi + max(horizon(phi.left), horizon(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.interval.hi + horizon(phi.child)
    raise TypeError("not a formula: %r" % (phi,))
