"""Recursive-descent parser for the formula language.

Grammar (whitespace-insensitive)::

    formula := quant | sum
    quant   := ("sup"|"inf") IDENT ":" "D" INT "." formula
    sum     := prod { ("+" | "-.") prod }
    prod    := RATIONAL "*" prim | prim
    prim    := "abs(" formula ")" | "max(" formula "," formula ")"
             | "min(" formula "," formula ")" | atom | RATIONAL | "(" formula ")"
    atom    := ("norm2"|"normInf"|"retr"|"imtr"|"abstr"|"norm") "(" term ")"
    term    := "I" | "0" | IDENT | "adj(" term ")" | "add(" term "," term ")"
             | "sub(" term "," term ")" | "mul(" term "," term ")"
             | "comm(" term "," term ")" | "smul(" CRATIONAL "," term ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..errors import ParseError, ValidationError
from .ast import (
    ATOMS, Abs, Add, Adj, Atom, Const, CRational, Formula, Max, Min, Minus,
    Mul, One, Plus, Quant, Scale, SMul, TruncSub, Var, Zero, comm,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<tsub>-\.)
  | (?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>[-+*(),:.])
    """,
    re.VERBOSE,
)

KEYWORDS = {"sup", "inf", "abs", "max", "min", "I", "adj", "add", "sub", "mul", "comm", "smul"} | ATOMS
TERM_ARITY = {"adj": 1, "add": 2, "sub": 2, "mul": 2, "comm": 2}
FORMULA_ARITY = {"abs": 1, "max": 2, "min": 2}


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, sym, tsub, end
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


def _rational(tok: Token) -> Fraction:
    num, _, den = tok.text.partition("/")
    value = Fraction(num)
    if den:
        if int(den) == 0:
            raise ParseError("zero denominator", tok.pos)
        value /= int(den)
    return value


class _Parser:
    def __init__(self, text: str, free: dict):
        self.toks = tokenize(text)
        self.i = 0
        self.free = free
        self.bound: set[str] = set()
        self.scope: list[str] = []
        self.used_free: set[str] = set()

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset=1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "tsub") and self.tok.text == text

    def expect(self, text: str, what=None) -> Token:
        if not self.at(text):
            raise ParseError(what or f"expected {text!r}, found {self.tok.text or 'end of input'!r}", self.tok.pos)
        return self.advance()

    def call_open(self, name: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text == name and self.peek().text == "("

    # -- formulas
    def formula(self):
        if self.tok.kind == "end" or self.tok.text in (")", ","):
            raise ParseError("expected formula", self.tok.pos)
        if self.tok.kind == "ident" and self.tok.text in ("sup", "inf") and self.peek().text != "(":
            return self.quant()
        return self.sum()

    def quant(self):
        kind = self.advance().text
        if self.tok.kind != "ident" or self.tok.text in KEYWORDS:
            raise ParseError(f"expected variable name after {kind!r}", self.tok.pos)
        var_tok = self.advance()
        var = var_tok.text
        self.expect(":", "expected ':' after quantified variable")
        dom = self.tok
        m = re.fullmatch(r"D(\d+)", dom.text) if dom.kind == "ident" else None
        if m is None:
            raise ParseError("expected domain 'D<k>'", dom.pos)
        k = int(m.group(1))
        if k < 1:
            raise ParseError("domain index must be a positive integer", dom.pos)
        self.advance()
        self.expect(".", "expected '.' after domain")
        if var in self.bound or var in self.free:
            raise ParseError(f"variable {var} bound twice", var_tok.pos)
        self.bound.add(var)
        if self.tok.kind == "end" or self.tok.text in (")", ","):
            raise ParseError("expected formula after '.'", self.tok.pos)
        self.scope.append(var)
        body = self.formula()
        self.scope.pop()
        return Quant(kind, var, k, body)

    def sum(self):
        node = self.prod()
        while self.at("+") or self.at("-."):
            op = self.advance().text
            right = self.prod()
            node = Add(node, right) if op == "+" else TruncSub(node, right)
        return node

    def prod(self):
        if self.tok.kind == "num" and self.peek().text == "*":
            factor = _rational(self.advance())
            self.advance()
            return Scale(factor, self.prim())
        return self.prim()

    def prim(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Const(_rational(tok))
        if self.at("("):
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        if tok.kind == "ident" and self.peek().text == "(":
            name = tok.text
            if name in ATOMS:
                self.advance()
                self.advance()
                t = self.term()
                self.expect(")", f"expected ')' closing {name}(...)")
                return Atom(name, t)
            if name in FORMULA_ARITY:
                self.advance()
                self.advance()
                args = self.args(self.formula, name, FORMULA_ARITY[name], tok.pos)
                return {"abs": Abs, "max": Max, "min": Min}[name](*args)
            if name in TERM_ARITY or name == "smul":
                raise ParseError(f"term constructor {name!r} used where a formula is expected", tok.pos)
            raise ParseError(f"unknown identifier {name!r}", tok.pos)
        if tok.kind == "ident":
            raise ParseError(f"unknown identifier {tok.text!r} in formula position", tok.pos)
        if tok.kind == "end":
            raise ParseError("unexpected end of input", tok.pos)
        raise ParseError(f"unexpected {tok.text!r}", tok.pos)

    def args(self, parse_one, name, arity, pos):
        out = [parse_one()]
        while self.at(","):
            self.advance()
            out.append(parse_one())
        if len(out) != arity:
            raise ParseError(f"arity mismatch: {name} expects {arity} argument(s), got {len(out)}", pos)
        self.expect(")", f"expected ')' closing {name}(...)")
        return out

    # -- terms
    def term(self):
        tok = self.tok
        if tok.kind == "num":
            if tok.text != "0":
                raise ParseError("numeric literal in term position must be 0 (use smul)", tok.pos)
            self.advance()
            return Zero()
        if tok.kind != "ident":
            raise ParseError("expected term", tok.pos)
        name = tok.text
        if self.peek().text == "(":
            self.advance()
            self.advance()
            if name == "smul":
                c = self.crational()
                self.expect(",", "expected ',' after smul scalar")
                arg = self.term()
                self.expect(")", "expected ')' closing smul(...)")
                return SMul(c, arg)
            if name in TERM_ARITY:
                a = self.args(self.term, name, TERM_ARITY[name], tok.pos)
                if name == "adj":
                    return Adj(a[0])
                if name == "comm":
                    return comm(*a)
                return {"add": Plus, "sub": Minus, "mul": Mul}[name](*a)
            raise ParseError(f"unknown identifier {name!r}", tok.pos)
        self.advance()
        if name == "I":
            return One()
        if name in KEYWORDS:
            raise ParseError(f"unknown identifier {name!r} in term position", tok.pos)
        if name not in self.scope:
            if name in self.bound:
                raise ParseError(f"variable {name} used outside its quantifier", tok.pos)
            if name not in self.free:
                raise ParseError(f"free variable {name} has no domain declaration", tok.pos)
            self.used_free.add(name)
        return Var(name)

    def crational(self) -> CRational:
        tok = self.tok
        if tok.kind != "num":
            raise ParseError("expected rational scalar", tok.pos)
        self.advance()
        first = _rational(tok)
        if self.at("*") and self.peek().text == "i":
            self.advance()
            self.advance()
            return CRational(0, first)
        signed = self.tok.kind == "num" and self.tok.text.startswith("-")
        if signed or (self.at("+") and self.peek().kind == "num"):
            if not signed:
                self.advance()
            im_tok = self.advance()
            if not signed and im_tok.text.startswith("-"):
                raise ParseError("malformed complex scalar", im_tok.pos)
            sign = 1
            if not (self.at("*") and self.peek().text == "i"):
                raise ParseError("expected '*i' after imaginary part", self.tok.pos)
            self.advance()
            self.advance()
            return CRational(first, sign * _rational(im_tok))
        return CRational(first)


def parse_formula(text: str, sig=None, free=None) -> Formula:
    """Parse ``text`` into a :class:`Formula`.

    ``free`` maps free-variable names to their domain index; any other
    unbound variable is an error.  When ``sig`` is given the result is also
    validated against it and a :class:`ValidationError` lists the violations.
    """
    free = dict(free or {})
    p = _Parser(text, free)
    root = p.formula()
    if p.tok.kind != "end":
        raise ParseError(f"unexpected {p.tok.text!r} after formula", p.tok.pos)
    f = Formula(root, tuple((n, free[n]) for n in p.used_free))
    if sig is not None:
        from .checks import validate

        report = validate(f, sig)
        if not report.ok:
            raise ValidationError(report.violations)
    return f
