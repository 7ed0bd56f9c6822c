"""Canonical text rendering; ``parse_formula`` inverts it exactly."""

from __future__ import annotations

from fractions import Fraction

from .ast import (
    Abs, Add, Adj, Atom, Const, CRational, Formula, Max, Min, Minus, Mul, One,
    Plus, Quant, Scale, SMul, TruncSub, Var, Zero,
)


def rational_text(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def scalar_text(c: CRational) -> str:
    if c.im == 0:
        return rational_text(c.re)
    sign = "+" if c.im > 0 else "-"
    return f"{rational_text(c.re)}{sign}{rational_text(abs(c.im))}*i"


def print_term(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, One):
        return "I"
    if isinstance(t, Zero):
        return "0"
    if isinstance(t, Adj):
        return f"adj({print_term(t.arg)})"
    if isinstance(t, Plus):
        return f"add({print_term(t.left)},{print_term(t.right)})"
    if isinstance(t, Minus):
        a, b = t.left, t.right
        # re-sugar commutators so that parse(print(t)) == t
        if isinstance(a, Mul) and isinstance(b, Mul) and a.left == b.right and a.right == b.left:
            return f"comm({print_term(a.left)},{print_term(a.right)})"
        return f"sub({print_term(a)},{print_term(b)})"
    if isinstance(t, Mul):
        return f"mul({print_term(t.left)},{print_term(t.right)})"
    if isinstance(t, SMul):
        return f"smul({scalar_text(t.scalar)},{print_term(t.arg)})"
    raise TypeError(f"not a term: {t!r}")


def _formula(n) -> str:
    if isinstance(n, Quant):
        return f"{n.kind} {n.var}:D{n.k} . {_formula(n.body)}"
    return _sum(n)


def _sum(n) -> str:
    if isinstance(n, Add):
        return f"{_sum(n.left)} + {_prod(n.right)}"
    if isinstance(n, TruncSub):
        return f"{_sum(n.left)} -. {_prod(n.right)}"
    return _prod(n)


def _prod(n) -> str:
    if isinstance(n, Scale):
        return f"{rational_text(n.factor)} * {_prim(n.arg)}"
    return _prim(n)


def _prim(n) -> str:
    if isinstance(n, Atom):
        return f"{n.kind}({print_term(n.term)})"
    if isinstance(n, Const):
        return rational_text(n.value)
    if isinstance(n, Abs):
        return f"abs({_formula(n.arg)})"
    if isinstance(n, Max):
        return f"max({_formula(n.left)}, {_formula(n.right)})"
    if isinstance(n, Min):
        return f"min({_formula(n.left)}, {_formula(n.right)})"
    return f"({_formula(n)})"


def print_formula(f) -> str:
    """Render a ``Formula`` (or a bare node) in the canonical concrete syntax.

    Free-variable domains are not part of the text; pass them to
    ``parse_formula`` separately.
    """
    root = f.root if isinstance(f, Formula) else f
    return _formula(root)
