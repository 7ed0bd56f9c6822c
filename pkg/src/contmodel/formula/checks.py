"""Signature validation and structural range bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    NORMED_ATOMS, TRACIAL_ATOMS, Abs, Add, Adj, Atom, Const, Formula, Max, Min,
    Minus, Mul, One, Plus, Quant, Scale, Signature, SMul, TruncSub, Var, Zero,
    term_children,
)
from .printer import scalar_text


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


def _check_term(t, sig, scope, out):
    if isinstance(t, Var):
        if t.name not in scope:
            out.append(f"unbound variable {t.name}")
    elif sig is Signature.NORMED:
        if isinstance(t, One):
            out.append("term constructor I undefined in signature")
        elif isinstance(t, Adj):
            out.append("term constructor adj undefined in signature")
        elif isinstance(t, Mul):
            out.append("term constructor mul undefined in signature")
        elif isinstance(t, SMul) and not t.scalar.is_real:
            out.append(f"complex scalar {scalar_text(t.scalar)} undefined in signature")
    for c in term_children(t):
        _check_term(c, sig, scope, out)


def validate(f, sig) -> ValidationReport:
    """Check scoping, atom/term availability and parameter constraints.

    Never raises; every problem found is reported.
    """
    sig = Signature(sig)
    root = f.root if isinstance(f, Formula) else f
    free = dict(f.free) if isinstance(f, Formula) else {}
    out: list[str] = []
    atoms = TRACIAL_ATOMS if sig is Signature.TRACIAL else NORMED_ATOMS
    for name, k in free.items():
        if k < 1:
            out.append(f"domain index of free variable {name} must be positive")
    seen_bound: set[str] = set()

    def go(n, scope):
        if isinstance(n, Atom):
            if n.kind not in atoms:
                out.append(f"atom {n.kind} undefined in signature")
            _check_term(n.term, sig, scope, out)
        elif isinstance(n, Quant):
            if n.kind not in ("sup", "inf"):
                out.append(f"unknown quantifier {n.kind}")
            if n.k < 1:
                out.append(f"domain index of {n.var} must be positive")
            if n.var in seen_bound or n.var in free:
                out.append(f"variable {n.var} bound twice")
            seen_bound.add(n.var)
            go(n.body, scope | {n.var})
        elif isinstance(n, Scale):
            if n.factor < 0:
                out.append(f"negative scale factor {n.factor}")
            go(n.arg, scope)
        elif isinstance(n, Abs):
            go(n.arg, scope)
        elif isinstance(n, (Add, TruncSub, Max, Min)):
            go(n.left, scope)
            go(n.right, scope)
        elif not isinstance(n, Const):
            out.append(f"unknown formula node {type(n).__name__}")

    go(root, frozenset(free))
    # keep first occurrence order, drop repeats
    return ValidationReport(list(dict.fromkeys(out)))


@dataclass(frozen=True)
class RangeInterval:
    lo: float
    hi: float

    def contains(self, value, slack=0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack


def term_bound(t, bounds: dict) -> float:
    """Upper bound on the uniform norm of ``t`` given bounds for its variables.

    Uses the triangle inequality and submultiplicativity; for normed spaces
    the same rules bound the norm.
    """
    if isinstance(t, Var):
        return float(bounds[t.name])
    if isinstance(t, One):
        return 1.0
    if isinstance(t, Zero):
        return 0.0
    if isinstance(t, Adj):
        return term_bound(t.arg, bounds)
    if isinstance(t, (Plus, Minus)):
        return term_bound(t.left, bounds) + term_bound(t.right, bounds)
    if isinstance(t, Mul):
        return term_bound(t.left, bounds) * term_bound(t.right, bounds)
    if isinstance(t, SMul):
        return abs(t.scalar) * term_bound(t.arg, bounds)
    raise TypeError(f"not a term: {t!r}")


def _range(n, bounds) -> tuple[float, float]:
    if isinstance(n, Atom):
        b = term_bound(n.term, bounds)
        if n.kind in ("retr", "imtr"):
            return -b, b
        return 0.0, b
    if isinstance(n, Const):
        v = float(n.value)
        return v, v
    if isinstance(n, Quant):
        return _range(n.body, {**bounds, n.var: n.k})
    if isinstance(n, Scale):
        lo, hi = _range(n.arg, bounds)
        c = float(n.factor)
        return c * lo, c * hi
    if isinstance(n, Abs):
        lo, hi = _range(n.arg, bounds)
        if lo >= 0:
            return lo, hi
        if hi <= 0:
            return -hi, -lo
        return 0.0, max(-lo, hi)
    l1, h1 = _range(n.left, bounds)
    l2, h2 = _range(n.right, bounds)
    if isinstance(n, Add):
        return l1 + l2, h1 + h2
    if isinstance(n, TruncSub):
        return max(l1 - h2, 0.0), max(h1 - l2, 0.0)
    if isinstance(n, Max):
        return max(l1, l2), max(h1, h2)
    if isinstance(n, Min):
        return min(l1, l2), min(h1, h2)
    raise TypeError(f"not a formula node: {n!r}")


def range_of(f) -> RangeInterval:
    """Interval containing every value ``f`` can take on any conforming model."""
    root = f.root if isinstance(f, Formula) else f
    free = dict(f.free) if isinstance(f, Formula) else {}
    return RangeInterval(*_range(root, free))
