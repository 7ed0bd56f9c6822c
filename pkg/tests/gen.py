"""Seeded random quantifier-free formulas and valuations for equivalence checks."""

from __future__ import annotations

import random
from fractions import Fraction

from contmodel.formula import (
    Abs, Add, Adj, Atom, Const, CRational, Formula, Max, Min, Minus, Mul, One, Plus, Scale, SMul,
    TruncSub, Var, Zero,
)
from contmodel.models import MatrixModel, sample_domain

NAMES = ("a", "b")


def _rat(rng, lo=-2, hi=2):
    return Fraction(rng.randint(lo * 6, hi * 6), rng.choice([1, 2, 3, 6]))


def random_term(rng, algebra, depth=3):
    leaves = [Var(n) for n in NAMES] + ([One(), Zero()] if algebra else [Zero()])
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(leaves)
    kinds = ["add", "sub", "smul"] + (["adj", "mul"] if algebra else [])
    kind = rng.choice(kinds)
    if kind == "adj":
        return Adj(random_term(rng, algebra, depth - 1))
    if kind == "smul":
        c = CRational(_rat(rng), _rat(rng) if algebra else 0)
        return SMul(c, random_term(rng, algebra, depth - 1))
    cls = {"add": Plus, "sub": Minus, "mul": Mul}[kind]
    return cls(random_term(rng, algebra, depth - 1), random_term(rng, algebra, depth - 1))


def random_qf(rng, algebra, depth=3):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.2:
            return Const(abs(_rat(rng)))
        kind = rng.choice(["norm2", "normInf", "retr", "imtr", "abstr"]) if algebra else "norm"
        return Atom(kind, random_term(rng, algebra))
    kind = rng.choice(["add", "tsub", "abs", "max", "min", "scale"])
    if kind == "abs":
        return Abs(random_qf(rng, algebra, depth - 1))
    if kind == "scale":
        return Scale(abs(_rat(rng)), random_qf(rng, algebra, depth - 1))
    cls = {"add": Add, "tsub": TruncSub, "max": Max, "min": Min}[kind]
    return cls(random_qf(rng, algebra, depth - 1), random_qf(rng, algebra, depth - 1))


def qf_cases(m, count=20, seed=0):
    """``count`` pairs (formula, valuation) on model ``m``."""
    rng = random.Random(seed)
    algebra = isinstance(m, MatrixModel)
    out = []
    for i in range(count):
        k = rng.randint(1, 2)
        f = Formula(random_qf(rng, algebra), tuple((n, k) for n in NAMES))
        v = {n: sample_domain(m, k, seed * 1000 + 2 * i + j) for j, n in enumerate(NAMES)}
        out.append((f, v))
    return out
