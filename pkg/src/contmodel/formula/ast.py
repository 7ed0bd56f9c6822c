"""Immutable syntax trees for continuous-logic terms and formulas.

Terms denote elements of a model; formulas denote real numbers.  Every node is a
frozen dataclass, so structural identity is plain ``==`` and trees can be
shared freely between threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union


class Signature(str, enum.Enum):
    TRACIAL = "tracial-algebra"
    NORMED = "normed-space"


TRACIAL_ATOMS = frozenset({"norm2", "normInf", "retr", "imtr", "abstr"})
NORMED_ATOMS = frozenset({"norm"})
ATOMS = TRACIAL_ATOMS | NORMED_ATOMS

# Term constructors that only make sense in a *-algebra.
ALGEBRA_ONLY_TERMS = frozenset({"I", "adj", "mul"})


@dataclass(frozen=True)
class CRational:
    """Complex number with exact rational parts."""

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __abs__(self) -> float:
        return abs(complex(self))


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class One:
    """The unit I of an algebra."""


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Adj:
    arg: "Term"


@dataclass(frozen=True)
class Plus:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Minus:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class SMul:
    scalar: CRational
    arg: "Term"


Term = Union[Var, One, Zero, Adj, Plus, Minus, Mul, SMul]


def comm(a: Term, b: Term) -> Term:
    """Commutator ab - ba, the expansion of the ``comm`` sugar."""
    return Minus(Mul(a, b), Mul(b, a))


def term_children(t: Term) -> tuple:
    if isinstance(t, (Adj, SMul)):
        return (t.arg,)
    if isinstance(t, (Plus, Minus, Mul)):
        return (t.left, t.right)
    return ()


def term_vars(t: Term) -> Iterator[str]:
    if isinstance(t, Var):
        yield t.name
    for c in term_children(t):
        yield from term_vars(c)


# ------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Atom:
    kind: str
    term: Term


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class TruncSub:
    """Truncated subtraction ``max(left - right, 0)``."""

    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Abs:
    arg: "Node"


@dataclass(frozen=True)
class Max:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Min:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Scale:
    factor: Fraction
    arg: "Node"

    def __post_init__(self):
        object.__setattr__(self, "factor", Fraction(self.factor))


@dataclass(frozen=True)
class Quant:
    kind: str  # "sup" or "inf"
    var: str
    k: int
    body: "Node"


Node = Union[Atom, Const, Add, TruncSub, Abs, Max, Min, Scale, Quant]
BINARY = (Add, TruncSub, Max, Min)


def children(n: Node) -> tuple:
    if isinstance(n, BINARY):
        return (n.left, n.right)
    if isinstance(n, (Abs, Scale)):
        return (n.arg,)
    if isinstance(n, Quant):
        return (n.body,)
    return ()


def walk(n: Node) -> Iterator[Node]:
    """Pre-order traversal of formula nodes (terms are not visited)."""
    yield n
    for c in children(n):
        yield from walk(c)


def quantifiers(n: Node) -> list[Quant]:
    return [q for q in walk(n) if isinstance(q, Quant)]


def is_quantifier_free(n: Node) -> bool:
    return not quantifiers(n)


@dataclass(frozen=True)
class Formula:
    """A formula together with the domain indices of its free variables.

    ``free`` holds ``(name, k)`` pairs sorted by name.  A sentence has none.
    """

    root: Node
    free: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(sorted((str(n), int(k)) for n, k in self.free)))

    @property
    def is_sentence(self) -> bool:
        return not self.free

    @property
    def free_domains(self) -> dict:
        return dict(self.free)

    def __str__(self) -> str:
        from .printer import print_formula

        return print_formula(self)


def prefix(n: Node) -> tuple[list[Quant], Node]:
    """Split a formula into its leading quantifier block and the rest."""
    qs = []
    while isinstance(n, Quant):
        qs.append(n)
        n = n.body
    return qs, n


def alternation_depth(n: Node) -> int:
    """Number of sup/inf blocks along the deepest nesting path.

    Consecutive quantifiers of the same kind form one block; zero for
    quantifier-free formulas.
    """

    def go(node, last):
        if isinstance(node, Quant):
            step = 0 if node.kind == last else 1
            return step + go(node.body, node.kind)
        return max((go(c, last) for c in children(node)), default=0)

    return go(n, None)
