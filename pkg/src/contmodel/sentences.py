"""Library of sentences and the frozen evaluation panels built from them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .formula.ast import (
    Add, Adj, Atom, Const, Formula, Minus, Mul, One, Plus, Quant, Scale, Signature,
    SMul, TruncSub, CRational, Var, comm,
)
from .formula.checks import validate
from .formula.parser import parse_formula
from .formula.printer import print_formula

PANEL_VERSION = "panel.v1"


@dataclass(frozen=True)
class SentenceId:
    name: str
    formula: Formula
    signature: Signature
    note: str = ""  # provenance label, e.g. "artifact-designed"

    def __post_init__(self):
        report = validate(self.formula, self.signature)
        if not report.ok:
            raise ValueError(f"{self.name}: {report}")

    @property
    def text(self) -> str:
        return print_formula(self.formula)

    @property
    def universal(self) -> bool:
        """True when the only quantifiers are sups."""
        return "inf " not in self.text.replace("(", " ")


def _sum(*nodes):
    out = nodes[0]
    for n in nodes[1:]:
        out = Add(out, n)
    return out


def _norm2(t):
    return Atom("norm2", t)


def _absdiff_one(node):
    """|node - 1| written with truncated subtraction."""
    return Add(TruncSub(node, Const(1)), TruncSub(Const(1), node))


def _sup_block(names, body, kind="sup", k=1):
    for name in reversed(names):
        body = Quant(kind, name, k, body)
    return body


def sigma(n: int) -> SentenceId:
    """sup over x_1..x_n of inf over y of
    ||y*y - I||_2 + |tau(y)| + sum_j ||[x_j, y]||_2, all in the unit ball."""
    if n < 1:
        raise ValueError("n must be at least 1")
    y = Var("y")
    xs = [f"x{j}" for j in range(1, n + 1)]
    body = _sum(_norm2(Minus(Mul(Adj(y), y), One())), Atom("abstr", y),
                *[_norm2(comm(Var(x), y)) for x in xs])
    return SentenceId(f"sigma.{n}", Formula(_sup_block(xs, Quant("inf", "y", 1, body))), Signature.TRACIAL)


def sigma_prime(n: int) -> SentenceId:
    """sup over x_1..x_n of inf over y of
    ||yy*y - y||_2 + ||y*y + yy* - I||_2 + sum_j ||[x_j, y]||_2."""
    if n < 1:
        raise ValueError("n must be at least 1")
    y = Var("y")
    xs = [f"x{j}" for j in range(1, n + 1)]
    body = _sum(_norm2(Minus(Mul(Mul(y, Adj(y)), y), y)),
                _norm2(Minus(Plus(Mul(Adj(y), y), Mul(y, Adj(y))), One())),
                *[_norm2(comm(Var(x), y)) for x in xs])
    return SentenceId(f"sigmaPrime.{n}", Formula(_sup_block(xs, Quant("inf", "y", 1, body))), Signature.TRACIAL)


def _psi_body():
    x, y = Var("x"), Var("y")
    half = CRational(Fraction(1, 2))
    return _sum(_absdiff_one(Atom("norm", x)), _absdiff_one(Atom("norm", y)),
                _absdiff_one(Atom("norm", SMul(half, Plus(x, y)))),
                _absdiff_one(Atom("norm", SMul(half, Minus(x, y)))))


def psi() -> SentenceId:
    """inf over unit-ball pairs of the distance from spanning a unit square."""
    return SentenceId("psi", Formula(_sup_block(["x", "y"], _psi_body(), "inf")), Signature.NORMED)


def psi_negated() -> SentenceId:
    """Sup-sentence with value 4 - psi; the body of psi never exceeds 4 on the unit ball."""
    body = TruncSub(Const(4), _psi_body())
    return SentenceId("psi.neg", Formula(_sup_block(["x", "y"], body)), Signature.NORMED,
                      "value is 4 - psi")


def comm_sup() -> SentenceId:
    return SentenceId("comm.sup", Formula(_sup_block(["x", "y"], _norm2(comm(Var("x"), Var("y"))))),
                      Signature.TRACIAL)


def proj_third() -> SentenceId:
    """sup over p of 1/3 -. (||p - p*||_2 + ||p^2 - p||_2 + |tau(p) - 1/3|)."""
    p = Var("p")
    penalty = _sum(_norm2(Minus(p, Adj(p))), _norm2(Minus(Mul(p, p), p)),
                   Atom("abstr", Minus(p, SMul(CRational(Fraction(1, 3)), One()))))
    return SentenceId("proj.third", Formula(Quant("sup", "p", 1, TruncSub(Const(Fraction(1, 3)), penalty))),
                      Signature.TRACIAL, "artifact-designed; not a sentence from the source text")


def traceless_unitary() -> SentenceId:
    y = Var("y")
    body = Add(_norm2(Minus(Mul(Adj(y), y), One())), Atom("abstr", y))
    return SentenceId("traceless-unitary.inf", Formula(Quant("inf", "y", 1, body)), Signature.TRACIAL)


def moment_nilpotent() -> SentenceId:
    """Large elements with small square: sup_x ||x||_2 -. 4 ||x^2||_2."""
    x = Var("x")
    f = Quant("sup", "x", 1, TruncSub(_norm2(x), Scale(4, _norm2(Mul(x, x)))))
    return SentenceId("moment.nilpotent", Formula(f), Signature.TRACIAL, "artifact-designed moment probe")


def moment_normality() -> SentenceId:
    """Departure from normality: sup_x ||x x* - x* x||_2."""
    x = Var("x")
    f = Quant("sup", "x", 1, _norm2(comm(x, Adj(x))))
    return SentenceId("moment.normality", Formula(f), Signature.TRACIAL, "artifact-designed moment probe")


LIBRARY = {
    "sigma.1": lambda: sigma(1),
    "sigma.2": lambda: sigma(2),
    "sigma.3": lambda: sigma(3),
    "sigmaPrime.1": lambda: sigma_prime(1),
    "sigmaPrime.2": lambda: sigma_prime(2),
    "psi": psi,
    "psi.neg": psi_negated,
    "comm.sup": comm_sup,
    "proj.third": proj_third,
    "traceless-unitary.inf": traceless_unitary,
    "moment.nilpotent": moment_nilpotent,
    "moment.normality": moment_normality,
}


def by_name(name: str) -> SentenceId:
    """Library lookup; ``sigma.N`` and ``sigmaPrime.N`` work for any N >= 1."""
    if name in LIBRARY:
        return LIBRARY[name]()
    head, _, num = name.partition(".")
    if num.isdigit() and head in ("sigma", "sigmaPrime"):
        return (sigma if head == "sigma" else sigma_prime)(int(num))
    raise KeyError(f"unknown sentence {name!r}")


@dataclass(frozen=True)
class Panel:
    name: str
    sentences: tuple
    flag: str  # "full" or "universal"
    signature: Signature
    version: str = PANEL_VERSION

    def __post_init__(self):
        names = [s.name for s in self.sentences]
        if len(set(names)) != len(names):
            raise ValueError("sentence names must be unique within a panel")
        if self.flag not in ("full", "universal"):
            raise ValueError("panel flag must be 'full' or 'universal'")
        if self.flag == "universal" and not all(s.universal for s in self.sentences):
            raise ValueError("universal panels may only contain sup-sentences")
        if any(s.signature != self.signature for s in self.sentences):
            raise ValueError("all panel sentences must share the panel signature")

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.sentences]

    def __getitem__(self, name) -> SentenceId:
        for s in self.sentences:
            if s.name == name:
                return s
        raise KeyError(name)

    def subset(self, names) -> "Panel":
        return Panel(f"{self.name}[{','.join(names)}]", tuple(self[n] for n in names), self.flag,
                     self.signature, self.version)

    def export_text(self) -> str:
        head = f"# {self.name} {self.version} {self.flag} {self.signature.value}\n"
        return head + "".join(f"{s.name}\t{s.text}\n" for s in self.sentences)


def default_panel(kind: str = "full", signature=Signature.TRACIAL) -> Panel:
    signature = Signature(signature)
    if signature is Signature.TRACIAL:
        if kind == "full":
            items = (sigma(1), sigma(2), sigma_prime(1), comm_sup(), proj_third(), traceless_unitary())
        elif kind == "universal":
            items = (comm_sup(), proj_third(), moment_nilpotent(), moment_normality())
        else:
            raise ValueError(f"unknown panel kind {kind!r}")
    else:
        if kind == "full":
            items = (psi(), psi_negated())
        elif kind == "universal":
            items = (psi_negated(),)
        else:
            raise ValueError(f"unknown panel kind {kind!r}")
    short = "tracial" if signature is Signature.TRACIAL else "normed"
    return Panel(f"{short}.{kind}", items, kind, signature)


def import_panel(text: str) -> Panel:
    """Inverse of :meth:`Panel.export_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("panel file must start with a '# name version flag signature' header")
    name, version, flag, sig = lines[0][1:].split()
    signature = Signature(sig)
    items = []
    for ln in lines[1:]:
        sname, _, text_ = ln.partition("\t")
        f = parse_formula(text_.strip(), signature)
        note = by_name(sname).note if _known(sname) else ""
        items.append(SentenceId(sname, f, signature, note))
    return Panel(name, tuple(items), flag, signature, version)


def _known(name) -> bool:
    try:
        by_name(name)
    except KeyError:
        return False
    return True
