"""Sentence-value fingerprints of models, the order they induce, limits of
sentence values along model sequences, and matrix moment matching."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import PanelMismatchError
from .evaluator import EvalOptions, EvalResult, evaluate
from .formula.ast import Formula
from .models import Element, make_matrix_model, model_from_spec, moment_values, moments, words
from .sentences import Panel

EQUAL, LEQ, GEQ, INCOMPARABLE = "equal", "leq", "geq", "incomparable"
CSV_HEADER = ("n", "sentence", "value", "status")


# ------------------------------------------------------------ fingerprints


@dataclass(frozen=True, eq=False)
class Fingerprint:
    """Values of every panel sentence on one model."""

    panel: str
    version: str
    flag: str
    model: str
    seed: int
    results: dict  # sentence name -> EvalResult, in panel order
    options: EvalOptions = field(default_factory=EvalOptions)
    model_spec: dict = field(default_factory=dict)

    def value(self, name) -> float:
        return self.results[name].value

    @property
    def names(self) -> list[str]:
        return list(self.results)

    def to_json(self) -> dict:
        return {
            "panel": self.panel,
            "version": self.version,
            "flag": self.flag,
            "model": self.model,
            "model_spec": self.model_spec,
            "seed": self.seed,
            "entries": [{"sentence": name, "value": r.value, "status": r.status}
                        for name, r in self.results.items()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "Fingerprint":
        missing = {"panel", "version", "model", "seed", "entries"} - set(obj)
        if missing:
            raise ValueError(f"fingerprint is missing fields: {sorted(missing)}")
        results = {e["sentence"]: EvalResult(float(e["value"]), e["status"], seed=int(obj["seed"]))
                   for e in obj["entries"]}
        return cls(obj["panel"], obj["version"], obj.get("flag", ""), obj["model"], int(obj["seed"]), results,
                   model_spec=obj.get("model_spec", {}))

    @classmethod
    def loads(cls, text: str) -> "Fingerprint":
        return cls.from_json(json.loads(text))

    def same(self, other) -> bool:
        return (self.to_json() == other.to_json()
                and all(r.same(other.results[k]) for k, r in self.results.items()))


def fingerprint(m, panel: Panel, opts: EvalOptions | None = None) -> Fingerprint:
    """Evaluate every sentence of ``panel`` on ``m``."""
    opts = opts or EvalOptions()
    if panel.signature != m.signature:
        raise PanelMismatchError(
            f"panel {panel.name} is for {panel.signature.value} models, got a {m.signature.value} model")
    results = {s.name: evaluate(m, s.formula, opts) for s in panel.sentences}
    return Fingerprint(panel.name, panel.version, panel.flag, m.description, opts.seed, results, opts,
                       m.to_spec())


# ------------------------------------------------------------ order


@dataclass(frozen=True)
class OrderVerdict:
    verdict: str
    margins: dict  # sentence -> value(a) - value(b)
    tol: float

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "tol": self.tol,
                "margins": [{"sentence": k, "margin": v} for k, v in self.margins.items()]}


def compare_values(a: dict, b: dict, tol: float) -> OrderVerdict:
    """Order two name -> value maps over the same sentences."""
    if list(a) != list(b):
        raise PanelMismatchError("value maps cover different sentences")
    margins = {k: a[k] - b[k] for k in a}
    leq = all(d <= tol for d in margins.values())
    geq = all(d >= -tol for d in margins.values())
    if leq and geq:
        verdict = EQUAL
    elif leq:
        verdict = LEQ
    elif geq:
        verdict = GEQ
    else:
        verdict = INCOMPARABLE
    return OrderVerdict(verdict, margins, tol)


def compare_universal(a: Fingerprint, b: Fingerprint, tol: float = 1e-2) -> OrderVerdict:
    """Pointwise order of two sup-sentence fingerprints, with tolerance ``tol``.

    ``equal`` wins when both directions hold, so noise below ``tol`` never
    yields a strict verdict.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if (a.panel, a.version) != (b.panel, b.version) or a.names != b.names:
        raise PanelMismatchError(f"cannot compare {a.panel}/{a.version} with {b.panel}/{b.version}")
    if a.flag and a.flag != "universal":
        raise PanelMismatchError(f"panel {a.panel} is not a universal panel")
    return compare_values({k: a.value(k) for k in a.names}, {k: b.value(k) for k in b.names}, tol)


# ------------------------------------------------------------ limits along sequences


@dataclass(frozen=True)
class FilterProxy:
    """Computable stand-in for a limit along an ultrafilter.

    ``cofinite-limit`` reports the tail value only when the tail is Cauchy
    within ``tol``; ``subsequence`` restricts to the indices picked by
    ``selector`` and then behaves like ``cofinite-limit``; ``band`` reports
    the tail's [min, max], which contains every ultralimit once the tail
    window is large enough.
    """

    kind: str = "cofinite-limit"
    tol: float = 1e-2
    selector: Callable[[int], bool] | None = None

    def __post_init__(self):
        if self.kind not in ("cofinite-limit", "subsequence", "band"):
            raise ValueError(f"unknown filter proxy kind {self.kind!r}")
        if self.kind == "subsequence" and self.selector is None:
            raise ValueError("a subsequence proxy needs a selector")


@dataclass(frozen=True)
class LimitReport:
    kind: str
    value: float | None  # None when non-convergent, or for bands
    band: tuple
    convergent: bool
    indices: tuple
    values: tuple  # every evaluated value, indexed like ``indices``

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value, "band": list(self.band), "convergent": self.convergent,
                "indices": list(self.indices), "values": list(self.values)}


def ultralimit(seq: Callable[[int], object], f: Formula, proxy: FilterProxy, j_max: int,
               opts: EvalOptions | None = None, j_min: int = 1) -> LimitReport:
    """Evaluate ``f`` on ``seq(j)`` for ``j_min <= j <= j_max`` and summarize the tail."""
    if j_max < j_min:
        raise ValueError("j_max must be at least j_min")
    opts = opts or EvalOptions()
    idx = list(range(j_min, j_max + 1))
    if proxy.kind == "subsequence":
        idx = [j for j in idx if proxy.selector(j)]
        if not idx:
            raise ValueError("selector picks no index in range")
    vals = [evaluate(seq(j), f, opts).value for j in idx]
    window = max(1, math.ceil(len(idx) / 4))
    tail = vals[-window:]
    band = (min(tail), max(tail))
    if proxy.kind == "band":
        return LimitReport("band", None, band, band[1] - band[0] <= proxy.tol, tuple(idx), tuple(vals))
    cauchy = band[1] - band[0] <= proxy.tol
    return LimitReport(proxy.kind, tail[-1] if cauchy else None, band, cauchy, tuple(idx), tuple(vals))


@dataclass(frozen=True)
class ScanTable:
    rows: tuple  # (n, sentence, value, status)
    cauchy: dict  # sentence -> flag

    def column(self, sentence) -> list[float]:
        return [v for _, s, v, _ in self.rows if s == sentence]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for n, s, v, st in self.rows:
            w.writerow((n, s, repr(float(v)), st))
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": [{"n": n, "sentence": s, "value": v, "status": st} for n, s, v, st in self.rows],
                "cauchy": dict(self.cauchy)}


def convergence_scan(family: Callable[[int], object], panel: Panel, n_range: Iterable[int],
                     opts: EvalOptions | None = None) -> ScanTable:
    """Panel values along ``family(n)``; a sentence is flagged Cauchy when its
    successive differences over the last three ``n`` are below ten times the
    evaluator tolerance."""
    opts = opts or EvalOptions()
    ns = list(n_range)
    if not ns:
        raise ValueError("empty n range")
    rows, cols = [], {s.name: [] for s in panel.sentences}
    for n in ns:
        m = family(n)
        for s in panel.sentences:
            r = evaluate(m, s.formula, opts)
            rows.append((n, s.name, r.value, r.status))
            cols[s.name].append(r.value)
    flags = {}
    for name, col in cols.items():
        last = col[-3:]
        flags[name] = all(abs(a - b) < 10 * opts.tolerance for a, b in zip(last, last[1:]))
    return ScanTable(tuple(rows), flags)


# ------------------------------------------------------------ microstates


_LETTER = re.compile(r"x(\d+)(\*?)")


def _parse_label(label: str):
    word = []
    for part in label.split("."):
        mt = _LETTER.fullmatch(part)
        if not mt:
            raise ValueError(f"bad moment label {label!r}")
        word.append((int(mt.group(1)) - 1, bool(mt.group(2))))
    return tuple(word)


@dataclass(frozen=True)
class MicrostateResult:
    success: bool
    deviation: float  # max |moment(candidate) - target| over the target words
    candidate: tuple  # Elements of M_k, in the unit ball
    steps: int

    def to_json(self) -> dict:
        return {"success": self.success, "deviation": self.deviation, "steps": self.steps,
                "candidate": [e.to_json() for e in self.candidate]}


def microstate_search(target: Sequence, k: int, eps: float, opts: EvalOptions | None = None,
                      max_steps: int = 10_000) -> MicrostateResult:
    """Look for a tuple in the unit ball of ``M_k`` whose moments match
    ``target`` (pairs ``(label, value)`` as produced by ``moments``) within ``eps``.

    Multi-start least squares; each start runs until the residual stalls.  The
    final candidate is projected into the ball before it is scored, so an
    unreachable target is reported as a failure rather than approximated
    outside the domain.
    """
    opts = opts or EvalOptions()
    if k < 1 or eps <= 0:
        raise ValueError("need k >= 1 and eps > 0")
    target = [(lab, complex(v)) for lab, v in target]
    if not target:
        raise ValueError("empty moment target")
    parsed = [_parse_label(lab) for lab, _ in target]
    count = 1 + max(i for w in parsed for i, _ in w)
    degree = max(len(w) for w in parsed)
    index = {w: j for j, w in enumerate(words(count, degree))}
    pick = np.array([index[w] for w in parsed])
    goal = np.array([v for _, v in target])
    m = make_matrix_model([(k, 1)])
    size = 2 * count * k * k

    def unpack(p):
        z = p[: size // 2] + 1j * p[size // 2:]
        return [(b,) for b in z.reshape(count, k, k)]

    def moments_of(tup):
        return moment_values(m, tup, degree)[pick]

    def residual(p):
        tup = unpack(p)
        d = moments_of(tup) - goal
        over = [max(m.norm_inf(x) - 1.0, 0.0) for x in tup]
        return np.concatenate([d.real, d.imag, 10.0 * np.array(over)])

    rng = np.random.default_rng(np.random.SeedSequence(opts.seed, spawn_key=(7,)))
    starts = max(1, min(opts.inner_restarts, 16))
    per = max(1, max_steps // starts)
    used = 0
    best = None
    for _ in range(starts):
        tup0 = [m.sample(rng, 1) for _ in range(count)]
        p0 = np.concatenate([np.concatenate([t[0].real.ravel() for t in tup0]),
                             np.concatenate([t[0].imag.ravel() for t in tup0])])
        sol = least_squares(residual, p0, max_nfev=per, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        used += sol.nfev
        tup = [m.project(t, 1) for t in unpack(sol.x)]
        dev = float(np.max(np.abs(moments_of(tup) - goal)))
        if best is None or dev < best[0]:
            best = (dev, tup)
        if dev <= eps or used >= max_steps:
            break
    dev, tup = best
    return MicrostateResult(dev <= eps, dev, tuple(Element(m, t, 1) for t in tup), used)


def moment_target(m, tup, degree: int) -> list:
    """Convenience wrapper for building microstate targets from Elements."""
    return moments(m, tup, degree)


def model_from_fingerprint(fp: Fingerprint):
    return model_from_spec(fp.model_spec)


__all__ = [
    "CSV_HEADER", "EQUAL", "GEQ", "INCOMPARABLE", "LEQ", "Fingerprint", "FilterProxy", "LimitReport",
    "MicrostateResult", "OrderVerdict", "ScanTable", "compare_universal", "compare_values",
    "convergence_scan", "fingerprint", "microstate_search", "model_from_fingerprint", "moment_target",
    "ultralimit",
]
