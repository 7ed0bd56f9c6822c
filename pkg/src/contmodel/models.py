"""Finite metric structures: tracial multi-matrix algebras and l_p direct sums.

Element data is a tuple of numpy arrays.  For a matrix model there is one
complex ``(n_i, n_i)`` block per summand; for a normed model a single real
vector of length ``sum(d_i)``.  All array operations accept arbitrary leading
batch dimensions, which is what lets the evaluator run many restarts at once.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import EvaluationError, SignatureError
from .formula.ast import (
    Adj, Minus, Mul, One, Plus, Signature, SMul, Var, Zero,
)
from .formula.checks import term_bound

WEIGHT_TOL = 1e-12
BALL_SLACK = 1e-9


# ------------------------------------------------------------ batch helpers


def expand(data, elem_ndim: int, axis: int):
    """Insert a new batch axis at ``axis`` (counted from the front)."""
    return tuple(np.expand_dims(a, axis) for a in data)


def select(mask, a, b, elem_ndim: int):
    """Elementwise choice between two batched data tuples."""
    m = np.asarray(mask)[(...,) + (None,) * elem_ndim]
    return tuple(np.where(m, x, y) for x, y in zip(a, b))


def take(data, index, axis: int, elem_ndim: int):
    """Pick one entry along batch ``axis``; ``index`` has the remaining batch shape."""
    out = []
    for a in data:
        idx = np.expand_dims(np.asarray(index), axis)[(...,) + (None,) * elem_ndim]
        out.append(np.take_along_axis(a, idx, axis=axis).squeeze(axis))
    return tuple(out)


def _haar_unitary(rng, shape, n):
    z = (rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return q * ph[..., None, :]


def _frozen(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


# ------------------------------------------------------------------ models


@dataclass(frozen=True)
class MatrixModel:
    """The tracial algebra of block-diagonal matrices, direct sum of M_{n_i}.

    The trace is ``tau(x) = sum_i w_i tr(x_i) / n_i`` with weights summing to 1.
    """

    sizes: tuple
    weights: tuple

    signature = Signature.TRACIAL
    elem_ndim = 2

    def __post_init__(self):
        if len(self.sizes) == 0 or len(self.sizes) != len(self.weights):
            raise ValueError("matrix model needs matching, non-empty sizes and weights")
        if any(int(n) != n or n < 1 for n in self.sizes):
            raise ValueError("summand sizes must be positive integers")
        if any(not w > 0 for w in self.weights):
            raise ValueError("summand weights must be positive")
        if abs(sum(self.weights) - 1) > WEIGHT_TOL:
            raise ValueError("weights must sum to 1; use make_matrix_model to normalize")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    # -- description
    @property
    def description(self) -> str:
        names = ["C" if n == 1 else f"M{n}" for n in self.sizes]
        base = "+".join(names)
        if len(set(self.weights)) > 1:
            base += "[" + ",".join(f"{w:.6g}" for w in self.weights) + "]"
        return base

    def to_spec(self) -> dict:
        return {"kind": "matrix", "summands": [{"n": n, "w": w} for n, w in zip(self.sizes, self.weights)]}

    @property
    def dim(self) -> int:
        """Real dimension of the underlying vector space."""
        return sum(2 * n * n for n in self.sizes)

    # -- constants and term operations
    def identity(self):
        return tuple(np.eye(n, dtype=complex) for n in self.sizes)

    def zero(self):
        return tuple(np.zeros((n, n), dtype=complex) for n in self.sizes)

    def adj(self, a):
        return tuple(np.conj(np.swapaxes(x, -1, -2)) for x in a)

    def add(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def sub(self, a, b):
        return tuple(x - y for x, y in zip(a, b))

    def mul(self, a, b):
        return tuple(x @ y for x, y in zip(a, b))

    def smul(self, c: complex, a):
        return tuple(c * x for x in a)

    # -- real-valued functionals
    def trace(self, a):
        """Normalized trace tau, batched."""
        return sum(w / n * np.trace(x, axis1=-2, axis2=-1) for x, n, w in zip(a, self.sizes, self.weights))

    def norm2(self, a):
        return np.sqrt(sum(w / n * np.sum(np.abs(x) ** 2, axis=(-2, -1))
                           for x, n, w in zip(a, self.sizes, self.weights)))

    def norm_inf(self, a):
        vals = []
        for x, n in zip(a, self.sizes):
            if n == 1:
                vals.append(np.abs(x[..., 0, 0]))
            else:
                vals.append(np.linalg.norm(x, ord=2, axis=(-2, -1)))
        return np.max(np.stack(np.broadcast_arrays(*vals)), axis=0)

    def atom(self, kind, a):
        if kind == "norm2":
            return self.norm2(a)
        if kind == "normInf":
            return self.norm_inf(a)
        if kind == "retr":
            return np.real(self.trace(a))
        if kind == "imtr":
            return np.imag(self.trace(a))
        if kind == "abstr":
            return np.abs(self.trace(a))
        raise SignatureError([f"atom {kind} undefined in signature"])

    size = norm_inf

    # -- domains
    def project(self, a, k):
        """Clip singular values of each block to at most ``k``."""
        out = []
        for x, n in zip(a, self.sizes):
            if n == 1:
                r = np.abs(x)
                out.append(np.where(r > k, x * (k / np.where(r > 0, r, 1)), x))
                continue
            # cheap test first: the Frobenius norm dominates the operator norm
            fro = np.sqrt(np.sum(np.abs(x) ** 2, axis=(-2, -1)))
            outside = fro > k
            if not np.any(outside):
                out.append(x)
                continue
            x = np.array(np.broadcast_to(x, np.broadcast_shapes(x.shape, outside.shape + (n, n))))
            sub = x[outside]
            s2, v = np.linalg.eigh(np.conj(np.swapaxes(sub, -1, -2)) @ sub)
            s = np.sqrt(np.clip(s2, 0, None))
            f = np.where(s > k, k / np.where(s > 0, s, 1), 1.0)
            x[outside] = sub @ (v * f[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
            out.append(x)
        return tuple(out)

    def sample(self, rng, k, shape=()):
        """Half interior draws (scaled Gaussian, then projected), half boundary
        draws.  A boundary draw is a Haar unitary times a random coordinate
        projection, or with probability 1/3 a unitary whose spectrum is the
        n-th roots of unity (times a phase) in a Haar-random basis, so its
        trace vanishes."""
        shape = tuple(shape)
        boundary = rng.random(shape) < 0.5
        balanced = rng.random(shape) < 1 / 3
        out = []
        for n in self.sizes:
            g = (rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))) / math.sqrt(2)
            radius = rng.random(shape)[..., None, None]
            interior = g * (k * radius / (2 * math.sqrt(n)) if n > 1 else k * radius / 0.9)
            u = _haar_unitary(rng, shape, n)
            w = _haar_unitary(rng, shape, n)
            keep = rng.random(shape + (n,)) < 0.5
            full = rng.random(shape) < 0.5
            keep = keep | full[..., None]
            proj = (w * keep[..., None, :]) @ np.conj(np.swapaxes(w, -1, -2))
            phase = np.exp(2j * math.pi * rng.random(shape))[..., None]
            spectrum = phase * np.exp(2j * math.pi * np.arange(n) / n)
            roots = (w * spectrum[..., None, :]) @ np.conj(np.swapaxes(w, -1, -2))
            edge = k * np.where(balanced[..., None, None], roots, u @ proj)
            out.append(np.where(boundary[..., None, None], edge, interior))
        return self.project(tuple(out), k)

    def perturb(self, rng, a, step):
        step = np.asarray(step)[..., None, None]
        out = []
        for x, n in zip(a, self.sizes):
            shape = np.broadcast_shapes(x.shape, step.shape[:-2] + (n, n))
            noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            out.append(x + noise * (step / math.sqrt(2 * n)))
        return tuple(out)

    def validate_data(self, data):
        if len(data) != len(self.sizes):
            return f"expected {len(self.sizes)} blocks, got {len(data)}"
        for x, n in zip(data, self.sizes):
            if np.shape(x)[-2:] != (n, n):
                return f"block of shape {np.shape(x)} does not match size {n}"
        return None


@dataclass(frozen=True)
class NormedModel:
    """Real l_2-direct sum of finite-dimensional l_p spaces."""

    parts: tuple  # ((p, d), ...), p may be math.inf

    signature = Signature.NORMED
    elem_ndim = 1

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ValueError("normed model needs at least one part")
        parts = []
        for p, d in self.parts:
            p = float(p)
            if not (p >= 1) or math.isnan(p):
                raise ValueError(f"invalid exponent p={p}; need 1 <= p <= inf")
            if int(d) != d or d < 1:
                raise ValueError(f"invalid dimension d={d}")
            parts.append((p, int(d)))
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def description(self) -> str:
        def p_text(p):
            return "inf" if math.isinf(p) else f"{p:g}"

        return "+".join(f"l{p_text(p)}^{d}" for p, d in self.parts)

    def to_spec(self) -> dict:
        return {"kind": "normed",
                "parts": [{"p": "inf" if math.isinf(p) else p, "d": d} for p, d in self.parts]}

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.parts)

    def identity(self):
        raise SignatureError(["term constructor I undefined in signature"])

    def zero(self):
        return (np.zeros(self.dim),)

    def adj(self, a):
        raise SignatureError(["term constructor adj undefined in signature"])

    def mul(self, a, b):
        raise SignatureError(["term constructor mul undefined in signature"])

    def add(self, a, b):
        return (a[0] + b[0],)

    def sub(self, a, b):
        return (a[0] - b[0],)

    def smul(self, c, a):
        c = complex(c)
        if c.imag != 0:
            raise SignatureError(["complex scalar undefined in signature"])
        return (c.real * a[0],)

    def norm(self, a):
        v = a[0]
        total, start = 0.0, 0
        for p, d in self.parts:
            block = np.abs(v[..., start:start + d])
            start += d
            if math.isinf(p):
                part = np.max(block, axis=-1)
            elif p == 1:
                part = np.sum(block, axis=-1)
            elif p == 2:
                part = np.sqrt(np.sum(block * block, axis=-1))
            else:
                part = np.sum(block ** p, axis=-1) ** (1 / p)
            total = total + part * part
        return np.sqrt(total)

    size = norm

    def atom(self, kind, a):
        if kind != "norm":
            raise SignatureError([f"atom {kind} undefined in signature"])
        return self.norm(a)

    def project(self, a, k):
        r = self.norm(a)
        f = np.where(r > k, k / np.where(r > 0, r, 1), 1.0)
        return (a[0] * f[..., None],)

    def _to_sphere(self, v, k):
        r = self.norm((v,))
        return v * (k / np.where(r > 0, r, 1))[..., None]

    def sample(self, rng, k, shape=()):
        """Half interior draws, half sign-times-support patterns on the sphere.
        Half of the patterns are confined to one randomly chosen summand."""
        shape = tuple(shape)
        D = self.dim
        g = rng.standard_normal(shape + (D,))
        interior = self._to_sphere(g, k) * (rng.random(shape) ** (1 / D))[..., None]
        signs = np.where(rng.random(shape + (D,)) < 0.5, -1.0, 1.0)
        part_of = np.repeat(np.arange(len(self.parts)), [d for _, d in self.parts])
        chosen = rng.integers(0, len(self.parts), size=shape)
        single = rng.random(shape) < 0.5
        allowed = ~single[..., None] | (part_of == chosen[..., None])
        support = (rng.random(shape + (D,)) < 0.5) & allowed
        empty = ~support.any(axis=-1)
        # fall back to one allowed coordinate
        lone = np.argmax(allowed * rng.random(shape + (D,)), axis=-1)
        support = support | (empty[..., None] & (np.arange(D) == lone[..., None]))
        edge = self._to_sphere(signs * support, k)
        boundary = rng.random(shape) < 0.5
        out = np.where(boundary[..., None], edge, interior)
        return self.project((out,), k)

    def perturb(self, rng, a, step):
        step = np.asarray(step)[..., None]
        shape = np.broadcast_shapes(a[0].shape, step.shape[:-1] + (self.dim,))
        return (a[0] + rng.standard_normal(shape) * (step / math.sqrt(self.dim)),)

    def validate_data(self, data):
        if len(data) != 1 or np.shape(data[0])[-1:] != (self.dim,):
            return f"expected one vector of length {self.dim}"
        return None


Model = MatrixModel | NormedModel


def make_matrix_model(spec: Sequence) -> MatrixModel:
    """Build a matrix model from ``[(n, w), ...]``, normalizing the weights."""
    spec = list(spec)
    if not spec:
        raise ValueError("empty model specification")
    for n, w in spec:
        if int(n) != n or n < 1:
            raise ValueError(f"summand size must be a positive integer, got {n}")
        if not w > 0:
            raise ValueError(f"summand weight must be positive, got {w}")
    total = math.fsum(float(w) for _, w in spec)
    weights = [float(w) / total for _, w in spec]
    # absorb rounding so the weights sum to 1 to machine precision
    weights[-1] = 1.0 - math.fsum(weights[:-1])
    return MatrixModel(tuple(int(n) for n, _ in spec), tuple(weights))


def make_normed_model(spec: Sequence) -> NormedModel:
    """Build the l_2-direct sum of ``[(p, d), ...]``; ``p`` may be ``inf``."""
    spec = list(spec)
    if not spec:
        raise ValueError("empty model specification")
    parts = []
    for p, d in spec:
        if isinstance(p, str):
            if p.lower() not in ("inf", "infinity"):
                raise ValueError(f"invalid exponent {p!r}")
            p = math.inf
        parts.append((p, d))
    return NormedModel(tuple(parts))


def model_from_spec(spec: Mapping) -> Model:
    kind = spec.get("kind")
    if kind == "matrix":
        return make_matrix_model([(s["n"], s.get("w", 1.0)) for s in spec["summands"]])
    if kind == "normed":
        return make_normed_model([(s["p"], s["d"]) for s in spec["parts"]])
    raise ValueError(f"unknown model kind {kind!r}")


def load_model(path) -> Model:
    with open(path) as fh:
        return model_from_spec(json.load(fh))


# ---------------------------------------------------------------- elements


@dataclass(frozen=True, eq=False)
class Element:
    """A point of ``model`` certified to lie in the ball D_k."""

    model: Model
    data: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "data", tuple(_frozen(x) for x in self.data))
        problem = self.model.validate_data(self.data)
        if problem:
            raise ValueError(problem)
        if self.k < 1:
            raise ValueError("domain index must be positive")

    @property
    def size(self) -> float:
        """Uniform norm (algebras) or norm (normed spaces)."""
        return float(self.model.size(self.data))

    def in_domain(self, slack=BALL_SLACK) -> bool:
        return self.size <= self.k + slack

    def same(self, other) -> bool:
        return (self.model == other.model and self.k == other.k
                and all(np.array_equal(a, b) for a, b in zip(self.data, other.data)))

    def to_json(self) -> dict:
        if isinstance(self.model, NormedModel):
            return {"k": self.k, "vector": self.data[0].tolist()}
        return {"k": self.k,
                "blocks": [{"re": b.real.tolist(), "im": b.imag.tolist()} for b in self.data]}

    @classmethod
    def from_json(cls, model, obj) -> "Element":
        if isinstance(model, NormedModel):
            data = (np.asarray(obj["vector"], dtype=float),)
        else:
            data = tuple(np.asarray(b["re"], dtype=float) + 1j * np.asarray(b["im"], dtype=float)
                         for b in obj["blocks"])
        return cls(model, data, int(obj["k"]))


def element(model: Model, *blocks, k=1) -> Element:
    """Convenience constructor: ``element(m, np.diag([1, -1]))``."""
    if isinstance(model, MatrixModel):
        data = tuple(np.atleast_2d(np.asarray(b, dtype=complex)) for b in blocks)
    else:
        data = (np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]),)
    return Element(model, data, k)


# -------------------------------------------------------------- operations


def term_data(m: Model, t, env: Mapping):
    """Evaluate a term on batched data; ``env`` maps names to data tuples."""
    if isinstance(t, Var):
        try:
            return env[t.name]
        except KeyError:
            raise EvaluationError(f"missing variable {t.name}") from None
    if isinstance(t, One):
        return m.identity()
    if isinstance(t, Zero):
        return m.zero()
    if isinstance(t, Adj):
        return m.adj(term_data(m, t.arg, env))
    if isinstance(t, Plus):
        return m.add(term_data(m, t.left, env), term_data(m, t.right, env))
    if isinstance(t, Minus):
        return m.sub(term_data(m, t.left, env), term_data(m, t.right, env))
    if isinstance(t, Mul):
        return m.mul(term_data(m, t.left, env), term_data(m, t.right, env))
    if isinstance(t, SMul):
        return m.smul(complex(t.scalar), term_data(m, t.arg, env))
    raise TypeError(f"not a term: {t!r}")


def eval_term(m: Model, t, v: Mapping) -> Element:
    """Evaluate term ``t`` at valuation ``v`` (names to Elements)."""
    for name, e in v.items():
        if e.model != m:
            raise SignatureError([f"variable {name} belongs to a different model"])
    data = term_data(m, t, {name: e.data for name, e in v.items()})
    bound = term_bound(t, {name: e.k for name, e in v.items()})
    return Element(m, data, max(1, math.ceil(bound - BALL_SLACK)))


def sample_domain(m: Model, k: int, seed) -> Element:
    """Deterministic random point of D_k."""
    if k < 1:
        raise ValueError("domain index must be positive")
    rng = np.random.default_rng(seed)
    return Element(m, m.sample(rng, k), k)


def project_domain(e: Element, k: int) -> Element:
    """Nearest point of D_k: singular-value clipping, or radial scaling."""
    return Element(e.model, e.model.project(e.data, k), k)


# ----------------------------------------------- minimal projections, unitaries


def a_value(m: MatrixModel) -> float:
    """Largest trace of a minimal projection: a rank-one projection in one block."""
    return max(w / n for n, w in zip(m.sizes, m.weights))


def b_value_closed(m: MatrixModel) -> float:
    return max(2 * a_value(m) - 1, 0.0)


def _unitary_from_hermitian(m: MatrixModel, params):
    blocks, i = [], 0
    for n in m.sizes:
        h = np.zeros((n, n), dtype=complex)
        iu = np.triu_indices(n, 1)
        h[np.diag_indices(n)] = params[i:i + n]
        i += n
        cnt = len(iu[0])
        h[iu] = params[i:i + cnt] + 1j * params[i + cnt:i + 2 * cnt]
        i += 2 * cnt
        h = h + np.triu(h, 1).conj().T
        lam, vec = np.linalg.eigh(h)
        blocks.append((vec * np.exp(1j * lam)) @ vec.conj().T)
    return tuple(blocks)


def b_value_search(m: MatrixModel, budget: int = 16, seed=0) -> float:
    """Least ``|tau(exp(iH))|`` found by multi-start local search over Hermitian H.

    Every candidate is a genuine unitary, so the result is an upper bound for
    the infimum of ``|tau(u)|`` over the unitary group.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    npar = sum(n * n for n in m.sizes)

    def objective(p):
        return abs(m.trace(_unitary_from_hermitian(m, p))) ** 2

    best = math.inf
    for _ in range(budget):
        p0 = rng.uniform(-math.pi, math.pi, npar)
        res = minimize(objective, p0, method="L-BFGS-B", options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-12})
        best = min(best, math.sqrt(max(objective(res.x), 0.0)))
        if best == 0.0:
            break
    return best


# ------------------------------------------------------------------ moments


def words(count: int, degree: int) -> list[tuple]:
    """Words of length 1..degree over letters ``(index, starred)``.

    Ordered by length, then lexicographically with ``x_i < x_i* < x_{i+1}``.
    """
    letters = [(i, s) for i in range(count) for s in (False, True)]
    out = []
    for length in range(1, degree + 1):
        out.extend(itertools.product(letters, repeat=length))
    return out


def word_label(word) -> str:
    return ".".join(f"x{i + 1}{'*' if s else ''}" for i, s in word)


def moments(m: MatrixModel, tup: Sequence, degree: int) -> list[tuple[str, complex]]:
    """Traces of all words of length <= degree in the tuple and its adjoints."""
    if degree < 1:
        raise ValueError("degree must be at least 1")
    datas = [e.data if isinstance(e, Element) else e for e in tup]
    vals = moment_values(m, datas, degree)
    return [(word_label(w), complex(v)) for w, v in zip(words(len(datas), degree), vals)]


def moment_values(m: MatrixModel, datas, degree):
    """Batched moments as an array whose last axis follows :func:`words`."""
    letters = []
    for d in datas:
        letters.append(d)
        letters.append(m.adj(d))
    out = []
    layer = list(letters)
    for length in range(1, degree + 1):
        if length > 1:
            layer = [m.mul(prev, letter) for prev in layer for letter in letters]
        out.extend(m.trace(p) for p in layer)
    return np.stack(np.broadcast_arrays(*out), axis=-1)
