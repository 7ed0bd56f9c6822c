"""Values of formulas on finite models by nested multi-start search.

A run of directly nested quantifiers of the same kind is optimized jointly as
one block.  For each block the engine draws restarts from the domain sampler
and refines them with projected moves, mostly along the (smoothed) gradient
of the body and every few iterations a random perturbation, each kind with
its own adaptive step.  The best restart wins (first found on ties).  Inner
blocks are solved for every outer candidate at once: each block adds one
batch axis to the arrays, so a sup-inf sentence runs as a vectorized
(outer x inner) population.  Inner re-solves after an outer move are warm
started from the previous optimum.  Before the final choice, the inner blocks
of the best outer candidates are re-solved with a larger budget and the
outcome worse for the outer player is kept, so inner search noise cannot
inflate the reported value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import BudgetError, EvaluationError, ShapeMismatchError, SignatureError, ValidationError
from .formula.ast import (
    Abs, Add, Atom, Const, Formula, Max, Min, Quant, Scale, TruncSub, alternation_depth,
    children, quantifiers,
)
from .formula.checks import _range, validate
from .gradients import gradient, natural_direction, unit
from .models import Element, expand, select, take, term_data

STEP_SHRINK = 0.7
STEP_GROW = 1 / STEP_SHRINK**2
INITIAL_STEP = 0.25
MIN_STEP = 1e-12
STALL_WINDOW = 30

EXACT = "exact"
LOWER = "certified-lower"
UPPER = "certified-upper"
HEURISTIC = "heuristic"


@dataclass(frozen=True)
class EvalOptions:
    """Search budget.  Every count must be at least one.

    ``split`` scales the restarts (and refinement steps) of each deeper
    quantifier block; ``polish`` is how many of the best outermost candidates
    get their inner blocks re-solved before the final choice, with
    ``polish_boost`` times the restarts and steps.  ``smoothing`` is the
    initial width over which kinks are rounded off when computing search
    directions; it decays to zero over a block's refinement.  ``momentum``
    mixes the previous gradient direction into the next one, which damps
    zig-zagging across ridges where two terms of a max or min trade places.
    """

    seed: int = 0
    outer_restarts: int = 64
    inner_restarts: int = 32
    refinement_steps: int = 200
    tolerance: float = 1e-3
    split: float = 0.5
    polish: int = 8
    polish_boost: int = 4
    smoothing: float = 0.2
    momentum: float = 0.5
    random_every: int = 4
    warm_divisor: int = 4
    warm_step_divisor: int = 4

    def __post_init__(self):
        for name in ("outer_restarts", "inner_restarts", "refinement_steps", "polish", "polish_boost",
                     "random_every", "warm_divisor", "warm_step_divisor"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.smoothing < 0:
            raise ValueError("smoothing must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.split <= 1:
            raise ValueError("split must lie in (0, 1]")

    def restarts(self, depth: int) -> int:
        if depth == 0:
            return self.outer_restarts
        r = math.floor(self.inner_restarts * self.split ** (depth - 1) + 1e-9)
        if r < 1:
            raise BudgetError(f"budget exhausted: block at depth {depth} would get {r} restarts")
        return r

    def steps(self, depth: int) -> int:
        return max(1, math.floor(self.refinement_steps * self.split ** depth + 1e-9))


@dataclass(frozen=True, eq=False)
class EvalResult:
    value: float
    status: str
    witnesses: dict = field(default_factory=dict)  # bound variable -> Element
    samples_used: int = 0
    seed: int = 0
    valuation: dict = field(default_factory=dict)  # free variable -> Element

    def same(self, other) -> bool:
        return (self.value == other.value and self.status == other.status
                and self.samples_used == other.samples_used and self.seed == other.seed
                and self.witnesses.keys() == other.witnesses.keys()
                and all(self.witnesses[k].same(other.witnesses[k]) for k in self.witnesses))

    def to_json(self, witnesses=True) -> dict:
        out = {"value": self.value, "status": self.status, "samples_used": self.samples_used, "seed": self.seed}
        if witnesses:
            out["witnesses"] = {k: e.to_json() for k, e in sorted(self.witnesses.items())}
        return out


# ------------------------------------------------------------ direct route


def _check_model(m, f):
    report = validate(f, m.signature)
    if not report.ok:
        cls = SignatureError if any("undefined in signature" in v for v in report.violations) else ValidationError
        raise cls(report.violations)


def _check_valuation(m, f, v):
    for name, k in f.free:
        if name not in v:
            raise EvaluationError(f"missing variable {name}")
        e = v[name]
        if e.model != m:
            raise SignatureError([f"variable {name} belongs to a different model"])
        if e.k != k:
            raise ShapeMismatchError(f"variable {name} is declared in D{k} but the element is in D{e.k}")


def _qf(m, n, env, transparent=False) -> float:
    if isinstance(n, Atom):
        return float(m.atom(n.kind, term_data(m, n.term, env)))
    if isinstance(n, Const):
        return float(n.value)
    if isinstance(n, Add):
        return _qf(m, n.left, env, transparent) + _qf(m, n.right, env, transparent)
    if isinstance(n, TruncSub):
        return max(_qf(m, n.left, env, transparent) - _qf(m, n.right, env, transparent), 0.0)
    if isinstance(n, Abs):
        return abs(_qf(m, n.arg, env, transparent))
    if isinstance(n, Max):
        return max(_qf(m, n.left, env, transparent), _qf(m, n.right, env, transparent))
    if isinstance(n, Min):
        return min(_qf(m, n.left, env, transparent), _qf(m, n.right, env, transparent))
    if isinstance(n, Scale):
        return float(n.factor) * _qf(m, n.arg, env, transparent)
    if isinstance(n, Quant):
        if not transparent:
            raise EvaluationError("eval_qf needs a quantifier-free formula")
        return _qf(m, n.body, env, transparent)
    raise TypeError(f"not a formula node: {n!r}")


def eval_qf(m, f, v: Mapping) -> float:
    """Value of a quantifier-free formula at a valuation (names to Elements)."""
    if not isinstance(f, Formula):
        f = Formula(f, tuple((name, e.k) for name, e in v.items()))
    _check_model(m, f)
    _check_valuation(m, f, v)
    return _qf(m, f.root, {name: e.data for name, e in v.items()})


# ------------------------------------------------------------ search engine


def _block(q: Quant) -> tuple[list[Quant], object]:
    qs = [q]
    while isinstance(qs[-1].body, Quant) and qs[-1].body.kind == q.kind:
        qs.append(qs[-1].body)
    return qs, qs[-1].body


def _polarities(n, sign=1, out=None):
    """Map id(quantifier) -> +1/-1 (monotone direction) or 0 (unknown)."""
    out = {} if out is None else out
    if isinstance(n, Quant):
        out[id(n)] = sign
        _polarities(n.body, sign, out)
    elif isinstance(n, TruncSub):
        _polarities(n.left, sign, out)
        _polarities(n.right, -sign, out)
    elif isinstance(n, Abs):
        _polarities(n.arg, 0, out)
    else:
        for c in children(n):
            _polarities(c, sign, out)
    return out


def bound_status(f) -> str:
    """What the sampled value certifies about the exact value."""
    root = f.root if isinstance(f, Formula) else f
    depth = alternation_depth(root)
    if depth == 0:
        return EXACT
    if depth > 1:
        return HEURISTIC
    pol = _polarities(root)
    # a sampled sup is a lower estimate of the sup; a sampled inf an upper one
    dirs = {(1 if q.kind == "sup" else -1) * pol[id(q)] for q in quantifiers(root)}
    if dirs == {1}:
        return LOWER
    if dirs == {-1}:
        return UPPER
    return HEURISTIC


class _Engine:
    def __init__(self, m, opts: EvalOptions, f: Formula):
        self.m = m
        self.opts = opts
        self.E = m.elem_ndim
        self.samples = 0
        self.calls = 0
        self.boost = 1
        # domain index of every variable, for the a-priori range of block bodies
        self.bounds = {**dict(f.free), **{q.var: q.k for q in quantifiers(f.root)}}

    def best_possible(self, body, sign) -> float:
        lo, hi = _range(body, self.bounds)
        return hi if sign > 0 else lo

    def rng(self, depth):
        self.calls += 1
        return np.random.default_rng(np.random.SeedSequence(self.opts.seed, spawn_key=(depth, self.calls)))

    # values are arrays broadcastable to `shape`; wit maps name -> data
    def value(self, n, env, shape, depth, warm):
        if isinstance(n, Atom):
            return self.m.atom(n.kind, term_data(self.m, n.term, env)), {}
        if isinstance(n, Const):
            return np.float64(n.value), {}
        if isinstance(n, Quant):
            return self.solve(n, env, shape, depth, warm)
        if isinstance(n, (Abs, Scale)):
            v, w = self.value(n.arg, env, shape, depth, warm)
            return (np.abs(v) if isinstance(n, Abs) else float(n.factor) * v), w
        a, wa = self.value(n.left, env, shape, depth, warm)
        b, wb = self.value(n.right, env, shape, depth, warm)
        w = {**wa, **wb}
        if isinstance(n, Add):
            return a + b, w
        if isinstance(n, TruncSub):
            return np.maximum(a - b, 0.0), w
        if isinstance(n, Max):
            return np.maximum(a, b), w
        if isinstance(n, Min):
            return np.minimum(a, b), w
        raise TypeError(f"not a formula node: {n!r}")

    def solve(self, q, env, shape, depth, warm, fresh_only=False):
        """Optimize the block starting at ``q`` for every batch entry in ``shape``.

        Returns the best values (shape ``shape``) and witnesses for the block's
        variables and everything nested below.
        """
        m, E = self.m, self.E
        qs, body = _block(q)
        names = [x.var for x in qs]
        sign = 1.0 if q.kind == "sup" else -1.0
        axis = len(shape)
        warm_here = warm is not None and all(nm in warm for nm in names) and not fresh_only
        boost = self.boost if depth > 0 else 1
        restarts = self.opts.restarts(depth) * boost
        steps = self.opts.steps(depth) * boost
        if warm_here and depth > 0:
            # re-solve around the previous optimum with a reduced fresh population
            restarts = max(1, restarts // self.opts.warm_divisor)
            steps = max(1, steps // self.opts.warm_step_divisor)
        new_shape = shape + (restarts,)
        rng = self.rng(depth)
        env2 = {nm: expand(d, E, axis) for nm, d in env.items()}
        cand = {x.var: m.sample(rng, x.k, new_shape) for x in qs}
        inner_warm = None
        if warm_here:
            for nm in names:
                w0 = warm[nm]
                cand[nm] = tuple(np.concatenate([np.expand_dims(np.broadcast_to(a, shape + a.shape[len(a.shape) - E:]), axis),
                                                 c[(slice(None),) * axis + (slice(1, None),)]], axis=axis)
                                 for a, c in zip(w0, cand[nm]))
            inner_warm = {nm: expand(d, E, axis) for nm, d in warm.items() if nm not in names}
            inner_warm = {nm: tuple(np.broadcast_to(a, new_shape + a.shape[-E:]) for a in d)
                          for nm, d in inner_warm.items()}
        vals, wit = self._body(body, env2, cand, new_shape, depth, inner_warm)
        # separate adaptive steps for gradient moves and random moves
        gstep = np.full(new_shape, INITIAL_STEP)
        rstep = np.full(new_shape, INITIAL_STEP)
        ks = {x.var: x.k for x in qs}
        mu0 = self.opts.smoothing * max(ks.values())
        # a batch entry is done once its best restart attains the a-priori bound
        goal = sign * self.best_possible(body, sign) - 1e-12
        cross = bool(wit) and bound_status(body) == (UPPER if sign > 0 else LOWER)
        mark = vals
        memory = None
        for it in range(steps):
            if np.all(np.max(sign * vals, axis=axis) >= goal):
                break
            if it and it % STALL_WINDOW == 0:
                # stagnation: nothing moved by more than a tenth of the tolerance
                if np.all(sign * (vals - mark) <= self.opts.tolerance / 10):
                    break
                mark = vals
            use_grad = it % self.opts.random_every != self.opts.random_every - 1
            if use_grad:
                # kinks are smoothed at the scale of the current step so the
                # direction can follow valleys instead of zig-zagging across them
                _, grads = gradient(m, body, {**env2, **cand, **wit}, names, smooth=np.maximum(gstep, mu0 * (1 - it / steps)))
                direction = natural_direction(m, grads)
                beta = self.opts.momentum
                if memory is not None and beta:
                    direction = unit(m, {nm: tuple(a + beta * b for a, b in zip(direction[nm], memory[nm]))
                                         for nm in names})
                memory = direction
                step = gstep
                prop = {nm: m.project(tuple(a + (sign * ks[nm]) * step[(...,) + (None,) * E] * d
                                            for a, d in zip(cand[nm], direction[nm])), ks[nm])
                        for nm in names}
            else:
                step = rstep
                prop = {nm: m.project(m.perturb(rng, cand[nm], step * ks[nm]), ks[nm]) for nm in names}
            pvals, pwit = self._body(body, env2, prop, new_shape, depth, wit if wit else None)
            if cross:
                # the proposal's inner witnesses also bound the incumbent's value
                cv, _ = gradient(m, body, {**env2, **cand, **pwit}, [])
                tighter = sign * cv < sign * vals
                vals = np.where(tighter, cv, vals)
                wit = {nm: select(tighter, pwit[nm], wit[nm], E) for nm in wit}
            better = sign * pvals > sign * vals
            cand = {nm: select(better, prop[nm], cand[nm], E) for nm in names}
            wit = {nm: select(better, pwit[nm], wit[nm], E) for nm in wit}
            vals = np.where(better, pvals, vals)
            step = np.where(better, np.minimum(step * STEP_GROW, 2.0), step * STEP_SHRINK)
            if use_grad:
                gstep = step
            else:
                rstep = step
            if np.all(gstep < MIN_STEP) and np.all(rstep < MIN_STEP):
                break
        if depth == 0 and wit and self.opts.polish:
            count, boost = self.opts.polish, self.opts.polish_boost
            vals, cand, wit = self._polish(body, env2, cand, vals, wit, sign, depth, count, boost)
            # a second, heavier pass over the best survivor
            if count > 1:
                vals, cand, wit = self._polish(body, env2, cand, vals, wit, sign, depth, 1, 2 * boost)
        best = np.argmax(sign * vals, axis=axis)
        out_vals = np.take_along_axis(vals, np.expand_dims(best, axis), axis).squeeze(axis)
        out_wit = {nm: take(d, best, axis, E) for nm, d in {**wit, **cand}.items()}
        return out_vals, out_wit

    def _body(self, body, env2, cand, shape, depth, warm):
        v, w = self.value(body, {**env2, **cand}, shape, depth + 1, warm)
        self.samples += int(np.prod(shape))
        v = np.broadcast_to(v, shape)
        w = {nm: tuple(np.broadcast_to(a, shape + a.shape[a.ndim - self.E:]) for a in d) for nm, d in w.items()}
        return v, w

    def _polish(self, body, env2, cand, vals, wit, sign, depth, count, boost):
        """Re-solve the inner blocks at the best outer candidates with fresh
        streams and keep, per candidate, the outcome that is worse for the
        outer player, so inner search noise cannot inflate the reported value."""
        axis = vals.ndim - 1
        order = np.argsort(-sign * vals, axis=axis, kind="stable")
        top = order[..., : min(count, vals.shape[-1])]
        sub = {nm: tuple(np.take_along_axis(a, top[(...,) + (None,) * self.E], axis) for a in d)
               for nm, d in cand.items()}
        sub_env = {nm: tuple(np.broadcast_to(a, a.shape[:axis] + (1,) + a.shape[axis + 1:]) for a in d)
                   for nm, d in env2.items()}
        old_v = np.take_along_axis(vals, top, axis)
        old_w = {nm: tuple(np.take_along_axis(a, top[(...,) + (None,) * self.E], axis) for a in d)
                 for nm, d in wit.items()}
        self.boost = boost
        try:
            new_v, new_w = self._body(body, sub_env, sub, top.shape, depth, None)
        finally:
            self.boost = 1
        worse = sign * new_v < sign * old_v
        vals = np.where(worse, new_v, old_v)
        wit = {nm: select(worse, new_w[nm], old_w[nm], self.E) for nm in old_w}
        return vals, sub, wit


def evaluate(m, f, opts: EvalOptions | None = None, valuation: Mapping | None = None) -> EvalResult:
    """Estimate ``f`` on ``m``.  Deterministic given ``opts.seed``."""
    opts = opts or EvalOptions()
    if not isinstance(f, Formula):
        f = Formula(f)
    valuation = dict(valuation or {})
    _check_model(m, f)
    _check_valuation(m, f, valuation)
    status = bound_status(f)
    env = {name: e.data for name, e in valuation.items()}
    engine = _Engine(m, opts, f)
    if status == EXACT:
        value, _ = engine.value(f.root, env, (), 0, None)
        return EvalResult(float(value), EXACT, {}, 1, opts.seed, valuation)
    # depth bookkeeping: check the budget covers every block before starting
    opts.restarts(alternation_depth(f.root) - 1)
    vals, wit = engine.value(f.root, env, (), 0, None)
    ks = {q.var: q.k for q in quantifiers(f.root)}
    witnesses = {nm: Element(m, tuple(np.array(a) for a in d), ks[nm]) for nm, d in wit.items()}
    return EvalResult(float(vals), status, witnesses, engine.samples, opts.seed, valuation)


def witness_replay(m, f, r: EvalResult) -> float:
    """Substitute the recorded witnesses into the quantifier-free core."""
    if not isinstance(f, Formula):
        f = Formula(f)
    _check_model(m, f)
    env = {name: e.data for name, e in r.valuation.items()}
    for q in quantifiers(f.root):
        e = r.witnesses.get(q.var)
        if e is None:
            raise ShapeMismatchError(f"no witness for {q.var}")
        if e.model != m or m.validate_data(e.data) is not None:
            raise ShapeMismatchError(f"witness for {q.var} does not belong to this model")
        if e.k != q.k:
            raise ShapeMismatchError(f"witness for {q.var} is in D{e.k}, quantifier ranges over D{q.k}")
        env[q.var] = e.data
    return _qf(m, f.root, env, transparent=True)


__all__ = [
    "EvalOptions", "EvalResult", "eval_qf", "evaluate", "witness_replay", "bound_status",
    "EXACT", "LOWER", "UPPER", "HEURISTIC",
]
