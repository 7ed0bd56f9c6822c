"""Reverse-mode gradients of formula bodies, used by local refinement.

Quantifier nodes are treated as transparent: the body is differentiated at
the inner witnesses, which by Danskin's theorem gives a (sub)gradient of the
inner optimum value.  For a complex variable ``X`` the gradient is
``dL/dRe X + i dL/dIm X``, i.e. the Riesz representer for ``Re tr(G^* dX)``.
"""

from __future__ import annotations

import math

import numpy as np

from .formula.ast import (
    Abs, Add, Adj, Atom, Const, Max, Min, Minus, Mul, One, Plus, Quant, Scale, SMul,
    TruncSub, Var, Zero,
)
from .models import MatrixModel, term_data


def _adj(x):
    return np.conj(np.swapaxes(x, -1, -2))


class _Tape:
    def __init__(self, m, env, targets, smooth=0.0):
        self.m = m
        self.env = env
        self.targets = set(targets)
        self.grads = {}
        self.mu = np.asarray(smooth, dtype=float)

    def accumulate(self, name, g):
        if name not in self.targets:
            return
        if name in self.grads:
            self.grads[name] = tuple(a + b for a, b in zip(self.grads[name], g))
        else:
            self.grads[name] = tuple(g)

    # -- terms: return (data, backward(G_data))
    def term(self, t):
        m = self.m
        if isinstance(t, Var):
            return self.env[t.name], (lambda g, name=t.name: self.accumulate(name, g))
        if isinstance(t, (One, Zero)):
            return term_data(m, t, self.env), None
        if isinstance(t, Adj):
            a, ba = self.term(t.arg)
            return m.adj(a), _chain(ba, lambda g: tuple(_adj(x) for x in g))
        if isinstance(t, (Plus, Minus)):
            a, ba = self.term(t.left)
            b, bb = self.term(t.right)
            sgn = 1.0 if isinstance(t, Plus) else -1.0
            val = m.add(a, b) if sgn > 0 else m.sub(a, b)

            def back(g):
                if ba:
                    ba(g)
                if bb:
                    bb(g if sgn > 0 else tuple(-x for x in g))

            return val, (back if ba or bb else None)
        if isinstance(t, Mul):
            a, ba = self.term(t.left)
            b, bb = self.term(t.right)

            def back(g):
                if ba:
                    ba(tuple(x @ _adj(y) for x, y in zip(g, b)))
                if bb:
                    bb(tuple(_adj(x) @ y for x, y in zip(a, g)))

            return m.mul(a, b), (back if ba or bb else None)
        if isinstance(t, SMul):
            a, ba = self.term(t.arg)
            c = complex(t.scalar)
            return m.smul(c, a), _chain(ba, lambda g: tuple(np.conj(c) * x if np.iscomplexobj(x) else c.real * x
                                                            for x in g))
        raise TypeError(f"not a term: {t!r}")

    def atom(self, kind, t):
        data, back = self.term(t)
        m = self.m
        val = m.atom(kind, data)
        if back is None:
            return val, None
        if isinstance(m, MatrixModel):
            grad_fn = _matrix_atom_grad(m, kind, data, val, self.mu)
        else:
            grad_fn = _normed_norm_grad(m, data, val, self.mu)
        return val, (lambda g: back(grad_fn(g)))

    # -- formulas: return (value, backward(g))
    def node(self, n):
        if isinstance(n, Atom):
            return self.atom(n.kind, n.term)
        if isinstance(n, Const):
            return np.float64(n.value), None
        if isinstance(n, Quant):
            return self.node(n.body)
        if isinstance(n, Scale):
            v, b = self.node(n.arg)
            c = float(n.factor)
            return c * v, _chain(b, lambda g: c * g)
        if isinstance(n, Abs):
            v, b = self.node(n.arg)
            return np.abs(v), _chain(b, lambda g: _soft_sign(v, self.mu) * g)
        a, ba = self.node(n.left)
        c, bc = self.node(n.right)
        if isinstance(n, Add):
            wl, wr = 1.0, 1.0
            val = a + c
        elif isinstance(n, TruncSub):
            wl = _soft_step(a - c, self.mu)
            wr = -wl
            val = np.maximum(a - c, 0.0)
        elif isinstance(n, Max):
            wl = _soft_step(a - c, self.mu)
            wr = 1.0 - wl
            val = np.maximum(a, c)
        elif isinstance(n, Min):
            wl = _soft_step(c - a, self.mu)
            wr = 1.0 - wl
            val = np.minimum(a, c)
        else:
            raise TypeError(f"not a formula node: {n!r}")

        def back(g):
            if ba:
                ba(wl * g)
            if bc:
                bc(wr * g)

        return val, (back if ba or bc else None)


def _soft_sign(v, mu):
    """sign(v), or the derivative of sqrt(v^2 + mu^2) when smoothing."""
    if not np.any(mu):
        return np.sign(v)
    return v / np.sqrt(v * v + mu * mu + 1e-300)


def _soft_step(d, mu):
    """Indicator of d > 0, or the derivative of the smoothed positive part."""
    if not np.any(mu):
        return (d > 0) * 1.0
    return 0.5 * (1.0 + _soft_sign(d, mu))


def _soft_inverse(val, mu):
    """1/val for norm gradients; 1/sqrt(val^2 + mu^2) when smoothing."""
    if np.any(mu):
        return 1.0 / np.sqrt(val * val + mu * mu + 1e-300)
    return np.where(val > 0, 1.0 / np.where(val > 0, val, 1.0), 0.0)


def _chain(back, fn):
    if back is None:
        return None
    return lambda g: back(fn(g))


def _matrix_atom_grad(m: MatrixModel, kind, data, val, mu=0.0):
    eyes = [np.eye(n) for n in m.sizes]
    coef = [w / n for n, w in zip(m.sizes, m.weights)]
    if kind == "norm2":
        inv = _soft_inverse(val, mu)
        return lambda g: tuple(c * x * (g * inv)[..., None, None] for c, x in zip(coef, data))
    if kind in ("retr", "imtr", "abstr"):
        if kind == "retr":
            phase = 1.0
        elif kind == "imtr":
            phase = 1j
        else:
            tau = m.trace(data)
            phase = tau * _soft_inverse(np.abs(tau), mu)
        return lambda g: tuple(c * (np.asarray(phase * g)[..., None, None] * e).astype(complex)
                               for c, e in zip(coef, eyes))
    if kind == "normInf":
        tops = []
        for x, n in zip(data, m.sizes):
            u, s, vh = np.linalg.svd(x)
            tops.append((s[..., 0], u[..., :, :1] @ vh[..., :1, :]))
        svals = np.stack(np.broadcast_arrays(*[s for s, _ in tops]))
        winner = np.argmax(svals, axis=0)
        return lambda g: tuple(((winner == i) * g)[..., None, None] * d for i, (_, d) in enumerate(tops))
    raise ValueError(kind)


def _normed_norm_grad(m, data, val, mu=0.0):
    v = data[0]
    pieces, start = [], 0
    for p, d in m.parts:
        block = v[..., start:start + d]
        start += d
        a = np.abs(block)
        if math.isinf(p):
            nrm = np.max(a, axis=-1)
            hot = np.argmax(a, axis=-1)
            dp = np.sign(block) * (np.arange(d) == hot[..., None])
        elif p == 1:
            nrm = np.sum(a, axis=-1)
            dp = np.sign(block)
        else:
            nrm = np.sum(a ** p, axis=-1) ** (1 / p)
            safe = np.where(nrm > 0, nrm, 1.0)
            dp = np.sign(block) * (a / safe[..., None]) ** (p - 1)
        pieces.append(nrm[..., None] * dp)
    inner = np.concatenate(pieces, axis=-1)
    inv = _soft_inverse(val, mu)
    return lambda g: ((g * inv)[..., None] * inner,)


def gradient(m, body, env, targets, smooth=0.0):
    """Value of ``body`` and gradients w.r.t. the variables in ``targets``.

    ``env`` must hold every variable, including witnesses for nested
    quantifiers.  Targets the value does not depend on get zero gradients.
    With ``smooth`` > 0 (scalar or per batch entry) every kink ``|s|`` is
    differentiated as ``sqrt(s^2 + smooth^2)``; the returned value stays exact.
    """
    tape = _Tape(m, env, targets, smooth)
    val, back = tape.node(body)
    if back is not None:
        back(np.ones(np.shape(val)))
    out = {}
    for name in targets:
        g = tape.grads.get(name)
        if g is None:
            g = tuple(np.zeros_like(a) for a in env[name])
        out[name] = tuple(np.broadcast_to(x, a.shape) for x, a in zip(g, env[name]))
    return val, out


def natural_direction(m, grads: dict):
    """Steepest-ascent direction in the model's metric, normalized to unit length.

    For matrix models the metric is ``||x||_2`` with block weights ``w/n``, so
    the Euclidean gradient of block ``i`` is rescaled by ``n_i / w_i``.
    """
    if isinstance(m, MatrixModel):
        scale = [n / w for n, w in zip(m.sizes, m.weights)]
        dirs = {k: tuple(s * x for s, x in zip(scale, g)) for k, g in grads.items()}
    else:
        dirs = dict(grads)
    return unit(m, dirs)


def unit(m, dirs: dict):
    """Rescale a tangent vector (name -> data) to unit length in the model's metric."""
    if isinstance(m, MatrixModel):
        sq = sum(sum(w / n * np.sum(np.abs(x) ** 2, axis=(-2, -1))
                     for x, n, w in zip(d, m.sizes, m.weights)) for d in dirs.values())
        E = 2
    else:
        sq = sum(np.sum(d[0] ** 2, axis=-1) for d in dirs.values())
        E = 1
    nrm = np.sqrt(sq)
    inv = np.where(nrm > 0, 1.0 / np.where(nrm > 0, nrm, 1.0), 0.0)
    inv = inv[(...,) + (None,) * E]
    return {k: tuple(x * inv for x in d) for k, d in dirs.items()}
