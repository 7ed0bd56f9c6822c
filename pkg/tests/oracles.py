"""Independent reference computations.

Nothing here imports the package: each oracle is a direct numpy/scipy
computation (grids, closed forms, explicit matrices) used to freeze
expected values in the tests.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize


def sigma1_scalar_grid(step=1e-5) -> float:
    """sigma_1 on C: y = t e^{i phi} commutes with x, so the value is
    min over t in [0, 1] of (1 - t^2) + t."""
    t = np.arange(0.0, 1.0 + step / 2, step)
    return float(np.min((1 - t ** 2) + t))


def sigma_prime1_scalar_grid(step=1e-4) -> float:
    """sigma'_1 on C: min over |lambda| <= 1 of |lambda^3 - lambda| + |2|lambda|^2 - 1|."""
    t = np.arange(0.0, 1.0 + step / 2, step)
    return float(np.min(np.abs(t ** 3 - t) + np.abs(2 * t ** 2 - 1)))


def _psi_euclid(v):
    x, y = v[:2], v[2:]
    n = np.linalg.norm
    return (abs(n(x) - 1) + abs(n(y) - 1) + abs(n((x + y) / 2) - 1) + abs(n((x - y) / 2) - 1))


def psi_euclidean_grid(step=1e-2) -> float:
    """psi on the Euclidean plane.  By rotation invariance x is put on the
    positive axis; y runs over a grid of the unit disk, then the best grid
    point is refined in all four coordinates (with projection to the disk)."""
    best, arg = math.inf, None
    g = np.arange(-1.0, 1.0 + step / 2, step)
    u, v = np.meshgrid(g, g, indexing="ij")
    inside = u ** 2 + v ** 2 <= 1 + 1e-12
    u, v = u[inside], v[inside]
    for r in np.arange(step, 1.0 + step / 2, step * 10):
        x = np.array([r, 0.0])
        nx = r
        ny = np.hypot(u, v)
        vals = (abs(nx - 1) + abs(ny - 1) + np.abs(np.hypot(u + r, v) / 2 - 1)
                + np.abs(np.hypot(r - u, -v) / 2 - 1))
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, arg = float(vals[i]), np.array([x[0], x[1], u[i], v[i]])

    def clipped(p):
        x, y = p[:2], p[2:]
        x = x / max(1.0, np.linalg.norm(x))
        y = y / max(1.0, np.linalg.norm(y))
        return _psi_euclid(np.concatenate([x, y]))

    res = minimize(clipped, arg, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return min(best, float(res.fun))


def lp_norm(v, p):
    return float(np.max(np.abs(v))) if math.isinf(p) else float(np.sum(np.abs(v) ** p) ** (1 / p))


def psi_basis_pair_bound(N: int) -> float:
    """Basis pair of the l_N^2 summand: |(x +- y)/2|_N = 2^{1/N - 1}."""
    return 2 * (1 - 2 ** (1 / N - 1))


def psi_rotated_pair(N: int) -> float:
    """The pair x = (1, 1)/2^{1/N}, y = (1, -1)/2^{1/N} in the l_N^2 summand
    has unit norms and |(x +- y)/2|_N = 2^{-1/N}: psi <= 2 (1 - 2^{-1/N})."""
    s = 2 ** (-1 / N)
    x, y = np.array([s, s]), np.array([s, -s])
    return (abs(lp_norm(x, N) - 1) + abs(lp_norm(y, N) - 1)
            + abs(lp_norm((x + y) / 2, N) - 1) + abs(lp_norm((x - y) / 2, N) - 1))


def b_closed(sizes, weights) -> float:
    a = max(w / n for n, w in zip(sizes, weights))
    return max(2 * a - 1, 0.0)


def b_reduced(sizes, weights, starts=40, seed=0) -> float:
    """min |tau(u)| over unitaries, reduced to the plane: block i contributes
    w_i z_i with z_i on the unit circle when n_i = 1 and anywhere in the
    closed unit disk when n_i >= 2 (averages of n_i >= 2 unimodular numbers
    fill the disk).  Multi-start Nelder-Mead over phases and radii."""
    rng = np.random.default_rng(seed)
    w = np.asarray(weights, float)
    free_radius = np.array([n >= 2 for n in sizes])

    def f(q):
        th, rho = q[: len(w)], q[len(w):]
        r = np.where(free_radius, 0.5 * (1 + np.sin(rho)), 1.0)
        return abs(np.sum(w * r * np.exp(1j * th)))

    best = math.inf
    for _ in range(starts):
        q0 = rng.uniform(-np.pi, np.pi, 2 * len(w))
        res = minimize(f, q0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        best = min(best, float(res.fun))
    return best


def proj_third_m2_grid(step=0.05) -> float:
    """sup over contractions p in M_2 of 1/3 -. (||p - p*||_2 + ||p^2 - p||_2 + |tau(p) - 1/3|).

    The penalty is unitarily invariant, so p may be taken upper triangular
    (Schur form) with a real, non-negative corner: p = [[a, c], [0, b]].
    Grid over real diagonals and c, then refine over complex a, b."""
    def value(a, b, c):
        p = np.array([[a, c], [0, b]], dtype=complex)
        if np.linalg.norm(p, 2) > 1 + 1e-12:
            return -math.inf
        n2 = lambda z: math.sqrt(np.sum(np.abs(z) ** 2) / 2)  # noqa: E731
        pen = n2(p - p.conj().T) + n2(p @ p - p) + abs(np.trace(p) / 2 - 1 / 3)
        return max(1 / 3 - pen, 0.0)

    g = np.arange(-1.0, 1.0 + step / 2, step)
    best, arg = -math.inf, None
    for a in g:
        for b in g:
            for c in np.arange(0, 1.0 + step / 2, step):
                v = value(a, b, c)
                if v > best:
                    best, arg = v, (a, b, c)

    def neg(q):
        return -value(q[0] + 1j * q[1], q[2] + 1j * q[3], abs(q[4]))

    res = minimize(neg, [arg[0], 0, arg[1], 0, arg[2]], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return max(best, -float(res.fun))


def proj_third_two_point_grid(step=1e-3) -> float:
    """The same sentence on C+C, p = (a, b).

    Imaginary parts cost 2||Im p||_2 in ||p - p*||_2 and save at most
    ||Im p||_2 elsewhere, so real a, b in [-1, 1] suffice."""
    t = np.arange(-1.0, 1.0 + step / 2, step)
    a, b = t[:, None], t[None, :]
    pen = (np.sqrt(((a * a - a) ** 2 + (b * b - b) ** 2) / 2) + np.abs((a + b) / 2 - 1 / 3))
    return float(np.max(np.maximum(1 / 3 - pen, 0.0)))


def e(i, j, n=2):
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1
    return m
