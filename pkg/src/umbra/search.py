"""Minimax search over the direction sphere.

The objective is ``f(u) = max_i m_i(u)`` with ``m_i(u) = (c_i . u)**2 - k_i``.
Its minimum is negative exactly when some line through the origin misses
every ball.  The search runs a smoothed projected descent from many starts
and then polishes with the closed-form critical points of ``f``:

* a single active ball is minimal anywhere on the great circle
  perpendicular to its center;
* two active balls meet their optimum in the plane spanned by their
  centers;
* three active balls meet at a vertex ``u = C^-1 p`` with
  ``p_i = s_i sqrt(t + k_i)``, a one-dimensional root problem in ``t``.

Every candidate is re-evaluated exactly, so whatever is returned is a true
value of ``f`` at a true direction.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .geometry import margin_matrix
from .sphere import fibonacci_lattice

EXHAUSTIVE_BALLS = 6
ACTIVE_SUBSET = 4
_SIGNS = np.array([[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]], dtype=float)


class MinimaxResult(NamedTuple):
    value: float
    direction: np.ndarray
    evaluations: int


def max_margin(U: np.ndarray, C: np.ndarray, k: np.ndarray) -> np.ndarray:
    return margin_matrix(np.atleast_2d(U), C, k).max(axis=1)


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else None


def _orthonormal_pair(c):
    e = c / np.linalg.norm(c)
    helper = np.eye(3)[np.argmin(np.abs(e))]
    e1 = np.cross(e, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(e, e1)


def _circle_crossings(e1, e2, ca, ka, cb, kb):
    """Points of the great circle span(e1, e2) where the two margins agree."""
    aa, ba = ca @ e1, ca @ e2
    ab, bb = cb @ e1, cb @ e2
    A = 0.5 * ((aa * aa - ab * ab) - (ba * ba - bb * bb))
    B = aa * ba - ab * bb
    D = 0.5 * ((aa * aa - ab * ab) + (ba * ba - bb * bb)) - (ka - kb)
    R = np.hypot(A, B)
    if R == 0.0 or abs(D) > R:
        return []
    phi0 = np.arctan2(B, A)
    delta = np.arccos(np.clip(-D / R, -1.0, 1.0))
    out = []
    for phi in (phi0 + delta, phi0 - delta):
        s = 0.5 * phi
        out.append(np.cos(s) * e1 + np.sin(s) * e2)
    return out


def _vertex_candidates(Ct, kt):
    """Directions where three margins are equal: ``C u = s * sqrt(t + k)``."""
    scale = float(np.abs(np.linalg.det(Ct)))
    if scale <= 1e-12 * np.prod(np.linalg.norm(Ct, axis=1)):
        return []
    Cinv = np.linalg.inv(Ct)
    norms2 = np.sum(Ct * Ct, axis=1)
    t_lo = -kt.min()
    span = (norms2 - kt).min() - t_lo
    if not span > 0.0:
        return []
    offsets = np.unique(np.concatenate([
        [0.0],
        np.geomspace(1e-18 * span, span, 160),
        np.linspace(0.0, span, 65),
    ]))
    ts = t_lo + offsets
    roots = np.sqrt(np.maximum(ts[:, None] + kt, 0.0))
    out = []
    for sig in _SIGNS:
        X = (roots * sig) @ Cinv.T
        g = np.sum(X * X, axis=1) - 1.0

        def gfun(t, sig=sig):
            x = Cinv @ (sig * np.sqrt(np.maximum(t + kt, 0.0)))
            return x @ x - 1.0

        flips = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)
        for j in flips:
            if g[j] == 0.0:
                t = ts[j]
            elif g[j + 1] == 0.0:
                t = ts[j + 1]
            else:
                t = brentq(gfun, ts[j], ts[j + 1], xtol=1e-300, rtol=1e-15, maxiter=200)
            x = Cinv @ (sig * np.sqrt(np.maximum(t + kt, 0.0)))
            u = _unit(x)
            if u is not None:
                out.append(u)
        j = int(np.argmin(np.abs(g)))
        u = _unit(X[j])
        if u is not None:
            out.append(u)
    return out


def critical_directions(C: np.ndarray, k: np.ndarray, subset=None) -> np.ndarray:
    """Closed-form candidate minimizers of ``f`` restricted to ``subset`` balls."""
    idx = list(range(len(k))) if subset is None else sorted(subset)
    cands = []
    for i in idx:
        e1, e2 = _orthonormal_pair(C[i])
        cands.append(e1)
        others = [j for j in idx if j != i]
        for j in others:
            u = _unit(np.cross(C[i], C[j]))
            if u is not None:
                cands.append(u)
        for j, l in itertools.combinations(others, 2):
            cands += _circle_crossings(e1, e2, C[j], k[j], C[l], k[l])
    for i, j in itertools.combinations(idx, 2):
        e1 = C[i] / np.linalg.norm(C[i])
        e2 = _unit(C[j] - (C[j] @ e1) * e1)
        if e2 is None:
            continue
        cands += _circle_crossings(e1, e2, C[i], k[i], C[j], k[j])
    for tri in itertools.combinations(idx, 3):
        t = list(tri)
        cands += _vertex_candidates(C[t], k[t])
    if not cands:
        return np.empty((0, 3))
    return np.array(cands)


def smoothed_descent(C: np.ndarray, k: np.ndarray, U0: np.ndarray, iters: int = 200,
                     tau_start: float = 1e-2, tau_end: float = 1e-6) -> np.ndarray:
    """Projected descent of the log-sum-exp smoothed max, all starts at once.

    Temperatures are relative to the largest ``|c|**2`` and decrease
    geometrically.  Each start keeps its own angular step, grown on success
    and halved on failure.
    """
    U = np.array(U0, dtype=float)
    if iters <= 0 or len(U) == 0:
        return U
    scale = float(np.max(np.sum(C * C, axis=1)))
    taus = scale * np.geomspace(tau_start, tau_end, iters)
    step = np.full(len(U), 0.1)

    def smooth(V, tau):
        M = margin_matrix(V, C, k)
        top = M.max(axis=1, keepdims=True)
        W = np.exp((M - top) / tau)
        Z = W.sum(axis=1, keepdims=True)
        return top[:, 0] + tau * np.log(Z[:, 0]), W / Z, V @ C.T

    for tau in taus:
        F, W, P = smooth(U, tau)
        G = 2.0 * (W * P) @ C
        G -= np.sum(G * U, axis=1, keepdims=True) * U
        gn = np.linalg.norm(G, axis=1)
        moving = gn > 0
        D = np.zeros_like(G)
        D[moving] = G[moving] / gn[moving, None]
        V = U - step[:, None] * D
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        F_new, _, _ = smooth(V, tau)
        ok = (F_new < F) & moving
        U[ok] = V[ok]
        step = np.where(ok, np.minimum(step * 1.5, 0.5), step * 0.5)
        step = np.maximum(step, 1e-14)
    return U


def minimize_max_margin(C: np.ndarray, k: np.ndarray, *, starts: int = 64, iters: int = 200,
                        seed: int | None = 0, screen: int = 16, descent: bool = True) -> MinimaxResult:
    """Approximate ``min_u max_i m_i(u)`` and a direction attaining it.

    Starts are the lowest points of a seeded Fibonacci lattice of
    ``starts * screen`` directions.  The returned value is always ``f``
    evaluated at the returned direction, so it never underestimates the
    true minimum.
    """
    C = np.asarray(C, dtype=float).reshape(-1, 3)
    k = np.asarray(k, dtype=float)
    n = len(k)
    lattice = fibonacci_lattice(max(starts * screen, starts), seed)
    f_lat = max_margin(lattice, C, k)
    order = np.argsort(f_lat, kind="stable")[:starts]
    pool = [lattice[order]]
    if descent:
        ends = smoothed_descent(C, k, lattice[order], iters)
        pool.append(ends)
    else:
        ends = lattice[order]
    if n <= EXHAUSTIVE_BALLS:
        pool.append(critical_directions(C, k))
    else:
        M = margin_matrix(ends, C, k)
        subsets = {tuple(sorted(np.argsort(-row, kind="stable")[:ACTIVE_SUBSET])) for row in M}
        for sub in sorted(subsets):
            pool.append(critical_directions(C, k, sub))
    U = np.concatenate([p for p in pool if len(p)])
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    f = max_margin(U, C, k)
    best = int(np.argmin(f))
    # lattice evaluations are counted too
    return MinimaxResult(float(f[best]), U[best].copy(), len(U) + len(lattice))
