"""Point sets on the unit sphere: Fibonacci lattices and icospheres."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.spatial.transform import Rotation

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@lru_cache(maxsize=8)
def _fibonacci(n: int) -> np.ndarray:
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    rho = np.sqrt((1.0 - z) * (1.0 + z))
    t = GOLDEN_ANGLE * np.arange(n)
    pts = np.stack([rho * np.cos(t), rho * np.sin(t), z], axis=1)
    pts.setflags(write=False)
    return pts


def fibonacci_lattice(n: int, seed: int | None = None) -> np.ndarray:
    """``n`` near-uniform unit vectors; a seed applies a random rotation."""
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    pts = _fibonacci(int(n))
    if seed is None:
        return pts
    return Rotation.random(random_state=np.random.default_rng(seed)).apply(pts)


_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_V = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=float)
_ICO_F = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
])


def _subdivide(V: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mid = V[uniq[:, 0]] + V[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nf = len(F)
    m01 = len(V) + inverse[:nf]
    m12 = len(V) + inverse[nf:2 * nf]
    m20 = len(V) + inverse[2 * nf:]
    a, b, c = F[:, 0], F[:, 1], F[:, 2]
    F2 = np.concatenate([
        np.stack([a, m01, m20], 1),
        np.stack([b, m12, m01], 1),
        np.stack([c, m20, m12], 1),
        np.stack([m01, m12, m20], 1),
    ])
    return np.concatenate([V, mid]), F2


@lru_cache(maxsize=12)
def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and faces of the icosahedron subdivided ``level`` times.

    Vertices of a level are kept at every finer level.
    """
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    V = _ICO_V / np.linalg.norm(_ICO_V, axis=1, keepdims=True)
    F = _ICO_F.copy()
    for _ in range(level):
        V, F = _subdivide(V, F)
    V.setflags(write=False)
    F.setflags(write=False)
    return V, F


def covering_radius(V: np.ndarray, F: np.ndarray) -> float:
    """Largest geodesic circumradius over the spherical triangles.

    Every point of a triangle lies within its circumradius of one of its
    corners, so every point of the sphere is within this angle of a vertex.
    """
    A, B, C = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    n = np.cross(B - A, C - A)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    n *= np.sign(np.sum(n * A, axis=1))[:, None]
    r = max(
        np.arctan2(np.linalg.norm(np.cross(n, P), axis=1), np.sum(n * P, axis=1)).max()
        for P in (A, B, C)
    )
    return float(r)
