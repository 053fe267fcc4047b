import math

import numpy as np
import pytest

from umbra import Ball, HitSemantics
from umbra.verifier import sphere_scene


def random_feasible_sphere_scene(rng: np.random.Generator, n: int = 3,
                                 semantics: HitSemantics = HitSemantics.CLOSED):
    """Random centers on the unit sphere; radii drawn, then shrunk pairwise.

    Shrinking only ever lowers radii, so each pair fixed stays fixed.
    """
    C = rng.normal(size=(n, 3))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    R = rng.uniform(0.05, 0.999, size=n)
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.linalg.norm(C[i] - C[j]))
            if R[i] + R[j] > dist:
                f = dist / (R[i] + R[j]) * (1 - 1e-9)
                R[i] *= f
                R[j] *= f
    balls = [Ball(tuple(c), float(r)) for c, r in zip(C, R)]
    return sphere_scene(balls, semantics)


def orthogonal_scene(radius: float, semantics: HitSemantics = HitSemantics.CLOSED):
    return sphere_scene([Ball(tuple(e), radius) for e in np.eye(3)], semantics)


SQRT_2_3 = math.sqrt(2.0 / 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
