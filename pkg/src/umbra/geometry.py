"""Balls, the cones of directions under them, and line hit predicates.

Every line considered here passes through the origin, so a line is just a
unit direction ``u`` (and ``-u`` denotes the same line).  For a ball with
center ``c`` and radius ``r`` the line meets the ball iff the hit margin

    m(u) = (c . u)**2 - (|c|**2 - r**2)

is non-negative.  The margin is the quantity every higher level module
works with; booleans are derived from it with a fixed absolute tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BallContainsCenter, GeometryError, NotUnit, SingularMap

PREDICATE_TOL = 1e-12
UNIT_TOL = 1e-9
MAX_CONDITION = 1e12


class HitSemantics(enum.Enum):
    CLOSED = "closed"
    OPEN = "open"


def is_hit(margin, sem: HitSemantics = HitSemantics.CLOSED):
    """Turn a margin (scalar or array) into a hit decision."""
    if sem is HitSemantics.CLOSED:
        return margin >= -PREDICATE_TOL
    return margin > PREDICATE_TOL


def check_unit(u) -> tuple[np.ndarray, bool]:
    """Validate a direction and renormalize it.

    Returns the unit vector and whether renormalization changed it.
    Raises NotUnit when ``|u|`` is off by more than 1e-9.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (3,) or not np.all(np.isfinite(u)):
        raise NotUnit(f"expected a finite 3-vector, got {u!r}")
    n = float(np.linalg.norm(u))
    if abs(n - 1.0) > UNIT_TOL:
        raise NotUnit(f"|u| = {n!r} deviates from 1 by more than {UNIT_TOL}")
    if n == 1.0:
        return u, False
    return u / n, True


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise GeometryError("cannot normalize the zero vector")
    return v / n


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.center)
        if len(c) != 3 or not all(math.isfinite(x) for x in c):
            raise GeometryError(f"ball center must be a finite 3-vector: {self.center!r}")
        if c == (0.0, 0.0, 0.0):
            raise GeometryError("ball center must differ from the origin")
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise GeometryError(f"ball radius must be finite and positive: {self.radius!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def c(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def distance(self) -> float:
        """Distance from the origin to the center."""
        return math.hypot(*self.center)

    @property
    def power(self) -> float:
        """``|c|**2 - r**2``, evaluated as a product to keep tiny gaps exact."""
        n = self.distance
        return (n - self.radius) * (n + self.radius)

    @property
    def holds_center(self) -> bool:
        return self.radius >= self.distance


@dataclass(frozen=True)
class ShadowCone:
    axis: np.ndarray = field(compare=False)
    cos_half: float

    def __post_init__(self):
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-12:
            raise GeometryError("cone axis must be a unit vector")
        if not 0.0 <= self.cos_half < 1.0:
            raise GeometryError(f"cos_half out of [0, 1): {self.cos_half!r}")


@dataclass(frozen=True)
class EllipsoidMetric:
    """Prolate ellipsoid with unit minor axes and major axis ``d`` along x."""

    d: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.d) and self.d >= 1.0):
            raise GeometryError(f"axis ratio must be >= 1, got {self.d!r}")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([1.0 / self.d, 1.0, 1.0])

    def level(self, x) -> float:
        """``|M x|``; equals 1 exactly on the surface."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x * np.array([1.0 / self.d, 1.0, 1.0])))

    def deviation(self, x) -> float:
        return abs(self.level(x) - 1.0)

    def on_surface(self, x, tol: float = 1e-9) -> bool:
        return self.deviation(x) <= tol


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise SingularMap("linear map must be a finite 3x3 matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularMap(f"|det| = {abs(np.linalg.det(m)):.3e} <= 1e-12")
        if np.linalg.cond(m) > MAX_CONDITION:
            raise SingularMap(f"condition number {np.linalg.cond(m):.3e} exceeds {MAX_CONDITION:g}")

    @classmethod
    def stretch(cls, factor: float, axis: int = 0) -> "LinearMap":
        diag = np.ones(3)
        diag[axis] = factor
        return cls(np.diag(diag))

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.linalg.inv(self.matrix)
        inv.setflags(write=False)
        return inv

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def __eq__(self, other):
        return isinstance(other, LinearMap) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True)
class MappedBall:
    """The image ``{y : |map^-1 y - center| <= radius}`` of a ball under a map."""

    ball: Ball
    map: LinearMap


def cone_under_ball(b: Ball) -> ShadowCone:
    n = b.distance
    if b.holds_center:
        raise BallContainsCenter(f"radius {b.radius!r} >= |center| {n!r}")
    return ShadowCone(axis=b.c / n, cos_half=math.sqrt(b.power) / n)


def cap_angular_radius(b: Ball) -> float:
    """Half-angle of the cone under ``b``, in radians."""
    if b.holds_center:
        raise BallContainsCenter(f"radius {b.radius!r} >= |center| {b.distance!r}")
    # asin(r/|c|) keeps full relative precision for small radii
    return math.asin(b.radius / b.distance)


def hit_margin(u, b: Ball) -> float:
    u, _ = check_unit(u)
    p = float(np.dot(b.c, u))
    return p * p - b.power


def line_hits_ball(u, b: Ball, sem: HitSemantics = HitSemantics.CLOSED) -> bool:
    return bool(is_hit(hit_margin(u, b), sem))


def mapped_hit_margin(u, mb: MappedBall) -> float:
    """Margin of the line ``{t u}`` against a mapped ball, in preimage units.

    The line hits ``T(B)`` iff the line along ``T^-1 u`` hits ``B``, so the
    margin is the ordinary one evaluated at the normalized preimage direction.
    """
    u, _ = check_unit(u)
    w = mb.map.inverse @ u
    w /= np.linalg.norm(w)
    p = float(np.dot(mb.ball.c, w))
    return p * p - mb.ball.power


def line_hits_mapped_ball(u, mb: MappedBall, sem: HitSemantics = HitSemantics.CLOSED) -> bool:
    return bool(is_hit(mapped_hit_margin(u, mb), sem))


def geodesic_angle(u, v) -> np.ndarray:
    """Angle between unit vectors; accurate near 0 and pi unlike arccos."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.arctan2(cross, dot)


def line_angle(u, axis) -> np.ndarray:
    """Angle between the line along ``u`` and the nearer of ``+axis``/``-axis``."""
    u = np.asarray(u, dtype=float)
    axis = np.asarray(axis, dtype=float)
    cross = np.linalg.norm(np.cross(u, axis), axis=-1)
    dot = np.abs(np.sum(u * axis, axis=-1))
    return np.arctan2(cross, dot)


# Vectorized kernels used by the verifier and the optimizer.


def centers_and_powers(balls) -> tuple[np.ndarray, np.ndarray]:
    C = np.array([b.center for b in balls], dtype=float).reshape(-1, 3)
    k = np.array([b.power for b in balls], dtype=float)
    return C, k


def margin_matrix(U: np.ndarray, C: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Margins of directions ``U`` (N x 3) against balls (C, k): N x n."""
    P = U @ C.T
    return P * P - k


def mapped_margin_matrix(U: np.ndarray, mb_list) -> np.ndarray:
    out = np.empty((len(U), len(mb_list)))
    for j, mb in enumerate(mb_list):
        W = U @ mb.map.inverse.T
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        p = W @ mb.ball.c
        out[:, j] = p * p - mb.ball.power
    return out
