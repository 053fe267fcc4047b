"""Common tangent line of two tangent balls on the unit sphere.

The first ball sits at ``a = (0, 0, 1)`` with radius ``r1``; the second at
``b = (0, b2, b3)`` with radius ``r2``, touching the first.  The two cones
under the balls cross along a pair of lines mirrored in the plane
``x1 = 0``; ``x = (x1, x2, x3)`` with ``x1 >= 0`` is the unit direction of
one of them.  Its projection onto the plane ``x3 = 0`` and that of its
mirror image enclose the angle ``2 * atan(x1 / x2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCommonTangent, NonPositiveX2, OutOfDomain

RESIDUAL_TOL = 1e-9
# x1**2 is zero analytically for equal radii; rounding can push it below
X1_SQ_TOL = 1e-12


@dataclass(frozen=True)
class TangentPair:
    r1: float
    r2: float

    def __post_init__(self):
        for name in ("r1", "r2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v < 1.0):
                raise OutOfDomain(f"{name} must lie in (0, 1), got {v!r}")


@dataclass(frozen=True)
class TangentSolution:
    pair: TangentPair
    b2: float
    b3: float
    x1: float
    x2: float
    x3: float

    @property
    def x(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    @property
    def ratio(self) -> float:
        return self.x1 / self.x2 if self.x2 != 0.0 else math.inf

    @property
    def phi(self) -> float:
        return projection_angle(self)

    def residuals(self) -> tuple[float, float]:
        """Deviations of ``a.x`` and ``b.x`` from the tangency cosines."""
        r1, r2 = self.pair.r1, self.pair.r2
        ax = self.x3
        bx = self.b2 * self.x2 + self.b3 * self.x3
        return abs(ax - math.sqrt(1 - r1 * r1)), abs(bx - math.sqrt(1 - r2 * r2))


def second_center(p: TangentPair | tuple[float, float]) -> tuple[float, float]:
    """Coordinates ``(b2, b3)`` of the second center touching the first ball.

    A plain ``(r1, r2)`` tuple may reach the closed end ``r = 1``, where the
    centers become antipodal.
    """
    r1, r2 = (p.r1, p.r2) if isinstance(p, TangentPair) else p
    if not (0.0 < r1 <= 1.0 and 0.0 < r2 <= 1.0):
        raise OutOfDomain(f"radii must lie in (0, 1], got {(r1, r2)!r}")
    s = r1 + r2
    b3 = 1.0 - 0.5 * s * s
    # 1 - b3**2 factored so it stays accurate when b3 is close to -1
    b2 = math.sqrt(max(s * s * (1.0 - 0.25 * s * s), 0.0))
    return b2, b3


def common_tangent_direction(p: TangentPair) -> TangentSolution:
    b2, b3 = second_center(p)
    r1, r2 = p.r1, p.r2
    x3 = math.sqrt((1.0 - r1) * (1.0 + r1))
    if b2 == 0.0:
        raise NoCommonTangent(f"antipodal centers for {p}; cones share no tangent line")
    x2 = (math.sqrt((1.0 - r2) * (1.0 + r2)) - b3 * x3) / b2
    x1_sq = (r1 - x2) * (r1 + x2)
    if -X1_SQ_TOL <= x1_sq < 0.0:
        x1_sq = 0.0
    if x1_sq < 0.0:
        raise NoCommonTangent(f"r1**2 - x2**2 = {x1_sq:.6g} < 0 for {p}")
    return TangentSolution(p, b2, b3, math.sqrt(x1_sq), x2, x3)


def projection_angle(s: TangentSolution) -> float:
    if s.x2 <= 0.0:
        raise NonPositiveX2(f"x2 = {s.x2!r}; the angle formula needs x2 > 0")
    return 2.0 * math.atan(s.x1 / s.x2)


@dataclass
class RatioScan:
    max_ratio: float
    argmax: tuple[float, float]
    grid: int
    refine_iters: int
    valid_points: int
    excluded_no_tangent: int
    excluded_nonpositive_x2: int
    # ratio >= 1 occurrences on the coarse grid (the bound fails there)
    violations: int
    worst_grid_ratio: float
    ordered: bool = False
    history: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def bound_holds(self) -> bool:
        return self.violations == 0 and self.max_ratio < 1.0


def _ratio_grid(r1: np.ndarray, r2: np.ndarray):
    """Vectorized x1/x2 with masks for the excluded configurations."""
    s = r1 + r2
    b3 = 1.0 - 0.5 * s * s
    b2 = np.sqrt(np.maximum(s * s * (1.0 - 0.25 * s * s), 0.0))
    x3 = np.sqrt((1.0 - r1) * (1.0 + r1))
    with np.errstate(divide="ignore", invalid="ignore"):
        x2 = (np.sqrt((1.0 - r2) * (1.0 + r2)) - b3 * x3) / b2
        x1_sq = (r1 - x2) * (r1 + x2)
        x1_sq = np.where((x1_sq < 0.0) & (x1_sq >= -X1_SQ_TOL), 0.0, x1_sq)
        no_tangent = ~(x1_sq >= 0.0) | (b2 == 0.0)
        bad_x2 = ~no_tangent & ~(x2 > 0.0)
        valid = ~no_tangent & ~bad_x2
        ratio = np.where(valid, np.sqrt(np.where(valid, x1_sq, 0.0)) / np.where(valid, x2, 1.0), -np.inf)
    return ratio, valid, no_tangent, bad_x2


def _best(ratio, r1, r2):
    # ties go to the lexicographically smallest (r1, r2); r1 is the major axis
    top = ratio.max()
    idx = np.flatnonzero(ratio.ravel() == top)
    order = np.lexsort((r2.ravel()[idx], r1.ravel()[idx]))
    i = idx[order[0]]
    return float(top), float(r1.ravel()[i]), float(r2.ravel()[i])


def max_projection_ratio(grid: int = 100, refine_iters: int = 3, *, shrink: float = 0.1,
                         ordered: bool = False) -> RatioScan:
    """Supremum estimate of ``x1 / x2`` over the open unit square.

    Points without a common tangent or with ``x2 <= 0`` are skipped and
    counted.  With ``ordered=True`` only pairs with ``r1 >= r2`` are scanned,
    i.e. the projection is taken along the axis of the larger ball.
    """
    if grid < 16:
        raise OutOfDomain(f"grid must be >= 16, got {grid}")
    g = (np.arange(grid) + 0.5) / grid
    R1, R2 = np.meshgrid(g, g, indexing="ij")
    ratio, valid, no_tangent, bad_x2 = _ratio_grid(R1, R2)
    if ordered:
        keep = R1 >= R2
        ratio = np.where(keep, ratio, -np.inf)
        valid &= keep
        no_tangent &= keep
        bad_x2 &= keep
    if not valid.any():
        raise NoCommonTangent("no valid grid point")
    best, b1, b2 = _best(ratio, R1, R2)
    scan = RatioScan(
        max_ratio=best,
        argmax=(b1, b2),
        grid=grid,
        refine_iters=refine_iters,
        valid_points=int(valid.sum()),
        excluded_no_tangent=int(no_tangent.sum()),
        excluded_nonpositive_x2=int(bad_x2.sum()),
        violations=int((valid & (ratio >= 1.0)).sum()),
        worst_grid_ratio=best,
        ordered=ordered,
        history=[(b1, b2, best)],
    )
    half = 1.0 / grid
    for _ in range(refine_iters):
        lo1, hi1 = max(b1 - half, 0.0), min(b1 + half, 1.0)
        lo2, hi2 = max(b2 - half, 0.0), min(b2 + half, 1.0)
        h1 = np.linspace(lo1, hi1, grid + 2)[1:-1]
        h2 = np.linspace(lo2, hi2, grid + 2)[1:-1]
        R1, R2 = np.meshgrid(h1, h2, indexing="ij")
        ratio, valid, _, _ = _ratio_grid(R1, R2)
        if ordered:
            ratio = np.where(R1 >= R2, ratio, -np.inf)
        if np.isfinite(ratio.max()):
            cand, c1, c2 = _best(ratio, R1, R2)
            if cand > scan.max_ratio:
                scan.max_ratio, b1, b2 = cand, c1, c2
                scan.argmax = (b1, b2)
        scan.history.append((b1, b2, scan.max_ratio))
        half *= shrink
    return scan


def second_ball_radius(theta: float) -> float:
    """Radius of the ball at angle ``theta`` touching the unit-radius ball at the pole."""
    return 2.0 * math.sin(0.5 * theta) - 1.0


def equator_arc_width(theta: float, *, allow_limit: bool = False) -> float:
    """Angular measure of equatorial lines hit by the second ball.

    The first (open) ball has radius 1 at ``(0, 0, 1)`` and leaves only the
    equatorial plane uncovered.  The second ball is centered at
    ``(0, sin theta, cos theta)`` and touches the first.  Equatorial lines
    are counted modulo direction, so the full circle measures pi.
    ``theta = pi`` is only accepted with ``allow_limit`` and returns the
    limiting value.
    """
    if not (math.pi / 3 < theta < math.pi):
        if not (allow_limit and theta == math.pi):
            raise OutOfDomain(f"theta must lie in (pi/3, pi), got {theta!r}")
    # k = sqrt(1 - r**2) / sin(theta) simplifies to 1 / sqrt(s (1 + s)) with
    # s = sin(theta / 2); the direct form cancels catastrophically near pi.
    s = math.sin(0.5 * theta)
    k = 1.0 / math.sqrt(s * (1.0 + s))
    if k >= 1.0:
        return 0.0
    return math.pi - 2.0 * math.asin(k)
