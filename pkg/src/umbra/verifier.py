"""Deciding whether a set of balls casts a shadow at the origin.

Three independent routes are offered:

* the sign-pattern certificate for exactly three balls (each of the eight
  triples of cone nappes must share a ray);
* a mesh certificate: every icosphere vertex sits deep enough inside some
  cap that the mesh covering radius cannot escape it;
* a minimax search whose negative minima are exact witness lines.

``sample_coverage`` is a plain sampling oracle used to cross-check all of
them.  None of these routines looks at feasibility (non-overlap, centers
on the surface): probe scenes are allowed on purpose.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BallContainsCenter, EmptyScene, SingularSystem, UmbraError
from .geometry import (
    Ball,
    EllipsoidMetric,
    HitSemantics,
    centers_and_powers,
    hit_margin,
    is_hit,
    line_angle,
    margin_matrix,
)
from .search import minimize_max_margin
from .sphere import covering_radius, fibonacci_lattice, icosphere

SURFACE_TOL = 1e-6
NORM_TOL = 1e-9
WITNESS_TOL = 1e-10
CHUNK = 1 << 17


@dataclass(frozen=True)
class SceneConfig:
    ellipsoid: EllipsoidMetric = EllipsoidMetric(1.0)
    balls: tuple[Ball, ...] = ()
    semantics: HitSemantics = HitSemantics.CLOSED

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        for i, b in enumerate(self.balls):
            dev = self.ellipsoid.deviation(b.center)
            if dev > SURFACE_TOL:
                raise UmbraError(f"balls[{i}] center is off the surface by {dev:.3g}")

    @property
    def d(self) -> float:
        return self.ellipsoid.d

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.balls:
            raise EmptyScene("scene has no balls")
        return centers_and_powers(self.balls)

    def with_semantics(self, sem: HitSemantics) -> "SceneConfig":
        return SceneConfig(self.ellipsoid, self.balls, sem)


def sphere_scene(balls, semantics: HitSemantics = HitSemantics.CLOSED) -> SceneConfig:
    return SceneConfig(EllipsoidMetric(1.0), tuple(balls), semantics)


class SolutionClass(enum.Enum):
    TANGENT_LINE = "tangent-line"
    COMMON_RAY = "common-ray"
    TRIVIAL_INTERSECTION = "trivial-intersection"
    SINGULAR = "singular"


def sign_patterns() -> list[tuple[int, int, int]]:
    """All eight patterns; pattern ``i`` and ``7 - i`` are negatives."""
    return [tuple(1 - 2 * int(b) for b in f"{i:03b}") for i in range(8)]


@dataclass(frozen=True)
class ConeSystemSolution:
    pattern: tuple[int, int, int]
    x: np.ndarray | None = field(compare=False)
    norm_x: float
    cls: SolutionClass
    residual: float = 0.0


def _three(balls):
    balls = tuple(balls)
    if len(balls) != 3:
        raise ValueError(f"the sign-pattern system needs exactly 3 balls, got {len(balls)}")
    for b in balls:
        if b.holds_center:
            raise BallContainsCenter(f"{b} holds the origin")
    return balls


def solve_sign_system(balls, pattern) -> ConeSystemSolution:
    """Solve ``(a_i, x) = s_i sqrt(|a_i|**2 - r_i**2)`` and classify ``|x|``.

    ``|x| < 1``: the three chosen nappes share a ray; ``|x| = 1``: they
    share exactly the line through ``x``; ``|x| > 1``: only the origin.
    """
    balls = _three(balls)
    s = np.array(pattern, dtype=float)
    if s.shape != (3,) or not np.all(np.abs(s) == 1):
        raise ValueError(f"pattern must be a triple of +-1, got {pattern!r}")
    C, k = centers_and_powers(balls)
    scale = float(np.prod(np.linalg.norm(C, axis=1)))
    if abs(np.linalg.det(C)) <= 1e-12 * scale:
        return ConeSystemSolution(tuple(int(v) for v in s), None, math.nan, SolutionClass.SINGULAR)
    h = s * np.sqrt(k)
    x = np.linalg.solve(C, h)
    residual = float(np.max(np.abs(C @ x - h)))
    nx = float(np.linalg.norm(x))
    if abs(nx - 1.0) <= NORM_TOL:
        cls = SolutionClass.TANGENT_LINE
    elif nx < 1.0:
        cls = SolutionClass.COMMON_RAY
    else:
        cls = SolutionClass.TRIVIAL_INTERSECTION
    return ConeSystemSolution(tuple(int(v) for v in s), x, nx, cls, residual)


def cone_cover_certificate(balls) -> bool:
    """True certifies that three closed balls cast a shadow.

    Failure proves nothing: the test is only sufficient.
    """
    balls = _three(balls)
    # patterns i and 7 - i give x and -x, so four solves suffice
    for pattern in sign_patterns()[:4]:
        sol = solve_sign_system(balls, pattern)
        if sol.cls is SolutionClass.SINGULAR:
            raise SingularSystem("ball centers are coplanar with the origin")
        if sol.norm_x > 1.0 + NORM_TOL:
            return False
    return True


@dataclass(frozen=True)
class Coverage:
    fraction_covered: float
    min_margin: float
    argmin_direction: np.ndarray = field(compare=False)
    samples: int


def iter_sample_margins(cfg: SceneConfig, n: int, seed: int | None = None):
    """Yield ``(directions, per-ball margins)`` chunks over a Fibonacci lattice."""
    C, k = cfg.arrays()
    U = fibonacci_lattice(n, seed)
    for lo in range(0, n, CHUNK):
        block = U[lo:lo + CHUNK]
        yield block, margin_matrix(block, C, k)


def sample_coverage(cfg: SceneConfig, n: int, seed: int | None = None) -> Coverage:
    """Share of lattice directions hitting some ball, and the worst margin seen."""
    if n < 1:
        raise ValueError(f"need at least one sample, got {n}")
    covered = 0
    worst, worst_u = math.inf, None
    for block, M in iter_sample_margins(cfg, n, seed):
        f = M.max(axis=1)
        covered += int(np.count_nonzero(is_hit(f, cfg.semantics)))
        j = int(np.argmin(f))
        if f[j] < worst:
            worst, worst_u = float(f[j]), block[j].copy()
    return Coverage(covered / n, worst, worst_u, n)


@dataclass(frozen=True)
class Witness:
    """A line through the origin missing every ball, with per-ball margins."""

    direction: np.ndarray = field(compare=False)
    margins: tuple[float, ...]
    semantics: HitSemantics

    def recheck(self, balls) -> bool:
        margins = [hit_margin(self.direction, b) for b in balls]
        return not any(is_hit(m, self.semantics) for m in margins)


def _exact_witness(cfg: SceneConfig, u: np.ndarray) -> Witness | None:
    u = u / np.linalg.norm(u)
    margins = tuple(hit_margin(u, b) for b in cfg.balls)
    worst = max(margins)
    if cfg.semantics is HitSemantics.CLOSED and not worst < -WITNESS_TOL:
        return None
    w = Witness(u, margins, cfg.semantics)
    return w if w.recheck(cfg.balls) else None


def minimax(cfg: SceneConfig, starts: int = 64, iters: int = 200, seed: int | None = 0,
            descent: bool = True):
    C, k = cfg.arrays()
    return minimize_max_margin(C, k, starts=starts, iters=iters, seed=seed, descent=descent)


def find_missing_line(cfg: SceneConfig, starts: int = 64, iters: int = 200,
                      seed: int | None = 0) -> Witness | None:
    """Search for a line through the origin that misses every ball.

    Returns None when no witness is found; that is not a proof of shadow.
    """
    if starts < 1:
        raise ValueError(f"starts must be >= 1, got {starts}")
    res = minimax(cfg, starts, iters, seed)
    return _exact_witness(cfg, res.direction)


def mesh_slack(cfg: SceneConfig, V: np.ndarray) -> np.ndarray:
    """Per-vertex depth inside the deepest cap, in radians.

    Balls holding the origin cover every line (closed) and get infinite
    depth; with open semantics only a strictly larger radius does.
    """
    best = np.full(len(V), -np.inf)
    for b in cfg.balls:
        if b.holds_center:
            if cfg.semantics is HitSemantics.CLOSED or b.radius > b.distance:
                return np.full(len(V), np.inf)
            continue
        alpha = math.asin(b.radius / b.distance)
        best = np.maximum(best, alpha - line_angle(V, b.c / b.distance))
    return best


def certified_cover_mesh(cfg: SceneConfig, level: int) -> bool:
    """Rigorous shadow test on an icosphere subdivided ``level`` times.

    Every direction lies within the covering radius ``h`` of a vertex and
    the angle to a cap axis is 1-Lipschitz, so ``slack >= h`` at every
    vertex means every direction lies in some cap.
    """
    return _mesh_check(cfg, level)[0]


def _mesh_check(cfg: SceneConfig, level: int) -> tuple[bool, float]:
    if not cfg.balls:
        raise EmptyScene("scene has no balls")
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    V, F = icosphere(level)
    h = covering_radius(V, F)
    slack = mesh_slack(cfg, V)
    # rounding guard on the angles themselves
    need = h + 1e-12
    worst = float(slack.min())
    if cfg.semantics is HitSemantics.OPEN:
        return worst > need, worst
    return worst >= need, worst


class VerdictKind(enum.Enum):
    SHADOW = "certified-shadow"
    NO_SHADOW = "certified-no-shadow"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    method: str | None = None
    witness: Witness | None = None
    best_margin: float | None = None
    best_direction: np.ndarray | None = field(default=None, compare=False)
    mesh_level: int | None = None

    @property
    def shadow(self) -> bool | None:
        if self.kind is VerdictKind.UNDECIDED:
            return None
        return self.kind is VerdictKind.SHADOW


@dataclass(frozen=True)
class VerifyOptions:
    max_mesh_level: int = 6
    starts: int = 64
    iters: int = 200
    seed: int | None = 0
    sign_pattern: bool = True


def verify(cfg: SceneConfig, options: VerifyOptions | None = None) -> Verdict:
    opts = options or VerifyOptions()
    if not cfg.balls:
        raise EmptyScene("scene has no balls")
    closed = cfg.semantics is HitSemantics.CLOSED
    if opts.sign_pattern and closed and len(cfg.balls) == 3 and not any(b.holds_center for b in cfg.balls):
        try:
            if cone_cover_certificate(cfg.balls):
                return Verdict(VerdictKind.SHADOW, "sign-pattern")
        except SingularSystem:
            pass
    for level in range(opts.max_mesh_level + 1):
        ok, worst = _mesh_check(cfg, level)
        if ok:
            return Verdict(VerdictKind.SHADOW, "mesh", mesh_level=level)
        # a vertex outside every cap stays a vertex at finer levels
        if worst < 0:
            break
    res = minimax(cfg, opts.starts, opts.iters, opts.seed)
    witness = _exact_witness(cfg, res.direction)
    if witness is not None:
        return Verdict(VerdictKind.NO_SHADOW, "minimax", witness, res.value, res.direction)
    return Verdict(VerdictKind.UNDECIDED, None, None, res.value, res.direction)


def sign_pattern_report(balls) -> list[ConeSystemSolution]:
    return [solve_sign_system(balls, p) for p in sign_patterns()]
