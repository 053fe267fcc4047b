"""Smallest axis ratio of a prolate ellipsoid admitting a three-ball shadow.

For a fixed ratio ``d`` the inner problem maximizes the shadow margin of
three balls centered on the ellipsoid, subject to non-overlap and center
exclusion.  The outer problem bisects on ``d`` using "best margin >= 0" as
the feasibility predicate.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import BadBracket, EmptyScene, OutOfDomain
from .geometry import Ball, EllipsoidMetric, HitSemantics
from .search import minimize_max_margin
from .verifier import SceneConfig, minimax

log = logging.getLogger(__name__)

# smallest relative gap |a| - r kept between a ball and the center
MIN_GAP = 1e-12
W_MAX = math.log(1.0 / MIN_GAP)
W_MIN = -20.0
PENALTY_WEIGHT = 1e3
OVERLAP_TOL = 1e-12
# relative; a ball touching the center may round to either side of |a|
CENTER_TOL = 1e-15
SURFACE_TOL = 1e-9
BATCH = 8


@dataclass(frozen=True)
class FamilyParams:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (0.0 < self.x <= 1.0 and 0.0 < self.y <= 1.0):
            raise OutOfDomain(f"x and y must lie in (0, 1]: {self}")
        if not self.z >= 1.0:
            raise OutOfDomain(f"z must be >= 1: {self}")
        if self.x + self.y > 2.0:
            raise OutOfDomain(f"x + y must not exceed 2: {self}")


def family_config(p: FamilyParams, semantics: HitSemantics = HitSemantics.CLOSED) -> SceneConfig:
    """Two balls touching on the minor circle and one at the major vertex.

    ``B1`` sits at ``(0, 0, 1)`` with radius ``x``; ``B2`` touches it at
    ``(0, s sqrt(4 - s**2) / 2, 1 - s**2 / 2)`` with ``s = x + y``; ``B3``
    sits at ``(z, 0, 0)`` on the ellipsoid with ratio ``z`` and touches the
    unit ball around each of the other centers.
    """
    s = p.x + p.y
    root = math.sqrt((2.0 - s) * (2.0 + s))
    a2 = (0.0, 0.5 * s * root, 1.0 - 0.5 * s * s)
    r3 = math.hypot(p.z, 1.0) - 1.0
    balls = (
        Ball((0.0, 0.0, 1.0), p.x),
        Ball(a2, p.y),
        Ball((p.z, 0.0, 0.0), r3),
    )
    return SceneConfig(EllipsoidMetric(p.z), balls, semantics)


@dataclass(frozen=True)
class Violation:
    kind: str  # "OffSurface" | "Overlap" | "CenterExclusion"
    balls: tuple[int, ...]
    amount: float


def feasibility_check(cfg: SceneConfig) -> list[Violation]:
    out = []
    for i, b in enumerate(cfg.balls):
        dev = cfg.ellipsoid.deviation(b.center)
        if dev > SURFACE_TOL:
            out.append(Violation("OffSurface", (i,), dev))
    for i, bi in enumerate(cfg.balls):
        for j in range(i + 1, len(cfg.balls)):
            bj = cfg.balls[j]
            gap = float(np.linalg.norm(bi.c - bj.c)) - (bi.radius + bj.radius)
            if gap < -OVERLAP_TOL:
                out.append(Violation("Overlap", (i, j), -gap))
    closed = cfg.semantics is HitSemantics.CLOSED
    for i, b in enumerate(cfg.balls):
        excess = b.radius - b.distance
        slack = CENTER_TOL * b.distance
        if excess > slack or (closed and excess >= -slack):
            out.append(Violation("CenterExclusion", (i,), excess))
    return out


def shadow_margin(cfg: SceneConfig, starts: int = 64, iters: int = 200, seed: int | None = 0) -> float:
    """``min_u max_i m_i(u)`` as found by the minimax search; >= 0 means shadow."""
    if not cfg.balls:
        raise EmptyScene("scene has no balls")
    return minimax(cfg, starts, iters, seed).value


def _quick_margin(C, k) -> float:
    return minimize_max_margin(C, k, starts=8, screen=32, seed=None, descent=False).value


@dataclass(frozen=True)
class SearchOptions:
    bracket: tuple[float, float] = (2.0, 4.0)
    d_tol: float = 0.02
    multistarts: int = 64
    seed: int = 7
    inner_iters: int = 400
    workers: int | None = None

    def __post_init__(self):
        lo, hi = self.bracket
        if not lo < hi:
            raise BadBracket(f"bracket must satisfy low < high: {self.bracket}")
        if not self.d_tol > 0:
            raise ValueError("d_tol must be positive")
        if self.multistarts < 0:
            raise ValueError("multistarts must be >= 0")


def worker_count(requested: int | None = None) -> int:
    """Worker processes: explicit request, else UMBRA_THREADS (0 = auto)."""
    if requested is None:
        env = os.environ.get("UMBRA_THREADS", "0").strip() or "0"
        requested = int(env)
    if requested <= 0:
        requested = os.cpu_count() or 1
    return max(1, requested)


class _Chart:
    """Three balls on the ellipsoid, nine unconstrained parameters.

    Each center lives in a gnomonic chart around its own base point on the
    unit sphere (then stretched onto the ellipsoid), so no start sits on a
    coordinate singularity.  Radii are ``|a| * sigmoid(w)`` with ``w``
    capped so that the center stays excluded by at least ``MIN_GAP``.
    """

    def __init__(self, d: float, base: np.ndarray):
        self.d = d
        self.stretch = np.array([d, 1.0, 1.0])
        self.base = base / np.linalg.norm(base, axis=1, keepdims=True)
        helper = np.eye(3)[np.argmin(np.abs(self.base), axis=1)]
        t1 = np.cross(self.base, helper)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        self.t1, self.t2 = t1, np.cross(self.base, t1)

    def decode(self, params):
        P = np.asarray(params, dtype=float).reshape(3, 3)
        S = self.base + P[:, :1] * self.t1 + P[:, 1:2] * self.t2
        S /= np.linalg.norm(S, axis=1, keepdims=True)
        C = S * self.stretch
        norms = np.linalg.norm(C, axis=1)
        w = np.clip(P[:, 2], W_MIN, W_MAX)
        gap = 1.0 / (1.0 + np.exp(w))  # 1 - sigmoid(w), exact for large w
        R = norms * (1.0 - gap)
        k = norms * norms * gap * (2.0 - gap)
        return C, R, k

    def scene(self, params, semantics=HitSemantics.CLOSED) -> SceneConfig:
        C, R, _ = self.decode(params)
        return SceneConfig(EllipsoidMetric(self.d), tuple(Ball(tuple(c), r) for c, r in zip(C, R)), semantics)

    @classmethod
    def around(cls, cfg: SceneConfig) -> tuple["_Chart", np.ndarray]:
        d = cfg.d
        C = np.array([b.center for b in cfg.balls])
        chart = cls(d, C / np.array([d, 1.0, 1.0]))
        w = []
        for b in cfg.balls:
            gap = max((b.distance - b.radius) / b.distance, MIN_GAP)
            w.append(math.log((1.0 - gap) / gap))
        params = np.zeros((3, 3))
        params[:, 2] = w
        return chart, params.ravel()


def _overlap(C, R) -> float:
    total = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            total += max(0.0, R[i] + R[j] - float(np.linalg.norm(C[i] - C[j])))
    return total


def _repair(cfg: SceneConfig) -> SceneConfig:
    """Shrink radii until no pair overlaps beyond the check tolerance."""
    balls = list(cfg.balls)
    for _ in range(8):
        changed = False
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                bi, bj = balls[i], balls[j]
                over = bi.radius + bj.radius - float(np.linalg.norm(bi.c - bj.c))
                if over > 0:
                    cut = 0.5 * over * (1 + 1e-9) + 1e-15
                    balls[i] = Ball(bi.center, max(bi.radius - cut, 0.5 * bi.radius))
                    balls[j] = Ball(bj.center, max(bj.radius - cut, 0.5 * bj.radius))
                    changed = True
        if not changed:
            break
    return SceneConfig(cfg.ellipsoid, tuple(balls), cfg.semantics)


def _polish(chart: _Chart, x0: np.ndarray, maxfev: int, chart_step: float, w_step: float):
    """Penalized Nelder-Mead from ``x0``; returns (params, margin, overlap)."""
    weight = PENALTY_WEIGHT
    x = np.array(x0, dtype=float)
    best = None
    for _ in range(3):
        def objective(p):
            C, R, k = chart.decode(p)
            return -_quick_margin(C, k) + weight * _overlap(C, R)

        simplex = [x]
        for i in range(9):
            step = np.zeros(9)
            step[i] = w_step if i % 3 == 2 else chart_step
            simplex.append(x + step)
        res = minimize(objective, x, method="Nelder-Mead",
                       options={"maxfev": maxfev, "initial_simplex": np.array(simplex),
                                "xatol": 1e-14, "fatol": 1e-17})
        x = res.x
        C, R, k = chart.decode(x)
        over = _overlap(C, R)
        best = (x, _quick_margin(C, k), over)
        if over <= OVERLAP_TOL:
            break
        weight *= 2.0
    return best


def _finish(chart: _Chart, params) -> tuple[SceneConfig, float]:
    cfg = _repair(chart.scene(params))
    C, k = cfg.arrays()
    return cfg, _quick_margin(C, k)


def best_family(d: float) -> tuple[FamilyParams, float]:
    """Best member of the closed-form family on the ellipsoid with ratio ``d``.

    Searches ``x = 1 - 10**-p`` and ``y = 1 - 10**-q`` with ``x >= y``;
    the family is symmetric under swapping the two radii.
    """
    def margin(p, q):
        x = 1.0 - 10.0 ** (-min(p, -math.log10(MIN_GAP)))
        y = 1.0 - 10.0 ** (-q)
        if y > x or y <= 0:
            return -math.inf, None
        fp = FamilyParams(x, y, d)
        C, k = family_config(fp).arrays()
        return _quick_margin(C, k), fp

    best = (-math.inf, None, 0.0, 0.0)
    for p in np.arange(1.0, 12.5, 1.0):
        for q in np.linspace(0.3, 5.0, 25):
            m, fp = margin(p, q)
            if m > best[0]:
                best = (m, fp, p, q)
    _, _, p0, q0 = best
    res = minimize(lambda v: -margin(*v)[0], [p0, q0], method="Nelder-Mead",
                   options={"maxfev": 200, "xatol": 1e-10, "fatol": 1e-18,
                            "initial_simplex": [[p0, q0], [p0 - 0.5, q0], [p0, q0 + 0.1]]})
    m, fp = margin(*res.x)
    if fp is not None and m > best[0]:
        return fp, m
    return best[1], best[0]


def _random_start(d: float, seed: int, index: int) -> tuple[_Chart, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    base = rng.normal(size=(3, 3))
    chart = _Chart(d, base)
    params = np.zeros((3, 3))
    frac = rng.uniform(0.3, 0.99, size=3)
    params[:, 2] = np.log(frac / (1.0 - frac))
    return chart, params.ravel()


def _run_start(args):
    d, seed, index, maxfev = args
    chart, x0 = _random_start(d, seed, index)
    x, _, _ = _polish(chart, x0, maxfev, 0.1, 1.0)
    cfg, m = _finish(chart, x)
    return index, cfg, m


def _stretch_scene(cfg: SceneConfig, d: float) -> SceneConfig:
    """Move a scene onto the ellipsoid with ratio ``d`` by scaling x."""
    factor = d / cfg.d
    balls = []
    for b in cfg.balls:
        c = (b.center[0] * factor, b.center[1], b.center[2])
        n = math.hypot(*c)
        balls.append(Ball(c, min(b.radius, n * (1.0 - MIN_GAP))))
    return SceneConfig(EllipsoidMetric(d), tuple(balls), cfg.semantics)


def best_config_for_d(d: float, opts: SearchOptions | None = None, *, warm=(),
                      stop_at_shadow: bool = False) -> tuple[SceneConfig, float]:
    """Maximize the shadow margin over feasible three-ball scenes at ratio ``d``.

    Starts: the best closed-form family member (``d >= 2``), any ``warm``
    scenes (moved onto this ellipsoid), then ``opts.multistarts`` seeded
    random scenes.  Only feasible scenes are returned; the margin may be
    negative.  With ``stop_at_shadow`` the random starts stop at the first
    batch that yields a non-negative margin.
    """
    opts = opts or SearchOptions()
    if not d >= 1.0:
        raise OutOfDomain(f"d must be >= 1, got {d}")
    candidates: list[tuple[float, int, SceneConfig]] = []

    def consider(cfg, m, order):
        if not feasibility_check(cfg):
            candidates.append((m, order, cfg))

    seeds = []
    if d >= 2.0:
        fp, m = best_family(d)
        fam = family_config(fp)
        consider(fam, m, -2)
        seeds.append(fam)
    seeds += [_stretch_scene(w, d) for w in warm]
    for n, cfg in enumerate(seeds):
        chart, x0 = _Chart.around(cfg)
        x, _, _ = _polish(chart, x0, 3 * opts.inner_iters, 1e-4, 0.2)
        polished, m = _finish(chart, x)
        consider(polished, m, -1)
        if n > 0:
            C, k = cfg.arrays()
            consider(_repair(cfg), _quick_margin(C, k), -1)

    def good():
        return any(m >= 0 for m, _, _ in candidates)

    if not (stop_at_shadow and good()):
        workers = worker_count(opts.workers)
        jobs = [(d, opts.seed, i, opts.inner_iters) for i in range(opts.multistarts)]
        pool = ProcessPoolExecutor(workers) if workers > 1 else None
        try:
            for lo in range(0, len(jobs), BATCH):
                batch = jobs[lo:lo + BATCH]
                results = pool.map(_run_start, batch) if pool else map(_run_start, batch)
                for index, cfg, m in results:
                    consider(cfg, m, index)
                if stop_at_shadow and good():
                    break
        finally:
            if pool:
                pool.shutdown()
    if not candidates:
        raise ArithmeticError(f"no feasible configuration found at d={d}")
    # best margin wins; ties go to the earliest start
    m, _, cfg = max(candidates, key=lambda t: (t[0], -t[1]))
    return cfg, m


@dataclass
class OptimizationResult:
    d_estimate: float
    best_scene: SceneConfig
    margin_at_best: float
    history: list[tuple[float, float]] = field(default_factory=list)
    bracket: tuple[float, float] = (math.nan, math.nan)


def min_axis_ratio(opts: SearchOptions | None = None) -> OptimizationResult:
    """Bisection on ``d`` with predicate ``best_config_for_d(d).margin >= 0``."""
    opts = opts or SearchOptions()
    lo, hi = opts.bracket
    history = []

    def probe(d):
        cfg, m = best_config_for_d(d, opts, stop_at_shadow=True)
        history.append((d, m))
        log.info("d=%.6f margin=%.3e", d, m)
        return cfg, m

    _, m_lo = probe(lo)
    if m_lo >= 0:
        raise BadBracket(f"lower end d={lo} already admits a shadow (margin {m_lo:.3e})")
    best_cfg, m_hi = probe(hi)
    if m_hi < 0:
        raise BadBracket(f"upper end d={hi} admits no shadow (margin {m_hi:.3e})")
    while hi - lo > opts.d_tol:
        mid = 0.5 * (lo + hi)
        cfg, m = probe(mid)
        if m >= 0:
            hi, best_cfg = mid, cfg
        else:
            lo = mid
    margin = shadow_margin(best_cfg)
    return OptimizationResult(0.5 * (lo + hi), best_cfg, margin, history, (lo, hi))
