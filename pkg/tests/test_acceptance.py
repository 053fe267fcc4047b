"""Exit criteria of the project, one test per criterion.

Each test prints a single ``CRITERION n: PASS`` or ``CRITERION n: FAIL``
line with the measured figures, then asserts the criterion as stated.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import SQRT_2_3, random_feasible_sphere_scene
from umbra import (
    Ball,
    FamilyParams,
    HitSemantics,
    LinearMap,
    MappedBall,
    SingularSystem,
    TangentPair,
    VerdictKind,
    certified_cover_mesh,
    common_tangent_direction,
    cone_cover_certificate,
    equator_arc_width,
    family_config,
    feasibility_check,
    find_missing_line,
    hit_margin,
    line_hits_ball,
    line_hits_mapped_ball,
    sample_coverage,
    verify,
)
from umbra import cli
from umbra.geometry import is_hit, mapped_margin_matrix, margin_matrix
from umbra.scene_io import dumps_scene
from umbra.sphere import fibonacci_lattice
from umbra.verifier import sphere_scene

CLOSED, OPEN = HitSemantics.CLOSED, HitSemantics.OPEN
TWO_SQRT2 = 2.0 * math.sqrt(2.0)


@pytest.fixture
def announce(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    return emit


def _cli_json(argv, capsys):
    code, _ = cli.run(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_criterion_1_tangent_angle_bound(announce, capsys):
    t0 = time.perf_counter()
    code, rep = _cli_json(["tangent-scan", "--grid", "500", "--refine", "3"], capsys)
    elapsed = time.perf_counter() - t0
    d = rep["details"]
    sol = common_tangent_direction(TangentPair(0.9, 0.3))
    checks = {
        "every valid grid point below 1": d["points_with_ratio_ge_1"] == 0,
        "max ratio below 1": d["max_ratio"] < 1.0,
        "witness ratio": abs(sol.ratio - 0.28052) <= 1e-4,
        "witness residuals": max(sol.residuals()) <= 1e-9,
        "runtime": elapsed < 10.0,
    }
    ok = all(checks.values())
    announce(1, ok, f"max_ratio={d['max_ratio']:.6g} at {d['argmax']}, "
                    f"{d['points_with_ratio_ge_1']} of {d['valid_points']} valid points have ratio >= 1, "
                    f"witness ratio={sol.ratio:.6f}, {elapsed:.2f}s, failed={[k for k, v in checks.items() if not v]}")
    assert ok


def test_criterion_2_equatorial_limit(announce):
    t0 = time.perf_counter()
    w = equator_arc_width(math.pi - 1e-4)
    grid = np.linspace(math.pi / 3, math.pi, 1002)[1:-1]
    widths = np.array([equator_arc_width(t) for t in grid])
    elapsed = time.perf_counter() - t0
    in_range = math.pi / 2 - 1e-3 <= w <= math.pi / 2
    monotone = bool(np.all(np.diff(widths) >= 0))
    ok = in_range and monotone and elapsed < 1.0
    announce(2, ok, f"width(pi-1e-4)={w!r}, pi/2-width={math.pi / 2 - w:.3e}, "
                    f"monotone={monotone}, {elapsed * 1e3:.1f}ms")
    assert ok


def test_criterion_3_sphere_insufficiency(announce):
    rng = np.random.default_rng(2026)
    t0 = time.perf_counter()
    failures = 0
    for _ in range(200):
        cfg = random_feasible_sphere_scene(rng)
        assert feasibility_check(cfg) == []
        v = verify(cfg)
        good = (v.kind is VerdictKind.NO_SHADOW
                and all(hit_margin(v.witness.direction, b) < 0 for b in cfg.balls))
        failures += not good
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 60.0
    announce(3, ok, f"{200 - failures}/200 scenes certified no-shadow with re-verified witness, {elapsed:.1f}s")
    assert ok


def test_criterion_4_minimal_axis_ratio(announce, capsys):
    t0 = time.perf_counter()
    code, rep = _cli_json(["optimize", "--bracket", "2,4", "--tol", "0.02",
                           "--multistarts", "64", "--seed", "7"], capsys)
    elapsed = time.perf_counter() - t0
    d_est = rep["details"]["d_estimate"]
    ok = code == 0 and abs(d_est - 2.8284) <= 0.05 and elapsed < 600.0
    announce(4, ok, f"d_estimate={d_est!r}, |d - 2.8284|={abs(d_est - 2.8284):.4f}, "
                    f"margin_at_best={rep['details']['margin_at_best']:.3e}, {elapsed:.0f}s")
    assert ok


def test_criterion_5_family_behavior(announce):
    g = np.linspace(0.02, 1.0, 50)
    zs = np.linspace(1.0, 4.0, 50)
    worst = 0.0
    boundary_ok = True
    for x in g:
        for y in g:
            for z in zs:
                cfg = family_config(FamilyParams(x, y, z))
                a1, a2, a3 = (b.c for b in cfg.balls)
                h = math.hypot(z, 1.0)
                errs = (
                    abs(np.linalg.norm(a2) - 1.0),
                    abs(np.linalg.norm(a1 - a2) - (x + y)),
                    abs(np.linalg.norm(a3 - a1) - h),
                    abs(np.linalg.norm(a3 - a2) - h),
                    *(cfg.ellipsoid.deviation(b.center) for b in cfg.balls),
                )
                worst = max(worst, *errs)
            # feasibility is independent of z for the checks below; sample two values
            for z in (zs[0], zs[-1]):
                v = feasibility_check(family_config(FamilyParams(x, y, z)))
                expect = {(i,) for i, r in ((0, x), (1, y)) if r == 1.0}
                got = {viol.balls for viol in v if viol.kind == "CenterExclusion"}
                others = [viol for viol in v if viol.kind != "CenterExclusion"]
                boundary_ok &= got == expect and not others
    algebra_ok = worst <= 1e-9

    pinned = family_config(FamilyParams(0.99, 0.99, 2.9))
    cov = sample_coverage(pinned, 10 ** 6)
    oracle_ok = cov.min_margin >= 0
    sign_ok = cone_cover_certificate(pinned.balls)
    mesh_ok = any(certified_cover_mesh(pinned, lvl) for lvl in range(8))
    ok = algebra_ok and boundary_ok and oracle_ok and sign_ok and mesh_ok
    announce(5, ok, f"algebra max error={worst:.2e}, boundary={boundary_ok}; family(0.99,0.99,2.9): "
                    f"oracle min_margin={cov.min_margin:.6g} covered={cov.fraction_covered:.6f}, "
                    f"sign-pattern={sign_ok}, mesh(<=7)={mesh_ok}")
    assert ok


def _certificate_scene(rng):
    while True:
        C = rng.normal(size=(3, 3))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        balls = [Ball(tuple(c), float(rng.uniform(0.8, 0.999))) for c in C]
        try:
            if cone_cover_certificate(balls):
                return sphere_scene(balls)
        except SingularSystem:
            continue


def test_criterion_6_certificate_soundness(announce):
    rng = np.random.default_rng(606)
    t0 = time.perf_counter()
    bad_cert = 0
    worst = math.inf
    for i in range(500):
        cfg = _certificate_scene(rng)
        cov = sample_coverage(cfg, 10 ** 6, seed=i)
        worst = min(worst, cov.min_margin)
        bad_cert += not (cov.fraction_covered == 1.0 and cov.min_margin >= -1e-9)
    bad_witness = 0
    found = 0
    while found < 500:
        cfg = random_feasible_sphere_scene(rng)
        w = find_missing_line(cfg, seed=found)
        if w is None:
            continue
        found += 1
        bad_witness += not all(hit_margin(w.direction, b) < 0 for b in cfg.balls)
    elapsed = time.perf_counter() - t0
    ok = bad_cert == 0 and bad_witness == 0
    announce(6, ok, f"false certificates={bad_cert}/500 (worst sampled margin {worst:.3e}), "
                    f"false witnesses={bad_witness}/500, {elapsed:.0f}s")
    assert ok


def _random_map(rng):
    Q1, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    Q2, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    return LinearMap(Q1 @ np.diag(np.exp(rng.uniform(-2.3, 2.3, size=3))) @ Q2)


def test_criterion_7_affine_invariance(announce):
    rng = np.random.default_rng(7)
    U = fibonacci_lattice(10 ** 4, seed=3)
    worst = 0.0
    disagreements = 0
    scalar_checked = 0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        C = rng.normal(size=(n, 3))
        balls = [Ball(tuple(c), float(rng.uniform(0.05, 0.99) * np.linalg.norm(c))) for c in C]
        Cm = np.array([b.center for b in balls])
        k = np.array([b.power for b in balls])
        M = margin_matrix(U, Cm, k)
        for _ in range(50):
            T = _random_map(rng)
            V = U @ T.matrix.T
            V /= np.linalg.norm(V, axis=1, keepdims=True)
            MM = mapped_margin_matrix(V, [MappedBall(b, T) for b in balls])
            worst = max(worst, float(np.max(np.abs(MM - M))))
            decisive = np.abs(M) > 1e-9
            for sem in (CLOSED, OPEN):
                disagreements += int(np.count_nonzero((is_hit(M, sem) != is_hit(MM, sem)) & decisive))
            # the scalar predicates on a handful of directions per pair
            for j in rng.integers(0, len(U), size=4):
                for b in balls:
                    if abs(hit_margin(U[j], b)) > 1e-9:
                        scalar_checked += 1
                        disagreements += line_hits_ball(U[j], b) != line_hits_mapped_ball(V[j], MappedBall(b, T))
    ok = worst <= 1e-9 and disagreements == 0
    announce(7, ok, f"2500 scene/map pairs x 1e4 directions, max margin gap={worst:.2e}, "
                    f"disagreements={disagreements}, scalar spot checks={scalar_checked}")
    assert ok


def test_criterion_8_boundary_semantics(announce, capsys, tmp_path):
    verdicts = {}
    for sem in (CLOSED, OPEN):
        cfg = sphere_scene([Ball(tuple(e), SQRT_2_3) for e in np.eye(3)], sem)
        path = tmp_path / f"{sem.value}.json"
        path.write_text(dumps_scene(cfg))
        code, rep = _cli_json(["verify", str(path)], capsys)
        verdicts[sem] = (code, rep["verdict"], rep["method"], rep["witness"])
    closed_ok = verdicts[CLOSED][:3] == (0, "certified-shadow", "sign-pattern")
    open_ok = verdicts[OPEN][:2] == (1, "certified-no-shadow")
    if open_ok:
        u = np.array(verdicts[OPEN][3])
        open_ok = not any(line_hits_ball(u, Ball(tuple(e), SQRT_2_3), OPEN) for e in np.eye(3))
    ok = closed_ok and open_ok
    announce(8, ok, f"closed -> {verdicts[CLOSED][1]} ({verdicts[CLOSED][2]}), "
                    f"open -> {verdicts[OPEN][1]} witness={verdicts[OPEN][3]}")
    assert ok
