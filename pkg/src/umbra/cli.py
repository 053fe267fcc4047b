"""Command-line front end.

Exit codes: 0 shadow certified (or the command succeeded), 1 no shadow
certified, 2 undecided, 3 usage or input error, 4 internal numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BadBracket, GeometryError, OutOfDomain, ParseError, UmbraError, ValidationError
from .geometry import (
    EllipsoidMetric,
    HitSemantics,
    LinearMap,
    hit_margin,
    is_hit,
    mapped_margin_matrix,
)
from .optimizer import FamilyParams, SearchOptions, family_config, feasibility_check, min_axis_ratio
from .scene_io import (
    MappedScene,
    Report,
    digest,
    dumps_scene,
    mapped_scene_to_dict,
    parse_scene,
    scene_to_dict,
)
from .sphere import fibonacci_lattice
from .tangent import (
    TangentPair,
    common_tangent_direction,
    equator_arc_width,
    max_projection_ratio,
    projection_angle,
)
from .verifier import (
    SceneConfig,
    VerdictKind,
    VerifyOptions,
    iter_sample_margins,
    sample_coverage,
    verify,
)

EXIT_SHADOW, EXIT_NO_SHADOW, EXIT_UNDECIDED, EXIT_USAGE, EXIT_NUMERIC = range(5)
VERDICT_EXIT = {
    VerdictKind.SHADOW: EXIT_SHADOW,
    VerdictKind.NO_SHADOW: EXIT_NO_SHADOW,
    VerdictKind.UNDECIDED: EXIT_UNDECIDED,
}
INVARIANCE_SAMPLES = 10_000
INVARIANCE_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def _canonical(args: argparse.Namespace, skip=("format", "report", "emit", "csv", "func")) -> str:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return json.dumps(items, sort_keys=True, default=str)


def _verdict_report(cfg: SceneConfig, args, command: str) -> Report:
    v = verify(cfg, VerifyOptions(args.max_level, args.starts, args.iters, args.seed))
    cov = sample_coverage(cfg, args.samples, args.seed)
    rep = Report(command, verdict=v.kind.value, method=v.method, fraction_covered=cov.fraction_covered)
    if v.witness is not None:
        # the verifier already rechecked; check once more on what we emit
        if not v.witness.recheck(cfg.balls):
            raise ArithmeticError("witness failed re-verification")
        rep.witness = [float(x) for x in v.witness.direction]
        rep.margins = list(v.witness.margins)
    rep.details = {
        "balls": len(cfg.balls),
        "d": cfg.d,
        "semantics": cfg.semantics.value,
        "mesh_level": v.mesh_level,
        "best_margin": v.best_margin,
        "best_direction": None if v.best_direction is None else list(v.best_direction),
        "sampled_min_margin": cov.min_margin,
    }
    rep.exit_code = VERDICT_EXIT[v.kind]
    return rep


def cmd_verify(args) -> Report:
    cfg = parse_scene(args.scene)
    rep = _verdict_report(cfg, args, "verify")
    rep.input_digest = digest(Path(args.scene).read_bytes())
    return rep


def cmd_oracle(args) -> Report:
    cfg = parse_scene(args.scene)
    cov = sample_coverage(cfg, args.samples, args.seed)
    rep = Report("oracle", fraction_covered=cov.fraction_covered)
    rep.input_digest = digest(Path(args.scene).read_bytes())
    rep.details = {"samples": args.samples, "seed": args.seed, "min_margin": cov.min_margin,
                   "argmin_direction": list(cov.argmin_direction)}
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("u1,u2,u3,maxMargin\n")
            for block, M in iter_sample_margins(cfg, args.samples, args.seed):
                np.savetxt(fh, np.column_stack([block, M.max(axis=1)]), fmt="%.17g", delimiter=",")
    u = cov.argmin_direction
    margins = [hit_margin(u, b) for b in cfg.balls]
    if not any(is_hit(m, cfg.semantics) for m in margins):
        rep.verdict = VerdictKind.NO_SHADOW.value
        rep.method = "sampling"
        rep.witness = [float(x) for x in u]
        rep.margins = margins
        rep.exit_code = EXIT_NO_SHADOW
    else:
        # sampling alone never proves a shadow
        rep.verdict = VerdictKind.UNDECIDED.value
        rep.exit_code = EXIT_UNDECIDED
    return rep


def cmd_tangent_scan(args) -> Report:
    scan = max_projection_ratio(args.grid, args.refine, ordered=args.ordered)
    w = common_tangent_direction(TangentPair(0.9, 0.3))
    rep = Report("tangent-scan")
    rep.details = {
        "grid": scan.grid,
        "refine": scan.refine_iters,
        "ordered": scan.ordered,
        "max_ratio": scan.max_ratio,
        "argmax": list(scan.argmax),
        "valid_points": scan.valid_points,
        "excluded_no_tangent": scan.excluded_no_tangent,
        "excluded_nonpositive_x2": scan.excluded_nonpositive_x2,
        "points_with_ratio_ge_1": scan.violations,
        "phi_at_max": 2.0 * math.atan(scan.max_ratio),
        "bound_holds": scan.bound_holds,
        "witness_0.9_0.3_ratio": w.ratio,
        "witness_0.9_0.3_phi": projection_angle(w),
    }
    rep.exit_code = 0 if scan.bound_holds else 1
    return rep


def cmd_equator(args) -> Report:
    theta = math.pi if args.limit else args.theta
    width = equator_arc_width(theta, allow_limit=args.limit)
    rep = Report("equator")
    rep.details = {"theta": theta, "width": width, "half_pi_gap": 0.5 * math.pi - width}
    return rep


def cmd_family(args) -> Report:
    sem = HitSemantics(args.semantics)
    cfg = family_config(FamilyParams(args.x, args.y, args.z), sem)
    text = dumps_scene(cfg)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(text)
    rep = Report("family", input_digest=digest(_canonical(args)))
    rep.details = {
        "scene": scene_to_dict(cfg),
        "violations": [{"kind": v.kind, "balls": list(v.balls), "amount": v.amount}
                       for v in feasibility_check(cfg)],
    }
    return rep


def cmd_optimize(args) -> Report:
    opts = SearchOptions(bracket=args.bracket, d_tol=args.tol, multistarts=args.multistarts,
                         seed=args.seed, inner_iters=args.inner_iters)
    res = min_axis_ratio(opts)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(dumps_scene(res.best_scene))
    rep = Report("optimize", input_digest=digest(_canonical(args)))
    rep.details = {
        "d_estimate": res.d_estimate,
        "final_bracket": list(res.bracket),
        "margin_at_best": res.margin_at_best,
        "history": [list(h) for h in res.history],
        "best_scene": scene_to_dict(res.best_scene),
    }
    return rep


def _image_margins(U: np.ndarray, ms: MappedScene) -> np.ndarray:
    """Hit margins against the image ellipsoids, via their quadric form.

    For ``E = {y : (y - p)^T S (y - p) <= r^2}`` with ``S = T^-T T^-1`` the
    line ``{t u}`` comes closest in the ``S`` norm at ``t = u.Sp / u.Su``.
    The returned value is ``r^2`` minus that squared distance.
    """
    Tinv = ms.map.inverse
    S = Tinv.T @ Tinv
    out = np.empty((len(U), len(ms.balls)))
    for j, b in enumerate(ms.balls):
        p = ms.map(b.c)
        Sp = S @ p
        uSu = np.einsum("ij,jk,ik->i", U, S, U)
        uSp = U @ Sp
        out[:, j] = b.radius ** 2 - (p @ Sp - uSp * uSp / uSu)
    return out


def _invariance_check(cfg: SceneConfig, ms: MappedScene, rep: Report, seed: int) -> list[str]:
    problems = []
    T = ms.map
    U = fibonacci_lattice(INVARIANCE_SAMPLES, seed)
    V = U @ T.matrix.T
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    orig = np.concatenate([M for _, M in iter_sample_margins(cfg, INVARIANCE_SAMPLES, seed)])
    image = _image_margins(V, ms)
    pulled = mapped_margin_matrix(V, ms.mapped_balls)
    # the quadric margin is in image units; only its sign is comparable
    if np.max(np.abs(pulled - orig)) > INVARIANCE_TOL:
        problems.append("mapped margins differ from the original margins")
    decisive = np.abs(orig) > INVARIANCE_TOL
    if np.any((np.sign(image) != np.sign(orig)) & decisive):
        problems.append("image-space hit predicate disagrees with the original")
    if rep.witness is not None:
        w = T(np.array(rep.witness))
        w /= np.linalg.norm(w)
        m = _image_margins(w[None, :], ms)[0]
        if any(is_hit(x, cfg.semantics) for x in m):
            problems.append("mapped witness line hits an image ball")
    elif rep.verdict == VerdictKind.SHADOW.value:
        covered = is_hit(image.max(axis=1), cfg.semantics) | ~decisive.any(axis=1)
        if not covered.all():
            problems.append("an image direction misses every image ball of a shadow scene")
    return problems


def cmd_transform(args) -> Report:
    cfg = parse_scene(args.scene)
    if not (args.scale > 0 and math.isfinite(args.scale)):
        raise UsageError("--scale must be a positive finite number")
    new_d = cfg.d * args.scale
    if abs(new_d - 1.0) <= 1e-12:
        new_d = 1.0
    if new_d < 1.0:
        raise UsageError(f"scaled axis ratio {new_d!r} is below 1")
    try:
        T = LinearMap.stretch(args.scale, 0)
    except GeometryError as exc:
        raise UsageError(str(exc)) from None
    ms = MappedScene(EllipsoidMetric(new_d), T, cfg.balls, cfg.semantics)
    doc = mapped_scene_to_dict(ms)
    if args.emit:
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc, indent=2) + "\n")
    rep = _verdict_report(cfg, args, "transform")
    rep.input_digest = digest(Path(args.scene).read_bytes())
    problems = _invariance_check(cfg, ms, rep, args.seed)
    rep.details["scale"] = args.scale
    rep.details["mapped_scene"] = doc
    rep.details["invariance_ok"] = not problems
    rep.details["invariance_problems"] = problems
    if problems:
        rep.exit_code = EXIT_NUMERIC
    return rep


def _verify_flags(p):
    p.add_argument("--max-level", type=int, default=6, help="finest icosphere level for the mesh certificate")
    p.add_argument("--starts", type=int, default=64, help="minimax multistarts")
    p.add_argument("--iters", type=int, default=200, help="descent iterations per start")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10_000, help="lattice size for the coverage figure")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--report", metavar="PATH", help="also write the JSON report here")

    parser = _Parser(prog="umbra", description="Shadow tests for balls on spheres and prolate ellipsoids.")
    parser.add_argument("--version", action="version", version=f"umbra {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", parents=[common], help="certify shadow or find a witness line")
    p.add_argument("scene")
    _verify_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", parents=[common], help="lattice sampling of direction coverage")
    p.add_argument("scene")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", metavar="PATH", help="write u1,u2,u3,maxMargin rows")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("tangent-scan", parents=[common], help="maximize x1/x2 over the radius square")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--refine", type=int, default=3)
    p.add_argument("--ordered", action="store_true", help="restrict to r1 >= r2")
    p.set_defaults(func=cmd_tangent_scan)

    p = sub.add_parser("equator", parents=[common], help="equatorial arc covered by the second ball")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", type=float)
    g.add_argument("--limit", action="store_true", help="evaluate at theta = pi")
    p.set_defaults(func=cmd_equator)

    p = sub.add_parser("family", parents=[common], help="build a member of the three-parameter family")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--semantics", choices=("closed", "open"), default="closed")
    p.add_argument("--emit", metavar="PATH", help="write the scene file here")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("optimize", parents=[common], help="bisect for the minimal axis ratio")
    p.add_argument("--bracket", type=_pair, default=(2.0, 4.0), metavar="LO,HI")
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--multistarts", type=int, default=64)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--inner-iters", type=int, default=400)
    p.add_argument("--emit", metavar="PATH", help="write the best scene here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("transform", parents=[common], help="stretch the major axis and check invariance")
    p.add_argument("scene")
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--emit", metavar="PATH", help="write the mapped scene here")
    _verify_flags(p)
    p.set_defaults(func=cmd_transform)
    return parser


def run(argv=None) -> tuple[int, Report | None]:
    """Parse and execute one command; returns the exit code and the report."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"umbra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rep = args.func(args)
        for w in caught:
            print(f"umbra: warning: {w.message}", file=sys.stderr)
    except (UsageError, ParseError, ValidationError, BadBracket, OutOfDomain, GeometryError,
            OSError, ValueError) as exc:
        print(f"umbra: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except (UmbraError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"umbra: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None
    rep.timing_s = time.perf_counter() - start
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json())
    sys.stdout.write(rep.to_json() if args.format == "json" else rep.to_text())
    return rep.exit_code, rep


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
