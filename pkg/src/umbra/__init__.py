"""Shadow tests for balls centered on a sphere or a prolate ellipsoid.

A configuration of balls casts a shadow at the origin when every line
through the origin meets at least one ball.
"""

from .errors import (
    BadBracket,
    BallContainsCenter,
    EmptyScene,
    GeometryError,
    NoCommonTangent,
    NonPositiveX2,
    NotUnit,
    OutOfDomain,
    ParseError,
    SingularMap,
    SingularSystem,
    UmbraError,
    ValidationError,
)
from .geometry import (
    Ball,
    EllipsoidMetric,
    HitSemantics,
    LinearMap,
    MappedBall,
    ShadowCone,
    cap_angular_radius,
    cone_under_ball,
    hit_margin,
    line_hits_ball,
    line_hits_mapped_ball,
    mapped_hit_margin,
)
from .optimizer import (
    FamilyParams,
    OptimizationResult,
    SearchOptions,
    Violation,
    best_config_for_d,
    family_config,
    feasibility_check,
    min_axis_ratio,
    shadow_margin,
)
from .tangent import (
    TangentPair,
    TangentSolution,
    common_tangent_direction,
    equator_arc_width,
    max_projection_ratio,
    projection_angle,
    second_center,
)
from .verifier import (
    ConeSystemSolution,
    Coverage,
    SceneConfig,
    SolutionClass,
    Verdict,
    VerdictKind,
    VerifyOptions,
    Witness,
    certified_cover_mesh,
    cone_cover_certificate,
    find_missing_line,
    sample_coverage,
    sign_patterns,
    solve_sign_system,
    verify,
)

__version__ = "0.1.0"
