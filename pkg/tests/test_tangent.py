import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from umbra import (
    NoCommonTangent,
    NonPositiveX2,
    OutOfDomain,
    TangentPair,
    common_tangent_direction,
    equator_arc_width,
    max_projection_ratio,
    projection_angle,
    second_center,
)
from umbra.tangent import TangentSolution, second_ball_radius

# reference values recomputed at 40 digits with mpmath
PHI_08_05 = 0.41931126456944696
X_08_05 = (0.16649846817651584, 0.78248211487220193, 0.6)
X_09_03 = (0.24307906308400170, 0.86655211562271543)
RATIO_09_03 = X_09_03[0] / X_09_03[1]
PHI_09_03 = 0.54696853798972072
WIDTH_2PI_3 = 1.3308975461213947


def test_second_center_examples():
    b2, b3 = second_center(TangentPair(0.5, 0.5))
    assert b3 == pytest.approx(0.5, abs=1e-15)
    assert b2 == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert second_center((1.0, 1.0)) == (0.0, -1.0)
    b2, b3 = second_center(TangentPair(0.8, 0.5))
    assert b3 == pytest.approx(0.155, abs=1e-15)
    assert b2 == pytest.approx(0.98791, abs=1e-5)
    assert b2 * b2 + b3 * b3 == pytest.approx(1.0, abs=1e-12)


def test_pair_domain():
    for bad in [(0.0, 0.5), (1.0, 0.5), (0.5, -0.1), (math.nan, 0.5)]:
        with pytest.raises(OutOfDomain):
            TangentPair(*bad)


def test_equal_radii_direction():
    s = common_tangent_direction(TangentPair(0.6, 0.6))
    np.testing.assert_allclose(s.x, [0, 0.6, 0.8], atol=1e-12)
    assert projection_angle(s) == pytest.approx(0.0, abs=1e-7)


def test_unequal_radii_direction():
    s = common_tangent_direction(TangentPair(0.8, 0.5))
    np.testing.assert_allclose(s.x, X_08_05, atol=1e-12)
    assert max(s.residuals()) <= 1e-12
    assert projection_angle(s) == pytest.approx(PHI_08_05, abs=1e-12)


def test_witness_pair():
    s = common_tangent_direction(TangentPair(0.9, 0.3))
    assert (s.x1, s.x2) == pytest.approx(X_09_03, abs=1e-12)
    assert s.ratio == pytest.approx(0.28052, abs=1e-4)
    assert s.phi == pytest.approx(PHI_09_03, abs=1e-12)
    assert s.phi < math.pi / 2


def test_no_common_tangent():
    with pytest.raises(NoCommonTangent):
        common_tangent_direction(TangentPair(0.05, 0.9))


def test_nonpositive_x2():
    s = TangentSolution(TangentPair(0.5, 0.5), 0.0, 1.0, 0.1, -0.2, 0.8)
    with pytest.raises(NonPositiveX2):
        projection_angle(s)


@settings(max_examples=500, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_residuals_and_norm(r1, r2):
    try:
        s = common_tangent_direction(TangentPair(r1, r2))
    except NoCommonTangent:
        return
    assert max(s.residuals()) <= 1e-9
    assert np.linalg.norm(s.x) == pytest.approx(1.0, abs=1e-9)
    assert s.x3 == pytest.approx(math.sqrt(1 - r1 * r1), abs=1e-9)
    assert s.b2 ** 2 + s.b3 ** 2 == pytest.approx(1.0, abs=1e-9)
    assert s.x1 >= 0


@settings(max_examples=300, deadline=None)
@given(st.floats(0.001, 0.999))
def test_equal_radii_collapse(r):
    s = common_tangent_direction(TangentPair(r, r))
    assert s.x1 == pytest.approx(0.0, abs=1e-7)
    # x1 is a square root, so compare its square against the 1e-9 budget
    assert s.x1 ** 2 <= 1e-9


def test_ratio_zero_on_diagonal():
    for r in np.linspace(0.05, 0.95, 19):
        assert common_tangent_direction(TangentPair(r, r)).ratio == pytest.approx(0.0, abs=1e-6)


def test_scan_reports_bookkeeping():
    scan = max_projection_ratio(64, 3)
    assert scan.valid_points + scan.excluded_no_tangent + scan.excluded_nonpositive_x2 == 64 * 64
    assert scan.max_ratio >= 0.28
    assert scan.max_ratio >= scan.worst_grid_ratio
    assert len(scan.history) == 4


def test_scan_ordered_region_stays_below_one():
    scan = max_projection_ratio(100, 3, ordered=True)
    assert scan.violations == 0
    assert 0.28 <= scan.max_ratio < 1.0


def test_scan_full_square_counts_large_ratios():
    # below the diagonal x2 tends to 0 before the tangent disappears
    scan = max_projection_ratio(100, 0)
    assert scan.violations > 0
    r1, r2 = scan.argmax
    assert r1 < r2


def test_scan_grid_minimum():
    with pytest.raises(OutOfDomain):
        max_projection_ratio(8)


def test_scan_is_deterministic():
    a, b = max_projection_ratio(50, 2), max_projection_ratio(50, 2)
    assert a == b


def test_equator_examples():
    assert equator_arc_width(2 * math.pi / 3) == pytest.approx(WIDTH_2PI_3, abs=1e-12)
    assert equator_arc_width(math.pi / 3 + 1e-12) == 0.0
    w = equator_arc_width(math.pi - 1e-4)
    assert math.pi / 2 - 1e-3 <= w <= math.pi / 2
    assert equator_arc_width(math.pi, allow_limit=True) == pytest.approx(math.pi / 2, abs=1e-15)


def test_equator_domain():
    for th in (math.pi / 3, 0.5, math.pi, 4.0):
        with pytest.raises(OutOfDomain):
            equator_arc_width(th)


def test_equator_monotone():
    th = np.linspace(math.pi / 3, math.pi, 2002)[1:-1]
    w = np.array([equator_arc_width(t) for t in th])
    positive = w > 0
    assert np.all(np.diff(w) >= 0)
    assert np.all(np.diff(w[positive]) > 0)


def test_second_ball_radius():
    assert second_ball_radius(2 * math.pi / 3) == pytest.approx(math.sqrt(3) - 1, abs=1e-15)
    assert second_ball_radius(math.pi / 3) == pytest.approx(0.0, abs=1e-15)
