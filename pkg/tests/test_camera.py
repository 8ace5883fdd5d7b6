import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from alacs.camera import (
    CameraIntrinsics,
    CameraPoint,
    NormalizedPoint,
    PixelPoint,
    distort,
    normalize,
    project,
    unproject,
)
from alacs.errors import DegenerateDepthError, NonConvergenceError

K0 = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=640.0, cy=360.0)


def test_normalize_on_axis():
    assert normalize(CameraPoint(0.0, 0.0, 1.0)) == (0.0, 0.0)


def test_normalize_exact_division():
    assert normalize(CameraPoint(0.5, -0.25, 0.5)) == (1.0, -0.5)


def test_normalize_zero_depth_raises():
    with pytest.raises(DegenerateDepthError):
        normalize(CameraPoint(0.1, 0.2, 0.0))


def test_normalize_vectorized():
    n = normalize(CameraPoint(np.array([1.0, 2.0]), np.array([0.0, 4.0]), np.array([2.0, 4.0])))
    np.testing.assert_array_equal(n.u_bar, [0.5, 0.5])
    np.testing.assert_array_equal(n.v_bar, [0.0, 1.0])


def test_project_principal_point():
    assert project(NormalizedPoint(0.0, 0.0), K0) == (640.0, 360.0)


def test_project_linear_case():
    m = project(NormalizedPoint(0.1, 0.0), K0)
    assert m.u == pytest.approx(740.0, abs=1e-12)
    assert m.v == 360.0


def test_project_radial_distortion_hand_evaluated():
    # r^2 = 0.02, radial factor 1 + 0.1 * 0.02 = 1.002 -> x_d = y_d = 0.1002
    K = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0, dist=(0.1, 0, 0, 0, 0))
    m = project(NormalizedPoint(0.1, 0.1), K)
    assert m.u == pytest.approx(740.2, abs=1e-10)
    assert m.v == pytest.approx(460.2, abs=1e-10)


def test_project_tangential_terms_hand_evaluated():
    # x=0.2, y=-0.1, r2=0.05; p1=0.01, p2=-0.02
    # x_d = 0.2 + 2*0.01*0.2*(-0.1) + (-0.02)*(0.05 + 0.08) = 0.2 - 0.0004 - 0.0026 = 0.197
    # y_d = -0.1 + 0.01*(0.05 + 0.02) + 2*(-0.02)*0.2*(-0.1) = -0.1 + 0.0007 + 0.0008 = -0.0985
    xd, yd = distort(0.2, -0.1, (0, 0, 0.01, -0.02, 0))
    assert xd == pytest.approx(0.197, abs=1e-15)
    assert yd == pytest.approx(-0.0985, abs=1e-15)


def test_unproject_examples():
    assert unproject(PixelPoint(640.0, 360.0), K0) == (0.0, 0.0)
    n = unproject(PixelPoint(740.0, 360.0), K0)
    assert n.u_bar == pytest.approx(0.1, abs=1e-15)
    assert n.v_bar == 0.0


def test_unproject_round_trip_over_image_rectangle():
    K = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0, dist=(-0.2, 0, 0, 0, 0))
    u, v = np.meshgrid(np.linspace(0, 1279, 41), np.linspace(0, 719, 23))
    m = PixelPoint(u.ravel(), v.ravel())
    back = project(unproject(m, K), K)
    assert np.max(np.abs(back.u - m.u)) < 1e-9
    assert np.max(np.abs(back.v - m.v)) < 1e-9


def test_unproject_uses_newton_when_fixed_point_stalls():
    # strong barrel distortion near the corner: fixed-point contraction rate > 1
    K = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0, dist=(-0.3, 0.0, 0.0, 0.0, 0.0))
    n = NormalizedPoint(0.6, 0.5)
    back = unproject(project(n, K), K)
    assert back.u_bar == pytest.approx(0.6, abs=1e-12)
    assert back.v_bar == pytest.approx(0.5, abs=1e-12)


def test_unproject_outside_invertible_region_raises():
    # with k1 = -1 the radial map folds at r = 1/sqrt(3); x_d = 0.5 has no preimage
    K = CameraIntrinsics(1000.0, 1000.0, 0.0, 0.0, dist=(-1.0, 0, 0, 0, 0))
    with pytest.raises(NonConvergenceError):
        unproject(PixelPoint(500.0, 0.0), K)


coef = st.floats(-0.05, 0.05)


@settings(max_examples=300, deadline=None)
@given(
    u=st.floats(-0.7, 0.7),
    v=st.floats(-0.7, 0.7),
    k1=st.floats(-0.5, 0.5),
    k2=coef,
    p1=coef,
    p2=coef,
    k3=coef,
)
def test_round_trip_normalized(u, v, k1, k2, p1, p2, k3):
    r2 = u * u + v * v
    # round trip is only defined where the radial map is still injective
    assume(1 + 3 * k1 * r2 + 5 * k2 * r2**2 + 7 * k3 * r2**3 > 0.2)
    K = CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0, dist=(k1, k2, p1, p2, k3))
    back = unproject(project(NormalizedPoint(u, v), K), K)
    assert abs(back.u_bar - u) < 1e-9
    assert abs(back.v_bar - v) < 1e-9


@given(
    u=st.floats(-2, 2),
    v=st.floats(-2, 2),
    fx=st.floats(100, 5000),
    fy=st.floats(100, 5000),
    cx=st.floats(0, 2000),
    cy=st.floats(0, 2000),
)
def test_zero_distortion_is_affine(u, v, fx, fy, cx, cy):
    K = CameraIntrinsics(fx, fy, cx, cy)
    m = project(NormalizedPoint(u, v), K)
    expected = K.K @ np.array([u, v, 1.0])
    assert m.u == pytest.approx(expected[0], rel=1e-14, abs=1e-9)
    assert m.v == pytest.approx(expected[1], rel=1e-14, abs=1e-9)


@given(
    x=st.floats(-5, 5),
    y=st.floats(-5, 5),
    z=st.floats(0.1, 10),
    s=st.floats(1e-3, 1e3),
)
def test_normalize_projective_invariance(x, y, z, s):
    a = normalize(CameraPoint(x, y, z))
    b = normalize(CameraPoint(s * x, s * y, s * z))
    assert b.u_bar == pytest.approx(a.u_bar, rel=1e-13, abs=1e-15)
    assert b.v_bar == pytest.approx(a.v_bar, rel=1e-13, abs=1e-15)


def test_intrinsic_matrix_shape():
    K = CameraIntrinsics(900.0, 910.0, 320.0, 240.0)
    M = K.K
    assert np.all(np.tril(M, -1) == 0)
    assert M[2, 2] == 1.0


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 1000.0, 0, 0)
    with pytest.raises(ValueError):
        CameraIntrinsics(1000.0, 1000.0, 0, 0, dist=(0.1, 0.2))


def test_intrinsics_json_round_trip():
    K = CameraIntrinsics(1050.0, 1049.5, 720.25, 539.75, dist=(-0.1, 0.05, 1e-4, -2e-4, 0.001))
    d = K.to_dict()
    assert set(d) == {"fx", "fy", "cx", "cy", "dist"}
    assert CameraIntrinsics.from_dict(d) == K
    assert math.isclose(CameraIntrinsics.from_dict({"fx": 1, "fy": 2, "cx": 3, "cy": 4}).fy, 2)
