import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwstereo.camera import (
    CameraIntrinsics, GeometryError, StereoRig, depth_to_disparity, disparity_to_depth, make_default_rig, project,
)


def test_default_intrinsics_matrix():
    k = make_default_rig(6).intrinsics
    np.testing.assert_array_equal(k.matrix, [[1400, 0, 640], [0, 1400, 360], [0, 0, 1]])
    assert (k.width, k.height) == (1280, 720)


def test_known_disparity():
    assert depth_to_disparity(make_default_rig(6), 840.0) == 10.0


def test_sphere_center_shift_matches_disparity():
    # a point at depth 1400 seen with b=12 moves 12 px between views
    rig = make_default_rig(12)
    p = np.array([[35.0, -20.0, 1400.0]])
    ul, ur = project(rig, p, "left"), project(rig, p, "right")
    assert ul[0, 0] - ur[0, 0] == pytest.approx(12.0)
    assert ul[0, 1] == pytest.approx(ur[0, 1])


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([6.0, 12.0, 18.0, 24.0, 30.0]), st.floats(1.0, 1e5))
def test_roundtrip_property(b, z):
    rig = make_default_rig(b)
    back = disparity_to_depth(rig, depth_to_disparity(rig, np.array([z])))
    assert abs(back[0] - z) <= 1e-9 * z


@pytest.mark.parametrize("bad", [0.0, -3.0, np.inf, np.nan])
def test_invalid_depth_rejected(bad):
    with pytest.raises(GeometryError, match="1 non-positive"):
        depth_to_disparity(make_default_rig(6), np.array([[100.0, bad]]))


def test_zero_disparity_rejected():
    with pytest.raises(GeometryError):
        disparity_to_depth(make_default_rig(6), np.zeros((2, 2)))


def test_baseline_validation():
    with pytest.raises(GeometryError):
        make_default_rig(7)
    assert make_default_rig(7, allow_any_baseline=True).baseline == 7.0
    with pytest.raises(GeometryError):
        StereoRig(make_default_rig(6).intrinsics, baseline=0.0)


def test_bad_intrinsics():
    with pytest.raises(GeometryError):
        CameraIntrinsics(-1, 1, 0, 0, 10, 10)
    with pytest.raises(GeometryError):
        CameraIntrinsics(1, 1, 20, 0, 10, 10)


def test_resized_scales_disparity():
    rig = make_default_rig(12)
    small = rig.resized(320, 180)
    assert small.intrinsics.fx == 350.0
    assert depth_to_disparity(small, 700.0) == pytest.approx(depth_to_disparity(rig, 700.0) / 4)
    assert small.shape == (180, 320)


def test_project_view_name():
    with pytest.raises(ValueError):
        project(make_default_rig(6), np.ones((1, 3)), "middle")
