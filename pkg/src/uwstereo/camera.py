"""Rectified pinhole stereo rig and depth/disparity conversion."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

PAPER_BASELINES = (6.0, 12.0, 18.0, 24.0, 30.0)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix with the homogeneous 1 in the corner."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class StereoRig:
    """Two cameras sharing `intrinsics`; the right one sits `baseline` units along +x."""

    intrinsics: CameraIntrinsics
    baseline: float
    focus_plane: float = 150.0
    film_back: tuple[float, float] = (32.0, 18.0)

    def __post_init__(self):
        if not np.isfinite(self.baseline) or self.baseline <= 0:
            raise GeometryError(f"baseline must be positive, got {self.baseline}")

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.baseline, 0.0, 0.0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.intrinsics.height, self.intrinsics.width

    def with_baseline(self, baseline: float) -> "StereoRig":
        return replace(self, baseline=float(baseline))

    def resized(self, width: int, height: int) -> "StereoRig":
        """Scale to `width` (uniform zoom) and center-crop or pad rows to `height`.

        Focal length scales with the width ratio, so disparities shrink by the
        same factor as the image.
        """
        k = self.intrinsics
        scale = width / k.width
        cy = k.cy * scale - (k.height * scale - height) / 2.0
        intr = CameraIntrinsics(
            fx=k.fx * scale, fy=k.fy * scale, cx=k.cx * scale, cy=cy,
            width=int(width), height=int(height),
        )
        return replace(self, intrinsics=intr)


def make_default_rig(baseline: float, allow_any_baseline: bool = False) -> StereoRig:
    """Default rig camera: fx=fy=1400, principal point (640, 360), 1280x720."""
    baseline = float(baseline)
    if not np.isfinite(baseline) or baseline <= 0:
        raise GeometryError(f"baseline must be positive, got {baseline}")
    if not allow_any_baseline and baseline not in PAPER_BASELINES:
        raise GeometryError(
            f"baseline {baseline} not in {PAPER_BASELINES}; pass allow_any_baseline=True to override"
        )
    intr = CameraIntrinsics(fx=1400.0, fy=1400.0, cx=640.0, cy=360.0, width=1280, height=720)
    return StereoRig(intrinsics=intr, baseline=baseline)


def _check_positive_finite(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    bad = ~np.isfinite(values) | (values <= 0)
    n_bad = int(bad.sum())
    if n_bad:
        raise GeometryError(f"{what} has {n_bad} non-positive or non-finite pixel(s)")
    return values


def depth_to_disparity(rig: StereoRig, depth) -> np.ndarray:
    """d = b * fx / Z for perpendicular camera-frame depth Z."""
    depth = _check_positive_finite(depth, "depth map")
    return rig.baseline * rig.intrinsics.fx / depth


def disparity_to_depth(rig: StereoRig, disparity) -> np.ndarray:
    """Z = b * fx / d. Zero disparity (infinite depth) is rejected."""
    disparity = _check_positive_finite(disparity, "disparity map")
    return rig.baseline * rig.intrinsics.fx / disparity


def project(rig: StereoRig, points_cam: np.ndarray, view: str = "left") -> np.ndarray:
    """Project (N, 3) left-camera-frame points into `view`, returning (N, 2) pixel coords."""
    pts = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    if view == "right":
        pts = pts - rig.translation
    elif view != "left":
        raise ValueError(f"view must be 'left' or 'right', got {view!r}")
    k = rig.intrinsics
    u = k.fx * pts[:, 0] / pts[:, 2] + k.cx
    v = k.fy * pts[:, 1] / pts[:, 2] + k.cy
    return np.stack([u, v], axis=1)
