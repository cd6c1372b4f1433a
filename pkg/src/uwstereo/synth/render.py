"""Vectorized ray casting, Lambertian shading and volumetric fog compositing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import GeometryError, StereoRig, depth_to_disparity
from .scene import Scene, SceneObject

# Fog scale: optical depth is density * depth * FOG_SCALE.
FOG_SCALE = 1.0e-3
# Headlight falloff is normalized so that intensity 1 at this distance means unit irradiance.
HEADLIGHT_REFERENCE = 300.0
FOG_COLORS = {
    "blue": (0.15, 0.35, 0.65),
    "green": (0.15, 0.55, 0.35),
}
_EPS = 1e-6


@dataclass(frozen=True)
class FogParams:
    density: float = 0.0
    color: tuple[float, float, float] = FOG_COLORS["blue"]

    def __post_init__(self):
        if not self.density >= 0:
            raise GeometryError(f"fog density must be >= 0, got {self.density}")

    @classmethod
    def preset(cls, density: float, name: str) -> "FogParams":
        return cls(density=float(density), color=FOG_COLORS[name])


@dataclass(frozen=True)
class LightConfig:
    headlight_enabled: int = 0
    ambient_level: float = 0.7
    headlight_intensity: float = 0.8

    def __post_init__(self):
        if self.headlight_enabled not in (0, 1):
            raise GeometryError(f"headlight flag must be 0 or 1, got {self.headlight_enabled}")


@dataclass(frozen=True)
class CameraPose:
    """Left camera center and world-from-camera rotation (columns are camera axes)."""

    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    @classmethod
    def look_at(cls, position, target) -> "CameraPose":
        position = np.asarray(position, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - position
        norm = np.linalg.norm(forward)
        if not norm > 0:
            raise GeometryError("degenerate pose: zero view direction")
        forward = forward / norm
        down = np.array([0.0, 1.0, 0.0])
        x_axis = np.cross(down, forward)
        if np.linalg.norm(x_axis) < 1e-9:
            raise GeometryError("degenerate pose: view direction parallel to vertical")
        x_axis /= np.linalg.norm(x_axis)
        y_axis = np.cross(forward, x_axis)
        return cls(position=position, rotation=np.stack([x_axis, y_axis, forward], axis=1))

    def right_position(self, rig: StereoRig) -> np.ndarray:
        return self.position + self.rotation @ rig.translation


@dataclass
class GBuffer:
    """Per-pixel ray-cast result for one view; `depth` is camera-frame Z."""

    depth: np.ndarray
    hit: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    albedo: np.ndarray


@dataclass
class RenderedFrame:
    left_image: np.ndarray
    right_image: np.ndarray | None
    left_depth: np.ndarray
    left_disparity: np.ndarray
    meta: dict


def _intersect_sphere(obj: SceneObject, o, d):
    c = np.asarray(obj.params[:3])
    r = obj.params[3]
    oc = o - c
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * (d @ oc)
    cc = oc @ oc - r * r
    disc = b * b - 4 * a * cc
    t = np.full(len(d), np.inf)
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = (-b - sq) / (2 * a)
    t1 = (-b + sq) / (2 * a)
    t_hit = np.where(t0 > _EPS, t0, t1)
    ok &= t_hit > _EPS
    t[ok] = t_hit[ok]
    return t


def _intersect_box(obj: SceneObject, o, d):
    lo = np.asarray(obj.params[:3])
    hi = np.asarray(obj.params[3:])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (lo - o) * inv
        tb = (hi - o) * inv
    ta = np.where(np.isnan(ta), -np.inf, ta)
    tb = np.where(np.isnan(tb), np.inf, tb)
    tmin = np.minimum(ta, tb).max(axis=1)
    tmax = np.maximum(ta, tb).min(axis=1)
    t = np.where(tmin > _EPS, tmin, tmax)
    ok = (tmax >= tmin) & (t > _EPS)
    return np.where(ok, t, np.inf)


def _intersect_triangle(obj: SceneObject, o, d):
    v = np.asarray(obj.params).reshape(3, 3)
    e1 = v[1] - v[0]
    e2 = v[2] - v[0]
    p = np.cross(d, e2)
    det = p @ e1
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - v[0]
    u = (p @ s) * inv
    q = np.cross(s, e1)
    w = (d @ q) * inv
    t = (q @ e2) * inv
    ok &= (u >= 0) & (w >= 0) & (u + w <= 1) & (t > _EPS)
    return np.where(ok, t, np.inf)


_INTERSECT = {"sphere": _intersect_sphere, "box": _intersect_box, "triangle": _intersect_triangle}


def _normals(obj: SceneObject, points, d):
    if obj.shape == "sphere":
        n = (points - np.asarray(obj.params[:3])) / obj.params[3]
    elif obj.shape == "box":
        lo = np.asarray(obj.params[:3])
        hi = np.asarray(obj.params[3:])
        dist = np.concatenate([np.abs(points - lo), np.abs(points - hi)], axis=1)
        face = dist.argmin(axis=1)
        n = np.zeros_like(points)
        axis = face % 3
        n[np.arange(len(points)), axis] = np.where(face < 3, -1.0, 1.0)
    else:
        v = np.asarray(obj.params).reshape(3, 3)
        n = np.broadcast_to(np.cross(v[1] - v[0], v[2] - v[0]), points.shape).copy()
        n /= np.linalg.norm(n, axis=1, keepdims=True)
    # two-sided: face the incoming ray
    flip = np.einsum("ij,ij->i", n, d) > 0
    n[flip] *= -1.0
    return n


def cast_rays(scene: Scene, origin, directions):
    """Nearest hit parameter and object index per ray (`inf`/-1 on miss)."""
    origin = np.asarray(origin, dtype=np.float64)
    best_t = np.full(len(directions), np.inf)
    best_i = np.full(len(directions), -1)
    for i, obj in enumerate(scene.objects):
        t = _INTERSECT[obj.shape](obj, origin, directions)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_i[closer] = i
    return best_t, best_i


def pixel_rays(rig: StereoRig, pose: CameraPose) -> np.ndarray:
    """World-space ray directions with unit camera-z component, so hit t equals depth Z."""
    k = rig.intrinsics
    u, v = np.meshgrid(np.arange(k.width, dtype=np.float64), np.arange(k.height, dtype=np.float64))
    cam = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1).reshape(-1, 3)
    return cam @ pose.rotation.T


def _footprint(rig: StereoRig, pose: CameraPose, points, depth, normals):
    """World-space pixel size on the surface, taken from the more foreshortened of the two views.

    Using the stereo pair's coarser sampling keeps texture filtering identical
    in both images, so a surface point has one albedo regardless of view.
    """
    cos = np.inf
    for center in (pose.position, pose.right_position(rig)):
        to_cam = center - points
        c = np.abs(np.einsum("ij,ij->i", normals, to_cam)) / np.linalg.norm(to_cam, axis=1)
        cos = np.minimum(cos, c)
    return depth / rig.intrinsics.fx / np.clip(cos, 0.02, None)


def raycast_view(scene: Scene, rig: StereoRig, pose: CameraPose, view: str = "left",
                 far_plane: float = 1.0e6) -> GBuffer:
    if not np.isfinite(far_plane) or far_plane <= 0:
        raise GeometryError(f"far plane must be finite and positive, got {far_plane}")
    origin = pose.position if view == "left" else pose.right_position(rig)
    dirs = pixel_rays(rig, pose)
    t, idx = cast_rays(scene, origin, dirs)
    hit = np.isfinite(t) & (t < far_plane)
    depth = np.where(hit, t, far_plane)
    points = origin + dirs * depth[:, None]
    normals = np.zeros_like(points)
    albedo = np.broadcast_to(np.asarray(scene.background), points.shape).copy()
    for i in np.unique(idx[hit]):
        sel = hit & (idx == i)
        obj = scene.objects[i]
        n = _normals(obj, points[sel], dirs[sel])
        normals[sel] = n
        albedo[sel] = obj.albedo.evaluate(points[sel], _footprint(rig, pose, points[sel], depth[sel], n))
    h, w = rig.shape
    return GBuffer(
        depth=depth.reshape(h, w),
        hit=hit.reshape(h, w),
        points=points.reshape(h, w, 3),
        normals=normals.reshape(h, w, 3),
        albedo=albedo.reshape(h, w, 3),
    )


def shade(gbuf: GBuffer, lights: LightConfig, fog: FogParams, light_position) -> np.ndarray:
    """Ambient (hemisphere-weighted) + optional inverse-square headlight, then fog."""
    n = gbuf.normals
    up = -n[..., 1]
    ambient = lights.ambient_level * (0.75 + 0.25 * up)
    radiance = gbuf.albedo * ambient[..., None]
    if lights.headlight_enabled:
        to_light = np.asarray(light_position) - gbuf.points
        dist2 = np.einsum("...i,...i->...", to_light, to_light)
        cos = np.einsum("...i,...i->...", n, to_light) / np.sqrt(dist2)
        irr = lights.headlight_intensity * np.clip(cos, 0, None) * HEADLIGHT_REFERENCE**2 / dist2
        radiance = radiance + gbuf.albedo * irr[..., None]
    radiance = np.where(gbuf.hit[..., None], radiance, gbuf.albedo)
    radiance = np.clip(radiance, 0.0, 1.0)
    return apply_fog(radiance, gbuf.depth, fog)


def apply_fog(radiance: np.ndarray, depth: np.ndarray, fog: FogParams) -> np.ndarray:
    """I = J * T + E_c * (1 - T) with transmission T = exp(-density * Z * FOG_SCALE)."""
    if fog.density == 0:
        return radiance
    trans = np.exp(-fog.density * depth * FOG_SCALE)[..., None]
    return radiance * trans + np.asarray(fog.color) * (1.0 - trans)


def render_stereo_frame(scene: Scene, rig: StereoRig, pose: CameraPose, fog: FogParams,
                        lights: LightConfig, far_plane: float = 1.0e6, meta: dict | None = None,
                        left: GBuffer | None = None) -> RenderedFrame:
    """Render both views; disparity is derived from the left depth, never estimated."""
    if left is None:
        left = raycast_view(scene, rig, pose, "left", far_plane)
    right = raycast_view(scene, rig, pose, "right", far_plane)
    return RenderedFrame(
        left_image=shade(left, lights, fog, pose.position),
        right_image=shade(right, lights, fog, pose.position),
        left_depth=left.depth,
        left_disparity=depth_to_disparity(rig, left.depth),
        meta=dict(meta or {}),
    )


def visible_from_right(scene: Scene, rig: StereoRig, pose: CameraPose, left: GBuffer) -> np.ndarray:
    """Occlusion oracle: left-view surface points that the right camera sees unobstructed."""
    c_r = pose.right_position(rig)
    pts = left.points.reshape(-1, 3)
    d = pts - c_r
    t, _ = cast_rays(scene, c_r, d)
    # point lies at t=1 along d; anything hit clearly earlier blocks it
    visible = t >= 1.0 - 1e-6
    return (visible & left.hit.reshape(-1)).reshape(left.hit.shape)
