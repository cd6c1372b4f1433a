"""Camera trajectories and the factor-product frame sequence."""

from __future__ import annotations

import itertools
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image
from scipy.interpolate import CubicSpline

from ..camera import PAPER_BASELINES, StereoRig, depth_to_disparity, make_default_rig
from ..data.manifest import DatasetManifest, FrameRecord
from ..data.pfm import write_pfm
from ..data.processing import disparity_stats
from .render import (
    FOG_COLORS, CameraPose, FogParams, GBuffer, LightConfig, RenderedFrame, raycast_view, shade,
)
from .scene import FLOOR_Y, SCENE_KINDS, Scene, build_scene


class SequenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SequenceConfig:
    scene_kind: str = "default-like"
    seed: int = 0
    num_frames: int = 1500
    fps: float = 15.0
    baselines: tuple[float, ...] = PAPER_BASELINES
    light_options: tuple[int, ...] = (0, 1)
    density_options: tuple[float, ...] = (1.0, 2.0)
    color_options: tuple[str, ...] = ("blue", "green")
    far_plane: float = 1.0e6
    disp_cap: float = 192.0
    ambient_level: float = 0.7
    headlight_intensity: float = 0.8

    def __post_init__(self):
        if self.scene_kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.scene_kind!r}")
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        for name in ("baselines", "light_options", "density_options", "color_options"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        for c in self.color_options:
            if c not in FOG_COLORS:
                raise ValueError(f"unknown fog color {c!r}; presets are {sorted(FOG_COLORS)}")

    def combinations(self):
        """(baseline, light, density, color) tuples in emission order for one frame."""
        return list(itertools.product(self.baselines, self.light_options,
                                      self.density_options, self.color_options))


@dataclass
class SequenceRun:
    """Lazily rendered frames plus the manifest they fill in.

    Record statistics are populated as `frames` is consumed.
    """

    frames: Iterator[RenderedFrame]
    manifest: DatasetManifest
    scene: Scene = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.frames, self.manifest))


def _clearance(scene: Scene, point: np.ndarray) -> float:
    """Distance from `point` to the nearest sphere or box (triangles ignored)."""
    best = np.inf
    for obj in scene.objects:
        p = np.asarray(obj.params)
        if obj.shape == "sphere":
            best = min(best, np.linalg.norm(point - p[:3]) - p[3])
        elif obj.shape == "box":
            q = np.maximum(np.maximum(p[:3] - point, point - p[3:]), 0.0)
            best = min(best, float(np.linalg.norm(q)))
    return best


def camera_trajectory(scene: Scene, num_frames: int, seed: int,
                      close_up_fraction: float = 0.25) -> list[CameraPose]:
    """Seeded smooth path through waypoints in front of the objects, each looking at an object.

    About `close_up_fraction` of the waypoints approach their target object
    closely, giving the large-disparity views a free-swimming camera produces.
    """
    rng = np.random.default_rng([int(seed), zlib.crc32(b"trajectory"), zlib.crc32(scene.kind.encode())])
    n_way = max(4, math.ceil(num_frames / 120) + 3)
    pos = np.column_stack([
        rng.uniform(-350, 350, n_way),
        rng.uniform(FLOOR_Y - 260, FLOOR_Y - 70, n_way),
        rng.uniform(-150, 200, n_way),
    ])
    focus = np.asarray(scene.focus_points) if scene.focus_points else np.array([[0.0, 0.0, 800.0]])
    targets = focus[rng.integers(0, len(focus), n_way)] + rng.normal(0, 40, (n_way, 3))
    close = rng.random(n_way) < close_up_fraction
    dist = rng.uniform(120, 260, n_way)
    for i in np.nonzero(close)[0]:
        direction = pos[i] - targets[i]
        candidate = targets[i] + direction / np.linalg.norm(direction) * dist[i]
        candidate[1] = min(candidate[1], FLOOR_Y - 60)
        if _clearance(scene, candidate) > 60:
            pos[i] = candidate
    knots = np.arange(n_way, dtype=np.float64)
    pos_spline = CubicSpline(knots, pos, bc_type="natural")
    tgt_spline = CubicSpline(knots, targets, bc_type="natural")
    s = np.linspace(0.0, n_way - 1, num_frames) if num_frames > 1 else np.zeros(1)
    positions = pos_spline(s)
    positions[:, 1] = np.minimum(positions[:, 1], FLOOR_Y - 40)
    return [CameraPose.look_at(p, t) for p, t in zip(positions, tgt_spline(s))]


def frame_id(kind: str, seed: int, idx: int, baseline: float, light: int, density: float, color: str) -> str:
    return f"{kind}_s{seed}_f{idx:05d}_b{baseline:g}_l{light}_d{density:g}_c{color}"


def _record_paths(config: SequenceConfig, idx: int, fid: str, baseline: float) -> dict:
    kind = config.scene_kind
    return {
        "left": f"{kind}/left/{fid}.png",
        "right": f"{kind}/right/{fid}.png",
        "disparity": f"{kind}/disparity/{kind}_s{config.seed}_f{idx:05d}_b{baseline:g}.pfm",
    }


def _rig_for(config: SequenceConfig, rig_template: StereoRig | None) -> StereoRig:
    if rig_template is None:
        return make_default_rig(config.baselines[0], allow_any_baseline=True)
    return rig_template


def _skeleton_records(config: SequenceConfig) -> list[FrameRecord]:
    recs = []
    for idx in range(config.num_frames):
        for b, light, dens, color in config.combinations():
            fid = frame_id(config.scene_kind, config.seed, idx, b, light, dens, color)
            recs.append(FrameRecord(
                frame_id=fid, scene_kind=config.scene_kind, frame_index=idx, baseline=float(b),
                light=int(light), fog_density=float(dens), fog_color=color,
                paths=_record_paths(config, idx, fid, b), seed=config.seed,
            ))
    return recs


def _provenance(config: SequenceConfig, rig: StereoRig) -> dict:
    k = rig.intrinsics
    return {
        "seed": config.seed,
        "generator": {
            "sequence": asdict(config),
            "intrinsics": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
                           "width": k.width, "height": k.height},
            "focus_plane": rig.focus_plane,
            "film_back_mm": list(rig.film_back),
        },
    }


def _frame_meta(config: SequenceConfig, idx, b, light, dens, color) -> dict:
    return {
        "scene_kind": config.scene_kind, "frame_index": idx, "time": idx / config.fps,
        "baseline": float(b), "E_l": int(light), "E_d": float(dens), "E_c": color,
        "seed": config.seed,
    }


def _lights(config: SequenceConfig, light: int) -> LightConfig:
    return LightConfig(headlight_enabled=int(light), ambient_level=config.ambient_level,
                       headlight_intensity=config.headlight_intensity)


def _render_frame(config, scene, rig, pose, idx, images=True):
    """Yield (combo index, RenderedFrame, stats) for every factor combination of one frame."""
    left = raycast_view(scene, rig, pose, "left", config.far_plane)
    combos = config.combinations()
    by_baseline = itertools.groupby(enumerate(combos), key=lambda t: t[1][0])
    for b, group in by_baseline:
        rig_b = rig.with_baseline(b)
        disp = depth_to_disparity(rig_b, left.depth)
        stats = disparity_stats(disp, config.disp_cap)
        right: GBuffer | None = raycast_view(scene, rig_b, pose, "right", config.far_plane) if images else None
        for ci, (_, light, dens, color) in group:
            meta = _frame_meta(config, idx, b, light, dens, color)
            if images:
                lights = _lights(config, light)
                fog = FogParams.preset(dens, color)
                frame = RenderedFrame(
                    left_image=shade(left, lights, fog, pose.position),
                    right_image=shade(right, lights, fog, pose.position),
                    left_depth=left.depth, left_disparity=disp, meta=meta,
                )
            else:
                frame = RenderedFrame(None, None, left.depth, disp, meta)
            yield ci, frame, stats


def generate_sequence(config: SequenceConfig, rig_template: StereoRig | None = None,
                      render: str = "full") -> SequenceRun:
    """Frames for every (frame, baseline, light, density, color) combination.

    render="full" ray-casts both views and shades images, "depth" only casts the
    left view (statistics without images), "none" emits the manifest skeleton
    without rendering. Unpack as ``frames, manifest = generate_sequence(...)``.
    """
    if render not in ("full", "depth", "none"):
        raise ValueError(f"render must be full, depth or none, got {render!r}")
    rig = _rig_for(config, rig_template)
    manifest = DatasetManifest(_skeleton_records(config), _provenance(config, rig))
    if render == "none":
        return SequenceRun(iter(()), manifest)
    scene = build_scene(config.scene_kind, config.seed)
    n_combo = len(config.combinations())

    def stream():
        poses = camera_trajectory(scene, config.num_frames, config.seed)
        for idx, pose in enumerate(poses):
            try:
                for ci, frame, (mean_d, over) in _render_frame(
                        config, scene, rig, pose, idx, images=(render == "full")):
                    k = idx * n_combo + ci
                    manifest.records[k] = manifest.records[k].with_stats(mean_d, over)
                    yield frame
            except Exception as e:
                raise SequenceError(f"frame {idx}: {e}") from e

    return SequenceRun(stream(), manifest, scene)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def _export_frame(args):
    config, rig, idx, out_dir = args
    scene = build_scene(config.scene_kind, config.seed)
    pose = camera_trajectory(scene, config.num_frames, config.seed)[idx]
    out_dir = Path(out_dir)
    stats = []
    written = set()
    try:
        for ci, frame, st in _render_frame(config, scene, rig, pose, idx):
            m = frame.meta
            fid = frame_id(config.scene_kind, config.seed, idx, m["baseline"], m["E_l"], m["E_d"], m["E_c"])
            paths = _record_paths(config, idx, fid, m["baseline"])
            for key, img in (("left", frame.left_image), ("right", frame.right_image)):
                p = out_dir / paths[key]
                p.parent.mkdir(parents=True, exist_ok=True)
                Image.fromarray(to_uint8(img)).save(p)
            if paths["disparity"] not in written:
                p = out_dir / paths["disparity"]
                p.parent.mkdir(parents=True, exist_ok=True)
                write_pfm(p, frame.left_disparity)
                written.add(paths["disparity"])
            stats.append((ci, st))
    except Exception as e:
        raise SequenceError(f"frame {idx}: {e}") from e
    return idx, stats


def export_sequence(config: SequenceConfig, out_dir, rig_template: StereoRig | None = None,
                    workers: int = 1) -> DatasetManifest:
    """Render to PNG/PFM files under `out_dir`; returns the manifest rooted there (not saved)."""
    rig = _rig_for(config, rig_template)
    manifest = DatasetManifest(_skeleton_records(config), _provenance(config, rig), root=Path(out_dir))
    n_combo = len(config.combinations())
    jobs = [(config, rig, idx, str(out_dir)) for idx in range(config.num_frames)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_export_frame, jobs))
    else:
        results = [_export_frame(j) for j in jobs]
    for idx, stats in results:
        for ci, (mean_d, over) in stats:
            k = idx * n_combo + ci
            manifest.records[k] = manifest.records[k].with_stats(mean_d, over)
    return manifest


def merge_manifests(manifests: list[DatasetManifest]) -> DatasetManifest:
    records = [r for m in manifests for r in m.records]
    prov = {"sources": [m.provenance for m in manifests]}
    root = manifests[0].root if manifests else None
    return DatasetManifest(records, prov, root)


__all__ = [
    "SequenceConfig", "SequenceRun", "camera_trajectory", "generate_sequence", "export_sequence",
    "merge_manifests", "frame_id",
]
