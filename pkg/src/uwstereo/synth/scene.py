"""Procedural underwater scenes built from spheres, boxes and triangles."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

SCENE_KINDS = ("coral-like", "default-like", "industry-like", "ship-like")

# World frame matches the camera convention: x right, y down, z forward.
FLOOR_Y = 120.0
FLOOR_EXTENT = 2.0e4


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class Texture:
    """Solid (3D) procedural texture evaluated at world points.

    `kind` is one of solid, checker, noise, stripes. `frequency` is in cycles
    per scene unit; `directions`/`phases` parameterize the noise and stripe waves.
    """

    kind: str
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float] = (0.0, 0.0, 0.0)
    frequency: float = 0.0
    directions: tuple[tuple[float, float, float], ...] = ()
    phases: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("solid", "checker", "noise", "stripes"):
            raise SceneError(f"unknown texture kind {self.kind!r}")
        for c in (*self.color_a, *self.color_b):
            if not 0.0 <= c <= 1.0:
                raise SceneError(f"albedo channel {c} outside [0, 1]")

    def evaluate(self, points: np.ndarray, footprint=None) -> np.ndarray:
        """Albedo at `points`; waves are low-passed by the per-point pixel `footprint` (scene units)."""
        a = np.asarray(self.color_a)
        if self.kind == "solid":
            return np.broadcast_to(a, points.shape).copy()
        b = np.asarray(self.color_b)
        fp = np.zeros(len(points)) if footprint is None else np.asarray(footprint)
        if self.kind == "checker":
            w = 2.0 * np.pi * self.frequency
            s = np.sin(w * points[:, 0]) * np.sin(w * points[:, 1]) * np.sin(w * points[:, 2])
            t = 0.5 + 0.5 * s * _attenuation(np.sqrt(3.0) * self.frequency, fp)
        else:
            dirs = np.asarray(self.directions)
            freqs = self.frequency * np.sqrt(np.arange(1, len(dirs) + 1))
            waves = np.sin(2.0 * np.pi * (points @ dirs.T) * freqs + np.asarray(self.phases))
            att = _attenuation(freqs[None, :], fp[:, None])
            t = 0.5 + 0.5 * (waves * att).mean(axis=1)
        return a * (1.0 - t[:, None]) + b * t[:, None]


def _attenuation(freq, footprint):
    """Gain of a Gaussian pixel filter (sigma = footprint) on a sinusoid of `freq`."""
    return np.exp(-2.0 * (np.pi * freq * footprint) ** 2)


@dataclass(frozen=True)
class SceneObject:
    """`shape` is sphere (center, radius), box (min corner, max corner) or triangle (3 vertices)."""

    shape: str
    params: tuple[float, ...]
    albedo: Texture

    def __post_init__(self):
        n = {"sphere": 4, "box": 6, "triangle": 9}.get(self.shape)
        if n is None:
            raise SceneError(f"unknown shape {self.shape!r}")
        if len(self.params) != n:
            raise SceneError(f"{self.shape} needs {n} parameters, got {len(self.params)}")
        if self.shape == "sphere" and self.params[3] <= 0:
            raise SceneError("sphere radius must be positive")
        if self.shape == "box" and any(
            hi <= lo for lo, hi in zip(self.params[:3], self.params[3:])
        ):
            raise SceneError("box extents must be positive")
        if self.shape == "triangle":
            v = np.asarray(self.params).reshape(3, 3)
            if np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])) == 0:
                raise SceneError("degenerate triangle")

    @property
    def center(self) -> np.ndarray:
        p = np.asarray(self.params)
        if self.shape == "sphere":
            return p[:3]
        if self.shape == "box":
            return 0.5 * (p[:3] + p[3:])
        return p.reshape(3, 3).mean(axis=0)


@dataclass(frozen=True)
class Scene:
    kind: str
    seed: int
    objects: tuple[SceneObject, ...]
    background: tuple[float, float, float] = (0.04, 0.10, 0.16)
    focus_points: tuple[tuple[float, float, float], ...] = field(default=())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _rgb(rng, lo, hi):
    return tuple(float(x) for x in rng.uniform(lo, hi, size=3))


def _wave_texture(rng, kind, color_a, color_b, frequency, n_waves=4):
    dirs = rng.normal(size=(n_waves, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return Texture(
        kind=kind,
        color_a=color_a,
        color_b=color_b,
        frequency=float(frequency),
        directions=tuple(tuple(float(x) for x in d) for d in dirs),
        phases=tuple(float(x) for x in rng.uniform(0, 2 * np.pi, n_waves)),
    )


def _sphere(center, radius, tex):
    return SceneObject("sphere", tuple(float(x) for x in (*center, radius)), tex)


def _box(lo, hi, tex):
    return SceneObject("box", tuple(float(x) for x in (*lo, *hi)), tex)


def _floor(rng) -> tuple[SceneObject, SceneObject]:
    tex = _wave_texture(rng, "noise", _rgb(rng, 0.45, 0.6), _rgb(rng, 0.25, 0.35), 1 / 45.0)
    e, y = FLOOR_EXTENT, FLOOR_Y
    a, b, c, d = (-e, y, -e), (e, y, -e), (e, y, e), (-e, y, e)
    return (
        SceneObject("triangle", tuple(float(x) for x in (*a, *b, *c)), tex),
        SceneObject("triangle", tuple(float(x) for x in (*a, *c, *d)), tex),
    )


def _on_floor(rng, radius, x_range=(-450, 450), z_range=(350, 1400)):
    x = rng.uniform(*x_range)
    z = rng.uniform(*z_range)
    return (x, FLOOR_Y - 0.75 * radius, z)


def _coral(rng):
    objs = []
    for _ in range(int(rng.integers(25, 41))):
        r = rng.uniform(15, 45)
        tex = _wave_texture(
            rng, "noise", _rgb(rng, (0.6, 0.2, 0.2), (1.0, 0.6, 0.5)),
            _rgb(rng, (0.2, 0.05, 0.2), (0.5, 0.3, 0.5)), rng.uniform(1 / 14.0, 1 / 7.0),
        )
        if rng.random() < 0.8:
            objs.append(_sphere(_on_floor(rng, r), r, tex))
        else:
            cx, _, cz = _on_floor(rng, r)
            h = rng.uniform(30, 90)
            objs.append(_box((cx - r, FLOOR_Y - h, cz - r), (cx + r, FLOOR_Y, cz + r), tex))
    return objs


def _default(rng):
    objs = []
    for _ in range(int(rng.integers(3, 7))):
        r = rng.uniform(40, 90)
        if rng.random() < 0.5:
            tex = Texture("solid", _rgb(rng, 0.3, 0.9))
        else:
            tex = Texture("checker", _rgb(rng, 0.5, 0.9), _rgb(rng, 0.1, 0.4), rng.uniform(1 / 60, 1 / 30))
        if rng.random() < 0.5:
            objs.append(_sphere(_on_floor(rng, r), r, tex))
        else:
            cx, _, cz = _on_floor(rng, r)
            objs.append(_box((cx - r, FLOOR_Y - 2 * r, cz - r), (cx + r, FLOOR_Y, cz + r), tex))
    return objs


def _industry(rng):
    objs = []
    for _ in range(int(rng.integers(6, 11))):
        w = rng.uniform(40, 120)
        h = rng.uniform(150, 400)
        cx, _, cz = _on_floor(rng, w, z_range=(450, 1500))
        tex = _wave_texture(
            rng, "stripes", _rgb(rng, 0.5, 0.75), _rgb(rng, (0.6, 0.5, 0.1), (0.9, 0.8, 0.3)),
            rng.uniform(1 / 40, 1 / 20), n_waves=1,
        )
        objs.append(_box((cx - w / 2, FLOOR_Y - h, cz - w / 2), (cx + w / 2, FLOOR_Y, cz + w / 2), tex))
    for _ in range(int(rng.integers(1, 4))):
        r = rng.uniform(60, 110)
        tex = _wave_texture(rng, "noise", _rgb(rng, 0.5, 0.8), _rgb(rng, 0.2, 0.4), 1 / 30.0)
        objs.append(_sphere(_on_floor(rng, r, z_range=(500, 1500)), r, tex))
    return objs


def _ship(rng):
    rust = lambda: _wave_texture(  # noqa: E731
        rng, "noise", _rgb(rng, (0.45, 0.25, 0.1), (0.7, 0.4, 0.2)),
        _rgb(rng, (0.15, 0.1, 0.05), (0.3, 0.2, 0.1)), rng.uniform(1 / 35, 1 / 18),
    )
    objs = []
    length = rng.uniform(600, 900)
    height = rng.uniform(120, 200)
    width = rng.uniform(150, 250)
    x0 = rng.uniform(-300, 300) - length / 2
    z0 = rng.uniform(600, 900)
    objs.append(_box((x0, FLOOR_Y - height, z0), (x0 + length, FLOOR_Y, z0 + width), rust()))
    deck_y = FLOOR_Y - height
    for _ in range(int(rng.integers(2, 5))):
        dl = rng.uniform(60, 180)
        dh = rng.uniform(40, 120)
        dx = rng.uniform(x0, x0 + length - dl)
        objs.append(_box((dx, deck_y - dh, z0 + 20), (dx + dl, deck_y, z0 + width - 20), rust()))
    bow = x0 + length
    tip = (bow + rng.uniform(120, 220), FLOOR_Y - height / 2, z0 + width / 2)
    objs.append(SceneObject("triangle", tuple(float(x) for x in (bow, FLOOR_Y - height, z0, bow, FLOOR_Y, z0, *tip)), rust()))
    objs.append(SceneObject("triangle", tuple(float(x) for x in (bow, FLOOR_Y - height, z0, bow, deck_y, z0 + width, *tip)), rust()))
    for _ in range(int(rng.integers(4, 9))):
        s = rng.uniform(20, 60)
        cx, _, cz = _on_floor(rng, s, z_range=(350, 1300))
        objs.append(_box((cx - s, FLOOR_Y - s, cz - s), (cx + s, FLOOR_Y, cz + s), rust()))
    return objs


_BUILDERS = {
    "coral-like": _coral,
    "default-like": _default,
    "industry-like": _industry,
    "ship-like": _ship,
}


def build_scene(scene_kind: str, seed: int) -> Scene:
    """Deterministic object layout for `scene_kind`; the floor is always the first two objects."""
    if scene_kind not in _BUILDERS:
        raise SceneError(f"unknown scene kind {scene_kind!r}; expected one of {SCENE_KINDS}")
    rng = np.random.default_rng([int(seed), zlib.crc32(scene_kind.encode())])
    floor = _floor(rng)
    objs = _BUILDERS[scene_kind](rng)
    focus = tuple(tuple(float(x) for x in o.center) for o in objs)
    return Scene(kind=scene_kind, seed=int(seed), objects=(*floor, *objs), focus_points=focus)
