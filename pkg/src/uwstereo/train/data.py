"""In-memory stereo samples, manifest loading and augmented batch sampling."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..data.manifest import DatasetManifest
from ..data.pfm import read_pfm


@dataclass
class StereoSample:
    left: np.ndarray
    right: np.ndarray
    disparity: np.ndarray
    domain: str = "default"
    frame_id: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.disparity.shape


def _read_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def load_samples(manifest, split: str | None = None) -> list[StereoSample]:
    """Read images and disparity for the records of `split` (all records when None)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.load(manifest)
    records = manifest.records if split is None else manifest.split(split)
    missing = [str(manifest.resolve(r.paths[k])) for r in records for k in ("left", "right", "disparity")
               if not manifest.resolve(r.paths[k]).exists()]
    if missing:
        raise FileNotFoundError(f"{len(missing)} missing file(s): {missing[:10]}")
    return [
        StereoSample(
            left=_read_rgb(manifest.resolve(r.paths["left"])),
            right=_read_rgb(manifest.resolve(r.paths["right"])),
            disparity=read_pfm(manifest.resolve(r.paths["disparity"])),
            domain=r.scene_kind,
            frame_id=r.frame_id,
        )
        for r in records
    ]


def samples_from_frames(frames, domain: str | None = None, quantize: bool = True) -> list[StereoSample]:
    """Wrap rendered frames; `quantize` rounds images to 8 bits like the PNG export."""
    out = []
    for f in frames:
        left, right = f.left_image, f.right_image
        if quantize:
            left = np.round(np.clip(left, 0, 1) * 255) / 255
            right = np.round(np.clip(right, 0, 1) * 255) / 255
        m = f.meta
        out.append(StereoSample(
            left=left.astype(np.float32), right=right.astype(np.float32),
            disparity=f.left_disparity.astype(np.float32),
            domain=domain or m.get("scene_kind", "default"),
            frame_id=f"{m.get('scene_kind')}_{m.get('frame_index')}_{m.get('baseline')}_{m.get('E_l')}"
                     f"_{m.get('E_d')}_{m.get('E_c')}",
        ))
    return out


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) array -> (1, 3, H, W) float tensor."""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None].float()


class BatchSampler:
    """Seeded random crops (same window in both views) with optional photometric jitter."""

    def __init__(self, samples: list[StereoSample], batch_size: int, crop: tuple[int, int], seed: int = 0,
                 augment: bool = True, asymmetric_color: bool = False):
        if not samples:
            raise ValueError("no samples")
        for s in samples:
            if s.shape[0] < crop[0] or s.shape[1] < crop[1]:
                raise ValueError(f"sample {s.frame_id} of size {s.shape} is smaller than crop {crop}")
        self.samples = samples
        self.batch_size = batch_size
        self.crop = crop
        self.augment = augment
        self.asymmetric_color = asymmetric_color
        self.rng = np.random.default_rng(seed)

    def _jitter(self, img):
        brightness = self.rng.uniform(-0.1, 0.1)
        contrast = self.rng.uniform(0.8, 1.2)
        mean = img.mean()
        return np.clip((img - mean) * contrast + mean + brightness, 0.0, 1.0)

    def next_batch(self):
        ch, cw = self.crop
        lefts, rights, disps = [], [], []
        for _ in range(self.batch_size):
            s = self.samples[self.rng.integers(len(self.samples))]
            h, w = s.shape
            y = int(self.rng.integers(0, h - ch + 1))
            x = int(self.rng.integers(0, w - cw + 1))
            left = s.left[y:y + ch, x:x + cw]
            right = s.right[y:y + ch, x:x + cw]
            if self.augment:
                state = self.rng.bit_generator.state
                left = self._jitter(left)
                if not self.asymmetric_color:
                    self.rng.bit_generator.state = state
                right = self._jitter(right)
            lefts.append(left.transpose(2, 0, 1))
            rights.append(right.transpose(2, 0, 1))
            disps.append(s.disparity[y:y + ch, x:x + cw])
        as_t = lambda xs: torch.from_numpy(np.ascontiguousarray(np.stack(xs))).float()  # noqa: E731
        return as_t(lefts), as_t(rights), as_t(disps)
