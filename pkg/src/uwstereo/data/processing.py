"""Dataset cleaning rules, stratified splitting and disparity histograms."""

from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .manifest import DatasetManifest, FrameRecord, ManifestError
from .pfm import PFMError, read_pfm


@dataclass(frozen=True)
class CleaningConfig:
    interval: int = 4
    low_disp_threshold: float = 10.0
    low_disp_drop_fraction: float = 0.5
    disp_cap: float = 192.0
    cap_fraction_limit: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        for name in ("low_disp_drop_fraction", "cap_fraction_limit"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def disparity_stats(disparity: np.ndarray, cap: float = 192.0) -> tuple[float, float]:
    """Mean disparity and the fraction of pixels whose disparity exceeds `cap`."""
    d = np.asarray(disparity)
    return float(d.mean()), float(np.count_nonzero(d > cap) / d.size)


def select_low_disparity_drops(frame_ids: list[str], fraction: float, seed: int) -> set[str]:
    """Seeded uniform choice of floor(fraction * k) ids, taken from the sorted id list."""
    ids = sorted(frame_ids)
    n_drop = math.floor(fraction * len(ids))
    if n_drop == 0:
        return set()
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ids), size=n_drop, replace=False)
    return {ids[i] for i in picked}


def apply_cleaning_rules(manifest: DatasetManifest, config: CleaningConfig = CleaningConfig()) -> DatasetManifest:
    """Temporal subsampling, low-disparity thinning, then over-cap removal (in that order).

    Re-applying the same config to its own output is a no-op: the thinning
    quota is defined on the population it was first applied to, which the
    provenance records.
    """
    missing = [r.frame_id for r in manifest.records if not r.has_stats]
    if missing:
        raise ManifestError(f"records without disparity statistics: {missing[:20]}"
                            + (f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""))
    cfg = asdict(config)
    history = list(manifest.provenance.get("cleaning", []))
    already = any(h["config"] == cfg for h in history)

    records = sorted(manifest.records, key=lambda r: r.frame_id)
    n_in = len(records)

    kept = [r for r in records if r.frame_index % config.interval == 0]
    removed_1 = n_in - len(kept)

    low = [r.frame_id for r in kept if r.mean_disparity < config.low_disp_threshold]
    drops = set() if already else select_low_disparity_drops(
        low, config.low_disp_drop_fraction, config.seed)
    kept = [r for r in kept if r.frame_id not in drops]

    before_3 = len(kept)
    kept = [r for r in kept if r.over_cap_fraction <= config.cap_fraction_limit]
    removed_3 = before_3 - len(kept)

    if not already:
        history.append({
            "config": cfg,
            "input": n_in,
            "removed": {"interval": removed_1, "low_disparity": len(drops), "over_cap": removed_3},
            "output": len(kept),
        })
    prov = dict(manifest.provenance, cleaning=history)
    return DatasetManifest(records=kept, provenance=prov, root=manifest.root)


def split_dataset(manifest: DatasetManifest, test_fraction: float = 0.1, seed: int = 0) -> DatasetManifest:
    """Per scene kind, mark floor(test_fraction * n) records as test and the rest as train."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    by_scene: dict[str, list[FrameRecord]] = {}
    for r in manifest.records:
        by_scene.setdefault(r.scene_kind, []).append(r)
    out = []
    for scene in sorted(by_scene):
        recs = sorted(by_scene[scene], key=lambda r: r.frame_id)
        if len(recs) < 2:
            raise ManifestError(f"scene {scene!r} has {len(recs)} record(s); need at least 2 to split")
        n_test = math.floor(test_fraction * len(recs))
        rng = np.random.default_rng([seed, zlib.crc32(scene.encode())])
        test_idx = set(rng.choice(len(recs), size=n_test, replace=False).tolist())
        out.extend(replace(r, split="test" if i in test_idx else "train") for i, r in enumerate(recs))
    prov = dict(manifest.provenance, split={"test_fraction": test_fraction, "seed": seed})
    return DatasetManifest(records=out, provenance=prov, root=manifest.root)


@dataclass
class DisparityHistogram:
    """Pixel-count histogram with fixed-width bins on [0, max_bin) plus an overflow bin."""

    bin_width: float
    max_bin: float
    counts: np.ndarray

    @classmethod
    def empty(cls, bin_width: float, max_bin: float) -> "DisparityHistogram":
        if bin_width <= 0 or max_bin <= 0:
            raise ValueError("bin_width and max_bin must be positive")
        n = math.ceil(max_bin / bin_width)
        return cls(bin_width, max_bin, np.zeros(n + 1, dtype=np.int64))

    @property
    def edges(self) -> list[float]:
        n = len(self.counts) - 1
        return [min(i * self.bin_width, self.max_bin) for i in range(n + 1)]

    @property
    def fractions(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            raise ValueError("histogram is empty")
        return self.counts / total

    def add(self, disparity) -> "DisparityHistogram":
        d = np.asarray(disparity, dtype=np.float64).ravel()
        idx = np.floor(d / self.bin_width).astype(np.int64)
        n = len(self.counts) - 1
        idx = np.where(d >= self.max_bin, n, np.clip(idx, 0, n - 1))
        self.counts += np.bincount(idx, minlength=n + 1)
        return self

    def __iadd__(self, other: "DisparityHistogram"):
        if (other.bin_width, other.max_bin) != (self.bin_width, self.max_bin):
            raise ValueError("histogram binning mismatch")
        self.counts = self.counts + other.counts
        return self

    def mass_below(self, value: float) -> float:
        """Fraction of pixels in bins lying entirely below `value`."""
        edges = self.edges
        frac = self.fractions
        return float(sum(frac[i] for i in range(len(frac) - 1) if edges[i + 1] <= value))

    def to_dict(self) -> dict:
        edges = self.edges
        frac = self.fractions
        bins = [
            {"lo": edges[i], "hi": edges[i + 1], "count": int(self.counts[i]), "fraction": float(frac[i])}
            for i in range(len(frac) - 1)
        ]
        return {
            "bin_width": self.bin_width,
            "max_bin": self.max_bin,
            "bins": bins,
            "overflow": {"lo": self.max_bin, "count": int(self.counts[-1]), "fraction": float(frac[-1])},
            "total_pixels": int(self.counts.sum()),
        }


def disparity_histogram(records: list[FrameRecord], bin_width: float = 8.0, max_bin: float = 192.0,
                        root=None) -> DisparityHistogram:
    """Histogram over the disparity files of `records` (paths resolved against `root`)."""
    if not records:
        raise ValueError("no records to histogram")
    base = Path(root) if root is not None else Path(".")
    hist = DisparityHistogram.empty(bin_width, max_bin)
    cache: dict[str, np.ndarray] = {}
    for r in records:
        rel = r.paths.get("disparity")
        if rel is None:
            raise ManifestError(f"{r.frame_id}: no disparity path")
        if rel not in cache:
            path = base / rel
            try:
                cache.clear()
                cache[rel] = read_pfm(path)
            except (OSError, PFMError) as e:
                raise OSError(f"cannot read disparity file {path}: {e}") from e
        hist.add(cache[rel])
    return hist
