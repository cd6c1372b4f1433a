"""Frame records and the JSON dataset manifest."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

MANIFEST_VERSION = 1
SPLITS = ("train", "test", "unassigned")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class FrameRecord:
    frame_id: str
    scene_kind: str
    frame_index: int
    baseline: float
    light: int
    fog_density: float
    fog_color: str
    paths: dict = field(default_factory=dict)
    mean_disparity: float | None = None
    over_cap_fraction: float | None = None
    split: str = "unassigned"
    seed: int = 0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"{self.frame_id}: unknown split {self.split!r}")
        if self.over_cap_fraction is not None and not 0.0 <= self.over_cap_fraction <= 1.0:
            raise ManifestError(f"{self.frame_id}: over_cap_fraction outside [0, 1]")
        if self.mean_disparity is not None and not self.mean_disparity >= 0:
            raise ManifestError(f"{self.frame_id}: negative mean disparity")

    @property
    def has_stats(self) -> bool:
        return self.mean_disparity is not None and self.over_cap_fraction is not None

    def with_stats(self, mean_disparity: float, over_cap_fraction: float) -> "FrameRecord":
        return replace(self, mean_disparity=float(mean_disparity),
                       over_cap_fraction=float(over_cap_fraction))


@dataclass
class DatasetManifest:
    records: list[FrameRecord]
    provenance: dict = field(default_factory=dict)
    root: Path | None = None

    def __post_init__(self):
        dup = [k for k, n in Counter(r.frame_id for r in self.records).items() if n > 1]
        if dup:
            raise ManifestError(f"duplicate frame ids: {dup[:5]}")

    def __len__(self):
        return len(self.records)

    def counts(self) -> dict:
        out: dict = {}
        for r in self.records:
            per = out.setdefault(r.scene_kind, {s: 0 for s in SPLITS})
            per[r.split] += 1
        return {k: out[k] for k in sorted(out)}

    def split(self, name: str) -> list[FrameRecord]:
        return [r for r in self.records if r.split == name]

    def resolve(self, relpath: str) -> Path:
        base = self.root if self.root is not None else Path(".")
        return base / relpath

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "provenance": self.provenance,
            "counts": self.counts(),
            "records": [asdict(r) for r in self.records],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps() + "\n")
        return path

    @classmethod
    def from_dict(cls, data: dict, root=None) -> "DatasetManifest":
        if data.get("version") != MANIFEST_VERSION:
            raise ManifestError(f"unsupported manifest version {data.get('version')!r}")
        records = [FrameRecord(**r) for r in data["records"]]
        return cls(records=records, provenance=dict(data.get("provenance", {})),
                   root=Path(root) if root is not None else None)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), root=path.parent)
