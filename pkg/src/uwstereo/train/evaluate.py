"""Per-domain evaluation reports and the train-domain x eval-domain matrix."""

from __future__ import annotations

import json
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from ..checkpoint import load_checkpoint
from ..data.manifest import DatasetManifest
from ..net.model import StereoNet
from .data import load_samples, to_tensor
from .metrics import error_sums

ROW_FIELDS = ("domain", "epe", "bad3", "n_frames", "wall_ms_per_frame")


@dataclass
class EvalRow:
    domain: str
    epe: float
    bad3: float
    n_frames: int
    wall_ms_per_frame: float | None = None

    def __post_init__(self):
        if self.epe < 0 or not 0.0 <= self.bad3 <= 100.0:
            raise ValueError(f"invalid metrics for {self.domain}: epe={self.epe}, bad3={self.bad3}")


@dataclass
class EvalReport:
    rows: list[EvalRow]
    checkpoint_id: str = ""
    eval_iters: int | None = None

    def row(self, domain: str) -> EvalRow:
        for r in self.rows:
            if r.domain == domain:
                return r
        raise KeyError(domain)

    @property
    def overall(self) -> EvalRow:
        return self.row("all")

    def to_dict(self) -> dict:
        return {"checkpoint_id": self.checkpoint_id, "eval_iters": self.eval_iters,
                "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls([EvalRow(**{k: r[k] for k in ROW_FIELDS}) for r in d["rows"]],
                   d.get("checkpoint_id", ""), d.get("eval_iters"))


def pad_to_multiple(image: torch.Tensor, factor: int = 16) -> tuple[torch.Tensor, tuple[int, int]]:
    """Replicate-pad the bottom and right edges up to a multiple of `factor`."""
    h, w = image.shape[-2:]
    ph, pw = (-h) % factor, (-w) % factor
    if ph or pw:
        image = F.pad(image, (0, pw, 0, ph), mode="replicate")
    return image, (h, w)


def predict_disparity(model, left: np.ndarray, right: np.ndarray, iters: int | None = None) -> np.ndarray:
    """Full-resolution (H, W) prediction from a StereoNet or a callable(left, right) -> disparity."""
    lt, rt = to_tensor(left), to_tensor(right)
    if isinstance(model, StereoNet):
        lp, (h, w) = pad_to_multiple(lt)
        rp, _ = pad_to_multiple(rt)
        with torch.no_grad():
            out = model(lp, rp, iters=iters).final[0, :h, :w]
        return out.numpy()
    out = model(lt, rt)
    if hasattr(out, "detach"):
        out = out.detach().cpu().numpy()
    return np.asarray(out, dtype=np.float64).reshape(left.shape[:2])


def _resolve_model(model):
    if isinstance(model, (StereoNet,)) or (callable(model) and not isinstance(model, (str, dict))
                                            and not hasattr(model, "__fspath__")):
        if isinstance(model, torch.nn.Module):
            model.eval()
        return model, getattr(model, "checkpoint_id", type(model).__name__)
    from .loop import load_stereo_model

    ckpt = load_checkpoint(model)
    ident = str(model) if not isinstance(model, dict) else ckpt.get("meta", {}).get("id", "checkpoint")
    net = load_stereo_model(ckpt)
    return net, ident


def evaluate_model(model, dataset, split: str | None = "test", eval_iters: int | None = None,
                   tau: float = 3.0, timing: bool = True) -> EvalReport:
    """Per-scene_kind and aggregate EPE / >tau px over every pixel of every frame.

    `model`: checkpoint path/dict, StereoNet or callable(left, right) -> disparity.
    `dataset`: manifest (path or object; `split` selects records) or list of StereoSample.
    """
    net, ident = _resolve_model(model)
    if isinstance(dataset, (str, DatasetManifest)) or hasattr(dataset, "__fspath__"):
        samples = load_samples(dataset, split)
    else:
        samples = list(dataset)
    if not samples:
        raise ValueError(f"split {split!r} is empty")
    if eval_iters is None and isinstance(net, StereoNet):
        eval_iters = net.config.eval_iters

    sums: OrderedDict[str, list] = OrderedDict()
    for s in sorted(samples, key=lambda s: (s.domain, s.frame_id)):
        t0 = time.perf_counter()
        pred = predict_disparity(net, s.left, s.right, eval_iters)
        dt = time.perf_counter() - t0
        err, bad, n = error_sums(pred, s.disparity, tau)
        acc = sums.setdefault(s.domain, [0.0, 0, 0, 0, 0.0])
        acc[0] += err
        acc[1] += bad
        acc[2] += n
        acc[3] += 1
        acc[4] += dt

    def row(name, err, bad, n, frames, secs):
        return EvalRow(name, err / n, 100.0 * bad / n, frames, 1000.0 * secs / frames if timing else None)

    rows = [row(name, *acc) for name, acc in sums.items()]
    tot = [sum(acc[i] for acc in sums.values()) for i in range(5)]
    rows.append(row("all", *tot))
    return EvalReport(rows, ident, eval_iters)


@dataclass
class CrossDomainReport:
    """entries[train_domain][eval_domain] -> EvalRow (the eval set's "all" row)."""

    entries: dict[str, dict[str, EvalRow]] = field(default_factory=dict)

    @property
    def domains(self) -> list[str]:
        return list(self.entries)

    def epe(self, train_domain: str, eval_domain: str) -> float:
        return self.entries[train_domain][eval_domain].epe

    def mean_cross_domain_epe(self) -> float:
        off = [r.epe for t, row in self.entries.items() for e, r in row.items() if e != t]
        return float(np.mean(off))

    def to_dict(self) -> dict:
        return {"matrix": [
            {"train_domain": t, "eval_domain": e, **{k: v for k, v in asdict(r).items() if k != "domain"}}
            for t, row in self.entries.items() for e, r in row.items()
        ]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def cross_domain_eval(checkpoints: dict, datasets: dict, split: str | None = "test",
                      eval_iters: int | None = None, timing: bool = True) -> CrossDomainReport:
    """Evaluate each domain's checkpoint on every domain's dataset."""
    if len(datasets) < 2:
        raise ValueError(f"cross-domain evaluation needs at least 2 domains, got {len(datasets)}")
    missing = [d for d in datasets if d not in checkpoints]
    if missing:
        raise KeyError(f"missing checkpoint for domain(s): {missing}")
    report = CrossDomainReport()
    for train_domain in datasets:
        model = checkpoints[train_domain]
        report.entries[train_domain] = {}
        for eval_domain, data in datasets.items():
            r = evaluate_model(model, data, split, eval_iters, timing=timing).overall
            report.entries[train_domain][eval_domain] = EvalRow(eval_domain, r.epe, r.bad3, r.n_frames,
                                                                r.wall_ms_per_frame)
    return report
