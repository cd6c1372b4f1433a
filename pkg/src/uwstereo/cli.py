"""Command-line entry point: generate, clean, stats, pretrain, train, eval, crossdomain.

Every subcommand accepts --config (JSON or YAML mapping of option names to
values), --seed and --out. Options given on the command line override the
config file. Failures print one JSON line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

import yaml

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_PATH = 4
EXIT_DATA = 5

WORKERS_ENV = "UWSTEREO_WORKERS"


class UsageError(Exception):
    pass


class ConfigFileError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{WORKERS_ENV} must be >= 1")
    return n


def _load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigFileError(f"cannot read config {path}: {e.strerror}") from e
    try:
        data = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) else json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigFileError(f"cannot parse config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigFileError(f"config {path} must hold a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PermissionError(f"output directory {out} is not writable: {e.strerror}") from e
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def _pair(values, name):
    out = {}
    for item in values or []:
        if "=" not in item:
            raise UsageError(f"{name} entries must look like domain=path, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


# subcommands ---------------------------------------------------------------

def cmd_generate(args) -> dict:
    from .camera import make_default_rig
    from .synth.sequence import SequenceConfig, export_sequence, generate_sequence

    out = _out_dir(args)
    config = SequenceConfig(
        scene_kind=args.scene, seed=args.seed, num_frames=args.frames,
        baselines=tuple(float(b) for b in args.baselines),
        light_options=tuple(int(x) for x in args.lights),
        density_options=tuple(float(x) for x in args.densities),
        color_options=tuple(args.colors),
    )
    rig = make_default_rig(config.baselines[0], allow_any_baseline=True)
    if (args.width, args.height) != (rig.intrinsics.width, rig.intrinsics.height):
        rig = rig.resized(args.width, args.height)
    if args.render == "full":
        manifest = export_sequence(config, out, rig, workers=args.workers)
    else:
        frames, manifest = generate_sequence(config, rig, render=args.render)
        for _ in frames:
            pass
    path = manifest.save(out / "manifest.json")
    return {"manifest": str(path), "records": len(manifest)}


def _relocate(manifest, out: Path):
    """Rewrite record paths so they resolve relative to `out`."""
    from .data.manifest import DatasetManifest

    root = manifest.root.resolve() if manifest.root is not None else Path.cwd()
    records = []
    for r in manifest.records:
        paths = {k: os.path.relpath(root / v, out.resolve()) for k, v in r.paths.items()}
        records.append(replace(r, paths=paths))
    return DatasetManifest(records, manifest.provenance, out)


def cmd_clean(args) -> dict:
    from .data.manifest import DatasetManifest
    from .data.processing import CleaningConfig, apply_cleaning_rules, split_dataset

    out = _out_dir(args)
    manifest = DatasetManifest.load(args.manifest)
    cfg = CleaningConfig(interval=args.interval, low_disp_threshold=args.low_disp_threshold,
                         low_disp_drop_fraction=args.drop_fraction, disp_cap=args.disp_cap,
                         cap_fraction_limit=args.cap_fraction, seed=args.seed)
    cleaned = apply_cleaning_rules(manifest, cfg)
    if args.test_fraction > 0:
        cleaned = split_dataset(cleaned, args.test_fraction, args.seed)
    cleaned = _relocate(cleaned, out)
    path = cleaned.save(out / "manifest.json")
    return {"manifest": str(path), "records": len(cleaned), "counts": cleaned.counts()}


def cmd_stats(args) -> dict:
    from .data.manifest import DatasetManifest
    from .data.processing import disparity_histogram

    out = _out_dir(args)
    manifest = DatasetManifest.load(args.manifest)
    records = manifest.records if args.split is None else manifest.split(args.split)
    hist = disparity_histogram(records, args.bin_width, args.max_bin, root=manifest.root)
    payload = {"seed": args.seed, "manifest_seed": manifest.provenance.get("seed"),
               "split": args.split, "records": len(records), **hist.to_dict(),
               "mass_below_72": hist.mass_below(72)}
    path = _write_json(out / "histogram.json", payload)
    result = {"histogram": str(path), "mass_below_72": payload["mass_below_72"]}
    if args.figure:
        result["figure"] = str(_histogram_figure(hist, out / "histogram.png"))
    return result


def _histogram_figure(hist, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    edges = hist.edges
    fr = hist.fractions
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.bar(edges[:-1], fr[:-1], width=hist.bin_width, align="edge")
    ax.bar([edges[-1]], [fr[-1]], width=hist.bin_width, align="edge", color="gray", label="overflow")
    ax.set_xlabel("disparity (px)")
    ax.set_ylabel("pixel fraction")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def _model_config(args):
    from .net.config import ModelConfig

    return ModelConfig(base_channels=args.base_channels, train_iters=args.train_iters,
                       eval_iters=args.eval_iters, max_disparity=args.max_disparity)


def cmd_pretrain(args) -> dict:
    from .pretrain import MaskSpec, PretrainConfig, pretrain, pretrain_checkpoint
    from .checkpoint import save_checkpoint
    from .train.data import load_samples

    out = _out_dir(args)
    samples = load_samples(args.manifest, args.split)
    cfg = PretrainConfig(steps=args.steps, batch_size=args.batch_size, crop_h=args.crop_h, crop_w=args.crop_w,
                         learning_rate=args.lr, seed=args.seed,
                         mask=MaskSpec(args.patch_size, args.left_ratio, args.right_ratio, args.seed))
    model, log = pretrain(samples, cfg, _model_config(args), log_path=out / "pretrain_log.jsonl")
    ckpt = pretrain_checkpoint(model, cfg)
    ckpt["meta"]["seed"] = args.seed
    path = save_checkpoint(out / "pretrain.pt", ckpt)
    return {"checkpoint": str(path), "steps": len(log), "final_loss": log[-1]["loss"] if log else None}


def cmd_train(args) -> dict:
    from .checkpoint import save_checkpoint
    from .train.data import load_samples
    from .train.loop import TrainConfig, train_model

    out = _out_dir(args)
    if args.wide_crop:
        args.crop_h, args.crop_w = 320, 736
    cfg = TrainConfig(crop_h=args.crop_h, crop_w=args.crop_w, gamma=args.gamma, train_iters=args.train_iters,
                      eval_iters=args.eval_iters, steps=args.steps, batch_size=args.batch_size,
                      learning_rate=args.lr, seed=args.seed, augment=not args.no_augment,
                      asymmetric_color=args.asymmetric_color, val_every=args.val_every,
                      strict_determinism=args.strict_determinism)
    samples = load_samples(args.manifest, "train")
    val = load_samples(args.manifest, "test") if args.val_every else None
    model_config = None if args.init else _model_config(args)
    _, ckpt, log = train_model(samples, cfg, init=args.init, model_config=model_config, val_samples=val,
                               log_path=out / "train_log.jsonl")
    ckpt["meta"]["seed"] = args.seed
    path = save_checkpoint(out / "stereo.pt", ckpt)
    return {"checkpoint": str(path), "steps": len(log), "final_loss": log[-1]["loss"] if log else None}


def cmd_eval(args) -> dict:
    from .train.evaluate import evaluate_model

    out = _out_dir(args)
    if not Path(args.checkpoint).exists():
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    report = evaluate_model(args.checkpoint, args.manifest, args.split, args.eval_iters, timing=not args.no_timing)
    payload = {"seed": args.seed, **report.to_dict()}
    path = _write_json(out / "eval_report.json", payload)
    return {"report": str(path), "rows": payload["rows"]}


def cmd_crossdomain(args) -> dict:
    from .train.evaluate import cross_domain_eval

    out = _out_dir(args)
    ckpts = _pair(args.checkpoint, "--checkpoint")
    data = _pair(args.manifest, "--manifest")
    for p in list(ckpts.values()) + list(data.values()):
        if not Path(p).exists():
            raise FileNotFoundError(f"not found: {p}")
    report = cross_domain_eval(ckpts, data, args.split, args.eval_iters, timing=not args.no_timing)
    payload = {"seed": args.seed, **report.to_dict(), "mean_cross_domain_epe": report.mean_cross_domain_epe()}
    path = _write_json(out / "crossdomain.json", payload)
    return {"report": str(path), "mean_cross_domain_epe": payload["mean_cross_domain_epe"]}


COMMANDS = {
    "generate": cmd_generate, "clean": cmd_clean, "stats": cmd_stats, "pretrain": cmd_pretrain,
    "train": cmd_train, "eval": cmd_eval, "crossdomain": cmd_crossdomain,
}


def _add_model_args(p):
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--train-iters", type=int, default=22)
    p.add_argument("--eval-iters", type=int, default=32)
    p.add_argument("--max-disparity", type=int, default=192, help="must not exceed the crop width")


def build_parser() -> argparse.ArgumentParser:
    from .camera import PAPER_BASELINES
    from .synth.scene import SCENE_KINDS

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file of option overrides")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".")
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (default from ${WORKERS_ENV}, else 1)")

    parser = _Parser(prog="uwstereo", description="Synthetic underwater stereo pipeline")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="render a sequence and write a manifest")
    p.add_argument("--scene", choices=SCENE_KINDS, default="default-like")
    p.add_argument("--frames", type=int, default=1500)
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--height", type=int, default=720)
    p.add_argument("--baselines", nargs="+", type=float, default=list(PAPER_BASELINES))
    p.add_argument("--lights", nargs="+", type=int, default=[0, 1])
    p.add_argument("--densities", nargs="+", type=float, default=[1.0, 2.0])
    p.add_argument("--colors", nargs="+", default=["blue", "green"])
    p.add_argument("--render", choices=("full", "depth", "none"), default="full")

    p = sub.add_parser("clean", parents=[common], help="apply cleaning rules and split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--interval", type=int, default=4)
    p.add_argument("--low-disp-threshold", type=float, default=10.0)
    p.add_argument("--drop-fraction", type=float, default=0.5)
    p.add_argument("--disp-cap", type=float, default=192.0)
    p.add_argument("--cap-fraction", type=float, default=0.10)
    p.add_argument("--test-fraction", type=float, default=0.10)

    p = sub.add_parser("stats", parents=[common], help="disparity histogram")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--bin-width", type=float, default=8.0)
    p.add_argument("--max-bin", type=float, default=192.0)
    p.add_argument("--figure", action="store_true", help="also write histogram.png")

    p = sub.add_parser("pretrain", parents=[common], help="masked reconstruction pretraining")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--crop-h", type=int, default=128)
    p.add_argument("--crop-w", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patch-size", type=int, default=32)
    p.add_argument("--left-ratio", type=float, default=0.5)
    p.add_argument("--right-ratio", type=float, default=0.5)
    _add_model_args(p)

    p = sub.add_parser("train", parents=[common], help="supervised stereo training")
    p.add_argument("--manifest", required=True)
    p.add_argument("--init", default=None, help="pretrain checkpoint (default: random init)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=2)
    p.add_argument("--crop-h", type=int, default=128)
    p.add_argument("--crop-w", type=int, default=256)
    p.add_argument("--wide-crop", action="store_true", help="use 320x736 crops")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--asymmetric-color", action="store_true")
    p.add_argument("--val-every", type=int, default=0)
    p.add_argument("--strict-determinism", action="store_true")
    _add_model_args(p)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--eval-iters", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields (byte-stable reports)")

    p = sub.add_parser("crossdomain", parents=[common], help="train-domain x eval-domain matrix")
    p.add_argument("--checkpoint", nargs="+", required=True, metavar="DOMAIN=PATH")
    p.add_argument("--manifest", nargs="+", required=True, metavar="DOMAIN=PATH")
    p.add_argument("--split", default="test")
    p.add_argument("--eval-iters", type=int, default=None)
    p.add_argument("--no-timing", action="store_true")
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
    if args.config:
        overrides = _load_config(args.config)
        known = set(vars(args))
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigFileError(f"unknown config key(s): {unknown}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    if args.workers is None:
        args.workers = _default_workers()
    return args


def _classify(exc) -> int:
    from .checkpoint import CheckpointError

    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, ConfigFileError):
        return EXIT_CONFIG
    if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError)):
        return EXIT_PATH
    if isinstance(exc, (ValueError, KeyError, CheckpointError)):
        return EXIT_DATA
    return EXIT_ERROR


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        result = COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one JSON line
        code = _classify(exc)
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(msg), "exit_code": code}),
              file=sys.stderr)
        return code
    print(json.dumps({"command": args.command, "seed": args.seed, **result}, sort_keys=True))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
