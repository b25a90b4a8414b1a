"""Command line driver.

    gancd <subcommand> --config PATH [--seed N] [--out DIR] [--smoke]

Subcommands: synth, expand, train, infer, eval, divlab, dis-study. Output goes
to a run directory (``--out`` or ``io.run_dir``) laid out as::

    config.json  data/  expanded/  checkpoints/  maps/  metrics/  logs/

Failures exit nonzero with a one-line JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import divlab
from .config import RunConfig, load_config
from .core import load_image, save_image
from .evaluation import confusion, frechet_feature_distance, metrics, sweep_curves, write_curves_csv
from .expand import TrainingSetSampler, build_training_set
from .infer import binarize, change_map_from_images, sample_generated
from .synthdata import generate_scene_pair, manifest
from .train import load_checkpoint, train

log = logging.getLogger("gancd")


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, code=2)


def _fail(kind: str, message: str, code: int = 1):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.io.run_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n")
    return out


def _pair_paths(args, cfg: RunConfig, out: Path) -> tuple[Path, Path]:
    if args.pair:
        return Path(args.pair[0]), Path(args.pair[1])
    if cfg.io.image0 and cfg.io.image1:
        return Path(cfg.io.image0), Path(cfg.io.image1)
    return out / "data" / "A.png", out / "data" / "B.png"


def _load_pair(paths):
    a, b = (load_image(p) for p in paths)
    if a.shape != b.shape:
        raise CLIError(f"image pair shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _grid(images, cols: int = 4) -> np.ndarray:
    images = np.asarray(images)
    n, h, w, c = images.shape
    rows = -(-n // cols)
    canvas = np.zeros((rows * h, cols * w, c))
    for i, img in enumerate(images):
        r, k = divmod(i, cols)
        canvas[r * h : (r + 1) * h, k * w : (k + 1) * w] = img
    return canvas


def cmd_synth(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    img_a, img_b, truth, prims = generate_scene_pair(cfg.scene, return_primitives=True)
    data = out / "data"
    data.mkdir(exist_ok=True)
    save_image(img_a, data / "A.png")
    save_image(img_b, data / "B.png")
    save_image(truth, data / "truth.png")
    (data / "manifest.json").write_text(manifest(cfg.scene, prims) + "\n")
    return {"written": [str(data / n) for n in ("A.png", "B.png", "truth.png", "manifest.json")]}


def cmd_expand(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    a, b = _load_pair(_pair_paths(args, cfg, out))
    exp = cfg.expansion
    if args.limit:
        exp.n = max(2, min(exp.n, args.limit))
    target = out / "expanded"
    target.mkdir(exist_ok=True)
    for k, img in enumerate(build_training_set(a, b, exp)):
        save_image(img, target / f"{k:05d}.png")
    return {"count": exp.n, "dir": str(target)}


def cmd_train(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    a, b = _load_pair(_pair_paths(args, cfg, out))
    arch = replace(cfg.arch, image_size=a.shape[0], channels=a.shape[2])
    if a.shape[0] != a.shape[1]:
        raise CLIError("training images must be square")
    ckpt = out / "checkpoints"
    logs = out / "logs"
    logs.mkdir(exist_ok=True)
    log_path = logs / "train.jsonl"
    state = None
    if args.resume:
        state = load_checkpoint(args.resume, cfg.train)
        # keep the log consistent with the restored monitor
        with open(log_path, "w") as fh:
            for rec in state.monitor.records:
                fh.write(json.dumps(rec) + "\n")
    else:
        log_path.write_text("")
    started = time.time()
    result = train(a, b, cfg.expansion, arch, cfg.train, state=state, checkpoint_dir=ckpt, log_path=log_path)
    return {
        "checkpoint": str(ckpt / "final"),
        "steps": result.state.step,
        "seconds": round(time.time() - started, 1),
    }


def _checkpoint_path(args, out: Path) -> Path:
    path = Path(args.checkpoint) if args.checkpoint else out / "checkpoints" / "final"
    if not (path / "arch.json").is_file():
        raise CLIError(f"no checkpoint found at {path}")
    return path


def cmd_infer(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    ckpt = _checkpoint_path(args, out)
    state = load_checkpoint(ckpt)
    images = sample_generated(state.gen, cfg.compare.n, cfg.compare.seed)
    intensity = change_map_from_images(images, cfg.compare)
    maps = out / "maps"
    maps.mkdir(exist_ok=True)
    save_image(intensity, maps / "intensity.png")
    save_image(binarize(intensity, cfg.eval.binary_threshold), maps / "binary.png")
    save_image(_grid(images[:8]), maps / "samples.png")
    sidecar = {
        "compare": asdict(cfg.compare),
        "binary_threshold": cfg.eval.binary_threshold,
        # relative inside the run directory so reruns elsewhere match byte for byte
        "checkpoint": str(ckpt.relative_to(out)) if ckpt.is_relative_to(out) else str(ckpt),
        "max_intensity": float(intensity.max()),
    }
    _write_json(maps / "infer.json", sidecar)
    return {"maps": str(maps)}


def _score(intensity, truth, cfg: RunConfig) -> dict:
    sweep = sweep_curves(intensity, truth, cfg.eval.thresholds)
    best, _ = sweep.best_f1()
    return {
        "roc_auc": sweep.roc_auc,
        "best_f1": {"threshold": best.threshold, **metrics(confusion(intensity >= best.threshold, truth))},
        "at_threshold": {
            "threshold": cfg.eval.binary_threshold,
            **metrics(confusion(binarize(intensity, cfg.eval.binary_threshold), truth)),
        },
    }, sweep


def cmd_eval(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    map_path = Path(args.map) if args.map else out / "maps" / "intensity.png"
    truth_path = Path(args.truth or cfg.io.truth or out / "data" / "truth.png")
    intensity = load_image(map_path).max(axis=2)
    truth = load_image(truth_path).max(axis=2) >= 0.5
    if intensity.shape != truth.shape:
        raise CLIError(f"map {intensity.shape} and truth {truth.shape} are not aligned")
    report, sweep = _score(intensity, truth, cfg)
    target = out / "metrics"
    _write_json(target / "metrics.json", report)
    write_curves_csv(sweep, target / "curves.csv")
    return {"metrics": str(target / "metrics.json"), "roc_auc": report["roc_auc"]}


def cmd_divlab(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    count = args.count if args.count is not None else cfg.divlab.count
    if count < 1:
        raise CLIError("count must be at least 1")
    report = divlab.run_suite(count, cfg.seed)
    _write_json(out / "metrics" / "divlab.json", report)
    return {"report": str(out / "metrics" / "divlab.json"), **report["summary"]}


def cmd_dis_study(args, cfg: RunConfig) -> dict:
    out = _run_dir(args, cfg)
    img_a, img_b, truth = generate_scene_pair(cfg.scene)
    if cfg.io.image0 and cfg.io.image1:
        img_a, img_b = _load_pair((cfg.io.image0, cfg.io.image1))
        truth = load_image(cfg.io.truth).max(axis=2) >= 0.5 if cfg.io.truth else None
    size = img_a.shape[0]
    arch = replace(cfg.arch, image_size=size, channels=img_a.shape[2])
    variants = []
    for clip in cfg.dis_study.clip_sizes:
        name = f"DIS-{clip}"
        sub = out / "dis_study" / name
        disc_arch = replace(arch, clip_size=clip)
        started = time.time()
        result = train(img_a, img_b, cfg.expansion, arch, cfg.train, disc_arch=disc_arch, checkpoint_dir=sub / "checkpoints")
        seconds = time.time() - started
        images = sample_generated(result.gen, max(cfg.compare.n, cfg.dis_study.fid_samples), cfg.compare.seed)
        intensity = change_map_from_images(images[: cfg.compare.n], cfg.compare)
        reference = TrainingSetSampler(img_a, img_b, cfg.expansion).batch(0, 0, cfg.dis_study.fid_samples)
        entry = {
            "variant": name,
            "clip_size": clip,
            "frechet": frechet_feature_distance(list(reference), list(images[: cfg.dis_study.fid_samples])),
            "train_seconds": round(seconds, 1),
        }
        if truth is not None:
            entry.update(_score(intensity, truth, cfg)[0])
        save_image(intensity, sub / "intensity.png")
        save_image(_grid(images[:8]), sub / "samples.png")
        variants.append(entry)
    report = {"seed": cfg.seed, "variants": variants}
    _write_json(out / "dis_study" / "report.json", report)
    return {"report": str(out / "dis_study" / "report.json")}


COMMANDS = {
    "synth": cmd_synth,
    "expand": cmd_expand,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "divlab": cmd_divlab,
    "dis-study": cmd_dis_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gancd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--out", help="run directory (default: io.run_dir)")
        p.add_argument("--smoke", action="store_true", help="apply the desk-scale profile")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("expand", "train"):
            p.add_argument("--pair", nargs=2, metavar=("IMAGE0", "IMAGE1"))
        if name == "expand":
            p.add_argument("--limit", type=int, help="write at most this many images")
        if name == "train":
            p.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint directory")
        if name == "infer":
            p.add_argument("--checkpoint")
        if name == "eval":
            p.add_argument("--map", help="intensity map PNG")
            p.add_argument("--truth", help="ground-truth PNG")
        if name == "divlab":
            p.add_argument("--count", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, smoke=args.smoke, seed=args.seed).resolved()
        result = COMMANDS[args.command](args, cfg)
    except Exception as exc:  # every failure becomes a JSON error line
        _fail(type(exc).__name__, str(exc))
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
