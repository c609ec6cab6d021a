"""Command-line entry points.

Subcommands: preprocess, train, sample, detect-events, evaluate, stats,
render.  Every command accepts ``--config FILE`` (a flat JSON object whose
keys are the long flag names); explicit flags override file values, and
the effective settings are written as ``<command>_config.json`` next to
the outputs.  The processed-cache root can come from the ``PANOGAZE_CACHE``
environment variable instead of ``--cache``.

Exit codes: 0 when every requested output was written, 2 when a required
path is missing (the message names it), 1 on any other error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import torch

from . import dataset as ds
from .denoiser import DenoiserConfig, GazeDenoiser
from .diffusion import DiffusionConfig, load_checkpoint, train
from .encoder import EncoderConfig, PanoramaEncoder
from .errors import DataEmptyError, PanogazeError, ParseError
from .events import (
    DEFAULT_MIN_FIXATION_DURATION,
    DEFAULT_MIN_SACCADE_SAMPLES,
    DEFAULT_VELOCITY_MULTIPLIER,
    compute_stats,
    detect_events,
    extract_scanpath,
    read_scanpath_csv,
    write_scanpath_csv,
)
from .metrics import (
    QuantGrid,
    evaluate_saliency,
    evaluate_scanpaths,
    evaluate_sequences,
    scanpath_to_pixels,
)
from .render import render_saliency, render_scanpath, render_sequence
from .saliency import load_saliency

__all__ = ["main", "CACHE_ENV"]

CACHE_ENV = "PANOGAZE_CACHE"


class _MissingPath(Exception):
    """A required file or directory does not exist (exit code 2)."""


def _require_dir(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise _MissingPath(f"{what} directory not given")
    path = Path(path)
    if not path.is_dir():
        raise _MissingPath(f"{what} directory not found: {path}")
    return path


def _require_file(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise _MissingPath(f"{what} not given")
    path = Path(path)
    if not path.is_file():
        raise _MissingPath(f"{what} not found: {path}")
    return path


def _cache_root(args: argparse.Namespace) -> Path:
    cache = args.cache or os.environ.get(CACHE_ENV)
    if not cache:
        raise _MissingPath(f"cache directory not given (use --cache or ${CACHE_ENV})")
    return Path(cache)


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset flags from the JSON config file, rejecting unknown keys."""
    if getattr(args, "config", None) is None:
        return
    path = _require_file(args.config, "config file")
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError(f"config file {path} must hold a JSON object")
    for key, value in payload.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("config", "func", "command"):
            raise ParseError(f"config file {path} has unknown key {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, value)


def _fill_defaults(args: argparse.Namespace, defaults: dict) -> None:
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)


def _jsonable(value):
    """Replace non-finite floats with None so output files stay strict JSON."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _write_effective(out_dir: Path, command: str, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def default_split_file() -> Path:
    """Path of the packaged held-out-image list for the 120 Hz dataset."""
    return Path(resources.files("panogaze") / "configs" / "sitzmann_split.json")


def _read_split_file(path: Path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    names = payload.get("test_images", payload if isinstance(payload, list) else [])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ParseError(f"split file {path} must hold a JSON list under 'test_images'")
    return tuple(names)


# ---------------------------------------------------------------- preprocess


def cmd_preprocess(args: argparse.Namespace) -> int:
    _fill_defaults(args, {"dataset": "sitzmann", "target_rate": 30.0, "image_height": 128})
    gaze = _require_dir(args.gaze, "gaze data")
    images = _require_dir(args.images, "image")
    cache = _cache_root(args)

    presets = {"sitzmann": ds.SITZMANN, "salient360": ds.SALIENT360}
    if args.dataset in presets:
        config = presets[args.dataset]
    elif args.dataset == "custom":
        if args.min_samples is None or args.target_length is None:
            raise ParseError("--dataset custom needs --min-samples and --target-length")
        config = ds.PreprocessConfig(
            dataset="custom", min_samples=args.min_samples, target_length=args.target_length
        )
    else:
        raise ParseError(f"unknown dataset {args.dataset!r}")

    overrides: dict = {"target_rate": float(args.target_rate)}
    h = int(args.image_height)
    overrides["image_size"] = (h, 2 * h)
    for field, flag in [
        ("min_samples", args.min_samples),
        ("target_length", args.target_length),
        ("native_rate", args.native_rate),
        ("expected_image_count", args.expected_images),
        ("test_image_count", args.test_image_count),
        ("split_seed", args.seed),
    ]:
        if flag is not None:
            overrides[field] = flag
    split_file = args.split_file
    if split_file is None and args.dataset == "sitzmann":
        packaged = default_split_file()
        split_file = str(packaged) if packaged.is_file() else None
    if split_file is not None:
        overrides["test_images"] = _read_split_file(_require_file(split_file, "split file"))
    config = dataclasses.replace(config, **overrides)

    manifest = ds.preprocess(gaze, images, cache, config)
    effective = dataclasses.asdict(config)
    effective.update({"gaze": str(gaze), "images": str(images), "cache": str(cache)})
    _write_effective(cache, "preprocess", effective)
    counts = manifest["counts"]
    n_images = len(manifest["split"]["train"]) + len(manifest["split"]["test"])
    print(
        f"cache written to {cache}: {counts['retained']} sequences retained "
        f"({counts['dropped_too_short']} dropped), {n_images} images"
    )
    return 0


# --------------------------------------------------------------------- train


def cmd_train(args: argparse.Namespace) -> int:
    _fill_defaults(
        args,
        {
            "epochs": 500,
            "batch_size": 16,
            "learning_rate": 1e-3,
            "checkpoint_every": 50,
            "seed": 0,
            "split": "train",
            "steps": 200,
            "condition_dim": 64,
            "channels": 64,
            "residual_layers": 4,
            "quiet": False,
        },
    )
    cache = _require_dir(args.cache or os.environ.get(CACHE_ENV), "cache")
    out = Path(args.out) if args.out else cache / "model"

    seqs, panoramas = ds.load_processed(cache, split=args.split)
    if not seqs:
        raise DataEmptyError(f"no '{args.split}' sequences in cache {cache}")
    seqs.sort(key=lambda s: (s.image_id, s.observer_id))
    if args.limit_sequences is not None:
        seqs = seqs[: int(args.limit_sequences)]
    if args.truncate_length is not None:
        seqs = [ds.truncate(s, int(args.truncate_length)) for s in seqs]
    pairs = [(seq, panoramas[seq.image_id]) for seq in seqs]

    image_size = pairs[0][1].size
    torch.manual_seed(int(args.seed))  # weight init draws from the global RNG
    encoder = PanoramaEncoder(
        EncoderConfig(input_size=image_size, embedding_dim=int(args.condition_dim))
    )
    denoiser = GazeDenoiser(
        DenoiserConfig(
            residual_layers=int(args.residual_layers),
            channels=int(args.channels),
            condition_dim=int(args.condition_dim),
            diffusion_steps=int(args.steps),
        )
    )
    config = DiffusionConfig(
        steps=int(args.steps),
        epochs=int(args.epochs),
        batch_size=int(args.batch_size),
        learning_rate=float(args.learning_rate),
        checkpoint_every=int(args.checkpoint_every),
        seed=int(args.seed),
    )
    log_fn = None if args.quiet else print
    checkpoint = train(
        pairs, encoder, denoiser, config, out, resume_from=args.resume, log_fn=log_fn
    )
    effective = json.loads(config.to_json())
    effective.update(
        {
            "cache": str(cache),
            "out": str(out),
            "split": args.split,
            "limit_sequences": args.limit_sequences,
            "truncate_length": args.truncate_length,
            "resume": args.resume,
            "n_sequences": len(pairs),
            "sequence_length": len(pairs[0][0]),
            "image_size": list(image_size),
        }
    )
    _write_effective(out, "train", effective)
    print(f"checkpoint written to {checkpoint}")
    return 0


# -------------------------------------------------------------------- sample


def cmd_sample(args: argparse.Namespace) -> int:
    _fill_defaults(args, {"count": 1, "seed": 0, "batch_size": 16})
    checkpoint = _require_file(args.checkpoint, "checkpoint")
    image_path = _require_file(args.image, "image")
    out = Path(args.out) if args.out else Path("samples")
    out.mkdir(parents=True, exist_ok=True)

    model, _ = load_checkpoint(checkpoint)
    pano = ds.load_panorama(image_path)
    target = model.encoder.config.input_size
    if pano.size != target:
        pano = ds.resize_panorama(pano, target)
    n = int(args.count)
    seqs, diagnostics = model.sample(
        pano,
        n=n,
        length=int(args.length) if args.length is not None else None,
        seed=int(args.seed),
        batch_size=int(args.batch_size),
    )
    width = max(3, len(str(n - 1)))
    files = []
    for i, seq in enumerate(seqs):
        path = out / f"sample_{i:0{width}d}.csv"
        ds.write_sequence_csv(path, seq)
        files.append(path.name)
    effective = {
        "checkpoint": str(checkpoint),
        "image": str(image_path),
        "out": str(out),
        "count": n,
        "seed": int(args.seed),
        "length": diagnostics["length"],
        "batch_size": int(args.batch_size),
        "max_norm_deviation": diagnostics["max_norm_deviation"],
    }
    _write_effective(out, "sample", effective)
    print(f"wrote {len(files)} sequences to {out}")
    return 0


# ------------------------------------------------------------- detect-events


def _collect_csvs(path: Path) -> list[tuple[Path, Path]]:
    """(file, relative-path) pairs for one CSV file or a directory tree."""
    if path.is_file():
        return [(path, Path(path.name))]
    return [(p, p.relative_to(path)) for p in sorted(path.rglob("*.csv"))]


def cmd_detect_events(args: argparse.Namespace) -> int:
    _fill_defaults(
        args,
        {
            "velocity_multiplier": DEFAULT_VELOCITY_MULTIPLIER,
            "min_saccade_samples": DEFAULT_MIN_SACCADE_SAMPLES,
            "min_fixation_duration": DEFAULT_MIN_FIXATION_DURATION,
        },
    )
    if args.input is None or not Path(args.input).exists():
        raise _MissingPath(f"input not found: {args.input}")
    src = Path(args.input)
    out = Path(args.out) if args.out else Path("events_out")
    entries = _collect_csvs(src)
    if not entries:
        raise DataEmptyError(f"no CSV files under {src}")

    lam = float(args.velocity_multiplier)
    written = 0
    for file_path, rel in entries:
        seq = ds.read_sequence_csv(file_path)
        events = detect_events(seq, lambda_vel=lam, min_saccade_samples=int(args.min_saccade_samples))
        scanpath = extract_scanpath(
            seq, min_fix_dur=float(args.min_fixation_duration), lambda_vel=lam
        )
        sp_path = out / "scanpaths" / rel
        ev_path = (out / "events" / rel).with_suffix(".json")
        sp_path.parent.mkdir(parents=True, exist_ok=True)
        ev_path.parent.mkdir(parents=True, exist_ok=True)
        write_scanpath_csv(sp_path, scanpath)
        with open(ev_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "sample_rate": seq.sample_rate,
                    "n_samples": len(seq),
                    "events": [
                        {
                            "kind": e.kind,
                            "start": e.start,
                            "end": e.end,
                            "duration_s": e.duration,
                        }
                        for e in events
                    ],
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        written += 1
    _write_effective(
        out,
        "detect_events",
        {
            "input": str(src),
            "out": str(out),
            "velocity_multiplier": lam,
            "min_saccade_samples": int(args.min_saccade_samples),
            "min_fixation_duration": float(args.min_fixation_duration),
            "n_files": written,
        },
    )
    print(f"processed {written} recordings into {out}")
    return 0


# ------------------------------------------------------------------ evaluate


def _matched_groups(gen: Path, gt: Path, suffix: str = ".csv") -> list[tuple[str, Path, Path]]:
    """Image-id groups present on both sides; flat directories form one group."""
    gen_sub = {p.name for p in gen.iterdir() if p.is_dir()}
    gt_sub = {p.name for p in gt.iterdir() if p.is_dir()}
    common = sorted(gen_sub & gt_sub)
    if common:
        return [(name, gen / name, gt / name) for name in common]
    if any(gen.glob(f"*{suffix}")) and any(gt.glob(f"*{suffix}")):
        return [("", gen, gt)]
    raise DataEmptyError(f"no matching image groups between {gen} and {gt}")


def _aggregate(reports: dict[str, dict]) -> dict:
    """Average per-image best/mean columns, ignoring absent (None) scores
    such as AUC/NSS when no fixation locations were supplied."""
    agg: dict[str, dict[str, float | None]] = {}
    names = sorted({m for rep in reports.values() for m in rep["metrics"]})
    for name in names:
        scores = [rep["metrics"][name] for rep in reports.values() if name in rep["metrics"]]
        best = [s["best"] for s in scores if s["best"] is not None]
        mean = [s["mean"] for s in scores if s["mean"] is not None]
        agg[name] = {
            "best": float(np.mean(best)) if best else None,
            "mean": float(np.mean(mean)) if mean else None,
        }
    return agg


def cmd_evaluate(args: argparse.Namespace) -> int:
    _fill_defaults(
        args,
        {
            "height": 1024,
            "width": 2048,
            "grid_rows": 8,
            "grid_cols": 16,
            "wrap": False,
            "human_baseline": False,
            "threshold_deg": 2.0,
        },
    )
    gen_dir = _require_dir(args.gen, "generated data")
    gt_dir = _require_dir(args.gt, "ground-truth data")
    out = Path(args.out) if args.out else Path("evaluation")
    height, width = int(args.height), int(args.width)
    grid = QuantGrid(rows=int(args.grid_rows), cols=int(args.grid_cols))
    wrap_width = width if args.wrap else None

    reports: dict[str, dict] = {}
    if args.kind == "sequences":
        for name, gdir, tdir in _matched_groups(gen_dir, gt_dir):
            gen_seqs = [ds.read_sequence_csv(p, image_id=name) for p in sorted(gdir.glob("*.csv"))]
            gt_seqs = [ds.read_sequence_csv(p, image_id=name) for p in sorted(tdir.glob("*.csv"))]
            rep = evaluate_sequences(
                gen_seqs,
                gt_seqs,
                height,
                width,
                grid=grid,
                wrap_width=wrap_width,
                image_id=name,
                human_baseline_mode=bool(args.human_baseline),
            )
            reports[name or "all"] = rep.to_dict()
    elif args.kind == "scanpaths":
        for name, gdir, tdir in _matched_groups(gen_dir, gt_dir):
            gen_paths = [read_scanpath_csv(p, image_id=name) for p in sorted(gdir.glob("*.csv"))]
            gt_paths = [read_scanpath_csv(p, image_id=name) for p in sorted(tdir.glob("*.csv"))]
            rep = evaluate_scanpaths(
                gen_paths,
                gt_paths,
                height,
                width,
                grid=grid,
                wrap_width=wrap_width,
                threshold_deg=float(args.threshold_deg),
                image_id=name,
                human_baseline_mode=bool(args.human_baseline),
            )
            reports[name or "all"] = rep.to_dict()
    elif args.kind == "saliency":
        preds = {p.stem: p for p in sorted(gen_dir.iterdir()) if p.suffix in (".npy", ".png")}
        gts = {p.stem: p for p in sorted(gt_dir.iterdir()) if p.suffix in (".npy", ".png")}
        common = sorted(set(preds) & set(gts))
        if not common:
            raise DataEmptyError(f"no matching saliency maps between {gen_dir} and {gt_dir}")
        fix_root = Path(args.gt_scanpaths) if args.gt_scanpaths else None
        for name in common:
            pred = load_saliency(preds[name])
            gt_map = load_saliency(gts[name])
            fix_dir = fix_root / name if fix_root is not None else None
            if fix_dir is not None and fix_dir.is_dir():
                pixels = [
                    scanpath_to_pixels(read_scanpath_csv(p), *gt_map.shape)
                    for p in sorted(fix_dir.glob("*.csv"))
                ]
                pixels = [px for px in pixels if len(px)]
                fixations = np.vstack(pixels) if pixels else np.zeros((0, 2))
            else:
                fixations = None
            rep = evaluate_saliency(pred, gt_map, fixations, image_id=name)
            reports[name] = rep.to_dict()
    else:
        raise ParseError(f"unknown evaluation kind {args.kind!r}")

    payload = {
        "kind": args.kind,
        "per_image": reports,
        "aggregate": _aggregate(reports),
        "settings": {
            "height": height,
            "width": width,
            "grid_rows": grid.rows,
            "grid_cols": grid.cols,
            "wrap": bool(args.wrap),
            "human_baseline": bool(args.human_baseline),
            "threshold_deg": float(args.threshold_deg),
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    _write_effective(
        out,
        "evaluate",
        {**payload["settings"], "kind": args.kind, "gen": str(gen_dir), "gt": str(gt_dir)},
    )
    print(f"report written to {report_path}")
    return 0


# --------------------------------------------------------------------- stats


def cmd_stats(args: argparse.Namespace) -> int:
    _fill_defaults(
        args,
        {
            "velocity_multiplier": DEFAULT_VELOCITY_MULTIPLIER,
            "min_fixation_duration": DEFAULT_MIN_FIXATION_DURATION,
        },
    )
    src = _require_dir(args.input, "input")
    out_file = Path(args.out) if args.out else src / "stats.json"
    entries = _collect_csvs(src)
    if not entries:
        raise DataEmptyError(f"no CSV files under {src}")
    seqs = [ds.read_sequence_csv(p) for p, _ in entries]
    stats = compute_stats(
        seqs,
        lambda_vel=float(args.velocity_multiplier),
        min_fix_dur=float(args.min_fixation_duration),
    )
    out_file.parent.mkdir(parents=True, exist_ok=True)
    with open(out_file, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(stats.to_dict()), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    _write_effective(
        out_file.parent,
        "stats",
        {
            "input": str(src),
            "out": str(out_file),
            "velocity_multiplier": float(args.velocity_multiplier),
            "min_fixation_duration": float(args.min_fixation_duration),
            "n_sequences": len(seqs),
        },
    )
    print(f"stats written to {out_file}")
    return 0


# -------------------------------------------------------------------- render


def cmd_render(args: argparse.Namespace) -> int:
    _fill_defaults(args, {"alpha": 0.5, "colormap": None})
    image_path = _require_file(args.image, "image")
    input_path = _require_file(args.input, "input")
    out = Path(args.out) if args.out else input_path.with_suffix(".png")
    pano = ds.load_panorama(image_path)

    if args.kind == "sequence":
        seq = ds.read_sequence_csv(input_path)
        render_sequence(pano, seq, out, colormap=args.colormap or "viridis")
    elif args.kind == "scanpath":
        scanpath = read_scanpath_csv(input_path)
        render_scanpath(pano, scanpath, out)
    elif args.kind == "saliency":
        smap = load_saliency(input_path)
        render_saliency(pano, smap, out, alpha=float(args.alpha), colormap=args.colormap or "jet")
    else:
        raise ParseError(f"unknown render kind {args.kind!r}")
    _write_effective(
        out.parent,
        "render",
        {
            "kind": args.kind,
            "image": str(image_path),
            "input": str(input_path),
            "out": str(out),
            "alpha": float(args.alpha),
            "colormap": args.colormap,
        },
    )
    print(f"figure written to {out}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panogaze",
        description="Gaze-sequence generation and analysis on 360-degree panoramas.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of flat key/value settings")
        p.set_defaults(func=func)
        return p

    p = add("preprocess", cmd_preprocess, "build the processed cache from raw recordings")
    p.add_argument("--gaze", help="root of raw recordings (<image_id>/<observer>.csv)")
    p.add_argument("--images", help="directory of equirectangular panoramas")
    p.add_argument("--cache", help=f"cache output root (default ${CACHE_ENV})")
    p.add_argument("--dataset", choices=["sitzmann", "salient360", "custom"])
    p.add_argument("--split-file", help="JSON file naming held-out test images")
    p.add_argument("--min-samples", type=int)
    p.add_argument("--target-length", type=int)
    p.add_argument("--native-rate", type=float)
    p.add_argument("--target-rate", type=float)
    p.add_argument("--image-height", type=int, help="cache panorama height (width is 2x)")
    p.add_argument("--expected-images", type=int)
    p.add_argument("--test-image-count", type=int)
    p.add_argument("--seed", type=int, help="seed for the fallback test-image draw")

    p = add("train", cmd_train, "train the diffusion model on the processed cache")
    p.add_argument("--cache", help=f"processed cache root (default ${CACHE_ENV})")
    p.add_argument("--out", help="output directory for checkpoints and loss curve")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", choices=["train", "test"])
    p.add_argument("--limit-sequences", type=int, help="train on the first N sequences only")
    p.add_argument("--truncate-length", type=int, help="cut sequences to this length")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--steps", type=int, help="diffusion step count")
    p.add_argument("--channels", type=int)
    p.add_argument("--residual-layers", type=int)
    p.add_argument("--condition-dim", type=int)
    p.add_argument("--quiet", action="store_const", const=True)

    p = add("sample", cmd_sample, "generate gaze sequences for one panorama")
    p.add_argument("--checkpoint", help="trained model checkpoint")
    p.add_argument("--image", help="panorama to condition on")
    p.add_argument("--out", help="output directory for sequence CSVs")
    p.add_argument("--count", type=int, help="number of sequences")
    p.add_argument("--seed", type=int, help="base seed; batch seeds derive from it")
    p.add_argument("--length", type=int, help="override the checkpoint sequence length")
    p.add_argument("--batch-size", type=int)

    p = add("detect-events", cmd_detect_events, "split recordings into fixations and saccades")
    p.add_argument("--input", help="one sequence CSV or a directory tree of them")
    p.add_argument("--out", help="output root (scanpaths/ and events/)")
    p.add_argument("--velocity-multiplier", type=float)
    p.add_argument("--min-saccade-samples", type=int)
    p.add_argument("--min-fixation-duration", type=float)

    p = add("evaluate", cmd_evaluate, "score generated outputs against ground truth")
    p.add_argument("--kind", choices=["sequences", "scanpaths", "saliency"], required=True)
    p.add_argument("--gen", help="directory of generated outputs")
    p.add_argument("--gt", help="directory of ground-truth outputs")
    p.add_argument("--out", help="report output directory")
    p.add_argument("--height", type=int, help="evaluation raster height")
    p.add_argument("--width", type=int, help="evaluation raster width")
    p.add_argument("--grid-rows", type=int)
    p.add_argument("--grid-cols", type=int)
    p.add_argument("--wrap", action="store_const", const=True, help="wrap pixel distances horizontally")
    p.add_argument("--human-baseline", action="store_const", const=True)
    p.add_argument("--threshold-deg", type=float, help="recurrence match radius")
    p.add_argument("--gt-scanpaths", help="scanpath CSV root for saliency AUC/NSS")

    p = add("stats", cmd_stats, "eye-movement statistics over a directory of recordings")
    p.add_argument("--input", help="directory of sequence CSVs")
    p.add_argument("--out", help="output JSON file")
    p.add_argument("--velocity-multiplier", type=float)
    p.add_argument("--min-fixation-duration", type=float)

    p = add("render", cmd_render, "draw a sequence, scanpath, or saliency overlay")
    p.add_argument("--kind", choices=["sequence", "scanpath", "saliency"], required=True)
    p.add_argument("--image", help="panorama PNG/JPG")
    p.add_argument("--input", help="sequence CSV, scanpath CSV, or saliency map")
    p.add_argument("--out", help="output PNG")
    p.add_argument("--alpha", type=float, help="saliency overlay opacity")
    p.add_argument("--colormap")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except _MissingPath as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PanogazeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
