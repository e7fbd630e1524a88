"""Command-line interface.

Commands::

    flowseg synth    --out DIR [...]          generate a synthetic dataset
    flowseg saliency ROOT --out DIR [...]     saliency maps + initial node vector
    flowseg segment  ROOT --out DIR [...]     full pipeline -> masks + manifest
    flowseg evaluate PRED_DIR GT_DIR [...]    score masks against ground truth

Configuration precedence: command-line --opt overrides > config file >
built-in defaults. Config files are flat ``key = value`` lines ('#' starts a
comment). Exit codes: 0 success, 1 input error, 2 internal failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import InputError, PipelineConfig, normalize01
from .io import (load_sequence, read_mask, synth_sequence, write_gray,
                 write_labels, write_mask, write_sequence)
from .metrics import evaluate_sequence
from .pipeline import compute_saliency, run_segmentation

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _coerce(name: str, text: str):
    """Convert a config string to the declared field type of PipelineConfig."""
    for f in dataclasses.fields(PipelineConfig):
        if f.name == name:
            if f.type in ("bool",):
                word = text.strip().lower()
                if word not in _BOOL_WORDS:
                    raise InputError(f"config key {name}: expected a boolean, got {text!r}")
                return _BOOL_WORDS[word]
            if f.type in ("int",):
                return int(text)
            if f.type in ("float",):
                return float(text)
            if f.type in ("int | None",):
                return None if text.strip().lower() == "none" else int(text)
            return text
    raise InputError(f"unknown config key: {name}")


def parse_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, text)
    return values


def build_config(args) -> PipelineConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for item in getattr(args, "opt", None) or []:
        if "=" not in item:
            raise InputError(f"--opt expects key=value, got {item!r}")
        key, text = (part.strip() for part in item.split("=", 1))
        values[key] = _coerce(key, text)
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if getattr(args, "disable_temporal", False):
        values["enable_temporal"] = False
    if getattr(args, "disable_spatial", False):
        values["enable_spatial"] = False
    if getattr(args, "disable_longrange", False):
        values["enable_longrange"] = False
    if getattr(args, "no_focused", False):
        values["enable_focused"] = False
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad configuration: {exc}") from exc


def _default_threads() -> int:
    return os.cpu_count() or 1


def cmd_synth(args) -> None:
    bundle = synth_sequence(width=args.width, height=args.height,
                            num_frames=args.frames, square_size=args.square_size,
                            velocity=tuple(args.velocity),
                            noise_level=args.noise_level, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sequence(bundle, out)
    print(f"wrote {bundle.num_frames} frames to {out}")


def cmd_saliency(args) -> None:
    config = build_config(args)
    bundle = load_sequence(args.root)
    out = Path(args.out)
    (out / "saliency").mkdir(parents=True, exist_ok=True)
    fields, segs, v0 = compute_saliency(bundle, config, threads=args.threads)
    for i, u in enumerate(fields):
        write_gray(u, out / "saliency" / f"{i:05d}.png")
    np.save(out / "v0.npy", v0)
    if args.dump_components:
        _write_saliency_components(bundle, config, out)
    print(f"wrote {len(fields)} saliency maps and v0.npy ({v0.size} nodes) to {out}")


def _write_saliency_components(bundle, config, out: Path) -> None:
    """Debug dump of the two distance maps behind each saliency field."""
    from .motion_saliency import frame_saliency_maps
    for sub in ("saliency_u0", "saliency_u1"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    flows = list(bundle.forward_flow) + [-np.asarray(bundle.backward_flow[-1])]
    for i, flow in enumerate(flows):
        u0, u1, _ = frame_saliency_maps(flow, config, seed=config.seed + i)
        write_gray(u0, out / "saliency_u0" / f"{i:05d}.png")
        write_gray(u1, out / "saliency_u1" / f"{i:05d}.png")


def _write_factor_triplets(factors, out: Path) -> None:
    """Debug dump of each graph factor as 'row col weight' lines."""
    out.mkdir(parents=True, exist_ok=True)
    for name, factor in zip(("T", "E", "V"), factors):
        path = out / f"factor_{name}.txt"
        if factor is None:
            path.write_text("# factor disabled\n")
            continue
        rows, cols, weights = factor.entries()
        lines = [f"{r} {c} {w:.12g}" for r, c, w in zip(rows, cols, weights)]
        path.write_text("\n".join(lines) + "\n")


def cmd_segment(args) -> None:
    config = build_config(args)
    bundle = load_sequence(args.root)
    mode = "semi-supervised" if args.semi_supervised else "unsupervised"
    if mode == "semi-supervised" and not bundle.annotations:
        raise InputError(f"semi-supervised mode needs {Path(args.root) / 'annotations'}")

    out = Path(args.out)
    snapshots = []
    callback = (lambda it, v: snapshots.append((it, v.copy()))) if args.dump_iterations else None

    start = time.perf_counter()
    result = run_segmentation(bundle, config, mode=mode, threads=args.threads,
                              diffusion_callback=callback)
    total = time.perf_counter() - start

    (out / "masks").mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(result.masks):
        write_mask(mask, out / "masks" / f"{i:05d}.png")
    np.save(out / "node_saliency.npy", result.node_saliency)
    if args.dump_saliency:
        (out / "saliency").mkdir(exist_ok=True)
        for i, u in enumerate(result.saliency_fields):
            write_gray(u, out / "saliency" / f"{i:05d}.png")
        _write_saliency_components(bundle, config, out)
    if args.dump_labels:
        (out / "labels").mkdir(exist_ok=True)
        for i, seg in enumerate(result.segs):
            write_labels(seg.labels, out / "labels" / f"{i:05d}.png")
    if args.dump_graph:
        _write_factor_triplets(result.factors, out / "graph")
    for it, v in snapshots:
        snap_dir = out / "snapshots" / f"iter_{it:02d}"
        snap_dir.mkdir(parents=True, exist_ok=True)
        vn = normalize01(v)
        for i, seg in enumerate(result.segs):
            offset = int(result.offsets[i])
            write_gray(vn[offset + seg.labels], snap_dir / f"{i:05d}.png")

    manifest = {
        "command": "segment",
        "input_root": str(Path(args.root).resolve()),
        "output_dir": str(out.resolve()),
        "mode": mode,
        "factors": {
            "temporal": config.enable_temporal,
            "spatial": config.enable_spatial,
            "longrange": config.enable_longrange,
        },
        "focused_diffusion": config.enable_focused,
        "config": config.as_dict(),
        "threads": args.threads,
        "timings_sec": {**result.timings, "total": total},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(result.masks)} masks to {out / 'masks'} "
          f"({total:.1f}s, {result.offsets[-1]} nodes)")


def cmd_evaluate(args) -> None:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise InputError(f"not a directory: {d}")
    pred_files = sorted(pred_dir.glob("*.png"))
    gt_files = sorted(gt_dir.glob("*.png"))
    if not pred_files:
        raise InputError(f"no masks in {pred_dir}")
    if len(pred_files) != len(gt_files):
        raise InputError(
            f"{len(pred_files)} predictions vs {len(gt_files)} annotations")
    preds = [read_mask(p) for p in pred_files]
    gts = [read_mask(p) for p in gt_files]
    report = evaluate_sequence(preds, gts, sequence=pred_dir.parent.name or str(pred_dir))
    print(report.format_table())
    out = Path(args.out) if args.out else pred_dir / "report.csv"
    report.write_csv(out)
    print(f"wrote {out}")


def _add_config_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--opt", action="append", metavar="KEY=VALUE",
                     help="override a single config key (repeatable)")
    sub.add_argument("--seed", type=int, default=None, help="random seed override")
    sub.add_argument("--threads", type=int, default=_default_threads(),
                     help="worker threads for per-frame stages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowseg",
        description="Unsupervised foreground-background video segmentation",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="generate a synthetic moving-square dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--width", type=int, default=64)
    synth.add_argument("--height", type=int, default=64)
    synth.add_argument("--frames", type=int, default=20)
    synth.add_argument("--square-size", type=int, default=16)
    synth.add_argument("--velocity", type=float, nargs=2, default=[2.0, 0.0],
                       metavar=("VX", "VY"))
    synth.add_argument("--noise-level", type=float, default=0.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    saliency = subs.add_parser("saliency", help="motion saliency maps and initial node vector")
    saliency.add_argument("root", help="dataset directory")
    saliency.add_argument("--out", required=True)
    _add_config_options(saliency)
    saliency.add_argument("--dump-components", action="store_true",
                          help="also write the two distance maps per frame")
    saliency.set_defaults(func=cmd_saliency)

    segment = subs.add_parser("segment", help="run the full segmentation pipeline")
    segment.add_argument("root", help="dataset directory")
    segment.add_argument("--out", required=True)
    _add_config_options(segment)
    segment.add_argument("--disable-temporal", action="store_true",
                         help="drop the inter-frame flow factor")
    segment.add_argument("--disable-spatial", action="store_true",
                         help="drop the intra-frame edge-aware factor")
    segment.add_argument("--disable-longrange", action="store_true",
                         help="drop the visual-similarity factor")
    segment.add_argument("--no-focused", action="store_true",
                         help="skip the focused second diffusion pass")
    segment.add_argument("--semi-supervised", action="store_true",
                         help="initialize the first frame from its annotation")
    segment.add_argument("--dump-saliency", action="store_true",
                         help="write saliency maps and their two components")
    segment.add_argument("--dump-labels", action="store_true",
                         help="write superpixel label maps (16-bit PNG)")
    segment.add_argument("--dump-graph", action="store_true",
                         help="write each graph factor as row/col/weight triplets")
    segment.add_argument("--dump-iterations", action="store_true",
                         help="write a saliency snapshot per diffusion iteration")
    segment.set_defaults(func=cmd_segment)

    evaluate = subs.add_parser("evaluate", help="score masks against annotations")
    evaluate.add_argument("pred_dir")
    evaluate.add_argument("gt_dir")
    evaluate.add_argument("--out", help="CSV report path (default: PRED_DIR/report.csv)")
    evaluate.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
