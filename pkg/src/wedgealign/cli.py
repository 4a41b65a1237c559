"""Command-line interface: align, tablet, saliency, synth, eval, features.

Every run writes a reproducibility record (effective config plus library
versions) alongside its outputs; identical flags and seeds produce
byte-identical output trees.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image

from .config import load_config_file, write_run_record
from .errors import WedgeAlignError
from .evaluation import (
    DEFAULT_THRESHOLDS,
    annotation_from_skeleton,
    annotation_to_dict,
    evaluate_corpus,
    load_annotation,
    save_annotation,
)
from .features import extract_builtin_features, load_feature_map, save_feature_map, similarity_volume
from .geometry import load_skeleton, save_skeleton, skeleton_to_dict
from .global_align import RansacConfig
from .pipeline import (
    PipelineConfig,
    _stage,
    align_sign,
    align_tablet,
    load_grayscale,
    load_tablet_spec,
)
from .refine import RefineConfig, loss_trace_to_csv
from .render import PALETTE, render_overlay_png, skeleton_svg_group, svg_document
from .saliency import compute_saliency, saliency_to_image
from .synth import PerturbSpec, demo_skeleton, make_case, render_skeleton


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat TOML file mirroring the flags; flags win")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", choices=("builtin", "file"), default=None)
    p.add_argument("--proto-fmap", default=None)
    p.add_argument("--target-fmap", default=None)
    p.add_argument("--grid", type=int, default=None, help="feature grid side length")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--ransac-iters", type=int, default=None)
    p.add_argument("--inlier-thresh", type=float, default=None)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--no-refit", action="store_true")
    p.add_argument("--lambda-sim", type=float, default=None)
    p.add_argument("--lambda-sal", type=float, default=None)
    p.add_argument("--lambda-reg", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wedgealign",
        description="Align skeleton-annotated prototype glyphs to sign images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="align one prototype to one target image")
    p.add_argument("--proto-img", required=True)
    p.add_argument("--proto-skel", required=True)
    p.add_argument("--target", default=None)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--png", action="store_true")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("tablet", help="align all boxes of a tablet spec")
    p.add_argument("--spec", required=True, help="tablet spec JSON")
    p.add_argument("--png", action="store_true")
    _add_pipeline_flags(p)
    _add_common(p)

    p = sub.add_parser("saliency", help="dump the saliency map for a pair")
    p.add_argument("--proto-img", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--grid", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic benchmark corpus")
    p.add_argument("--proto-skel", default=None, help="defaults to the demo sign")
    p.add_argument("--cases", type=int, default=None)
    p.add_argument("--rot-max", type=float, default=None)
    p.add_argument("--scale-min", type=float, default=None)
    p.add_argument("--scale-max", type=float, default=None)
    p.add_argument("--trans-max", type=float, default=None)
    p.add_argument("--jitter-max", type=float, default=None)
    p.add_argument("--canvas", type=int, default=None)
    p.add_argument("--stroke-width", type=float, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--thresholds", type=float, nargs="+", default=None)
    _add_common(p)

    p = sub.add_parser("features", help="extract built-in features to an FMAP file")
    p.add_argument("--image", required=True)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _effective(args: argparse.Namespace, key: str, default):
    """Flag value if given, else config file value, else the default."""
    value = getattr(args, key, None)
    if value is not None and value is not False:
        return value
    return args.config_values.get(key, default)


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    seed = int(_effective(args, "seed", 0))
    grid = int(_effective(args, "grid", 64))
    ransac = RansacConfig(
        iterations=int(_effective(args, "ransac_iters", 2000)),
        inlier_threshold=float(_effective(args, "inlier_thresh", 50.0)),
        runs=int(_effective(args, "runs", 8)),
        rng_seed=seed,
        refit=not _effective(args, "no_refit", False),
    )
    refine_cfg = RefineConfig(
        lambda_sim=float(_effective(args, "lambda_sim", 1.0)),
        lambda_sal=float(_effective(args, "lambda_sal", 3e-4)),
        lambda_reg=float(_effective(args, "lambda_reg", 1e-4)),
        iterations=int(_effective(args, "iters", 100)),
        learning_rate=float(_effective(args, "lr", 0.01)),
        softmax_temperature=float(_effective(args, "temperature", 100.0)),
        rng_seed=seed,
    )
    return PipelineConfig(
        ransac=ransac,
        refine=refine_cfg,
        grid=(grid, grid),
        feature_mode=str(_effective(args, "features", "builtin")),
        proto_fmap=_effective(args, "proto_fmap", None),
        target_fmap=_effective(args, "target_fmap", None),
        refine_enabled=not _effective(args, "no_refine", False),
        workers=int(_effective(args, "workers", 1)),
    )


def _out_dir(args: argparse.Namespace) -> Path:
    out = _effective(args, "out_dir", "wedgealign-out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_snapshot(args: argparse.Namespace, keys: list[str], defaults: dict) -> dict:
    return {k: _effective(args, k, defaults.get(k)) for k in keys}


_PIPELINE_KEYS = [
    "seed", "grid", "runs", "ransac_iters", "inlier_thresh", "no_refine",
    "no_refit", "lambda_sim", "lambda_sal", "lambda_reg", "temperature",
    "iters", "lr", "features", "proto_fmap", "target_fmap", "workers",
]
_PIPELINE_DEFAULTS = {
    "seed": 0, "grid": 64, "runs": 8, "ransac_iters": 2000,
    "inlier_thresh": 50.0, "no_refine": False, "no_refit": False,
    "lambda_sim": 1.0, "lambda_sal": 3e-4, "lambda_reg": 1e-4,
    "temperature": 100.0, "iters": 100, "lr": 0.01, "features": "builtin",
    "proto_fmap": None, "target_fmap": None, "workers": 1,
}


def _cmd_align(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    out = _out_dir(args)
    target_img = None
    with _stage("load"):
        proto_img = load_grayscale(args.proto_img)
        proto_skel = load_skeleton(args.proto_skel)
        if cfg.feature_mode == "file":
            target = load_feature_map(cfg.target_fmap)
            image_size = target.source_image_size
            if args.target:
                target_img = load_grayscale(args.target)
        else:
            if not args.target:
                print("align: --target is required with builtin features", file=sys.stderr)
                return 2
            target_img = load_grayscale(args.target)
            target = target_img
            image_size = target_img.shape

    result = align_sign(proto_img, proto_skel, target, cfg)

    save_skeleton(result.final_skeleton, out / "final_skeleton.json")
    save_skeleton(result.global_skeleton, out / "global_skeleton.json")
    save_annotation(
        annotation_from_skeleton(result.final_skeleton, image_size),
        out / "predicted.json",
    )
    with open(out / "diagnostics.json", "w", encoding="utf-8") as fh:
        json.dump(result.diagnostics(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.refinement is not None:
        (out / "loss_trace.csv").write_text(loss_trace_to_csv(result.refinement.loss_trace))
    if args.svg:
        group = skeleton_svg_group(result.final_skeleton, PALETTE[0])
        (out / "overlay.svg").write_text(
            svg_document(image_size, [group], background_href=args.target)
        )
    if args.png and target_img is not None:
        render_overlay_png(target_img, [result.final_skeleton]).save(out / "overlay.png")

    config = _config_snapshot(args, _PIPELINE_KEYS, _PIPELINE_DEFAULTS)
    config.update(
        {"proto_img": args.proto_img, "proto_skel": args.proto_skel, "target": args.target}
    )
    write_run_record(out, "align", config)
    print(f"align: wrote results to {out}")
    return 0


def _cmd_tablet(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    out = _out_dir(args)
    with _stage("load"):
        spec = load_tablet_spec(args.spec)
    result = align_tablet(spec, cfg)

    (out / "handcopy.svg").write_text(result.svg)
    report = []
    for r in result.box_results:
        entry = {"box": r.index, "sign": r.sign_name, "ok": r.ok, "error": r.error}
        if r.skeleton is not None:
            save_skeleton(r.skeleton, out / f"box_{r.index:03d}.json")
            entry["skeleton"] = f"box_{r.index:03d}.json"
        report.append(entry)
    with open(out / "boxes_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.png:
        tablet_img = load_grayscale(spec.image_path)
        skeletons = [r.skeleton for r in result.box_results if r.skeleton is not None]
        render_overlay_png(tablet_img, skeletons).save(out / "handcopy.png")

    config = _config_snapshot(args, _PIPELINE_KEYS, _PIPELINE_DEFAULTS)
    config["spec"] = args.spec
    write_run_record(out, "tablet", config)
    failed = [r.index for r in result.box_results if not r.ok]
    if failed:
        print(f"tablet: boxes {failed} failed", file=sys.stderr)
        return 1
    print(f"tablet: wrote hand copy to {out}")
    return 0


def _cmd_saliency(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    grid = int(_effective(args, "grid", 64))
    proto_img = load_grayscale(args.proto_img)
    target_img = load_grayscale(args.target)
    proto_fm = extract_builtin_features(proto_img, (grid, grid))
    target_fm = extract_builtin_features(target_img, (grid, grid))
    sal = compute_saliency(similarity_volume(proto_fm, target_fm), proto_img)
    Image.fromarray(saliency_to_image(sal)).save(out / "saliency.png")
    np.save(out / "saliency.npy", sal.values)
    write_run_record(
        out, "saliency",
        {"proto_img": args.proto_img, "target": args.target, "grid": grid},
    )
    print(f"saliency: wrote map to {out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    seed = int(_effective(args, "seed", 0))
    cases = int(_effective(args, "cases", 10))
    canvas_side = int(_effective(args, "canvas", 512))
    canvas = (canvas_side, canvas_side)
    stroke_width = float(_effective(args, "stroke_width", 12.0))
    noise_sigma = float(_effective(args, "noise_sigma", 8.0))
    spec_kwargs = {
        "rotation_max_deg": float(_effective(args, "rot_max", 10.0)),
        "scale_range": (
            float(_effective(args, "scale_min", 0.9)),
            float(_effective(args, "scale_max", 1.1)),
        ),
        "translation_max": float(_effective(args, "trans_max", 20.0)),
        "per_stroke_jitter_max": float(_effective(args, "jitter_max", 5.0)),
    }
    if args.proto_skel:
        proto = load_skeleton(args.proto_skel)
    else:
        proto = demo_skeleton(canvas=canvas)
    save_skeleton(proto, out / "prototype.json")
    proto_img = render_skeleton(proto, canvas, stroke_width, noise_sigma=0.0)
    Image.fromarray(proto_img).save(out / "prototype.png")

    gt_dir = out / "gt"
    gt_dir.mkdir(exist_ok=True)
    manifest = {"seed": seed, "spec": dict(spec_kwargs, canvas=canvas_side), "cases": []}
    for i in range(cases):
        case_seed = seed + i
        case = make_case(
            proto,
            PerturbSpec(rng_seed=case_seed, **spec_kwargs),
            canvas=canvas,
            stroke_width=stroke_width,
            noise_sigma=noise_sigma,
        )
        image_name = f"case_{i:03d}.png"
        gt_name = f"case_{i:03d}.json"
        Image.fromarray(case.target_image).save(out / image_name)
        save_annotation(annotation_from_skeleton(case.gt_skeleton, canvas), gt_dir / gt_name)
        save_skeleton(case.gt_skeleton, out / f"case_{i:03d}.skel.json")
        manifest["cases"].append(
            {"image_path": image_name, "gt_annotation_path": f"gt/{gt_name}", "seed": case_seed}
        )
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    config = dict(manifest["spec"])
    config.update({"seed": seed, "cases": cases, "proto_skel": args.proto_skel})
    write_run_record(out, "synth", config)
    print(f"synth: wrote {cases} cases to {out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    thresholds = _effective(args, "thresholds", list(DEFAULT_THRESHOLDS))
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    gt = {p.name: load_annotation(p) for p in sorted(gt_dir.glob("*.json"))}
    pred = {p.name: load_annotation(p) for p in sorted(pred_dir.glob("*.json"))}
    report = evaluate_corpus(pred, gt, thresholds)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(report.to_table())
    write_run_record(
        out, "eval",
        {"pred_dir": args.pred_dir, "gt_dir": args.gt_dir,
         "thresholds": [float(t) for t in thresholds]},
    )
    return 0


def _cmd_features(args: argparse.Namespace) -> int:
    grid = int(_effective(args, "grid", 64))
    image = load_grayscale(args.image)
    fmap = extract_builtin_features(image, (grid, grid))
    save_feature_map(fmap, args.out)
    print(f"features: wrote {args.out} (C={fmap.channels}, grid={grid}x{grid})")
    return 0


_COMMANDS = {
    "align": _cmd_align,
    "tablet": _cmd_tablet,
    "saliency": _cmd_saliency,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "features": _cmd_features,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.config_values = {}
    if getattr(args, "config", None):
        args.config_values = load_config_file(args.config)
    try:
        return _COMMANDS[args.command](args)
    except WedgeAlignError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
