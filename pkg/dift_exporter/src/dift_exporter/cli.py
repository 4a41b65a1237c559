"""Command line for batch feature export."""

from __future__ import annotations

import argparse
import sys

from .errors import ExporterError
from .exporter import ExportConfig, export_features


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dift-export",
        description="Export latent-denoiser features to FMAP files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export features for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", default="builtin:small")
    p.add_argument("--timestep", type=int, default=261)
    p.add_argument("--ensemble", type=int, default=4)
    p.add_argument("--prompt", default="cuneiform sign")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExportConfig(
        checkpoint=args.checkpoint,
        timestep=args.timestep,
        ensemble_size=args.ensemble,
        prompt=args.prompt,
        rng_seed=args.seed,
        device=args.device,
    )
    try:
        features = export_features(args.image, cfg, out_path=args.out)
    except (ExporterError, OSError, ValueError) as exc:
        print(f"export: {exc}", file=sys.stderr)
        return 1
    print(
        f"export: wrote {args.out} "
        f"(C={features.shape[0]}, grid={features.shape[1]}x{features.shape[2]})"
    )
    return 0


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
