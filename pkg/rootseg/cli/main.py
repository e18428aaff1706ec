#!/usr/bin/env python3
"""
rootseg command line

Subcommands:
    generate   synthesize a training/validation dataset from root models
    train      train a segmentation network on a generated dataset
    predict    segment a volume at twice its resolution
    evaluate   distance-tolerant metrics, or SNR-binned validation
    render     save a slice (or a GT/prediction overlay) as PNG
    gradcheck  finite-difference check of the backward pass

Exit codes: 0 on success, 2 for invalid input or configuration, 1 for any
other failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from rootseg import __version__
from rootseg.cli import commands
from rootseg.config.settings import settings
from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2


def configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stdout)],
    )


def _common(parser: argparse.ArgumentParser, out_help: str) -> None:
    parser.add_argument("--config", help="TOML pipeline config")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value, e.g. train.lr=1e-3 (repeatable)",
    )
    parser.add_argument("--out", help=out_help)
    parser.add_argument("--seed", type=int, help="Seed for dataset and training")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootseg",
        description="Super-resolution root segmentation for MRI volumes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Generate a synthetic dataset")
    _common(p, "Dataset directory")
    p.add_argument("--n-train", type=int, help="Number of training pairs")
    p.add_argument("--n-val", type=int, help="Number of validation pairs")
    p.add_argument("--models", nargs="+", help="Root model files (.rootm)")
    p.add_argument("--workers", type=int, help="Worker processes")
    p.set_defaults(func=commands.cmd_generate)

    p = sub.add_parser("train", help="Train a network")
    _common(p, "Run directory for checkpoint and history")
    p.add_argument("--dataset", required=True, help="Generated dataset directory")
    p.add_argument("--epochs", type=int, help="Number of epochs")
    p.set_defaults(func=commands.cmd_train)

    p = sub.add_parser("predict", help="Segment a volume")
    _common(p, "Output directory")
    p.add_argument("--checkpoint", required=True, help="Checkpoint file")
    p.add_argument("--input", required=True, help="Input volume (.vol3)")
    p.add_argument("--threshold", type=float, default=0.5, help="Root confidence threshold")
    p.set_defaults(func=commands.cmd_predict)

    p = sub.add_parser("evaluate", help="Compute segmentation metrics")
    _common(p, "Output directory for reports")
    p.add_argument("--prediction", help="Predicted mask (.msk3) or confidence (.vol3)")
    p.add_argument("--ground-truth", help="Ground-truth mask (.msk3)")
    p.add_argument("--tolerance", type=int, help="Distance tolerance d in voxels")
    p.add_argument("--curve", type=int, metavar="D_MAX", help="Also compute d = 0..D_MAX")
    p.add_argument("--threshold", type=float, help="Threshold for .vol3 predictions")
    p.add_argument("--element", choices=["ball", "cube"], help="Structuring element")
    p.add_argument("--dataset", help="Validate a checkpoint on this dataset instead")
    p.add_argument("--checkpoint", help="Checkpoint for --dataset")
    p.set_defaults(func=commands.cmd_evaluate)

    p = sub.add_parser("render", help="Render a slice to PNG")
    p.add_argument("volume", help="Volume (.vol3) or mask (.msk3)")
    p.add_argument("--axis", choices=["x", "y", "z"], default="z")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", help="PNG path")
    p.add_argument("--ground-truth", help="Overlay against this ground-truth mask")
    p.add_argument("--tolerance", type=int, help="Tolerance for the overlay")
    p.add_argument("--threshold", type=float, help="Threshold for .vol3 predictions")
    p.add_argument("--element", choices=["ball", "cube"])
    p.set_defaults(func=commands.cmd_render)

    p = sub.add_parser("gradcheck", help="Check analytic against numeric gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--tolerance",
        dest="max_error",
        type=float,
        default=1e-4,
        help="Largest acceptable relative error",
    )
    p.set_defaults(func=commands.cmd_gradcheck)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID

    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, FileExistsError) as e:
        logger.error(f"❌ {e}")
        return EXIT_INVALID
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"❌ {args.command} failed: {e}", exc_info=True)
        return EXIT_FAILURE


def main() -> None:
    configure_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
