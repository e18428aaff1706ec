"""Subcommand implementations.

Each ``cmd_*`` takes parsed arguments and returns an exit code. Errors are
raised and mapped to exit codes by ``rootseg.cli.main``.
"""

import json
import logging
import os
from argparse import Namespace
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List

from rootseg.config.pipeline import (
    PipelineConfig,
    apply_overrides,
    canonical_json,
    config_hash,
    load_config,
)
from rootseg.config.settings import settings
from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)

LOCK_NAME = ".rootseg.lock"
EFFECTIVE_CONFIG_NAME = "effective_config.json"
CHECKPOINT_NAME = "checkpoint.rsck"
HISTORY_NAME = "history.csv"


class OutputLockedError(ValidationError):
    """Raised when another process owns the output directory."""
    pass


@contextmanager
def output_lock(out_dir: Path) -> Iterator[Path]:
    """Hold an exclusive lock file in out_dir for the duration of a command."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as e:
        raise OutputLockedError(
            f"{out_dir} is in use by another run (remove {lock} if that run is gone)"
        ) from e
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def resolve_config(args: Namespace) -> PipelineConfig:
    """Config file, then ``--set`` overrides, then dedicated flags."""
    config = load_config(args.config)
    overrides: List[str] = list(args.overrides or [])
    if getattr(args, "seed", None) is not None:
        overrides += [f"dataset.seed={args.seed}", f"train.seed={args.seed}"]
    if getattr(args, "n_train", None) is not None:
        overrides.append(f"dataset.n_train={args.n_train}")
    if getattr(args, "n_val", None) is not None:
        overrides.append(f"dataset.n_val={args.n_val}")
    if getattr(args, "epochs", None) is not None:
        overrides.append(f"train.epochs={args.epochs}")
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def output_dir(args: Namespace, default_name: str) -> Path:
    return Path(args.out) if args.out else settings.output_root / default_name


def echo_config(config: PipelineConfig, out_dir: Path) -> Path:
    """Write the effective merged config into the output directory."""
    path = out_dir / EFFECTIVE_CONFIG_NAME
    path.write_text(
        json.dumps(json.loads(canonical_json(config)), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info(f"Effective config {config_hash(config)[:12]} written to {path}")
    return path


def _model_paths(config: PipelineConfig, args: Namespace) -> List[Path]:
    names = list(args.models) if args.models else list(config.dataset.models)
    if not names:
        raise ValidationError("No root models given (use --models or dataset.models)")
    base = Path(args.config).parent if args.config else Path(".")
    paths = []
    for name in names:
        path = Path(name)
        if not path.is_absolute() and not path.exists():
            path = base / name
        if not path.exists():
            raise FileNotFoundError(f"Root model file not found: {name}")
        paths.append(path)
    return paths


def cmd_generate(args: Namespace) -> int:
    from rootseg.roots.model import load_root_model
    from rootseg.synth.dataset import generate_dataset, manifest_hash, write_models_index

    config = resolve_config(args)
    paths = _model_paths(config, args)
    models = [load_root_model(p) for p in paths]
    out_dir = output_dir(args, "dataset")

    with output_lock(out_dir):
        manifest = generate_dataset(models, config, out_dir, workers=args.workers)
        write_models_index(paths, out_dir)
        digest = manifest_hash(out_dir)

    logger.info(f"Dataset with {len(manifest.entries)} pairs in {out_dir}")
    print(f"manifest_sha256 {digest}")
    return 0


def cmd_train(args: Namespace) -> int:
    from rootseg.synth.dataset import load_manifest
    from rootseg.training.checkpoint import checkpoint_save
    from rootseg.training.trainer import train, write_history_csv

    config = resolve_config(args)
    manifest = load_manifest(args.dataset)
    out_dir = output_dir(args, "train")
    t = config.train

    logger.info("=" * 60)
    logger.info(f"Training run: epochs={t.epochs} lr={t.lr:g} clip={t.clip:g}")
    logger.info(
        f"batch_size={t.batch_size} optimizer={t.optimizer} seed={t.seed} "
        f"widths={list(config.net.encoder_widths)}"
    )
    logger.info("=" * 60)

    with output_lock(out_dir):
        echo_config(config, out_dir)
        net, history = train(manifest, args.dataset, config.net, config.train)
        checkpoint_save(net, out_dir / CHECKPOINT_NAME)
        write_history_csv(history, out_dir / HISTORY_NAME)
    return 0


def cmd_predict(args: Namespace) -> int:
    from rootseg.net.inference import segment_volume
    from rootseg.training.checkpoint import checkpoint_load
    from rootseg.volume.core import threshold
    from rootseg.volume.io import load_volume, save_mask, save_volume

    expected = resolve_config(args).net if args.config else None
    net = checkpoint_load(args.checkpoint, expected)
    volume = load_volume(args.input)
    out_dir = output_dir(args, "predict")
    stem = Path(args.input).stem

    with output_lock(out_dir):
        confidence = segment_volume(volume, net)
        save_volume(confidence, out_dir / f"{stem}.conf.vol3")
        save_mask(threshold(confidence, args.threshold), out_dir / f"{stem}.mask.msk3")

    logger.info(f"Predicted {volume.dims} -> {confidence.dims} into {out_dir}")
    return 0


def _load_prediction(path: str, t: float):
    from rootseg.volume.core import threshold
    from rootseg.volume.io import load_mask, load_volume

    if path.endswith(".vol3"):
        return threshold(load_volume(path), t)
    return load_mask(path)


def cmd_evaluate(args: Namespace) -> int:
    from rootseg.metrics.export import write_curve, write_report
    from rootseg.metrics.tolerant import dt_curve, dt_prf
    from rootseg.volume.io import load_mask
    from rootseg.volume.render import render_curve

    config = resolve_config(args)
    ev = config.eval
    t = args.threshold if args.threshold is not None else ev.threshold
    element = args.element or ev.structuring_element
    out_dir = output_dir(args, "evaluate")

    if args.dataset:
        return _evaluate_dataset(args, config, t, out_dir)

    if not (args.prediction and args.ground_truth):
        raise ValidationError("evaluate needs --prediction and --ground-truth, or --dataset")
    ground_truth = load_mask(args.ground_truth)
    prediction = _load_prediction(args.prediction, t)
    tolerance = args.tolerance if args.tolerance is not None else ev.tolerance
    curve_max = args.curve if args.curve is not None else ev.curve_max

    with output_lock(out_dir):
        echo_config(config, out_dir)
        report = dt_prf(ground_truth, prediction, tolerance, element)
        write_report(report, out_dir / "report")
        if curve_max is not None:
            curve = dt_curve(ground_truth, prediction, curve_max, element)
            write_curve(curve, out_dir / "curve.csv")
            render_curve(curve, out_dir / "curve.png")

    logger.info(
        f"d={report.tolerance}: precision {report.precision:.4f}, recall {report.recall:.4f}, "
        f"F1 {report.f1:.4f}"
    )
    return 0


def _evaluate_dataset(args: Namespace, config: PipelineConfig, t: float, out_dir: Path) -> int:
    from rootseg.metrics.export import write_binned
    from rootseg.synth.dataset import load_manifest
    from rootseg.training.checkpoint import checkpoint_load
    from rootseg.training.validate import validate

    if not args.checkpoint:
        raise ValidationError("evaluate --dataset needs --checkpoint")
    manifest = load_manifest(args.dataset)
    net = checkpoint_load(args.checkpoint, config.net if args.config else None)
    with output_lock(out_dir):
        echo_config(config, out_dir)
        report = validate(net, manifest, args.dataset, t)
        write_binned(report, out_dir / "snr_report")
    return 0


def cmd_render(args: Namespace) -> int:
    from rootseg.volume.io import load_mask, load_volume
    from rootseg.volume.render import render_overlay, render_slice

    default = f"{Path(args.volume).stem}_{args.axis}{args.index}.png"
    out = Path(args.out) if args.out else settings.output_root / "render" / default
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.ground_truth:
        prediction = _load_prediction(args.volume, args.threshold or 0.5)
        ground_truth = load_mask(args.ground_truth)
        render_overlay(
            ground_truth, prediction, args.axis, args.index, out, args.tolerance or 0,
            args.element or "ball",
        )
    else:
        if args.volume.endswith(".msk3"):
            from rootseg.volume.core import mask_to_volume
            volume = mask_to_volume(load_mask(args.volume))
        else:
            volume = load_volume(args.volume)
        render_slice(volume, args.axis, args.index, out)

    logger.info(f"Rendered {args.axis}={args.index} of {args.volume} to {out}")
    return 0


def cmd_gradcheck(args: Namespace) -> int:
    from rootseg.training.gradcheck import run_grad_check

    result = run_grad_check(seed=args.seed or 0)
    print(f"max_relative_error {result.max_relative_error:.3e} over {result.n_checked} entries")
    if not result.all_finite or result.max_relative_error > args.max_error:
        logger.error(f"Gradient check failed (limit {args.max_error:g})")
        return 1
    return 0

