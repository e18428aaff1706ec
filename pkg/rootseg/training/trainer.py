"""Supervised training loop.

Every z index of every training volume is one sample: its 5-layer window is
the input and ground-truth layers 2i and 2i+1 the target. An epoch is one
shuffled pass over all samples.
"""

import logging
import math
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import pandas as pd
import torch
from torch.utils.data import DataLoader, Dataset

from rootseg.config.pipeline import NetConfig, TrainConfig
from rootseg.config.settings import settings
from rootseg.models.domain import DatasetManifest, EpochRecord, ManifestEntry, Split, TrainHistory
from rootseg.net.inference import prepare_windows
from rootseg.net.refinenet import SegNet, build_network, check_divisible
from rootseg.synth.dataset import load_pair
from rootseg.synth.snr import BELOW_LABEL, BIN_LABELS, ABOVE_LABEL
from rootseg.training.loss import bce_loss, clip_gradients
from rootseg.training.validate import EmptyDatasetError, validate

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
HISTORY_BIN_LABELS = [BELOW_LABEL, *BIN_LABELS, ABOVE_LABEL]


class TrainingError(Exception):
    """Base exception for training failures."""
    pass


class NonFiniteLossError(TrainingError):
    """Raised when the loss becomes NaN or infinite."""

    def __init__(self, epoch: int, step: int, value: float):
        self.epoch = epoch
        self.step = step
        self.value = value
        super().__init__(f"Non-finite loss {value} at epoch {epoch}, step {step}")


class LayerWindowDataset(Dataset):
    """(raw window, RGB encoding, two target layers) for every z of every volume."""

    def __init__(
        self,
        entries: List[ManifestEntry],
        dataset_dir: PathLike,
        net_config: NetConfig,
        dtype: torch.dtype = torch.float32,
    ):
        raws, rgbs, targets = [], [], []
        for entry in entries:
            pair = load_pair(dataset_dir, entry)
            check_divisible(pair.input.dims.y, pair.input.dims.x)
            raw, rgb = prepare_windows(pair.input, net_config.pca_per_window, dtype)
            gt = torch.from_numpy(pair.ground_truth.bits.astype("float32")).to(dtype)
            raws.append(raw)
            rgbs.append(rgb)
            targets.append(gt.reshape(pair.input.dims.z, 2, *gt.shape[1:]))
        self.raw = torch.cat(raws)
        self.rgb = torch.cat(rgbs)
        self.target = torch.cat(targets)

    def __len__(self) -> int:
        return self.raw.shape[0]

    def __getitem__(self, i):
        return self.raw[i], self.rgb[i], self.target[i]


def configure_torch() -> None:
    """Thread count from settings and deterministic kernels."""
    torch.set_num_threads(settings.torch_threads)
    torch.use_deterministic_algorithms(True, warn_only=True)


def make_optimizer(net: SegNet, config: TrainConfig) -> torch.optim.Optimizer:
    if config.optimizer == "adam":
        return torch.optim.Adam(net.parameters(), lr=config.lr)
    return torch.optim.SGD(net.parameters(), lr=config.lr)


def _mean_loss(net: SegNet, loader: DataLoader, config: TrainConfig) -> float:
    net.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for raw, rgb, target in loader:
            loss = bce_loss(net(raw, rgb), target, from_logits=True, pos_weight=config.pos_weight)
            total += float(loss) * raw.shape[0]
            count += raw.shape[0]
    return total / max(count, 1)


def train(
    manifest: DatasetManifest,
    dataset_dir: PathLike,
    net_config: NetConfig,
    train_config: TrainConfig,
    on_epoch: Optional[Callable[[SegNet, EpochRecord], None]] = None,
) -> Tuple[SegNet, TrainHistory]:
    """Train a network on the manifest's train split.

    Args:
        manifest: Dataset manifest
        dataset_dir: Directory the manifest paths are relative to
        net_config: Network configuration (initial weights from its seed)
        train_config: Optimization recipe
        on_epoch: Called after each epoch with the network and its record

    Returns:
        The trained network and the per-epoch history

    Raises:
        EmptyDatasetError: If the train split is empty
        NonFiniteLossError: If the loss becomes NaN or infinite
    """
    train_entries = manifest.split(Split.TRAIN)
    if not train_entries:
        raise EmptyDatasetError("The train split is empty")
    val_entries = manifest.split(Split.VALIDATION)

    configure_torch()
    net = build_network(net_config)
    optimizer = make_optimizer(net, train_config)
    params = [p for p in net.parameters()]

    train_set = LayerWindowDataset(train_entries, dataset_dir, net_config)
    generator = torch.Generator().manual_seed(train_config.seed)
    loader = DataLoader(
        train_set, batch_size=train_config.batch_size, shuffle=True, generator=generator
    )
    val_loader = None
    if val_entries and train_config.validate_every > 0:
        val_set = LayerWindowDataset(val_entries, dataset_dir, net_config)
        val_loader = DataLoader(val_set, batch_size=train_config.batch_size, shuffle=False)

    logger.info(
        f"Training on {len(train_set)} windows from {len(train_entries)} volumes, "
        f"{len(val_entries)} validation volumes"
    )

    history = TrainHistory()
    for epoch in range(1, train_config.epochs + 1):
        net.train()
        total, count = 0.0, 0
        for step, (raw, rgb, target) in enumerate(loader, start=1):
            optimizer.zero_grad()
            loss = bce_loss(
                net(raw, rgb), target, from_logits=True, pos_weight=train_config.pos_weight
            )
            value = float(loss)
            if not math.isfinite(value):
                raise NonFiniteLossError(epoch, step, value)
            loss.backward()
            clipped = clip_gradients([p.grad for p in params], train_config.clip)
            for p, g in zip(params, clipped):
                p.grad = g
            optimizer.step()
            total += value * raw.shape[0]
            count += raw.shape[0]

        record = EpochRecord(epoch=epoch, train_loss=total / count)
        if val_loader is not None and epoch % train_config.validate_every == 0:
            report = validate(net, manifest, dataset_dir, train_config.threshold)
            record = EpochRecord(
                epoch=epoch,
                train_loss=record.train_loss,
                val_loss=_mean_loss(net, val_loader, train_config),
                val_f1=report.overall.f1,
                bin_f1=report.f1_by_bin(),
            )
        history.append(record)

        message = f"Epoch {epoch}/{train_config.epochs}: train loss {record.train_loss:.6f}"
        if record.val_loss is not None:
            message += f", val loss {record.val_loss:.6f}, val F1 {record.val_f1:.4f}"
        logger.info(message)
        if on_epoch is not None:
            on_epoch(net, record)

    net.eval()
    return net, history


def write_history_csv(history: TrainHistory, path: PathLike) -> Path:
    """One row per epoch: epoch, train_loss, val_loss, val_f1 and per-bin F1."""
    path = Path(path)
    frame = pd.DataFrame(history.to_rows(HISTORY_BIN_LABELS))
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote training history ({len(history)} epochs) to {path}")
    return path
