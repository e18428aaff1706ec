"""Deterministic checkpoint container for network parameters.

Layout::

    magic "RSEGCKPT" | u32 header length | JSON header | raw tensor payload

The header (sorted-key JSON) carries the format version, the network config
and its hash, one record per tensor (name, shape, dtype, offset, nbytes) and
the SHA-256 of the payload. Tensors are stored little-endian in state-dict
order, so equal parameters always give equal bytes.
"""

import hashlib
import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import torch

from rootseg.config.pipeline import NetConfig, config_hash
from rootseg.net.refinenet import SegNet, build_network
from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)

MAGIC = b"RSEGCKPT"
FORMAT_VERSION = 1
LENGTH = struct.Struct("<I")

DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
}
TORCH_DTYPES = {v: k for k, v in DTYPES.items()}

PathLike = Union[str, Path]


class CheckpointError(Exception):
    """Base exception for checkpoint problems."""
    pass


class ConfigHashMismatchError(CheckpointError, ValidationError):
    """Raised when a checkpoint was written for a different network config."""
    pass


class CorruptCheckpointError(CheckpointError):
    """Raised when a checkpoint file cannot be decoded."""
    pass


def checkpoint_bytes(net: SegNet) -> bytes:
    """Serialize the network's parameters and config."""
    records = []
    chunks = []
    offset = 0
    for name, tensor in net.state_dict().items():
        if tensor.dtype not in DTYPES:
            raise CheckpointError(f"Unsupported dtype {tensor.dtype} for tensor {name}")
        data = tensor.detach().cpu().numpy().astype(DTYPES[tensor.dtype], copy=False).tobytes()
        records.append({
            "name": name,
            "shape": list(tensor.shape),
            "dtype": DTYPES[tensor.dtype],
            "offset": offset,
            "nbytes": len(data),
        })
        chunks.append(data)
        offset += len(data)

    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash(net.config),
        "net_config": net.config.model_dump(mode="json"),
        "tensors": records,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + LENGTH.pack(len(header_bytes)) + header_bytes + payload


def checkpoint_save(net: SegNet, path: PathLike) -> Path:
    """Write a checkpoint file."""
    path = Path(path)
    path.write_bytes(checkpoint_bytes(net))
    logger.info(f"Saved checkpoint to {path}")
    return path


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Tuple[dict, "OrderedDict"]:
    """Parse checkpoint bytes into (header, state dict).

    Raises:
        CorruptCheckpointError: If any part of the file is inconsistent
    """
    prefix = len(MAGIC) + LENGTH.size
    if len(data) < prefix or not data.startswith(MAGIC):
        raise CorruptCheckpointError(f"{source}: not a checkpoint file")
    (header_len,) = LENGTH.unpack_from(data, len(MAGIC))
    if len(data) < prefix + header_len:
        raise CorruptCheckpointError(f"{source}: truncated header")
    try:
        header = json.loads(data[prefix:prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{source}: unreadable header: {e}") from e
    if header.get("format_version") != FORMAT_VERSION:
        raise CorruptCheckpointError(
            f"{source}: unsupported format version {header.get('format_version')}"
        )

    payload = data[prefix + header_len:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CorruptCheckpointError(f"{source}: payload checksum mismatch")

    state = OrderedDict()
    try:
        for rec in header["tensors"]:
            chunk = payload[rec["offset"]:rec["offset"] + rec["nbytes"]]
            array = np.frombuffer(chunk, dtype=rec["dtype"]).reshape(rec["shape"])
            state[rec["name"]] = torch.from_numpy(array.copy()).to(TORCH_DTYPES[rec["dtype"]])
    except (KeyError, ValueError, TypeError) as e:
        raise CorruptCheckpointError(f"{source}: bad tensor record: {e}") from e
    return header, state


def checkpoint_load(path: PathLike, net_config: Optional[NetConfig] = None) -> SegNet:
    """Rebuild a network from a checkpoint.

    Args:
        path: Checkpoint file
        net_config: Expected config; when given, its hash must match the file

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigHashMismatchError: If net_config differs from the stored config
        CorruptCheckpointError: If the file is damaged
    """
    path = Path(path)
    header, state = decode_checkpoint(path.read_bytes(), source=str(path))

    if net_config is not None and config_hash(net_config) != header["config_hash"]:
        raise ConfigHashMismatchError(
            f"{path}: checkpoint was trained with config {header['config_hash'][:12]}, "
            f"requested config is {config_hash(net_config)[:12]}"
        )
    try:
        stored = NetConfig.model_validate(header["net_config"])
    except Exception as e:
        raise CorruptCheckpointError(f"{path}: invalid network config: {e}") from e

    dtype = next(iter(state.values())).dtype if state else torch.float32
    net = build_network(stored, dtype=dtype)
    try:
        net.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise CorruptCheckpointError(f"{path}: tensors do not fit the network: {e}") from e
    net.eval()
    logger.info(f"Loaded checkpoint {path} (config {header['config_hash'][:12]})")
    return net
