"""Whole-volume inference: one window per z index, two output layers each."""

import logging
from typing import Optional

import numpy as np
import torch

from rootseg.net.pca import fit_volume_pca, pca_compress
from rootseg.net.refinenet import SegNet, check_divisible, network_dtype, window_tensors
from rootseg.volume.core import Volume3D, layer_window

logger = logging.getLogger(__name__)

DEFAULT_BATCH = 8


def prepare_windows(
    v: Volume3D, per_window_pca: bool = True, dtype: torch.dtype = torch.float32
):
    """Stack the (raw, rgb) network inputs of every z index of a volume.

    Returns:
        raw of shape (z, 5, y, x) and rgb of shape (z, 3, y, x)
    """
    basis = None if per_window_pca else fit_volume_pca(v)
    raws, rgbs = [], []
    for z in range(v.dims.z):
        window = layer_window(v, z)
        raw, rgb = window_tensors(window, pca_compress(window, basis), dtype)
        raws.append(raw)
        rgbs.append(rgb)
    return torch.stack(raws), torch.stack(rgbs)


def segment_volume(v: Volume3D, net: SegNet, batch_size: Optional[int] = None) -> Volume3D:
    """Confidence volume of dims (2x, 2y, 2z).

    Window i yields output layers 2i and 2i+1; windows are evaluated in
    batches and depend only on their own five input layers.

    Raises:
        ShapeError: If x or y is not divisible by 32
    """
    check_divisible(v.dims.y, v.dims.x)
    batch_size = batch_size or DEFAULT_BATCH
    raw, rgb = prepare_windows(v, net.config.pca_per_window, network_dtype(net))

    was_training = net.training
    net.eval()
    out = np.empty(v.dims.scaled(2).shape, dtype=np.float32)
    try:
        with torch.no_grad():
            for start in range(0, v.dims.z, batch_size):
                stop = min(start + batch_size, v.dims.z)
                conf = torch.sigmoid(net(raw[start:stop], rgb[start:stop]))
                out[2 * start:2 * stop] = conf.to(torch.float32).numpy().reshape(
                    -1, *out.shape[1:]
                )
    finally:
        net.train(was_training)

    logger.debug(f"Segmented {v.dims} volume into {v.dims.scaled(2)}")
    return Volume3D(out)
