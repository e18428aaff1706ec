"""Rasterize root systems into binary masks and partial-volume signals.

Each segment is a capsule whose radius varies linearly between its end
radii. A voxel belongs to the root iff its center lies within r(t) of the
closest point on some segment, t being the clamped projection parameter.
Voxel (i, j, k) has center ``origin + (index + 0.5) * voxel_size``.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from rootseg.config.settings import settings
from rootseg.models.domain import Dims, Vec3
from rootseg.roots.model import RootSystem
from rootseg.services.validators import ValidationError, VolumeValidator
from rootseg.volume.core import BinaryMask3D, Volume3D

logger = logging.getLogger(__name__)

Capsule = Tuple[np.ndarray, np.ndarray, float, float]


def capsules(rs: RootSystem) -> List[Capsule]:
    """(start, end, start radius, end radius) per segment.

    A single-node model yields one degenerate capsule, i.e. a sphere.
    """
    pos, rad = rs.positions(), rs.radii()
    if not rs.segments:
        return [(pos[0], pos[0], rad[0], rad[0])]
    return [(pos[i], pos[j], rad[i], rad[j]) for i, j in rs.segments]


def _index_range(lo: float, hi: float, origin: float, voxel_size: float, n: int) -> range:
    """Voxel indices whose centers can fall in [lo, hi] along one axis."""
    first = max(math.floor((lo - origin) / voxel_size - 0.5), 0)
    last = min(math.ceil((hi - origin) / voxel_size - 0.5), n - 1)
    return range(first, last + 1)


def _fill_capsule(
    out: np.ndarray,
    capsule: Capsule,
    z_range: range,
    voxel_size: float,
    origin: np.ndarray,
) -> None:
    a, b, ra, rb = capsule
    reach = max(ra, rb)
    lo = np.minimum(a, b) - reach
    hi = np.maximum(a, b) + reach
    nz, ny, nx = out.shape[0], out.shape[1], out.shape[2]

    xs = _index_range(lo[0], hi[0], origin[0], voxel_size, nx)
    ys = _index_range(lo[1], hi[1], origin[1], voxel_size, ny)
    zs = _index_range(lo[2], hi[2], origin[2], voxel_size, z_range.stop)
    zs = range(max(zs.start, z_range.start), zs.stop)
    if not (len(xs) and len(ys) and len(zs)):
        return

    cx = origin[0] + (np.arange(xs.start, xs.stop) + 0.5) * voxel_size
    cy = origin[1] + (np.arange(ys.start, ys.stop) + 0.5) * voxel_size
    cz = origin[2] + (np.arange(zs.start, zs.stop) + 0.5) * voxel_size
    px, py, pz = cx[None, None, :], cy[None, :, None], cz[:, None, None]

    ab = b - a
    length2 = float(ab @ ab)
    if length2 > 0:
        t = ((px - a[0]) * ab[0] + (py - a[1]) * ab[1] + (pz - a[2]) * ab[2]) / length2
        t = np.clip(t, 0.0, 1.0)
    else:
        t = np.zeros((1, 1, 1))
    dx = px - (a[0] + t * ab[0])
    dy = py - (a[1] + t * ab[1])
    dz = pz - (a[2] + t * ab[2])
    r = ra + t * (rb - ra)
    inside = dx * dx + dy * dy + dz * dz <= r * r

    local = z_range.start
    out[zs.start - local:zs.stop - local, ys.start:ys.stop, xs.start:xs.stop] |= inside


def _slabs(depth: int, parts: int) -> List[range]:
    bounds = np.linspace(0, depth, min(parts, depth) + 1).astype(int)
    return [range(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def voxelize_mask(
    rs: RootSystem,
    dims: Dims,
    voxel_size: float,
    origin: Vec3 = (0.0, 0.0, 0.0),
    workers: Optional[int] = None,
) -> BinaryMask3D:
    """Set every voxel whose center lies inside some capsule of the model.

    Args:
        rs: Root system in millimeters
        dims: Grid dimensions
        voxel_size: Edge length of a voxel in millimeters
        origin: Position of the grid corner in millimeters
        workers: Threads working on disjoint z-slabs; defaults to settings

    Roots outside the grid are clipped.
    """
    voxel_size = VolumeValidator.validate_positive(voxel_size, "voxel_size")
    origin_arr = np.asarray(origin, dtype=np.float64)
    workers = workers or settings.workers
    parts = capsules(rs)

    def run(z_range: range) -> np.ndarray:
        slab = np.zeros((len(z_range), dims.y, dims.x), dtype=bool)
        for capsule in parts:
            _fill_capsule(slab, capsule, z_range, voxel_size, origin_arr)
        return slab

    slabs = _slabs(dims.z, workers)
    if workers > 1 and len(slabs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            pieces = list(executor.map(run, slabs))
    else:
        pieces = [run(z) for z in slabs]

    mask = BinaryMask3D(np.concatenate(pieces, axis=0))
    logger.debug(f"Voxelized {len(parts)} capsules into {dims} grid: {mask.count()} voxels set")
    return mask


def voxelize_signal(
    rs: RootSystem,
    dims: Dims,
    voxel_size: float,
    supersample: int = 4,
    origin: Vec3 = (0.0, 0.0, 0.0),
    workers: Optional[int] = None,
) -> Volume3D:
    """Occupied fraction of each voxel from supersample^3 stratified samples.

    The sub-samples sit at the centers of a regular n x n x n subdivision, so
    the result is the block mean of a mask voxelized n times finer.
    """
    if isinstance(supersample, bool) or int(supersample) != supersample or supersample < 1:
        raise ValidationError(f"supersample must be an integer >= 1, got {supersample!r}")
    n = int(supersample)
    fine = voxelize_mask(rs, dims.scaled(n), voxel_size / n, origin, workers)
    blocks = fine.bits.reshape(dims.z, n, dims.y, n, dims.x, n)
    return Volume3D(blocks.mean(axis=(1, 3, 5), dtype=np.float64).astype(np.float32))
