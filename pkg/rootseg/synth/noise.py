"""Synthetic soil noise: multi-octave Perlin, uniform and Gaussian fields."""

import logging

import numpy as np

from rootseg.models.domain import Dims, NoiseKind, NoiseSpec
from rootseg.synth.snr import SynthError
from rootseg.volume.core import Volume3D

logger = logging.getLogger(__name__)

MIN_OCTAVE_CELL = 2.0


class UnknownNoiseKindError(SynthError):
    """Raised for a noise kind without a generator."""
    pass


def fade(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3."""
    return t * t * t * (t * (t * 6 - 15) + 10)


def _random_gradients(rng: np.random.Generator, shape) -> np.ndarray:
    g = rng.standard_normal(size=tuple(shape) + (3,))
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / np.where(norm == 0, 1.0, norm)


def perlin_octave(dims: Dims, cell_size: float, rng: np.random.Generator) -> np.ndarray:
    """One octave of 3D gradient noise sampled at voxel indices / cell_size.

    Returns a (z, y, x) float64 array that is exactly 0 at lattice points.
    """
    coords = [np.arange(n, dtype=np.float64) / cell_size for n in (dims.z, dims.y, dims.x)]
    cells = [np.floor(c).astype(np.int64) for c in coords]
    fracs = [c - i for c, i in zip(coords, cells)]
    grads = _random_gradients(rng, [int(i[-1]) + 2 for i in cells])

    iz, iy, ix = cells[0][:, None, None], cells[1][None, :, None], cells[2][None, None, :]
    fz, fy, fx = fracs[0][:, None, None], fracs[1][None, :, None], fracs[2][None, None, :]
    wz, wy, wx = fade(fz), fade(fy), fade(fx)

    out = np.zeros(dims.shape, dtype=np.float64)
    for dz in (0, 1):
        for dy in (0, 1):
            for dx in (0, 1):
                g = grads[iz + dz, iy + dy, ix + dx]
                dot = g[..., 0] * (fx - dx) + g[..., 1] * (fy - dy) + g[..., 2] * (fz - dz)
                weight = (
                    (wz if dz else 1 - wz)
                    * (wy if dy else 1 - wy)
                    * (wx if dx else 1 - wx)
                )
                out += weight * dot
    return out


def octave_cell_size(cell_size: float, k: int) -> float:
    """Cell size of octave k, never below MIN_OCTAVE_CELL voxels.

    A cell of one voxel or less puts every voxel on a lattice point, where
    gradient noise is exactly zero.
    """
    return max(cell_size / 2**k, MIN_OCTAVE_CELL)


def perlin_noise(spec: NoiseSpec, dims: Dims) -> np.ndarray:
    """Sum of octaves; octave k uses octave_cell_size(cell_size, k) and amplitude octaves[k]."""
    out = np.zeros(dims.shape, dtype=np.float64)
    for k, weight in enumerate(spec.octaves):
        if weight == 0:
            continue
        rng = np.random.default_rng([spec.seed, k])
        out += weight * perlin_octave(dims, octave_cell_size(spec.cell_size, k), rng)
    return spec.amplitude * out


def gen_noise(spec: NoiseSpec, dims: Dims) -> Volume3D:
    """Generate a noise field; deterministic for fixed (spec, dims).

    Perlin fields are smooth gradient noise summed over octaves, uniform
    noise lies in [0, amplitude], Gaussian noise has mean 0 and standard
    deviation amplitude.

    Raises:
        UnknownNoiseKindError: If spec.kind has no generator
    """
    kind = spec.kind
    if kind == NoiseKind.PERLIN:
        values = perlin_noise(spec, dims)
    elif kind == NoiseKind.UNIFORM:
        values = np.random.default_rng(spec.seed).uniform(0.0, spec.amplitude, size=dims.shape)
    elif kind == NoiseKind.GAUSSIAN:
        values = np.random.default_rng(spec.seed).normal(0.0, spec.amplitude, size=dims.shape)
    else:
        raise UnknownNoiseKindError(f"Unknown noise kind: {spec.kind!r}")

    logger.debug(
        f"Generated {NoiseKind(kind).value} noise {dims} "
        f"(amplitude {spec.amplitude}, seed {spec.seed})"
    )
    return Volume3D(values.astype(np.float32))


def sum_noise(specs, dims: Dims) -> Volume3D:
    """Sum the fields of several specs; no specs gives a zero field."""
    total = np.zeros(dims.shape, dtype=np.float64)
    for spec in specs:
        total += gen_noise(spec, dims).voxels
    return Volume3D(total.astype(np.float32))
