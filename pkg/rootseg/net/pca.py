"""Principal-component compression of a 5-layer window into three channels.

Every pixel of the window contributes one 5-vector. The top three principal
components become the colour channels: component 1 drives green, component 2
red and component 3 blue, following their share of image luminance.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rootseg.volume.core import WINDOW_LAYERS, LayerWindow, Volume3D, window_sources

logger = logging.getLogger(__name__)

N_COMPONENTS = 3
# Eigenvalues at or below this fraction of the largest are treated as zero.
RANK_TOLERANCE = 1e-9

# Component index feeding each colour channel.
GREEN, RED, BLUE = 0, 1, 2


@dataclass(frozen=True)
class PcaBasis:
    """Mean, sorted eigenvalues and sign-fixed components of a fit."""

    mean: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = float(self.eigenvalues.sum())
        if total <= 0:
            return np.zeros(N_COMPONENTS)
        return self.eigenvalues[:N_COMPONENTS] / total


@dataclass(frozen=True)
class RgbEncoding:
    """Three-channel image ordered (red, green, blue), each in [0, 1].

    ``scores`` keeps the raw projections (pixels x components, in component
    order) so the window can be reconstructed from the encoding.
    """

    channels: np.ndarray
    scores: np.ndarray
    basis: PcaBasis

    def __post_init__(self):
        if self.channels.ndim != 3 or self.channels.shape[0] != 3:
            raise ValueError(f"RGB encoding needs shape (3, y, x), got {self.channels.shape}")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError("RGB encoding contains non-finite values")

    def reconstruct(self) -> np.ndarray:
        """Approximate (5, y, x) window from the three kept components."""
        _, h, w = self.channels.shape
        flat = self.basis.mean + self.scores @ self.basis.components
        return flat.T.reshape(WINDOW_LAYERS, h, w)


def fit_pca(samples: np.ndarray) -> PcaBasis:
    """Fit principal components to (n_pixels, 5) samples in float64.

    Components are sorted by decreasing eigenvalue; each is signed so its
    largest-magnitude loading is positive. Components whose eigenvalue is
    negligible are zeroed.
    """
    samples = np.asarray(samples, dtype=np.float64)
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / max(len(samples), 1)

    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    vectors = vectors[:, order].T

    for k in range(len(vectors)):
        lead = int(np.argmax(np.abs(vectors[k])))
        if vectors[k, lead] < 0:
            vectors[k] = -vectors[k]

    top = eigenvalues[0] if len(eigenvalues) else 0.0
    if top > 0:
        negligible = eigenvalues <= RANK_TOLERANCE * top
    else:
        negligible = np.ones_like(eigenvalues, dtype=bool)
    vectors[negligible] = 0.0

    return PcaBasis(mean=mean, eigenvalues=eigenvalues, components=vectors[:N_COMPONENTS].copy())


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def window_samples(window: LayerWindow) -> np.ndarray:
    return window.layers.reshape(WINDOW_LAYERS, -1).T.astype(np.float64)


def pca_compress(window: LayerWindow, basis: Optional[PcaBasis] = None) -> RgbEncoding:
    """Compress a 5-layer window into an RGB encoding.

    Args:
        window: The layer window
        basis: Fit to use; fitted on this window when omitted

    Returns:
        Encoding whose channels are min-max normalized per channel
    """
    samples = window_samples(window)
    if basis is None:
        basis = fit_pca(samples)
    scores = (samples - basis.mean) @ basis.components.T

    h, w = window.height, window.width
    by_component = [_minmax(scores[:, k]).reshape(h, w) for k in range(N_COMPONENTS)]
    channels = np.stack([by_component[RED], by_component[GREEN], by_component[BLUE]])
    return RgbEncoding(channels=channels.astype(np.float32), scores=scores, basis=basis)


def fit_volume_pca(v: Volume3D) -> PcaBasis:
    """One basis for every window of a volume.

    Pooled over the pixel vectors of all (edge-clamped) windows.
    """
    depth = v.dims.z
    samples = [
        v.voxels[list(window_sources(z, depth))].reshape(WINDOW_LAYERS, -1).T
        for z in range(depth)
    ]
    return fit_pca(np.concatenate(samples, axis=0))
