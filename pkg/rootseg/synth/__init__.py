"""Synthetic soil noise, SNR control and dataset generation."""

from .snr import (
    BIN_LABELS,
    BELOW,
    ABOVE,
    SynthError,
    DegenerateSignalError,
    ZeroNoiseError,
    SnrRangeError,
    ComposedSample,
    snr_bin,
    bin_label,
    measure_snr,
    compose_sample,
    root_mask_from_signal,
)
from .noise import UnknownNoiseKindError, gen_noise
from .dataset import (
    DatasetError,
    OutputDirectoryError,
    SamplePair,
    generate_pair,
    generate_dataset,
    load_manifest,
    load_pair,
    manifest_hash,
)

__all__ = [
    "BIN_LABELS",
    "BELOW",
    "ABOVE",
    "SynthError",
    "DegenerateSignalError",
    "ZeroNoiseError",
    "SnrRangeError",
    "ComposedSample",
    "snr_bin",
    "bin_label",
    "measure_snr",
    "compose_sample",
    "root_mask_from_signal",
    "UnknownNoiseKindError",
    "gen_noise",
    "DatasetError",
    "OutputDirectoryError",
    "SamplePair",
    "generate_pair",
    "generate_dataset",
    "load_manifest",
    "load_pair",
    "manifest_hash",
]
