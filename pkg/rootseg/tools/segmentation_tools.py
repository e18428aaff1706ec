"""Segmentation tools for the MCP server.

This module contains the tool definitions exposed over MCP:
- Evaluating a predicted mask against ground truth
- Rendering slices and overlays
- Segmenting a volume with a trained checkpoint
- Inspecting a generated dataset
"""

import logging
from pathlib import Path
from typing import Optional

from fastmcp import FastMCP

from rootseg.config.settings import settings
from rootseg.services.validators import ValidationError

logger = logging.getLogger(__name__)


def _failure(tool: str, e: Exception) -> dict:
    if isinstance(e, (ValidationError, FileNotFoundError)):
        logger.warning(f"Validation error in {tool}: {e}")
        return {"success": False, "error": "validation_error", "message": str(e)}
    logger.error(f"Error in {tool}: {e}", exc_info=True)
    return {"success": False, "error": "internal_error", "message": str(e)}


def _load_prediction(path: str, threshold: float):
    from rootseg.volume.core import threshold as apply_threshold
    from rootseg.volume.io import load_mask, load_volume

    if path.endswith(".vol3"):
        return apply_threshold(load_volume(path), threshold)
    return load_mask(path)


def register_tools(mcp: FastMCP):
    """Register all segmentation tools with the MCP server.

    Args:
        mcp: FastMCP server instance
    """

    @mcp.tool()
    async def evaluate_segmentation(
        prediction_path: str,
        ground_truth_path: str,
        tolerance: int = 0,
        curve_max: Optional[int] = None,
        threshold: float = 0.5,
        element: str = "ball",
    ) -> dict:
        """Compare a predicted root mask with the ground truth.

        Args:
            prediction_path: Predicted mask (.msk3) or confidence volume (.vol3)
            ground_truth_path: Ground-truth mask (.msk3)
            tolerance: Distance tolerance d in voxels (0 for standard metrics)
            curve_max: If given, also return metrics for every d in 0..curve_max
            threshold: Threshold applied to a .vol3 prediction
            element: Structuring element, 'ball' or 'cube'

        Returns:
            dict: Contains:
                - success: True if successful
                - report: precision, recall, f1, counts, tolerance
                - curve: list of reports (only when curve_max is given)

        Example:
            evaluate_segmentation("pred.msk3", "gt.msk3", tolerance=1)
        """
        try:
            from rootseg.metrics.tolerant import dt_curve, dt_prf
            from rootseg.volume.io import load_mask

            ground_truth = load_mask(ground_truth_path)
            prediction = _load_prediction(prediction_path, threshold)
            result = {
                "success": True,
                "report": dt_prf(ground_truth, prediction, tolerance, element).model_dump(),
            }
            if curve_max is not None:
                curve = dt_curve(ground_truth, prediction, curve_max, element)
                result["curve"] = [r.to_row() for r in curve]
            return result
        except Exception as e:
            return _failure("evaluate_segmentation", e)

    @mcp.tool()
    async def render_volume_slice(
        volume_path: str,
        axis: str = "z",
        index: int = 0,
        output_path: Optional[str] = None,
        ground_truth_path: Optional[str] = None,
        tolerance: int = 0,
    ) -> dict:
        """Save one slice of a volume as PNG, or a TP/FN/FP overlay.

        With ground_truth_path, volume_path is treated as the prediction and
        the image shows true positives green, false negatives red and false
        positives blue.

        Args:
            volume_path: Volume (.vol3) or mask (.msk3)
            axis: Slice axis, 'x', 'y' or 'z'
            index: Slice index along the axis
            output_path: PNG path; defaults to the output root
            ground_truth_path: Optional ground-truth mask for overlay mode
            tolerance: Distance tolerance used to classify overlay voxels

        Returns:
            dict: success and the written 'path'
        """
        try:
            from rootseg.volume.core import mask_to_volume
            from rootseg.volume.io import load_mask, load_volume
            from rootseg.volume.render import render_overlay, render_slice

            name = f"{Path(volume_path).stem}_{axis}{index}.png"
            out = Path(output_path) if output_path else settings.output_root / "render" / name
            out.parent.mkdir(parents=True, exist_ok=True)
            if ground_truth_path:
                path = render_overlay(
                    load_mask(ground_truth_path),
                    _load_prediction(volume_path, 0.5),
                    axis,
                    index,
                    out,
                    tolerance,
                )
            else:
                if volume_path.endswith(".msk3"):
                    volume = mask_to_volume(load_mask(volume_path))
                else:
                    volume = load_volume(volume_path)
                path = render_slice(volume, axis, index, out)
            return {"success": True, "path": str(path)}
        except Exception as e:
            return _failure("render_volume_slice", e)

    @mcp.tool()
    async def segment_volume_file(
        checkpoint_path: str,
        input_path: str,
        output_dir: Optional[str] = None,
        threshold: float = 0.5,
    ) -> dict:
        """Segment an MRI volume at twice its resolution.

        Args:
            checkpoint_path: Trained checkpoint file
            input_path: Input volume (.vol3); height and width must be multiples of 32
            output_dir: Directory for the outputs; defaults to the output root
            threshold: Confidence threshold for the binary mask

        Returns:
            dict: success, 'confidence_path', 'mask_path' and output 'dims'
        """
        try:
            from rootseg.net.inference import segment_volume
            from rootseg.training.checkpoint import checkpoint_load
            from rootseg.volume.core import threshold as apply_threshold
            from rootseg.volume.io import load_volume, save_mask, save_volume

            net = checkpoint_load(checkpoint_path)
            confidence = segment_volume(load_volume(input_path), net)
            out = Path(output_dir) if output_dir else settings.output_root / "predict"
            out.mkdir(parents=True, exist_ok=True)
            stem = Path(input_path).stem
            conf_path = save_volume(confidence, out / f"{stem}.conf.vol3")
            mask_path = save_mask(apply_threshold(confidence, threshold), out / f"{stem}.mask.msk3")
            return {
                "success": True,
                "confidence_path": str(conf_path),
                "mask_path": str(mask_path),
                "dims": confidence.dims.model_dump(),
            }
        except Exception as e:
            return _failure("segment_volume_file", e)

    @mcp.tool()
    async def describe_dataset(dataset_dir: str) -> dict:
        """Summarize a generated dataset.

        Args:
            dataset_dir: Directory containing manifest.jsonl

        Returns:
            dict: success, 'config_hash', 'manifest_sha256', per-split counts
            and per-split sample counts for every SNR bin label
        """
        try:
            from rootseg.models.domain import Split
            from rootseg.synth.dataset import load_manifest, manifest_hash
            from rootseg.synth.snr import label_for_snr

            manifest = load_manifest(dataset_dir)
            splits = {}
            for split in Split:
                entries = manifest.split(split)
                bins: dict = {}
                for entry in entries:
                    label = label_for_snr(entry.meta.measured_snr)
                    bins[label] = bins.get(label, 0) + 1
                splits[split.value] = {"count": len(entries), "snr_bins": bins}
            return {
                "success": True,
                "config_hash": manifest.config_hash,
                "manifest_sha256": manifest_hash(dataset_dir),
                "splits": splits,
            }
        except Exception as e:
            return _failure("describe_dataset", e)
