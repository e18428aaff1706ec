"""CSV and JSON writers for metric reports."""

import json
import logging
from pathlib import Path
from typing import Sequence, Union

import pandas as pd

from rootseg.models.domain import MetricReport, SnrBinnedReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CURVE_COLUMNS = ["tolerance", "precision", "recall", "f1"]


def report_frame(reports: Sequence[MetricReport]) -> pd.DataFrame:
    """One row per report with metrics and raw counts."""
    return pd.DataFrame([r.to_row() for r in reports])


def curve_frame(curve: Sequence[MetricReport]) -> pd.DataFrame:
    """Plot-ready table with tolerance against precision, recall and F1."""
    return report_frame(curve)[CURVE_COLUMNS]


def binned_frame(report: SnrBinnedReport) -> pd.DataFrame:
    """One row per occupied SNR bin followed by an ``overall`` row."""
    rows = []
    for b in report.bins:
        row = {"bin": b.label, "n_samples": b.n_samples, "macro_f1": b.macro_f1}
        row.update(b.report.to_row())
        rows.append(row)
    overall = {"bin": "overall", "n_samples": report.n_samples, "macro_f1": report.mean_sample_f1}
    overall.update(report.overall.to_row())
    rows.append(overall)
    return pd.DataFrame(rows)


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(payload: Union[dict, list], path: PathLike) -> Path:
    """Write JSON with sorted keys so reruns produce identical bytes."""
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def write_report(report: MetricReport, stem: PathLike) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` for a single report."""
    stem = Path(stem)
    json_path = write_json(report.model_dump(mode="json"), stem.with_suffix(".json"))
    csv_path = write_csv(report_frame([report]), stem.with_suffix(".csv"))
    return json_path, csv_path


def write_curve(curve: Sequence[MetricReport], path: PathLike) -> Path:
    return write_csv(curve_frame(curve), path)


def write_binned(report: SnrBinnedReport, stem: PathLike) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` for an SNR-binned report."""
    stem = Path(stem)
    json_path = write_json(report.model_dump(mode="json"), stem.with_suffix(".json"))
    csv_path = write_csv(binned_frame(report), stem.with_suffix(".csv"))
    return json_path, csv_path
