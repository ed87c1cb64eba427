"""IoU scoring, degenerate-output detection, and report emission."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeMismatchError
from .grid import Mask, as_array
from .pgm import write_pgm

DEFAULT_THRESHOLD = 0.5
DEGENERATE_STD = 0.05
DEGENERATE_MEAN_TOL = 0.10

SUMMARY_CSV_HEADER = "mode,coverage,final_iou,degenerate,mean_pred,std_pred,epochs,seed"


def binarize(pred, threshold: float = DEFAULT_THRESHOLD) -> Mask:
    """1 where pred >= threshold (inclusive)."""
    return Mask((as_array(pred) >= threshold).astype(np.float64))


def iou(pred: Mask, gt: Mask) -> float:
    """Intersection over union; empty vs empty is 1.0 by convention."""
    a = as_array(pred)
    b = as_array(gt)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = float((a * b).sum())
    union = float(a.sum() + b.sum()) - inter
    if union == 0.0:
        return 1.0
    return inter / union


@dataclass(frozen=True)
class DegeneracyReport:
    flagged: bool
    mean: float
    std: float


def detect_degenerate(pred, target_ratio: float) -> DegeneracyReport:
    """Flag near-constant predictions whose mean sits near the target ratio."""
    p = as_array(pred)
    mean = float(p.mean())
    std = float(p.std())
    flagged = std < DEGENERATE_STD and abs(mean - target_ratio) < DEGENERATE_MEAN_TOL
    return DegeneracyReport(flagged=flagged, mean=mean, std=std)


@dataclass(frozen=True)
class EvalReport:
    ious: tuple
    mean_iou: float
    degenerate: bool            # majority of samples flagged
    degenerate_fraction: float
    pred_mean: float            # pooled over all predictions
    pred_std: float
    threshold: float


def evaluate_predictions(preds, samples, threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Score soft predictions against their samples' ground truth."""
    if len(preds) != len(samples):
        raise ValueError("one prediction per sample required")
    ious = tuple(iou(binarize(p, threshold), s.gt) for p, s in zip(preds, samples))
    flags = [detect_degenerate(p, s.stat).flagged for p, s in zip(preds, samples)]
    pooled = np.concatenate([as_array(p).ravel() for p in preds])
    frac = sum(flags) / len(flags) if flags else 0.0
    return EvalReport(ious=ious,
                      mean_iou=float(np.mean(ious)) if ious else 0.0,
                      degenerate=frac > 0.5,
                      degenerate_fraction=frac,
                      pred_mean=float(pooled.mean()),
                      pred_std=float(pooled.std()),
                      threshold=threshold)


def _epoch_csv_lines(record) -> list:
    lines = ["epoch,l_c,l_r,l_s,l_ws,l_full,total,mean_iou"]
    for i, (rep, miou) in enumerate(zip(record.epoch_losses, record.epoch_ious)):
        lines.append(f"{i},{rep.l_c:.8f},{rep.l_r:.8f},{rep.l_s:.8f},"
                     f"{rep.l_ws:.8f},{rep.l_full:.8f},{rep.total:.8f},{miou:.6f}")
    return lines


def summary_csv_row(record) -> str:
    return (f"{record.mode},{record.coverage:.4f},{record.final_iou:.6f},"
            f"{str(record.degenerate).lower()},{record.pred_mean:.6f},"
            f"{record.pred_std:.6f},{record.epochs},{record.seed}")


def emit_report(records, out_dir) -> list:
    """Write summary.csv, per-run epochs.csv + summary.json, and PGM overlays.

    Returns the list of paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    summary = out_dir / "summary.csv"
    lines = [SUMMARY_CSV_HEADER] + [summary_csv_row(r) for r in records]
    summary.write_text("\n".join(lines) + "\n")
    written.append(summary)

    for record in records:
        run_dir = out_dir / record.name
        run_dir.mkdir(parents=True, exist_ok=True)
        epochs_csv = run_dir / "epochs.csv"
        epochs_csv.write_text("\n".join(_epoch_csv_lines(record)) + "\n")
        written.append(epochs_csv)

        summary_json = run_dir / "summary.json"
        summary_json.write_text(json.dumps(record.summary_dict(), indent=2) + "\n")
        written.append(summary_json)

        for k, (img, gt, weak, predmask) in enumerate(record.overlays):
            for kind, grid in (("input", img), ("gt", gt),
                               ("weak", weak), ("pred", predmask)):
                path = run_dir / f"sample{k}.{kind}.pgm"
                write_pgm(path, np.rint(as_array(grid) * 255.0).astype(np.uint8))
                written.append(path)
    return written
