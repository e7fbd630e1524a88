"""Segmentation quality metrics: region similarity J and contour accuracy F.

Per-frame scores are aggregated into mean, recall (fraction of frames above
0.5), and decay (mean of the first temporal quartile minus the last), the
standard benchmark protocol for video object segmentation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy import ndimage


def region_jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union; 1.0 when both masks are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a 4-neighbor background pixel; pixels on the
    image border count as boundary (outside is background)."""
    mask = np.asarray(mask, dtype=bool)
    interior = np.zeros_like(mask)
    if mask.shape[0] > 2 and mask.shape[1] > 2:
        interior[1:-1, 1:-1] = (
            mask[1:-1, 1:-1] & mask[:-2, 1:-1] & mask[2:, 1:-1]
            & mask[1:-1, :-2] & mask[1:-1, 2:]
        )
    return mask & ~interior


def default_tolerance(shape: tuple[int, int]) -> int:
    """Matching radius: 0.8% of the image diagonal, rounded up."""
    return ceil(0.008 * float(np.hypot(*shape)))


def contour_accuracy(pred: np.ndarray, gt: np.ndarray,
                     tolerance_radius: float | None = None) -> float:
    """Harmonic mean of boundary matching precision and recall.

    Boundary points match when within tolerance_radius (Euclidean) of the
    other mask's boundary. 1.0 when both boundaries are empty, 0.0 when
    exactly one is.
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    if tolerance_radius is None:
        tolerance_radius = default_tolerance(pred.shape)
    pred_b = mask_boundary(pred)
    gt_b = mask_boundary(gt)
    if not pred_b.any() and not gt_b.any():
        return 1.0
    if not pred_b.any() or not gt_b.any():
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~gt_b)
    dist_to_pred = ndimage.distance_transform_edt(~pred_b)
    precision = np.count_nonzero(dist_to_gt[pred_b] <= tolerance_radius) / np.count_nonzero(pred_b)
    recall = np.count_nonzero(dist_to_pred[gt_b] <= tolerance_radius) / np.count_nonzero(gt_b)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _quartile_decay(scores: np.ndarray) -> float:
    """Mean of the first temporal quartile minus the last; quartile boundaries
    at ceil(F * i / 4). Sequences shorter than 4 frames compare first vs last."""
    f = len(scores)
    if f < 4:
        return float(scores[0] - scores[-1])
    ids = [ceil(f * i / 4) for i in range(5)]
    first = scores[ids[0]:ids[1]]
    last = scores[ids[3]:ids[4]]
    return float(first.mean() - last.mean())


@dataclass
class EvalReport:
    """Per-frame scores plus the mean/recall/decay summary for J and F."""

    sequence: str
    j_per_frame: np.ndarray
    f_per_frame: np.ndarray

    @property
    def j_mean(self) -> float:
        return float(self.j_per_frame.mean())

    @property
    def j_recall(self) -> float:
        return float((self.j_per_frame > 0.5).mean())

    @property
    def j_decay(self) -> float:
        return _quartile_decay(self.j_per_frame)

    @property
    def f_mean(self) -> float:
        return float(self.f_per_frame.mean())

    @property
    def f_recall(self) -> float:
        return float((self.f_per_frame > 0.5).mean())

    @property
    def f_decay(self) -> float:
        return _quartile_decay(self.f_per_frame)

    def format_table(self) -> str:
        lines = [
            f"sequence: {self.sequence} ({len(self.j_per_frame)} frames)",
            f"{'':10s} {'mean':>8s} {'recall':>8s} {'decay':>8s}",
            f"{'J':10s} {self.j_mean:8.4f} {self.j_recall:8.4f} {self.j_decay:8.4f}",
            f"{'F':10s} {self.f_mean:8.4f} {self.f_recall:8.4f} {self.f_decay:8.4f}",
        ]
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        """Per-frame rows followed by summary rows (mean, recall, decay)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "jaccard", "contour"])
            for i, (j, f) in enumerate(zip(self.j_per_frame, self.f_per_frame)):
                writer.writerow([i, f"{j:.6f}", f"{f:.6f}"])
            writer.writerow(["mean", f"{self.j_mean:.6f}", f"{self.f_mean:.6f}"])
            writer.writerow(["recall", f"{self.j_recall:.6f}", f"{self.f_recall:.6f}"])
            writer.writerow(["decay", f"{self.j_decay:.6f}", f"{self.f_decay:.6f}"])


def evaluate_sequence(preds: list[np.ndarray], gts: list[np.ndarray],
                      sequence: str = "", tolerance_radius: float | None = None
                      ) -> EvalReport:
    """Score a predicted mask sequence against ground truth."""
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions vs {len(gts)} ground-truth masks")
    if not preds:
        raise ValueError("empty mask sequence")
    j = np.array([region_jaccard(p, g) for p, g in zip(preds, gts)])
    f = np.array([contour_accuracy(p, g, tolerance_radius) for p, g in zip(preds, gts)])
    return EvalReport(sequence, j, f)
