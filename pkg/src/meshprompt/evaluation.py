"""Pose-error metric and accuracy aggregation.

The pose error between two rotations is the geodesic angle of the relative
rotation R_pred^T @ R_gt, computed as arccos(clamp((trace - 1) / 2)). For
rotation matrices this equals the Frobenius norm of the matrix logarithm
divided by sqrt(2), but the trace form avoids a log-matrix routine and the
clamp absorbs round-off at 0 and pi.

Accuracy at a threshold counts errors strictly below it (ties at the
threshold do not count as correct). Prediction files are JSON lines of
either {"id", "rotation": [9 floats]} (pose) or {"id", "label"} (class).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Manifest
from .errors import CoverageError, InvalidRotationError, ManifestParseError

ACC_THRESHOLDS = (math.pi / 6.0, math.pi / 18.0)


@dataclass(frozen=True)
class PoseErrorReport:
    errors: tuple[float, ...]
    acc_at: dict[float, float]
    count: int

    def to_json(self) -> dict:
        thresholds = sorted(self.acc_at)
        return {
            "count": self.count,
            "thresholds": thresholds,
            "accuracies": [self.acc_at[t] for t in thresholds],
        }

    def table(self) -> str:
        lines = [f"items: {self.count}"]
        for t in sorted(self.acc_at, reverse=True):
            lines.append(f"acc @ {t:.6f} rad ({math.degrees(t):5.1f} deg): {self.acc_at[t]:.4f}")
        return "\n".join(lines)


def pose_error(R_pred: np.ndarray, R_gt: np.ndarray) -> float:
    """Geodesic angle in [0, pi] between two rotations."""
    R_pred = _require_rotation_input(R_pred)
    R_gt = _require_rotation_input(R_gt)
    rel = R_pred.T @ R_gt
    cos_theta = (float(np.trace(rel)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, cos_theta)))


def _require_rotation_input(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotationError(f"expected 3x3 rotation, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6 or abs(float(np.linalg.det(R)) - 1.0) > 1e-6:
        raise InvalidRotationError("input is not a rotation matrix (tolerance 1e-6)")
    return R


def reorthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto SO(3) via SVD; rejects anything farther
    than 1e-6 from orthonormal."""
    R = _require_rotation_input(R)
    U, _, Vt = np.linalg.svd(R)
    fixed = U @ Vt
    if np.linalg.det(fixed) < 0:
        U[:, -1] = -U[:, -1]
        fixed = U @ Vt
    return fixed


def accuracy_at(errors, threshold: float) -> float:
    """Fraction of errors strictly below the threshold."""
    errors = list(errors)
    if not errors:
        raise ValueError("accuracy over an empty error list is undefined")
    if not threshold > 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return sum(1 for e in errors if e < threshold) / len(errors)


def pose_report(pairs, thresholds=ACC_THRESHOLDS) -> PoseErrorReport:
    """Errors and accuracies for (R_pred, R_gt) pairs."""
    errors = tuple(pose_error(p, g) for p, g in pairs)
    acc = {float(t): accuracy_at(errors, t) for t in thresholds}
    return PoseErrorReport(errors=errors, acc_at=acc, count=len(errors))


def load_predictions(path):
    """Parse a prediction file into ("rotation"|"label", {id: value}).

    Rotations within 1e-6 of orthonormal are re-orthonormalized; anything
    farther is rejected. Mixed rotation/label files are rejected.
    """
    path = Path(path)
    kind = None
    out: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                item_id = obj["id"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ManifestParseError(f"bad prediction: {exc}", line=lineno) from exc
            if item_id in out:
                raise ManifestParseError(f"duplicate id {item_id!r}", line=lineno)
            if "rotation" in obj:
                row_kind = "rotation"
                try:
                    R = np.asarray(obj["rotation"], dtype=np.float64).reshape(3, 3)
                except ValueError as exc:
                    raise ManifestParseError(f"rotation needs 9 floats: {exc}", line=lineno) from exc
                try:
                    value = reorthonormalize(R)
                except InvalidRotationError as exc:
                    raise ManifestParseError(str(exc), line=lineno) from exc
            elif "label" in obj:
                row_kind = "label"
                value = str(obj["label"])
            else:
                raise ManifestParseError("prediction needs 'rotation' or 'label'", line=lineno)
            if kind is None:
                kind = row_kind
            elif kind != row_kind:
                raise ManifestParseError(
                    f"mixed prediction kinds: file is {kind}, line has {row_kind}", line=lineno
                )
            out[item_id] = value
    if kind is None:
        raise ManifestParseError("prediction file has no entries", line=1)
    return kind, out


def _check_coverage(pred_ids, gt_ids):
    missing = [i for i in gt_ids if i not in pred_ids]
    if missing:
        raise CoverageError(missing)


def evaluate_rotations(preds: dict, gt: Manifest, thresholds=ACC_THRESHOLDS) -> PoseErrorReport:
    """Pose-error report of predictions against manifest ground truth.

    Only ok records participate (failed generations have no image to
    predict on). Every ok record id must be present in the predictions.
    """
    records = gt.ok_records
    _check_coverage(preds, [r.id for r in records])
    return pose_report(((preds[r.id], r.rotation) for r in records), thresholds)


def top1_accuracy(preds: dict, gt: Manifest) -> float:
    """Fraction of ok records whose predicted label matches the class name."""
    records = gt.ok_records
    if not records:
        raise ValueError("manifest has no ok records to evaluate")
    _check_coverage(preds, [r.id for r in records])
    correct = sum(1 for r in records if preds[r.id] == r.class_name)
    return correct / len(records)
