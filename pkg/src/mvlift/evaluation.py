"""3D error evaluation: mean per-joint position error in millimeters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .integrator import IntegratorModel
from .perceptron import PerceptronModel
from .skeleton import NormParams, denormalize_pose
from .training import SplitArrays, fuse_split, _slice_fused


def mpjpe_mm(pred_mm: np.ndarray, gt_mm: np.ndarray) -> float:
    """Mean over frames and joints of the per-joint Euclidean distance (mm).

    Accepts (J, 3) or (M, J, 3) arrays.
    """
    pred_mm = np.asarray(pred_mm, dtype=np.float64)
    gt_mm = np.asarray(gt_mm, dtype=np.float64)
    if pred_mm.shape != gt_mm.shape:
        raise DataError(f"shape mismatch: {pred_mm.shape} vs {gt_mm.shape}")
    if pred_mm.shape[-1] != 3:
        raise DataError(f"expected (..., J, 3), got {pred_mm.shape}")
    d = np.sqrt(np.sum((pred_mm - gt_mm) ** 2, axis=-1))
    return float(np.mean(d))


def per_frame_errors_mm(pred_mm: np.ndarray, gt_mm: np.ndarray) -> np.ndarray:
    """Per-frame mean-over-joints error, shape (M,)."""
    d = np.sqrt(np.sum((np.asarray(pred_mm) - np.asarray(gt_mm)) ** 2, axis=-1))
    return d.mean(axis=-1)


@dataclass
class SubjectMetrics:
    subject_id: int
    n_frames: int
    mean_mm: float
    variance_mm2: float
    std_mm: float

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "n_frames": self.n_frames,
            "mean_mm": self.mean_mm,
            "variance_mm2": self.variance_mm2,
            "std_mm": self.std_mm,
        }


@dataclass
class MetricsReport:
    """Per-subject and overall 3D error summary for one experiment arm.

    ``overall_std_frames_mm`` is the standard deviation of per-frame errors;
    ``overall_std_subjects_mm`` the deviation across per-subject means. Both
    are reported because summary "mean +/- spread" figures are ambiguous
    between the two.
    """

    experiment: str
    subjects: list[SubjectMetrics]
    overall_mean_mm: float
    overall_variance_mm2: float
    overall_std_frames_mm: float
    overall_std_subjects_mm: float
    per_joint_mm: list[float]
    n_frames: int
    metadata: dict = field(default_factory=dict)

    def subject(self, subject_id: int) -> SubjectMetrics:
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise DataError(f"no subject {subject_id} in report {self.experiment!r}")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "subjects": [s.to_dict() for s in self.subjects],
            "overall_mean_mm": self.overall_mean_mm,
            "overall_variance_mm2": self.overall_variance_mm2,
            "overall_std_frames_mm": self.overall_std_frames_mm,
            "overall_std_subjects_mm": self.overall_std_subjects_mm,
            "per_joint_mm": self.per_joint_mm,
            "n_frames": self.n_frames,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        subs = [SubjectMetrics(**{k: v for k, v in s.items()})
                for s in d["subjects"]]
        return cls(experiment=d["experiment"], subjects=subs,
                   overall_mean_mm=d["overall_mean_mm"],
                   overall_variance_mm2=d["overall_variance_mm2"],
                   overall_std_frames_mm=d["overall_std_frames_mm"],
                   overall_std_subjects_mm=d["overall_std_subjects_mm"],
                   per_joint_mm=d["per_joint_mm"], n_frames=d["n_frames"],
                   metadata=d.get("metadata", {}))


def build_report(experiment: str, errors_mm: np.ndarray,
                 per_joint_errors: np.ndarray, subject_ids: np.ndarray,
                 metadata: dict | None = None) -> MetricsReport:
    """Assemble a report from per-frame errors grouped by subject."""
    errors_mm = np.asarray(errors_mm, dtype=np.float64)
    subject_ids = np.asarray(subject_ids)
    subjects = []
    for sid in np.unique(subject_ids):
        sel = errors_mm[subject_ids == sid]
        subjects.append(SubjectMetrics(
            subject_id=int(sid),
            n_frames=int(sel.size),
            mean_mm=float(sel.mean()),
            variance_mm2=float(sel.var()),
            std_mm=float(sel.std()),
        ))
    subject_means = np.array([s.mean_mm for s in subjects])
    return MetricsReport(
        experiment=experiment,
        subjects=subjects,
        overall_mean_mm=float(errors_mm.mean()),
        overall_variance_mm2=float(errors_mm.var()),
        overall_std_frames_mm=float(errors_mm.std()),
        overall_std_subjects_mm=float(subject_means.std()),
        per_joint_mm=[float(v) for v in per_joint_errors],
        n_frames=int(errors_mm.size),
        metadata=metadata or {},
    )


def evaluate_mpjpe(perceptron: PerceptronModel, integrator: IntegratorModel,
                   split: SplitArrays, norm_params: NormParams,
                   experiment: str = "eval", metadata: dict | None = None,
                   batch_size: int = 64) -> MetricsReport:
    """Run the full pipeline over a split and summarize 3D error in mm."""
    if split.pose3d_mm is None or split.pose3d_mm.size == 0:
        raise DataError("split has no 3D ground truth")
    fused = fuse_split(perceptron, split, integrator.config.variant)
    preds = []
    n = split.num_items
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        preds.append(integrator.forward(_slice_fused(fused, idx)))
    pred_norm = np.concatenate(preds, axis=0)
    pred_mm = denormalize_pose(pred_norm, norm_params)
    dists = np.sqrt(np.sum((pred_mm - split.pose3d_mm) ** 2, axis=-1))  # (M, J)
    return build_report(experiment, dists.mean(axis=1), dists.mean(axis=0),
                        split.subject_ids, metadata)
