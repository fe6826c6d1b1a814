"""Parametric body models standing in for real capture subjects."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DataError
from ..skeleton import BONES, JointId


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject body dimensions.

    Segment lengths are stored as fractions of stature so a single scale
    factor produces plausibly proportioned bodies. Left/right limbs share one
    length by construction.
    """

    subject_id: int
    stature_mm: float
    ankle_height_frac: float = 0.039
    shank_frac: float = 0.246    # knee -> ankle
    thigh_frac: float = 0.245    # hip -> knee
    torso_frac: float = 0.30     # pelvis center -> neck
    head_frac: float = 0.07      # neck -> head
    shoulder_half_frac: float = 0.11
    hip_half_frac: float = 0.075
    upper_arm_frac: float = 0.186
    forearm_frac: float = 0.146

    def __post_init__(self):
        for name in ("stature_mm", "ankle_height_frac", "shank_frac",
                     "thigh_frac", "torso_frac", "head_frac",
                     "shoulder_half_frac", "hip_half_frac",
                     "upper_arm_frac", "forearm_frac"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")

    def _mm(self, frac: float) -> float:
        return frac * self.stature_mm

    @property
    def ankle_height_mm(self) -> float:
        return self._mm(self.ankle_height_frac)

    @property
    def arm_reach_mm(self) -> float:
        return self._mm(self.upper_arm_frac + self.forearm_frac)

    def bone_lengths_mm(self) -> dict[tuple[JointId, JointId], float]:
        """Rigid length of each kinematic-tree bone, keyed (child, parent)."""
        s = self.stature_mm
        neck_hip = s * float(np.hypot(self.torso_frac, self.hip_half_frac))
        per_bone = {
            (JointId.HEAD, JointId.NECK): s * self.head_frac,
            (JointId.L_SHOULDER, JointId.NECK): s * self.shoulder_half_frac,
            (JointId.R_SHOULDER, JointId.NECK): s * self.shoulder_half_frac,
            (JointId.L_ELBOW, JointId.L_SHOULDER): s * self.upper_arm_frac,
            (JointId.R_ELBOW, JointId.R_SHOULDER): s * self.upper_arm_frac,
            (JointId.L_WRIST, JointId.L_ELBOW): s * self.forearm_frac,
            (JointId.R_WRIST, JointId.R_ELBOW): s * self.forearm_frac,
            (JointId.L_HIP, JointId.NECK): neck_hip,
            (JointId.R_HIP, JointId.NECK): neck_hip,
            (JointId.L_KNEE, JointId.L_HIP): s * self.thigh_frac,
            (JointId.R_KNEE, JointId.R_HIP): s * self.thigh_frac,
            (JointId.L_ANKLE, JointId.L_KNEE): s * self.shank_frac,
            (JointId.R_ANKLE, JointId.R_KNEE): s * self.shank_frac,
        }
        assert set(per_bone) == set(BONES)
        return per_bone

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "stature_mm": self.stature_mm,
            "ankle_height_frac": self.ankle_height_frac,
            "shank_frac": self.shank_frac,
            "thigh_frac": self.thigh_frac,
            "torso_frac": self.torso_frac,
            "head_frac": self.head_frac,
            "shoulder_half_frac": self.shoulder_half_frac,
            "hip_half_frac": self.hip_half_frac,
            "upper_arm_frac": self.upper_arm_frac,
            "forearm_frac": self.forearm_frac,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubjectProfile":
        return cls(**d)


def default_subjects(n: int, seed: int = 0) -> list[SubjectProfile]:
    """Deterministic pool of subjects with varied statures and mild
    proportion differences."""
    if n < 1:
        raise DataError("need at least one subject")
    rng = np.random.default_rng(np.random.PCG64(np.random.SeedSequence([seed, 0x5B])))
    subjects = []
    base = SubjectProfile(subject_id=0, stature_mm=1750.0)
    for i in range(n):
        stature = float(rng.uniform(1580.0, 1900.0))
        jitter = lambda v: float(v * (1.0 + rng.uniform(-0.03, 0.03)))  # noqa: E731
        subjects.append(replace(
            base,
            subject_id=i,
            stature_mm=stature,
            shank_frac=jitter(base.shank_frac),
            thigh_frac=jitter(base.thigh_frac),
            torso_frac=jitter(base.torso_frac),
            upper_arm_frac=jitter(base.upper_arm_frac),
            forearm_frac=jitter(base.forearm_frac),
            shoulder_half_frac=jitter(base.shoulder_half_frac),
            hip_half_frac=jitter(base.hip_half_frac),
        ))
    return subjects
