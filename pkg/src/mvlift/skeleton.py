"""Joint taxonomy, pose containers, coordinate normalization, and pinhole projection.

Conventions used throughout the package:

* 3D poses are ``(14, 3)`` float arrays in millimeters, lab frame, row order
  fixed by :class:`JointId`.
* Normalized poses are the same shape, mapped per-axis to ``[0, 1]`` by a
  fitted :class:`NormParams`.
* 2D poses are pixel coordinates ``(x, y)`` in the image frame, x to the
  right, y down, with a per-joint visibility flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, GeometryError


class JointId(IntEnum):
    """The 14 tracked joints. Integer values are frozen: tensors, files and
    heatmap stacks all use this order."""

    HEAD = 0
    NECK = 1
    L_SHOULDER = 2
    R_SHOULDER = 3
    L_ELBOW = 4
    R_ELBOW = 5
    L_WRIST = 6
    R_WRIST = 7
    L_HIP = 8
    R_HIP = 9
    L_KNEE = 10
    R_KNEE = 11
    L_ANKLE = 12
    R_ANKLE = 13


NUM_JOINTS = len(JointId)

#: Kinematic-tree parent of each joint; the neck is the root. The tree is a
#: head chain plus four limb chains hanging off the neck.
PARENT: dict[JointId, Optional[JointId]] = {
    JointId.HEAD: JointId.NECK,
    JointId.NECK: None,
    JointId.L_SHOULDER: JointId.NECK,
    JointId.R_SHOULDER: JointId.NECK,
    JointId.L_ELBOW: JointId.L_SHOULDER,
    JointId.R_ELBOW: JointId.R_SHOULDER,
    JointId.L_WRIST: JointId.L_ELBOW,
    JointId.R_WRIST: JointId.R_ELBOW,
    JointId.L_HIP: JointId.NECK,
    JointId.R_HIP: JointId.NECK,
    JointId.L_KNEE: JointId.L_HIP,
    JointId.R_KNEE: JointId.R_HIP,
    JointId.L_ANKLE: JointId.L_KNEE,
    JointId.R_ANKLE: JointId.R_KNEE,
}

#: (child, parent) pairs — the 13 rigid bones.
BONES: tuple[tuple[JointId, JointId], ...] = tuple(
    (child, parent) for child, parent in PARENT.items() if parent is not None
)


def as_pose3d(coords) -> np.ndarray:
    """Validate and return a (J, 3) float64 pose in millimeters."""
    p = np.asarray(coords, dtype=np.float64)
    if p.shape != (NUM_JOINTS, 3):
        raise DataError(f"pose must have shape ({NUM_JOINTS}, 3), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DataError("pose contains non-finite values")
    return p


@dataclass
class Pose2D:
    """Pixel coordinates of all joints in one view plus visibility flags.

    Occluded or out-of-frame joints keep their coordinates; only the flag
    changes.
    """

    coords: np.ndarray  # (J, 2) float64, (x, y) pixels
    visible: np.ndarray  # (J,) bool

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.visible = np.asarray(self.visible, dtype=bool)
        if self.coords.shape != (NUM_JOINTS, 2):
            raise DataError(f"2D pose must be ({NUM_JOINTS}, 2), got {self.coords.shape}")
        if self.visible.shape != (NUM_JOINTS,):
            raise DataError("visibility must be one flag per joint")
        if not np.all(np.isfinite(self.coords)):
            raise DataError("2D pose contains non-finite values")


@dataclass(frozen=True)
class NormParams:
    """Per-axis min/max (mm) defining the affine map onto the unit cube."""

    min_xyz: np.ndarray
    max_xyz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_xyz", np.asarray(self.min_xyz, dtype=np.float64))
        object.__setattr__(self, "max_xyz", np.asarray(self.max_xyz, dtype=np.float64))
        if self.min_xyz.shape != (3,) or self.max_xyz.shape != (3,):
            raise DataError("norm params must hold 3 values per bound")
        if not (np.all(np.isfinite(self.min_xyz)) and np.all(np.isfinite(self.max_xyz))):
            raise DataError("norm params must be finite")
        for k, axis in enumerate("xyz"):
            if not self.max_xyz[k] > self.min_xyz[k]:
                raise DataError(f"degenerate normalization range on axis {axis}: "
                                f"max ({self.max_xyz[k]}) must exceed min ({self.min_xyz[k]})")

    @property
    def span(self) -> np.ndarray:
        return self.max_xyz - self.min_xyz

    def to_dict(self) -> dict:
        return {"min_xyz": self.min_xyz.tolist(), "max_xyz": self.max_xyz.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormParams":
        return cls(np.array(d["min_xyz"]), np.array(d["max_xyz"]))


def fit_norm_params(poses: Iterable[np.ndarray]) -> NormParams:
    """Fit per-axis min/max over all joints of all provided poses.

    Raises :class:`DataError` on an empty sequence or when an axis is
    degenerate (max == min), naming the axis.
    """
    stack = [as_pose3d(p) for p in poses]
    if not stack:
        raise DataError("cannot fit normalization to an empty pose sequence")
    allp = np.concatenate(stack, axis=0)
    lo = allp.min(axis=0)
    hi = allp.max(axis=0)
    for k, axis in enumerate("xyz"):
        if hi[k] == lo[k]:
            raise DataError(f"degenerate normalization range on axis {axis}: "
                            f"all values equal {lo[k]}")
    return NormParams(lo, hi)


def normalize_pose(p: np.ndarray, params: NormParams) -> np.ndarray:
    """Map a millimeter pose onto the unit cube: (p - min) / (max - min).

    Values outside [0, 1] are produced (not clipped) for poses outside the
    fitted range; use :func:`in_unit_range` to flag them.
    """
    p = as_pose3d(p)
    return (p - params.min_xyz) / params.span


def denormalize_pose(q, params: NormParams) -> np.ndarray:
    """Exact affine inverse of :func:`normalize_pose`."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 3:
        raise DataError(f"normalized pose must have 3 columns, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DataError("normalized pose contains non-finite values")
    return q * params.span + params.min_xyz


def in_unit_range(q, tol: float = 0.0) -> bool:
    """True when every normalized coordinate lies in [0 - tol, 1 + tol]."""
    q = np.asarray(q, dtype=np.float64)
    return bool(np.all(q >= -tol) and np.all(q <= 1.0 + tol))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: world -> camera is ``X_c = R @ (X - t)``, then
    ``pixel = focal * (X_c.x / X_c.z, X_c.y / X_c.z) + principal_point``.

    Camera axes: +z forward (into the scene), +x right, +y down, so pixel y
    grows downward. No lens distortion.
    """

    focal: float
    principal_point: np.ndarray  # (2,) pixels
    rotation: np.ndarray  # (3, 3) orthonormal, det +1
    translation: np.ndarray  # (3,) camera center in world mm
    image_size: tuple[int, int]  # (W, H) pixels
    cam_id: str = "cam"

    def __post_init__(self):
        object.__setattr__(self, "principal_point",
                           np.asarray(self.principal_point, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64))
        object.__setattr__(self, "image_size",
                           (int(self.image_size[0]), int(self.image_size[1])))
        if not self.focal > 0:
            raise DataError(f"focal length must be positive, got {self.focal}")
        R = self.rotation
        if R.shape != (3, 3):
            raise DataError("rotation must be 3x3")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise DataError("rotation matrix is not orthonormal")
        if np.linalg.det(R) < 0:
            raise DataError("rotation matrix must have determinant +1")

    def to_dict(self) -> dict:
        return {
            "cam_id": self.cam_id,
            "focal": float(self.focal),
            "principal_point": self.principal_point.tolist(),
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "image_size": list(self.image_size),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            focal=d["focal"],
            principal_point=np.array(d["principal_point"]),
            rotation=np.array(d["rotation"]),
            translation=np.array(d["translation"]),
            image_size=tuple(d["image_size"]),
            cam_id=d.get("cam_id", "cam"),
        )


def camera_looking_at(position, target, focal: float, image_size: tuple[int, int],
                      cam_id: str = "cam") -> CameraModel:
    """Build a camera at ``position`` (world mm) aimed at ``target``.

    World +z is up. The camera is rolled so that image-down aligns with
    world-down as closely as the viewing direction allows.
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    n = np.linalg.norm(fwd)
    if n < 1e-9:
        raise DataError("camera position and target coincide")
    fwd = fwd / n
    up = np.array([0.0, 0.0, 1.0])
    x_cam = np.cross(fwd, up)
    nx = np.linalg.norm(x_cam)
    if nx < 1e-9:
        raise DataError("camera viewing direction is vertical; roll undefined")
    x_cam /= nx
    y_cam = np.cross(fwd, x_cam)  # points downward in world
    R = np.stack([x_cam, y_cam, fwd], axis=0)
    w, h = image_size
    pp = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    return CameraModel(focal=focal, principal_point=pp, rotation=R,
                       translation=position, image_size=(w, h), cam_id=cam_id)


def project_to_view(p: np.ndarray, cam: CameraModel) -> Pose2D:
    """Project a 3D pose through a pinhole camera.

    Every joint must be strictly in front of the camera; otherwise a
    :class:`GeometryError` names the first offending joint. Joints whose
    projection falls outside ``[0, W) x [0, H)`` are marked not visible.
    """
    p = as_pose3d(p)
    cam_pts = (p - cam.translation) @ cam.rotation.T
    depth = cam_pts[:, 2]
    behind = depth <= 0
    if np.any(behind):
        j = JointId(int(np.argmax(behind)))
        raise GeometryError(f"joint {j.name} has non-positive camera depth "
                            f"({depth[j]:.3f} mm)")
    pix = cam.focal * cam_pts[:, :2] / depth[:, None] + cam.principal_point
    w, h = cam.image_size
    visible = ((pix[:, 0] >= 0) & (pix[:, 0] < w)
               & (pix[:, 1] >= 0) & (pix[:, 1] < h))
    return Pose2D(coords=pix, visible=visible)


def bone_lengths(p: np.ndarray) -> np.ndarray:
    """Lengths (mm) of the 13 bones of a pose, ordered as :data:`BONES`."""
    p = as_pose3d(p)
    out = np.empty(len(BONES))
    for i, (child, parent) in enumerate(BONES):
        out[i] = np.linalg.norm(p[child] - p[parent])
    return out
