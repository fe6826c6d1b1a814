"""Keyframed lifting-motion generator.

World frame: millimeters, +z up, origin on the floor between the feet, the
subject initially facing +x. A lift moves the load (the wrist midpoint) from
its start height to its end height while rotating it about the body's
vertical axis by the task's end angle. Feet never move.

The motion is built per frame from smooth scalar schedules (load height,
azimuth, squat depth, torso lean) and exact two-link inverse kinematics for
elbows and knees, so bone lengths are rigid by construction and every joint
path is C1 in time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConfigError, GeometryError
from ..skeleton import NUM_JOINTS, JointId
from .subjects import SubjectProfile


class VerticalRange(str, Enum):
    """Vertical extent of the lift: floor/knuckle/shoulder combinations."""

    FK = "FK"  # floor -> knuckle
    KS = "KS"  # knuckle -> shoulder
    FS = "FS"  # floor -> shoulder


#: Load heights as fractions of subject stature.
FLOOR_FRAC = 0.05
KNUCKLE_FRAC = 0.45
SHOULDER_FRAC = 0.82

_RANGE_HEIGHTS = {
    VerticalRange.FK: (FLOOR_FRAC, KNUCKLE_FRAC),
    VerticalRange.KS: (KNUCKLE_FRAC, SHOULDER_FRAC),
    VerticalRange.FS: (FLOOR_FRAC, SHOULDER_FRAC),
}

END_ANGLES_DEG = (0.0, 30.0, 60.0)


@dataclass(frozen=True)
class LiftTask:
    vertical_range: VerticalRange
    end_angle_deg: float
    repetition: int
    subject_id: int
    duration_frames: int = 200
    fps: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "vertical_range", VerticalRange(self.vertical_range))
        if float(self.end_angle_deg) not in END_ANGLES_DEG:
            raise ConfigError(f"end angle must be one of {END_ANGLES_DEG}, "
                              f"got {self.end_angle_deg}")
        if self.repetition not in (1, 2):
            raise ConfigError(f"repetition must be 1 or 2, got {self.repetition}")
        if self.duration_frames < 2:
            raise ConfigError("duration_frames must be at least 2")
        if self.fps <= 0:
            raise ConfigError("fps must be positive")

    @property
    def sequence_name(self) -> str:
        return (f"s{self.subject_id:02d}_{self.vertical_range.value}"
                f"_{int(self.end_angle_deg):02d}_r{self.repetition}")


def full_task_grid() -> list[tuple[VerticalRange, float, int]]:
    """The 18 (vertical range, end angle, repetition) combinations."""
    return [(vr, ang, rep)
            for vr in VerticalRange
            for ang in END_ANGLES_DEG
            for rep in (1, 2)]


def _smoothstep(u: np.ndarray) -> np.ndarray:
    """Clamped cubic smoothstep: C1, zero slope at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _keyframe_track(u: np.ndarray, key_u: np.ndarray, key_v: np.ndarray) -> np.ndarray:
    """Piecewise smoothstep interpolation through (key_u, key_v)."""
    out = np.empty_like(u)
    for i in range(len(key_u) - 1):
        lo, hi = key_u[i], key_u[i + 1]
        sel = (u >= lo) & (u <= hi) if i == len(key_u) - 2 else (u >= lo) & (u < hi)
        t = _smoothstep((u[sel] - lo) / (hi - lo))
        out[sel] = key_v[i] + (key_v[i + 1] - key_v[i]) * t
    out[u < key_u[0]] = key_v[0]
    out[u > key_u[-1]] = key_v[-1]
    return out


def _two_link_ik(root: np.ndarray, target: np.ndarray, l1: float, l2: float,
                 bend_hint: np.ndarray, label: str) -> np.ndarray:
    """Middle joint of a rigid two-segment chain from root to target.

    The chain bends toward ``bend_hint`` (projected perpendicular to the
    root-target axis). Distances outside the reachable annulus raise
    :class:`GeometryError`; callers keep a margin so this never fires for
    valid tasks.
    """
    d = target - root
    dist = float(np.linalg.norm(d))
    if dist >= 0.9995 * (l1 + l2):
        raise GeometryError(f"{label}: target {dist:.1f} mm away exceeds reach "
                            f"{l1 + l2:.1f} mm")
    if dist <= 1.0005 * abs(l1 - l2) or dist <= 1e-9:
        raise GeometryError(f"{label}: target {dist:.1f} mm away is inside the "
                            f"fold limit {abs(l1 - l2):.1f} mm")
    along = d / dist
    perp = bend_hint - np.dot(bend_hint, along) * along
    n = float(np.linalg.norm(perp))
    if n < 1e-9:
        raise GeometryError(f"{label}: bend direction is parallel to the chain")
    perp /= n
    cos_a = (l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist)
    sin_a = float(np.sqrt(max(0.0, 1.0 - cos_a * cos_a)))
    return root + l1 * (cos_a * along + sin_a * perp)


@dataclass(frozen=True)
class _MotionParams:
    """Per-sequence randomized constants (bounded jitter around defaults)."""

    u_mid: float
    h_mid_extra_frac: float
    reach_frac: float
    grip_half_frac: float
    lean_max_rad: float
    lean_min_rad: float
    shoulder_yaw_gain: float
    squat_lo_frac: float
    squat_hi_frac: float
    back_shift_frac: float


def _draw_params(rng: np.random.Generator) -> _MotionParams:
    return _MotionParams(
        u_mid=0.45 + rng.uniform(-0.05, 0.05),
        h_mid_extra_frac=0.06 + rng.uniform(-0.02, 0.02),
        reach_frac=0.20 * (1.0 + rng.uniform(-0.03, 0.03)),
        grip_half_frac=0.09 * (1.0 + rng.uniform(-0.05, 0.05)),
        lean_max_rad=np.deg2rad(72.0 + rng.uniform(-2.0, 2.0)),
        lean_min_rad=np.deg2rad(6.0),
        shoulder_yaw_gain=0.5 + rng.uniform(-0.05, 0.05),
        squat_lo_frac=0.24 + rng.uniform(-0.008, 0.008),
        squat_hi_frac=0.51,
        back_shift_frac=0.055,
    )


def _pose_at(subject: SubjectProfile, params: _MotionParams,
             h_mm: float, phi_rad: float) -> np.ndarray:
    """Whole-body pose for one frame given load height and azimuth."""
    s = subject.stature_mm
    hw = subject.hip_half_frac * s
    ankle_z = subject.ankle_height_mm
    thigh = subject.thigh_frac * s
    shank = subject.shank_frac * s
    upper = subject.upper_arm_frac * s
    fore = subject.forearm_frac * s

    # Posture follows the load height: low loads mean deep squat, strong lean.
    hn = (h_mm / s - FLOOR_FRAC) / (SHOULDER_FRAC - FLOOR_FRAC)
    sigma = float(_smoothstep(np.array(hn)))
    pelvis_z = s * (params.squat_lo_frac
                    + (params.squat_hi_frac - params.squat_lo_frac) * sigma)
    lean = params.lean_max_rad * (1.0 - sigma) + params.lean_min_rad * sigma
    pelvis_x = -params.back_shift_frac * s * (1.0 - sigma)
    pelvis = np.array([pelvis_x, 0.0, pelvis_z])

    torso_dir = np.array([np.sin(lean), 0.0, np.cos(lean)])
    neck = pelvis + subject.torso_frac * s * torso_dir
    head = neck + subject.head_frac * s * torso_dir

    yaw = params.shoulder_yaw_gain * phi_rad
    shoulder_axis = np.array([-np.sin(yaw), np.cos(yaw), 0.0])
    sw = subject.shoulder_half_frac * s
    l_shoulder = neck + sw * shoulder_axis
    r_shoulder = neck - sw * shoulder_axis

    l_hip = pelvis + np.array([0.0, hw, 0.0])
    r_hip = pelvis - np.array([0.0, hw, 0.0])
    l_ankle = np.array([0.0, hw, ankle_z])
    r_ankle = np.array([0.0, -hw, ankle_z])

    forward = np.array([1.0, 0.0, 0.0])
    l_knee = _two_link_ik(l_hip, l_ankle, thigh, shank, forward, "left leg")
    r_knee = _two_link_ik(r_hip, r_ankle, thigh, shank, forward, "right leg")

    # Load position: exact azimuth about the pelvis axis at the load height.
    radial = np.array([np.cos(phi_rad), np.sin(phi_rad), 0.0])
    tangent = np.array([-np.sin(phi_rad), np.cos(phi_rad), 0.0])
    load = np.array([pelvis[0], pelvis[1], 0.0]) + params.reach_frac * s * radial
    load[2] = h_mm
    grip = params.grip_half_frac * s
    l_wrist = load + grip * tangent
    r_wrist = load - grip * tangent

    down = np.array([0.0, 0.0, -1.0])
    l_elbow = _two_link_ik(l_shoulder, l_wrist, upper, fore,
                           down + 0.6 * shoulder_axis, "left arm")
    r_elbow = _two_link_ik(r_shoulder, r_wrist, upper, fore,
                           down - 0.6 * shoulder_axis, "right arm")

    pose = np.empty((NUM_JOINTS, 3))
    pose[JointId.HEAD] = head
    pose[JointId.NECK] = neck
    pose[JointId.L_SHOULDER] = l_shoulder
    pose[JointId.R_SHOULDER] = r_shoulder
    pose[JointId.L_ELBOW] = l_elbow
    pose[JointId.R_ELBOW] = r_elbow
    pose[JointId.L_WRIST] = l_wrist
    pose[JointId.R_WRIST] = r_wrist
    pose[JointId.L_HIP] = l_hip
    pose[JointId.R_HIP] = r_hip
    pose[JointId.L_KNEE] = l_knee
    pose[JointId.R_KNEE] = r_knee
    pose[JointId.L_ANKLE] = l_ankle
    pose[JointId.R_ANKLE] = r_ankle
    return pose


def generate_lift_trajectory(task: LiftTask, subject: SubjectProfile,
                             seed: int = 0) -> np.ndarray:
    """Generate a (duration_frames, 14, 3) millimeter trajectory.

    Deterministic in (task, subject, seed): the task identity is folded into
    the random stream, so repetitions differ while rebuilds reproduce bits.
    """
    if task.subject_id != subject.subject_id:
        raise ConfigError(f"task subject_id {task.subject_id} does not match "
                          f"subject {subject.subject_id}")
    ss = np.random.SeedSequence([
        int(seed), int(subject.subject_id),
        list(VerticalRange).index(task.vertical_range),
        int(task.end_angle_deg), int(task.repetition),
    ])
    rng = np.random.default_rng(np.random.PCG64(ss))
    params = _draw_params(rng)

    s = subject.stature_mm
    h0_frac, h1_frac = _RANGE_HEIGHTS[task.vertical_range]
    h0, h1 = h0_frac * s, h1_frac * s
    h_mid = max(h0, h1) + params.h_mid_extra_frac * s
    phi_end = float(np.deg2rad(task.end_angle_deg))

    key_u = np.array([0.0, params.u_mid, 1.0])
    key_h = np.array([h0, h_mid, h1])
    key_phi = np.array([0.0, 0.5 * phi_end, phi_end])

    t = task.duration_frames
    u = np.arange(t) / (t - 1)
    heights = _keyframe_track(u, key_u, key_h)
    azimuths = _keyframe_track(u, key_u, key_phi)

    frames = np.empty((t, NUM_JOINTS, 3))
    for i in range(t):
        frames[i] = _pose_at(subject, params, float(heights[i]), float(azimuths[i]))
    return frames


def wrist_azimuth_deg(pose: np.ndarray) -> float:
    """Azimuth (degrees) of the wrist midpoint about the hip midpoint."""
    wrist_mid = 0.5 * (pose[JointId.L_WRIST] + pose[JointId.R_WRIST])
    hip_mid = 0.5 * (pose[JointId.L_HIP] + pose[JointId.R_HIP])
    d = wrist_mid - hip_mid
    return float(np.rad2deg(np.arctan2(d[1], d[0])))
