"""Stick-figure rendering of poses into RGB images, plus occluder injection.

Output images are (H, W, 3) float64 in [0, 1]. Rendering is fully
deterministic: identical inputs give bit-identical images. Limbs are drawn
as anti-aliased capsules whose pixel width follows perspective (a fixed
physical width divided by camera depth), with distinct colors per limb group
so views carry left/right texture cues beyond joint positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..skeleton import BONES, CameraModel, JointId, Pose2D, project_to_view

#: Bone color groups: torso/head neutral, limbs color-coded left vs right.
_BONE_COLORS: dict[tuple[JointId, JointId], tuple[float, float, float]] = {}
_TORSO = (0.82, 0.82, 0.78)
_LEFT_ARM = (0.95, 0.35, 0.30)
_RIGHT_ARM = (0.30, 0.50, 0.95)
_LEFT_LEG = (0.95, 0.75, 0.25)
_RIGHT_LEG = (0.35, 0.85, 0.45)
for _child, _parent in BONES:
    name = _child.name
    if name in ("HEAD", "L_HIP", "R_HIP"):
        _BONE_COLORS[(_child, _parent)] = _TORSO
    elif name in ("L_SHOULDER", "L_ELBOW", "L_WRIST"):
        _BONE_COLORS[(_child, _parent)] = _LEFT_ARM
    elif name in ("R_SHOULDER", "R_ELBOW", "R_WRIST"):
        _BONE_COLORS[(_child, _parent)] = _RIGHT_ARM
    elif name in ("L_KNEE", "L_ANKLE"):
        _BONE_COLORS[(_child, _parent)] = _LEFT_LEG
    else:
        _BONE_COLORS[(_child, _parent)] = _RIGHT_LEG


@dataclass(frozen=True)
class RenderStyle:
    background: float = 0.08
    bone_width_mm: float = 45.0
    joint_radius_mm: float = 30.0
    head_radius_scale: float = 0.9  # of the projected head-neck distance
    joint_color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    min_width_px: float = 1.2
    max_width_px: float = 14.0


def _paint_capsule(img: np.ndarray, p0: np.ndarray, p1: np.ndarray,
                   half_width: float, color: tuple[float, float, float]):
    """Max-composite an anti-aliased thick segment onto the image."""
    h, w = img.shape[:2]
    lo = np.floor(np.minimum(p0, p1) - half_width - 1.5).astype(int)
    hi = np.ceil(np.maximum(p0, p1) + half_width + 1.5).astype(int)
    x0, y0 = max(lo[0], 0), max(lo[1], 0)
    x1, y1 = min(hi[0] + 1, w), min(hi[1] + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    pix = np.stack([xs, ys], axis=-1).astype(np.float64)
    seg = p1 - p0
    seg_len2 = float(seg @ seg)
    if seg_len2 < 1e-12:
        dist = np.linalg.norm(pix - p0, axis=-1)
    else:
        t = np.clip(((pix - p0) @ seg) / seg_len2, 0.0, 1.0)
        nearest = p0 + t[..., None] * seg
        dist = np.linalg.norm(pix - nearest, axis=-1)
    cov = np.clip(half_width + 0.5 - dist, 0.0, 1.0)
    region = img[y0:y1, x0:x1]
    np.maximum(region, cov[..., None] * np.asarray(color), out=region)


def render_view(pose3d: np.ndarray, cam: CameraModel,
                style: RenderStyle = RenderStyle()) -> np.ndarray:
    """Render a pose as seen by a camera. All joints must be in front of it."""
    pose2d = project_to_view(pose3d, cam)
    depths = ((np.asarray(pose3d, dtype=np.float64) - cam.translation)
              @ cam.rotation.T)[:, 2]
    w, h = cam.image_size
    img = np.full((h, w, 3), style.background, dtype=np.float64)

    for child, parent in BONES:
        p0 = pose2d.coords[parent]
        p1 = pose2d.coords[child]
        depth = 0.5 * (depths[parent] + depths[child])
        width_px = np.clip(style.bone_width_mm * cam.focal / depth,
                           style.min_width_px, style.max_width_px)
        _paint_capsule(img, p0, p1, 0.5 * width_px, _BONE_COLORS[(child, parent)])

    # Head disk sized from the projected head-neck distance.
    head_px = pose2d.coords[JointId.HEAD]
    neck_px = pose2d.coords[JointId.NECK]
    head_r = style.head_radius_scale * float(np.linalg.norm(head_px - neck_px))
    _paint_capsule(img, head_px, head_px, max(head_r, 1.0), _TORSO)

    for j in range(pose2d.coords.shape[0]):
        radius_px = np.clip(style.joint_radius_mm * cam.focal / depths[j],
                            style.min_width_px, style.max_width_px)
        _paint_capsule(img, pose2d.coords[j], pose2d.coords[j],
                       0.5 * radius_px, style.joint_color)

    np.clip(img, 0.0, 1.0, out=img)
    return img


@dataclass(frozen=True)
class OccluderRegion:
    """Axis-aligned pixel rectangle; zero area means no occlusion."""

    x: int
    y: int
    width: int
    height: int

    @property
    def empty(self) -> bool:
        return self.width <= 0 or self.height <= 0

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xs, ys = xy[..., 0], xy[..., 1]
        return ((xs >= self.x) & (xs < self.x + self.width)
                & (ys >= self.y) & (ys < self.y + self.height))

    def to_list(self) -> list[int]:
        return [int(self.x), int(self.y), int(self.width), int(self.height)]


def apply_occluder(img: np.ndarray, region: OccluderRegion,
                   pose2d: Pose2D) -> tuple[np.ndarray, np.ndarray]:
    """Fill a region with a distractor patch and flag the joints inside it.

    Returns (new image, (J,) occluded flags). The input image is not
    modified. An empty region returns an identical copy with no flags.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected (H, W, 3) image, got shape {img.shape}")
    out = img.copy()
    flags = np.zeros(pose2d.coords.shape[0], dtype=bool)
    if region.empty:
        return out, flags
    h, w = img.shape[:2]
    x0, y0 = max(region.x, 0), max(region.y, 0)
    x1 = min(region.x + region.width, w)
    y1 = min(region.y + region.height, h)
    if x0 < x1 and y0 < y1:
        ys, xs = np.mgrid[y0:y1, x0:x1]
        checker = ((xs // 8 + ys // 8) % 2).astype(np.float64)
        patch = 0.35 + 0.20 * checker
        out[y0:y1, x0:x1] = patch[..., None]
    flags = region.contains(pose2d.coords)
    return out, flags
