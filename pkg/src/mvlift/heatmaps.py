"""Ground-truth heatmap rendering, argmax decoding, and the 2D heatmap loss.

A heatmap is an ``(H, W)`` float array indexed ``[y, x]``; a stack of J maps
is ``(J, H, W)``. Ground truth is an unnormalized Gaussian bump with unit
variance (in heatmap pixels) and peak value 1 at the joint location.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import DataError

#: Gaussian std-dev in heatmap pixels (variance 1).
SIGMA = 1.0

#: A joint farther than this many pixels outside the map renders as all-zero.
OUT_OF_FRAME_MARGIN = 3.0 * SIGMA


def render_heatmap(joint_xy, size: tuple[int, int]) -> tuple[np.ndarray, bool]:
    """Render one joint as a Gaussian bump.

    Args:
        joint_xy: (x, y) in heatmap-resolution pixels. Callers with
            image-resolution coordinates scale them first, see
            :func:`image_to_heatmap_coords`.
        size: (W, H) of the map.

    Returns:
        (map, in_frame). ``map[y, x] = exp(-((x-jx)^2 + (y-jy)^2) / 2)``.
        When the joint lies more than 3 sigma outside the map the map is all
        zeros and ``in_frame`` is False.
    """
    w, h = int(size[0]), int(size[1])
    if w < 2 or h < 2:
        raise DataError(f"heatmap size must be at least 2x2, got {w}x{h}")
    x, y = float(joint_xy[0]), float(joint_xy[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        raise DataError("joint coordinates must be finite")
    if (x < -OUT_OF_FRAME_MARGIN or x > w - 1 + OUT_OF_FRAME_MARGIN
            or y < -OUT_OF_FRAME_MARGIN or y > h - 1 + OUT_OF_FRAME_MARGIN):
        return np.zeros((h, w)), False
    # The 2D Gaussian is separable: exp(-(dx^2+dy^2)/2) = exp(-dx^2/2)*exp(-dy^2/2).
    gx = np.exp(-0.5 * (np.arange(w) - x) ** 2)
    gy = np.exp(-0.5 * (np.arange(h) - y) ** 2)
    return gy[:, None] * gx[None, :], True


def render_heatmaps(joints_xy: np.ndarray, size: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Render a (J, H, W) ground-truth stack. Returns (stack, in_frame flags)."""
    joints_xy = np.asarray(joints_xy, dtype=np.float64)
    if joints_xy.ndim != 2 or joints_xy.shape[1] != 2:
        raise DataError(f"expected (J, 2) joint coordinates, got {joints_xy.shape}")
    j = joints_xy.shape[0]
    w, h = int(size[0]), int(size[1])
    stack = np.empty((j, h, w))
    flags = np.empty(j, dtype=bool)
    for i in range(j):
        stack[i], flags[i] = render_heatmap(joints_xy[i], size)
    return stack, flags


def render_heatmap_batch(coords: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Vectorized rendering for training batches.

    Args:
        coords: (..., 2) joint coordinates in heatmap pixels.
        size: (W, H).

    Returns (..., H, W); out-of-frame joints (3 sigma rule) render as zeros.
    """
    coords = np.asarray(coords, dtype=np.float64)
    w, h = int(size[0]), int(size[1])
    x = coords[..., 0]
    y = coords[..., 1]
    gx = np.exp(-0.5 * (np.arange(w) - x[..., None]) ** 2)  # (..., W)
    gy = np.exp(-0.5 * (np.arange(h) - y[..., None]) ** 2)  # (..., H)
    out = gy[..., :, None] * gx[..., None, :]
    oof = ((x < -OUT_OF_FRAME_MARGIN) | (x > w - 1 + OUT_OF_FRAME_MARGIN)
           | (y < -OUT_OF_FRAME_MARGIN) | (y > h - 1 + OUT_OF_FRAME_MARGIN))
    out[oof] = 0.0
    return out


def decode_heatmap(hm: np.ndarray) -> Optional[tuple[int, int]]:
    """Argmax location of one map as (x, y).

    Ties break to the lowest row-major index. An all-zero map means no
    detection and returns None.
    """
    hm = np.asarray(hm)
    if hm.ndim != 2 or hm.size == 0:
        raise DataError(f"heatmap must be a non-empty 2D array, got shape {hm.shape}")
    if not np.any(hm):
        return None
    flat = int(np.argmax(hm))
    y, x = divmod(flat, hm.shape[1])
    return (x, y)


def decode_heatmaps(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode a (J, H, W) stack. Returns (coords (J, 2), found (J,) flags).

    Undetected joints get coordinates (-1, -1) and found=False.
    """
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise DataError(f"expected (J, H, W) stack, got shape {stack.shape}")
    coords = np.full((stack.shape[0], 2), -1.0)
    found = np.zeros(stack.shape[0], dtype=bool)
    for i in range(stack.shape[0]):
        res = decode_heatmap(stack[i])
        if res is not None:
            coords[i] = res
            found[i] = True
    return coords, found


def image_to_heatmap_coords(xy: np.ndarray, image_size: tuple[int, int],
                            heatmap_size: tuple[int, int]) -> np.ndarray:
    """Scale image-pixel coordinates to heatmap pixels (per-axis ratio)."""
    xy = np.asarray(xy, dtype=np.float64)
    sx = heatmap_size[0] / image_size[0]
    sy = heatmap_size[1] / image_size[1]
    return xy * np.array([sx, sy])


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DataError(f"heatmap shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim < 3:
        raise DataError(f"expected (..., J, H, W) stacks, got shape {pred.shape}")
    return pred, gt


def heatmap_loss(pred: np.ndarray, gt: np.ndarray, kind: str = "euclidean") -> float:
    """Mean over joints of the per-joint norm of the difference map.

    ``kind="euclidean"`` (default) uses the Frobenius norm of each joint's
    difference; ``kind="squared"`` uses its square, which has a smoother
    gradient. Accepts (J, H, W) or batched (B, J, H, W); batches average.
    """
    pred, gt = _check_pair(pred, gt)
    diff = pred - gt
    per_joint = np.sqrt(np.sum(diff * diff, axis=(-1, -2)))
    if kind == "euclidean":
        pass
    elif kind == "squared":
        per_joint = per_joint ** 2
    else:
        raise DataError(f"unknown heatmap loss kind {kind!r}")
    return float(np.mean(per_joint))


def heatmap_loss_grad(pred: np.ndarray, gt: np.ndarray,
                      kind: str = "euclidean") -> tuple[float, np.ndarray]:
    """Loss plus its gradient with respect to ``pred``.

    At a joint with exactly zero difference the euclidean norm is not
    differentiable; the zero subgradient is used there.
    """
    pred, gt = _check_pair(pred, gt)
    diff = pred - gt
    per_joint = np.sqrt(np.sum(diff * diff, axis=(-1, -2)))
    n_terms = int(np.prod(pred.shape[:-2]))  # J, or B*J for batches
    if kind == "euclidean":
        loss = float(np.sum(per_joint)) / n_terms
        safe = np.where(per_joint > 0, per_joint, 1.0)
        grad = diff / (safe[..., None, None] * n_terms)
        grad[per_joint == 0] = 0.0
    elif kind == "squared":
        loss = float(np.sum(per_joint ** 2)) / n_terms
        grad = 2.0 * diff / n_terms
    else:
        raise DataError(f"unknown heatmap loss kind {kind!r}")
    return loss, grad
