"""Deterministic bilinear resampling for images and feature maps."""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def _source_grid(dst: int, src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Pixel-center alignment: dst center i maps to (i + 0.5) * src/dst - 0.5.
    pos = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1.0)
    lo = np.floor(pos).astype(np.intp)
    lo = np.minimum(lo, src - 2) if src > 1 else lo
    frac = pos - lo
    return lo, lo + (1 if src > 1 else 0), frac


def bilinear_resize(img: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Resize the trailing two spatial axes of (..., H, W) to ``out_hw``."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim < 2:
        raise DataError(f"need at least 2 dimensions to resize, got shape {img.shape}")
    h, w = img.shape[-2:]
    oh, ow = int(out_hw[0]), int(out_hw[1])
    if oh < 1 or ow < 1:
        raise DataError(f"target size must be positive, got {out_hw}")
    if (oh, ow) == (h, w):
        return img.copy()
    y0, y1, fy = _source_grid(oh, h)
    x0, x1, fx = _source_grid(ow, w)
    rows0 = img[..., y0, :]
    rows1 = img[..., y1, :]
    rows = rows0 + fy[:, None] * (rows1 - rows0)
    cols0 = rows[..., :, x0]
    cols1 = rows[..., :, x1]
    return cols0 + fx * (cols1 - cols0)
