"""Two-stage training: per-view heatmap regression, then 3D integration.

Stage 1 fits the view-specific perceptron to rendered ground-truth heatmaps.
Stage 2 freezes the perceptron, precomputes its outputs over the training
split once, and fits the integrator to normalized 3D targets. Both loops are
bit-deterministic given (config, seed): parameter init, shuffling, and batch
composition all derive from the seed, and all arithmetic is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, TrainingDivergedError
from .heatmaps import heatmap_loss_grad, image_to_heatmap_coords, render_heatmap_batch
from .integrator import (
    FusedInput,
    FusionInputVariant,
    IntegratorModel,
    ViewFeatures,
    fuse_views,
    pose_loss_grad,
)
from .nn.optim import make_optimizer
from .nn.resize import bilinear_resize
from .perceptron import PerceptronModel
from .rig.dataset import Dataset, DatasetRecord
from .skeleton import normalize_pose


class Stage(str, Enum):
    STAGE1_2D = "stage1_2d"
    STAGE2_3D = "stage2_3d"


@dataclass(frozen=True)
class TrainConfig:
    stage: Stage
    learning_rate: float
    epochs: int
    batch_size: int = 8
    seed: int = 0
    optimizer: str = "adam"
    loss_kind: str = "euclidean"
    #: optional hard cap on optimizer steps (useful for overfit probes)
    max_steps: Optional[int] = None
    shuffle: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage"] = self.stage.value
        return d


def stage1_config(**overrides) -> TrainConfig:
    """Stage-1 defaults: learning rate 0.00025 for five epochs."""
    base = dict(stage=Stage.STAGE1_2D, learning_rate=0.00025, epochs=5)
    base.update(overrides)
    return TrainConfig(**base)


def stage2_config(**overrides) -> TrainConfig:
    """Stage-2 defaults: learning rate 0.0005; 20 epochs at desk scale
    (50 for fidelity runs)."""
    base = dict(stage=Stage.STAGE2_3D, learning_rate=0.0005, epochs=20)
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class SplitArrays:
    """A dataset split materialized as training-ready tensors."""

    images: np.ndarray        # (M, V, 3, R, R) float64 in [0, 1]
    hm_coords: np.ndarray     # (M, V, J, 2) heatmap-resolution pixels
    pose3d_mm: np.ndarray     # (M, J, 3)
    pose3d_norm: np.ndarray   # (M, J, 3)
    subject_ids: np.ndarray   # (M,) int
    record_ids: list[str]
    views: tuple[int, ...]
    heatmap_resolution: int

    @property
    def num_items(self) -> int:
        return self.images.shape[0]

    @property
    def num_views(self) -> int:
        return self.images.shape[1]


def load_split(dataset: Dataset, split: str, input_resolution: int,
               heatmap_resolution: int,
               views: Optional[Sequence[int]] = None) -> SplitArrays:
    """Load and resize one split of a dataset into memory.

    Images are bilinearly resized from stored resolution to the model input;
    2D joints are scaled to heatmap pixels; 3D targets are normalized with
    the dataset's stored parameters.
    """
    records = dataset.split(split)
    if not records:
        raise DataError(f"split {split!r} is empty")
    if views is None:
        views = tuple(range(len(dataset.cameras)))
    views = tuple(int(v) for v in views)
    for v in views:
        if not 0 <= v < len(dataset.cameras):
            raise DataError(f"view index {v} out of range")
    m, nv = len(records), len(views)
    j = records[0].pose3d.shape[0]
    stored = dataset.cameras[views[0]].image_size[0]
    images = np.empty((m, nv, 3, input_resolution, input_resolution))
    hm_coords = np.empty((m, nv, j, 2))
    pose3d = np.empty((m, j, 3))
    subject_ids = np.empty(m, dtype=np.int64)
    record_ids = []
    for i, rec in enumerate(records):
        for k, v in enumerate(views):
            img = dataset.load_image(rec, v)  # (H, W, 3)
            chw = np.transpose(img, (2, 0, 1))
            images[i, k] = bilinear_resize(chw, (input_resolution, input_resolution))
            hm_coords[i, k] = image_to_heatmap_coords(
                rec.pose2d[v].coords, (stored, stored),
                (heatmap_resolution, heatmap_resolution))
        pose3d[i] = rec.pose3d
        subject_ids[i] = rec.subject_id
        record_ids.append(rec.record_id)
    pose_norm = np.empty_like(pose3d)
    for i in range(m):
        pose_norm[i] = normalize_pose(pose3d[i], dataset.norm_params)
    return SplitArrays(images=images, hm_coords=hm_coords, pose3d_mm=pose3d,
                       pose3d_norm=pose_norm, subject_ids=subject_ids,
                       record_ids=record_ids, views=views,
                       heatmap_resolution=heatmap_resolution)


def _check_split_for_model(model: PerceptronModel, split: SplitArrays):
    r = model.config.input_resolution
    if split.images.shape[-1] != r:
        raise ConfigError(f"split images are {split.images.shape[-1]} px but the "
                          f"model expects {r}")
    if split.heatmap_resolution != model.config.heatmap_resolution:
        raise ConfigError("split heatmap coordinates do not match the model's "
                          "heatmap resolution")


def _batches(n: int, batch_size: int, rng: Optional[np.random.Generator]):
    order = np.arange(n) if rng is None else rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_stage1(model: PerceptronModel, split: SplitArrays,
                 cfg: TrainConfig) -> tuple[PerceptronModel, list[float]]:
    """Fit the perceptron to rendered ground-truth heatmaps.

    Returns the trained model (mutated in place) and the per-epoch mean
    training loss of the final-stack heatmaps. With multiple hourglass
    stacks, every stack is supervised and the optimized loss is their mean.
    """
    if cfg.stage != Stage.STAGE1_2D:
        raise ConfigError(f"train_stage1 needs a stage1_2d config, got {cfg.stage}")
    _check_split_for_model(model, split)
    if split.num_items == 0:
        raise DataError("training split is empty")
    r = model.config.heatmap_resolution
    m, nv = split.num_items, split.num_views
    images = split.images.reshape(m * nv, *split.images.shape[2:])
    coords = split.hm_coords.reshape(m * nv, *split.hm_coords.shape[2:])
    n_items = m * nv

    opt = make_optimizer(cfg.optimizer, model.parameters(), cfg.learning_rate)
    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    curve: list[float] = []
    steps = 0
    for epoch in range(cfg.epochs):
        total, seen = 0.0, 0
        for bi, idx in enumerate(_batches(n_items, cfg.batch_size,
                                          rng if cfg.shuffle else None)):
            x = images[idx]
            gt = render_heatmap_batch(coords[idx], (r, r))
            (all_preds, _), cache = model.forward_train(x)
            grads = []
            final_loss = None
            for k, preds in enumerate(all_preds):
                loss_k, grad_k = heatmap_loss_grad(preds, gt, cfg.loss_kind)
                grads.append(grad_k / len(all_preds))
                if k == len(all_preds) - 1:
                    final_loss = loss_k
            if not np.isfinite(final_loss):
                raise TrainingDivergedError(epoch, bi, final_loss)
            opt.zero_grad()
            model.backward(grads, cache)
            opt.step()
            total += final_loss * len(idx)
            seen += len(idx)
            steps += 1
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                curve.append(total / seen)
                return model, curve
        curve.append(total / seen)
    return model, curve


def stage1_loss(model: PerceptronModel, split: SplitArrays,
                loss_kind: str = "euclidean", batch_size: int = 16) -> float:
    """Mean final-stack heatmap loss over a split (no parameter updates)."""
    _check_split_for_model(model, split)
    r = model.config.heatmap_resolution
    m, nv = split.num_items, split.num_views
    images = split.images.reshape(m * nv, *split.images.shape[2:])
    coords = split.hm_coords.reshape(m * nv, *split.hm_coords.shape[2:])
    total = 0.0
    for start in range(0, m * nv, batch_size):
        x = images[start:start + batch_size]
        gt = render_heatmap_batch(coords[start:start + batch_size], (r, r))
        preds, _ = model.forward(x)
        loss, _ = heatmap_loss_grad(preds, gt, loss_kind)
        total += loss * x.shape[0]
    return total / (m * nv)


def compute_view_features(model: PerceptronModel, split: SplitArrays,
                          need_skips: bool, need_images: bool,
                          batch_size: int = 16) -> list[ViewFeatures]:
    """Run the frozen perceptron over every view of a split.

    Returns one :class:`ViewFeatures` per view with full-split batches
    stacked along the batch axis.
    """
    _check_split_for_model(model, split)
    out = []
    for v in range(split.num_views):
        hms, skip_parts = [], None
        for start in range(0, split.num_items, batch_size):
            x = split.images[start:start + batch_size, v]
            h, s = model.forward(x)
            hms.append(h)
            if need_skips:
                if skip_parts is None:
                    skip_parts = [[] for _ in s]
                for lvl, arr in enumerate(s):
                    skip_parts[lvl].append(arr)
        heatmaps = np.concatenate(hms, axis=0)
        skips = ([np.concatenate(parts, axis=0) for parts in skip_parts]
                 if need_skips else None)
        image = split.images[:, v] if need_images else None
        out.append(ViewFeatures(heatmaps=heatmaps, skips=skips, image=image))
    return out


def fuse_split(model: PerceptronModel, split: SplitArrays,
               variant: FusionInputVariant, batch_size: int = 16) -> FusedInput:
    """Precompute the integrator's fused input for a whole split."""
    variant = FusionInputVariant(variant)
    feats = compute_view_features(
        model, split,
        need_skips=variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS,
        need_images=variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE,
        batch_size=batch_size)
    return fuse_views(feats, variant)


def _slice_fused(fused: FusedInput, idx: np.ndarray) -> FusedInput:
    return FusedInput(
        heatmaps=fused.heatmaps[idx],
        num_views=fused.num_views,
        images=fused.images[idx] if fused.images is not None else None,
        skips=([s[idx] for s in fused.skips] if fused.skips is not None else None),
    )


def train_stage2_on_features(integrator: IntegratorModel, fused: FusedInput,
                             targets: np.ndarray,
                             cfg: TrainConfig) -> tuple[IntegratorModel, list[float]]:
    """Stage-2 inner loop over precomputed fused inputs."""
    if cfg.stage != Stage.STAGE2_3D:
        raise ConfigError(f"train_stage2 needs a stage2_3d config, got {cfg.stage}")
    n = fused.heatmaps.shape[0]
    if n == 0:
        raise DataError("training split is empty")
    if targets.shape[0] != n:
        raise DataError("targets do not match fused inputs")
    opt = make_optimizer(cfg.optimizer, integrator.parameters(), cfg.learning_rate)
    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    curve: list[float] = []
    steps = 0
    for epoch in range(cfg.epochs):
        total, seen = 0.0, 0
        for bi, idx in enumerate(_batches(n, cfg.batch_size,
                                          rng if cfg.shuffle else None)):
            batch = _slice_fused(fused, idx)
            pred, cache = integrator.forward_train(batch)
            loss, grad = pose_loss_grad(pred, targets[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, bi, loss)
            opt.zero_grad()
            integrator.backward(grad, cache)
            opt.step()
            total += loss * len(idx)
            seen += len(idx)
            steps += 1
            if cfg.max_steps is not None and steps >= cfg.max_steps:
                curve.append(total / seen)
                return integrator, curve
        curve.append(total / seen)
    return integrator, curve


def train_stage2(integrator: IntegratorModel, perceptron: PerceptronModel,
                 split: SplitArrays,
                 cfg: TrainConfig) -> tuple[IntegratorModel, list[float]]:
    """Train the integrator on normalized 3D targets with a frozen perceptron.

    The perceptron's parameters are never updated (they are not handed to the
    optimizer and inference is side-effect free).
    """
    _check_compat(integrator, perceptron, split)
    fused = fuse_split(perceptron, split, integrator.config.variant)
    return train_stage2_on_features(integrator, fused, split.pose3d_norm, cfg)


def stage2_loss(integrator: IntegratorModel, fused: FusedInput,
                targets: np.ndarray, batch_size: int = 64) -> float:
    """Mean pose loss over precomputed fused inputs (no updates)."""
    n = fused.heatmaps.shape[0]
    total = 0.0
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        pred = integrator.forward(_slice_fused(fused, idx))
        loss, _ = pose_loss_grad(pred, targets[idx])
        total += loss * len(idx)
    return total / n


def _check_compat(integrator: IntegratorModel, perceptron: PerceptronModel,
                  split: SplitArrays):
    icfg, pcfg = integrator.config, perceptron.config
    if icfg.num_joints != pcfg.num_joints:
        raise ConfigError(f"integrator expects {icfg.num_joints} joints, "
                          f"perceptron produces {pcfg.num_joints}")
    if icfg.heatmap_resolution != pcfg.heatmap_resolution:
        raise ConfigError(f"integrator expects {icfg.heatmap_resolution} px "
                          f"heatmaps, perceptron produces "
                          f"{pcfg.heatmap_resolution}")
    if icfg.num_views != split.num_views:
        raise ConfigError(f"integrator expects {icfg.num_views} views, split "
                          f"has {split.num_views}")
    if (icfg.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS
            and tuple(icfg.skip_channels) != tuple(pcfg.skip_channels)):
        raise ConfigError(f"integrator skip channels {icfg.skip_channels} do "
                          f"not match perceptron {pcfg.skip_channels}")
