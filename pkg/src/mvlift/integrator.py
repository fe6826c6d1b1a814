"""Multi-view integration network: fused per-view features -> 3D pose.

Per-view heatmaps (and optionally images or skip pyramids) are concatenated
channel-wise across views in fixed ascending camera order, then encoded down
to a compact feature and mapped by one fully-connected layer to 3*J
normalized joint coordinates.

Two encoder architectures are provided:

* ``SIMPLE_ENCODER`` — stride-2 convolutions halving resolution per layer.
* ``HALF_HOURGLASS`` — residual modules with max-pooling between stages; the
  only architecture that can consume fused skip pyramids, each level being
  processed by one projection-residual module and added to the trunk feature
  of equal resolution before that stage's pooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, UnsupportedCombinationError
from .nn.layers import Conv2d, Linear, MaxPool2, Module, ReLU, ResidualModule
from .nn.resize import bilinear_resize

NUM_SKIP_LEVELS = 4


class FusionInputVariant(str, Enum):
    HEATMAPS_ONLY = "heatmaps_only"
    HEATMAPS_PLUS_IMAGE = "heatmaps_plus_image"
    HEATMAPS_PLUS_SKIPS = "heatmaps_plus_skips"


class IntegratorArch(str, Enum):
    SIMPLE_ENCODER = "simple_encoder"
    HALF_HOURGLASS = "half_hourglass"


@dataclass
class ViewFeatures:
    """Outputs of the view-specific perceptron for one view (batched)."""

    heatmaps: np.ndarray  # (B, J, r, r)
    skips: Optional[list[np.ndarray]] = None  # four (B, L_s, h_s, h_s)
    image: Optional[np.ndarray] = None  # (B, 3, H, W), any resolution


@dataclass
class FusedInput:
    """Channel-concatenated multi-view features.

    ``heatmaps`` holds J groups of N channels (joint-major, view-fastest);
    ``images``/``skips`` are view-blocked concatenations.
    """

    heatmaps: np.ndarray  # (B, J*N, r, r)
    num_views: int
    images: Optional[np.ndarray] = None  # (B, 3*N, r, r)
    skips: Optional[list[np.ndarray]] = None  # four (B, N*L_s, h_s, h_s)


def fuse_views(per_view: Sequence[ViewFeatures],
               variant: FusionInputVariant) -> FusedInput:
    """Concatenate per-view features channel-wise in the given view order.

    All views must agree on shapes; a mismatch raises :class:`DataError`
    naming the offending view. The heatmap block interleaves views within
    each joint group; skip levels and images are concatenated view-block by
    view-block.
    """
    if not per_view:
        raise DataError("fuse_views needs at least one view")
    variant = FusionInputVariant(variant)
    n = len(per_view)
    ref = per_view[0]
    for i, v in enumerate(per_view):
        if v.heatmaps.shape != ref.heatmaps.shape:
            raise DataError(f"view {i} heatmap shape {v.heatmaps.shape} differs "
                            f"from view 0 shape {ref.heatmaps.shape}")
    b, j, rh, rw = ref.heatmaps.shape
    stacked = np.stack([v.heatmaps for v in per_view], axis=2)  # (B, J, N, r, r)
    heatmaps = stacked.reshape(b, j * n, rh, rw)

    images = None
    if variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE:
        for i, v in enumerate(per_view):
            if v.image is None:
                raise DataError(f"view {i} is missing its image, required by "
                                f"variant {variant.value}")
            if v.image.shape != per_view[0].image.shape:
                raise DataError(f"view {i} image shape {v.image.shape} differs "
                                f"from view 0 shape {per_view[0].image.shape}")
        images = np.concatenate(
            [bilinear_resize(v.image, (rh, rw)) for v in per_view], axis=1)

    skips = None
    if variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS:
        for i, v in enumerate(per_view):
            if v.skips is None:
                raise DataError(f"view {i} is missing its skip pyramid, required "
                                f"by variant {variant.value}")
            if len(v.skips) != NUM_SKIP_LEVELS:
                raise DataError(f"view {i} skip pyramid has {len(v.skips)} levels, "
                                f"expected {NUM_SKIP_LEVELS}")
            for s in range(NUM_SKIP_LEVELS):
                if v.skips[s].shape != ref.skips[s].shape:
                    raise DataError(f"view {i} skip level {s} shape "
                                    f"{v.skips[s].shape} differs from view 0 "
                                    f"shape {ref.skips[s].shape}")
        skips = [np.concatenate([v.skips[s] for v in per_view], axis=1)
                 for s in range(NUM_SKIP_LEVELS)]

    return FusedInput(heatmaps=heatmaps, num_views=n, images=images, skips=skips)


@dataclass(frozen=True)
class IntegratorConfig:
    arch: IntegratorArch
    variant: FusionInputVariant
    num_joints: int = 14
    num_views: int = 2
    heatmap_resolution: int = 64
    #: per-level channels of ONE view's skip pyramid (perceptron base width),
    #: required for the skips variant.
    skip_channels: tuple[int, ...] = ()
    #: residual-stage widths of the half-hourglass trunk (one per pooling stage)
    trunk_channels: tuple[int, ...] = (32, 32, 32, 32)
    #: widths of the simple encoder's stride-2 convolutions; resolution halves
    #: per entry
    encoder_channels: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arch", IntegratorArch(self.arch))
        object.__setattr__(self, "variant", FusionInputVariant(self.variant))
        object.__setattr__(self, "skip_channels", tuple(self.skip_channels))
        object.__setattr__(self, "trunk_channels", tuple(self.trunk_channels))
        enc = tuple(self.encoder_channels)
        if not enc:
            # default: halve down to 4x4
            n_layers = max(1, int(np.log2(self.heatmap_resolution // 4)))
            enc = (32,) * n_layers
        object.__setattr__(self, "encoder_channels", enc)
        if self.num_joints < 1 or self.num_views < 1:
            raise ConfigError("num_joints and num_views must be positive")
        r = self.heatmap_resolution
        if r < 16 or r % 16 != 0:
            raise ConfigError(f"heatmap_resolution must be a multiple of 16, got {r}")
        if self.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS:
            if self.arch == IntegratorArch.SIMPLE_ENCODER:
                raise UnsupportedCombinationError(
                    "the simple encoder has no pyramid stages to sum skip "
                    "features into; use the half-hourglass architecture")
            if len(self.skip_channels) != NUM_SKIP_LEVELS:
                raise ConfigError(f"skip_channels must list {NUM_SKIP_LEVELS} "
                                  f"levels, got {self.skip_channels!r}")
        if self.arch == IntegratorArch.HALF_HOURGLASS:
            if len(self.trunk_channels) != NUM_SKIP_LEVELS:
                raise ConfigError(f"trunk_channels must list {NUM_SKIP_LEVELS} "
                                  f"stages, got {self.trunk_channels!r}")
        if self.arch == IntegratorArch.SIMPLE_ENCODER:
            if r >> len(self.encoder_channels) < 1:
                raise ConfigError(f"{len(self.encoder_channels)} halvings is too "
                                  f"deep for resolution {r}")

    @property
    def trunk_in_channels(self) -> int:
        c = self.num_joints * self.num_views
        if self.variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE:
            c += 3 * self.num_views
        return c

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arch"] = self.arch.value
        d["variant"] = self.variant.value
        d["skip_channels"] = list(self.skip_channels)
        d["trunk_channels"] = list(self.trunk_channels)
        d["encoder_channels"] = list(self.encoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        d = dict(d)
        d["skip_channels"] = tuple(d.get("skip_channels", ()))
        d["trunk_channels"] = tuple(d.get("trunk_channels", (32, 32, 32, 32)))
        d["encoder_channels"] = tuple(d.get("encoder_channels", ()))
        return cls(**d)


class IntegratorModel(Module):
    """See :func:`build_integrator`."""

    def __init__(self, cfg: IntegratorConfig, seed: int):
        super().__init__()
        self.config = cfg
        self.seed = seed
        rng = np.random.default_rng(np.random.PCG64(seed))
        r = cfg.heatmap_resolution
        cin = cfg.trunk_in_channels
        self.pool = MaxPool2()
        self.relu = ReLU()
        if cfg.arch == IntegratorArch.SIMPLE_ENCODER:
            self.convs = []
            res = r
            for i, c in enumerate(cfg.encoder_channels):
                self.convs.append(self.add_child(f"conv{i}",
                                                 Conv2d(cin, c, 2, rng, stride=2)))
                cin = c
                res //= 2
            fc_in = cin * res * res
        else:
            self.trunk = []
            self.skip_branch = []
            res = r
            for s, c in enumerate(cfg.trunk_channels):
                self.trunk.append(self.add_child(f"trunk{s}",
                                                 ResidualModule(cin, c, rng)))
                if cfg.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS:
                    branch = ResidualModule(cfg.skip_channels[s] * cfg.num_views,
                                            c, rng, project_shortcut=True)
                    self.skip_branch.append(self.add_child(f"skip{s}", branch))
                cin = c
                res //= 2
            fc_in = cin * res * res
        self.fc = self.add_child("fc", Linear(fc_in, 3 * cfg.num_joints, rng,
                                              init_gain=0.1))
        # Targets live in the unit cube; start predictions at its center.
        self.fc.b.value[...] = 0.5

    def _check_fused(self, fused: FusedInput,
                     skips: Optional[list[np.ndarray]]) -> list[np.ndarray]:
        cfg = self.config
        b, c, h, w = fused.heatmaps.shape
        if c != cfg.num_joints * cfg.num_views:
            raise DataError(f"fused heatmaps have {c} channels, expected "
                            f"{cfg.num_joints * cfg.num_views}")
        if h != cfg.heatmap_resolution or w != cfg.heatmap_resolution:
            raise DataError(f"fused heatmaps are {h}x{w}, expected "
                            f"{cfg.heatmap_resolution} square")
        if cfg.variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE:
            if fused.images is None:
                raise DataError("variant heatmaps_plus_image requires fused images")
        if cfg.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS:
            if skips is None:
                raise DataError("variant heatmaps_plus_skips requires a fused "
                                "skip pyramid")
            if len(skips) != NUM_SKIP_LEVELS:
                raise DataError(f"expected {NUM_SKIP_LEVELS} fused skip levels, "
                                f"got {len(skips)}")
        return skips

    def _trunk_input(self, fused: FusedInput) -> np.ndarray:
        if self.config.variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE:
            return np.concatenate([fused.heatmaps, fused.images], axis=1)
        return fused.heatmaps

    def forward_train(self, fused: FusedInput,
                      skips: Optional[list[np.ndarray]] = None):
        cfg = self.config
        if skips is None:
            skips = fused.skips
        skips = self._check_fused(fused, skips)
        x = self._trunk_input(fused)
        b = x.shape[0]
        caches = []
        if cfg.arch == IntegratorArch.SIMPLE_ENCODER:
            for conv in self.convs:
                x, cc = conv.forward_train(x)
                x, cr = self.relu.forward_train(x)
                caches.append((cc, cr))
        else:
            use_skips = cfg.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS
            for s, res in enumerate(self.trunk):
                x, ct = res.forward_train(x)
                cb = None
                if use_skips:
                    branch, cb = self.skip_branch[s].forward_train(skips[s])
                    x = x + branch
                x, cp = self.pool.forward_train(x)
                caches.append((ct, cb, cp))
        feat_shape = x.shape
        x = x.reshape(b, -1)
        y, c_fc = self.fc.forward_train(x)
        pose = y.reshape(b, cfg.num_joints, 3)
        return pose, (caches, feat_shape, c_fc)

    def backward(self, dpose: np.ndarray, cache):
        """Returns (d_trunk_input, d_skips or None)."""
        cfg = self.config
        caches, feat_shape, c_fc = cache
        b = dpose.shape[0]
        dx = self.fc.backward(dpose.reshape(b, -1), c_fc)
        dx = dx.reshape(feat_shape)
        dskips = None
        if cfg.arch == IntegratorArch.SIMPLE_ENCODER:
            for conv, (cc, cr) in zip(reversed(self.convs), reversed(caches)):
                dx = self.relu.backward(dx, cr)
                dx = conv.backward(dx, cc)
        else:
            use_skips = cfg.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS
            if use_skips:
                dskips = [None] * NUM_SKIP_LEVELS
            for s in range(len(self.trunk) - 1, -1, -1):
                ct, cb, cp = caches[s]
                dx = self.pool.backward(dx, cp)
                if use_skips:
                    dskips[s] = self.skip_branch[s].backward(dx, cb)
                dx = self.trunk[s].backward(dx, ct)
        return dx, dskips

    def forward(self, fused: FusedInput,
                skips: Optional[list[np.ndarray]] = None) -> np.ndarray:
        """Inference: fused features -> (B, J, 3) normalized coordinates."""
        pose, _ = self.forward_train(fused, skips)
        return pose


def build_integrator(cfg: IntegratorConfig, seed: int = 0) -> IntegratorModel:
    """Construct an integrator with seed-deterministic initial parameters."""
    return IntegratorModel(cfg, seed)


def integrator_forward(model: IntegratorModel, fused: FusedInput,
                       skips: Optional[list[np.ndarray]] = None) -> np.ndarray:
    """Functional wrapper over :meth:`IntegratorModel.forward`."""
    return model.forward(fused, skips)


def _check_pose_pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DataError(f"pose shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim < 2 or pred.shape[-1] != 3:
        raise DataError(f"expected (..., J, 3) poses, got {pred.shape}")
    return pred, gt


def pose_loss(pred, gt) -> float:
    """Mean over joints of the per-joint 3D Euclidean distance.

    Accepts (J, 3) or batched (B, J, 3); batches average over samples.
    """
    pred, gt = _check_pose_pair(pred, gt)
    d = np.sqrt(np.sum((pred - gt) ** 2, axis=-1))
    return float(np.mean(d))


def pose_loss_grad(pred, gt) -> tuple[float, np.ndarray]:
    """Loss plus gradient with respect to ``pred`` (zero subgradient at ties)."""
    pred, gt = _check_pose_pair(pred, gt)
    diff = pred - gt
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    n_terms = int(np.prod(d.shape))
    loss = float(np.sum(d)) / n_terms
    safe = np.where(d > 0, d, 1.0)
    grad = diff / (safe[..., None] * n_terms)
    grad[d == 0] = 0.0
    return loss, grad
