"""Per-view network: RGB image -> joint heatmaps + hierarchical skip features.

The network is an hourglass: an encoder of residual modules and max-pooling
stages down to a low-resolution bottleneck, then a decoder of upsampling and
residual modules back to heatmap resolution. The feature map entering each of
the four pooling stages is captured as one level of the exported skip
pyramid, at resolutions r, r/2, r/4, r/8 for heatmap resolution r.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError
from .nn.layers import (
    Conv2d,
    MaxPool2,
    Module,
    ReLU,
    ResidualModule,
    UpsampleNearest2,
)

#: Number of skip-pyramid levels (and of pooling stages in the hourglass).
NUM_SKIP_LEVELS = 4


@dataclass(frozen=True)
class PerceptronConfig:
    num_joints: int = 14
    input_resolution: int = 256
    heatmap_resolution: int = 64
    base_channels: int = 16
    num_stacks: int = 1

    def __post_init__(self):
        if self.num_joints < 1:
            raise ConfigError("num_joints must be positive")
        if self.base_channels < 4:
            raise ConfigError("base_channels must be at least 4")
        if self.num_stacks < 1:
            raise ConfigError("num_stacks must be at least 1")
        r, inp = self.heatmap_resolution, self.input_resolution
        if r < 16 or r % 16 != 0:
            raise ConfigError(
                f"heatmap_resolution must be a positive multiple of 16 (four "
                f"pooling stages), got {r}")
        if inp % r != 0:
            raise ConfigError(f"heatmap_resolution {r} must divide "
                              f"input_resolution {inp}")
        ratio = inp // r
        if ratio & (ratio - 1):
            raise ConfigError(f"input/heatmap resolution ratio must be a power "
                              f"of two, got {ratio}")

    @property
    def skip_channels(self) -> tuple[int, ...]:
        """Channel count of each exported skip level."""
        return (self.base_channels,) * NUM_SKIP_LEVELS

    def to_dict(self) -> dict:
        return asdict(self)


def default_config() -> PerceptronConfig:
    """Desk-scale configuration: trains in minutes on a laptop CPU."""
    return PerceptronConfig()


def fidelity_config() -> PerceptronConfig:
    """Full-width hourglass configuration (256 feature channels)."""
    return PerceptronConfig(base_channels=256)


class _Stem(Module):
    """Input head: 7x7 convolution plus pooling down to heatmap resolution."""

    def __init__(self, cfg: PerceptronConfig, rng):
        super().__init__()
        c = cfg.base_channels
        ratio = cfg.input_resolution // cfg.heatmap_resolution
        stride = 1 if ratio == 1 else 2
        self.conv = self.add_child("conv", Conv2d(3, c, 7, rng, stride=stride, pad=3))
        self.relu = ReLU()
        self.res = self.add_child("res", ResidualModule(c, c, rng))
        self.n_pools = 0 if ratio == 1 else int(np.log2(ratio)) - 1
        self.pool = MaxPool2()
        self.pool_res = [
            self.add_child(f"pool_res{i}", ResidualModule(c, c, rng))
            for i in range(self.n_pools)
        ]

    def forward_train(self, x):
        x, c_conv = self.conv.forward_train(x)
        x, c_relu = self.relu.forward_train(x)
        x, c_res = self.res.forward_train(x)
        pool_caches = []
        for res in self.pool_res:
            x, cp = self.pool.forward_train(x)
            x, cr = res.forward_train(x)
            pool_caches.append((cp, cr))
        return x, (c_conv, c_relu, c_res, pool_caches)

    def backward(self, dout, cache):
        c_conv, c_relu, c_res, pool_caches = cache
        for res, (cp, cr) in zip(reversed(self.pool_res), reversed(pool_caches)):
            dout = res.backward(dout, cr)
            dout = self.pool.backward(dout, cp)
        dout = self.res.backward(dout, c_res)
        dout = self.relu.backward(dout, c_relu)
        return self.conv.backward(dout, c_conv)


class _HourglassStack(Module):
    """One encoder-decoder pass producing heatmaps and the skip pyramid."""

    def __init__(self, cfg: PerceptronConfig, rng):
        super().__init__()
        c, j = cfg.base_channels, cfg.num_joints
        self.enc = [self.add_child(f"enc{s}", ResidualModule(c, c, rng))
                    for s in range(NUM_SKIP_LEVELS)]
        self.bottom = self.add_child("bottom", ResidualModule(c, c, rng))
        self.dec = [self.add_child(f"dec{s}", ResidualModule(c, c, rng))
                    for s in range(NUM_SKIP_LEVELS)]
        self.skip = [self.add_child(f"skip{s}", ResidualModule(c, c, rng))
                     for s in range(NUM_SKIP_LEVELS)]
        self.head1 = self.add_child("head1", Conv2d(c, c, 1, rng))
        self.head2 = self.add_child("head2", Conv2d(c, j, 1, rng, init_gain=0.25))
        self.pool = MaxPool2()
        self.up = UpsampleNearest2()
        self.relu = ReLU()

    def forward_train(self, x):
        skips, enc_caches, pool_caches = [], [], []
        for s in range(NUM_SKIP_LEVELS):
            x, ce = self.enc[s].forward_train(x)
            skips.append(x)
            enc_caches.append(ce)
            x, cp = self.pool.forward_train(x)
            pool_caches.append(cp)
        x, c_bottom = self.bottom.forward_train(x)
        dec_caches = []
        for s in reversed(range(NUM_SKIP_LEVELS)):
            x, cd = self.dec[s].forward_train(x)
            x, cu = self.up.forward_train(x)
            branch, ck = self.skip[s].forward_train(skips[s])
            # halve the two-branch merge so activations stay level with depth
            x = 0.5 * (x + branch)
            dec_caches.append((cd, cu, ck))
        feat, c_h1 = self.head1.forward_train(x)
        feat, c_hr = self.relu.forward_train(feat)
        preds, c_h2 = self.head2.forward_train(feat)
        cache = (enc_caches, pool_caches, c_bottom, dec_caches, c_h1, c_hr, c_h2)
        return (preds, skips, feat), cache

    def backward(self, dpreds, dfeat_extra, cache):
        enc_caches, pool_caches, c_bottom, dec_caches, c_h1, c_hr, c_h2 = cache
        dfeat = self.head2.backward(dpreds, c_h2)
        if dfeat_extra is not None:
            dfeat = dfeat + dfeat_extra
        dfeat = self.relu.backward(dfeat, c_hr)
        dx = self.head1.backward(dfeat, c_h1)
        # The decoder ran for s = 3, 2, 1, 0 (dec_caches in that order); undo
        # its steps last-to-first, collecting the gradient into each skip tap.
        dskips = [None] * NUM_SKIP_LEVELS
        for i in range(NUM_SKIP_LEVELS - 1, -1, -1):
            s = NUM_SKIP_LEVELS - 1 - i
            cd, cu, ck = dec_caches[i]
            dx = 0.5 * dx
            dskips[s] = self.skip[s].backward(dx, ck)
            dx = self.up.backward(dx, cu)
            dx = self.dec[s].backward(dx, cd)
        dx = self.bottom.backward(dx, c_bottom)
        for s in reversed(range(NUM_SKIP_LEVELS)):
            dx = self.pool.backward(dx, pool_caches[s])
            dx = dx + dskips[s]
            dx = self.enc[s].backward(dx, enc_caches[s])
        return dx


class PerceptronModel(Module):
    """View-specific perceptron. See :func:`build_perceptron`."""

    def __init__(self, cfg: PerceptronConfig, seed: int):
        super().__init__()
        self.config = cfg
        self.seed = seed
        rng = np.random.default_rng(np.random.PCG64(seed))
        self.stem = self.add_child("stem", _Stem(cfg, rng))
        self.stacks = [self.add_child(f"stack{k}", _HourglassStack(cfg, rng))
                       for k in range(cfg.num_stacks)]
        self.merge_pred = []
        self.merge_feat = []
        for k in range(cfg.num_stacks - 1):
            c, j = cfg.base_channels, cfg.num_joints
            self.merge_pred.append(self.add_child(f"merge_pred{k}", Conv2d(j, c, 1, rng)))
            self.merge_feat.append(self.add_child(f"merge_feat{k}", Conv2d(c, c, 1, rng)))

    def _check_input(self, x):
        r = self.config.input_resolution
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != r or x.shape[3] != r:
            raise ConfigError(f"expected image batch (B, 3, {r}, {r}), got {x.shape}")

    def forward_train(self, x):
        """Returns ((per-stack heatmaps, skip pyramid), cache)."""
        self._check_input(x)
        x, c_stem = self.stem.forward_train(x)
        all_preds, skips = [], None
        stack_caches, merge_caches = [], []
        for k, stack in enumerate(self.stacks):
            (preds, stack_skips, feat), ck = stack.forward_train(x)
            all_preds.append(preds)
            stack_caches.append(ck)
            skips = stack_skips
            if k < len(self.stacks) - 1:
                mp, cmp = self.merge_pred[k].forward_train(preds)
                mf, cmf = self.merge_feat[k].forward_train(feat)
                x = x + mp + mf
                merge_caches.append((cmp, cmf))
        return (all_preds, skips), (c_stem, stack_caches, merge_caches)

    def backward(self, dpreds_per_stack, cache):
        """Backpropagate per-stack heatmap gradients down to the image.

        ``dpreds_per_stack[k]`` may be None for unsupervised intermediate
        stacks; the final stack's gradient is required.
        """
        c_stem, stack_caches, merge_caches = cache
        last = len(self.stacks) - 1
        d = self.stacks[last].backward(dpreds_per_stack[last], None, stack_caches[last])
        for k in range(last - 1, -1, -1):
            # d holds dL/dx_{k+1} where x_{k+1} = x_k + MP(preds_k) + MF(feat_k).
            cmp, cmf = merge_caches[k]
            dpreds = self.merge_pred[k].backward(d, cmp)
            if dpreds_per_stack[k] is not None:
                dpreds = dpreds + dpreds_per_stack[k]
            dfeat = self.merge_feat[k].backward(d, cmf)
            d = d + self.stacks[k].backward(dpreds, dfeat, stack_caches[k])
        return self.stem.backward(d, c_stem)

    def forward(self, x) -> tuple[np.ndarray, list[np.ndarray]]:
        """Inference: image batch -> (heatmaps (B, J, r, r), skip pyramid).

        The skip pyramid is a list of four (B, C, h, h) arrays at resolutions
        r, r/2, r/4, r/8. Pure function of inputs and parameters.
        """
        (all_preds, skips), _ = self.forward_train(x)
        return all_preds[-1], skips


def build_perceptron(cfg: PerceptronConfig, seed: int = 0) -> PerceptronModel:
    """Construct a perceptron with seed-deterministic initial parameters."""
    return PerceptronModel(cfg, seed)
