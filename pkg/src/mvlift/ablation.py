"""Ablation suites: input variants, encoder variants, and view counts.

Each suite trains several arms under identical data, seeds, and budgets and
compares test-set 3D error. Within one seed, every arm shares the same
stage-1 perceptron and precomputed per-view features, so arms differ only in
the integrator they train.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .evaluation import MetricsReport, evaluate_mpjpe
from .integrator import (
    FusionInputVariant,
    IntegratorArch,
    IntegratorConfig,
    build_integrator,
    fuse_views,
)
from .perceptron import PerceptronConfig, build_perceptron
from .rig.dataset import Dataset
from .skeleton import denormalize_pose
from .training import (
    SplitArrays,
    TrainConfig,
    compute_view_features,
    load_split,
    stage1_config,
    stage2_config,
    train_stage1,
    train_stage2_on_features,
    _slice_fused,
)


class AblationSuite(str, Enum):
    INPUT_VARIANTS = "inputs"
    ENCODER_VARIANTS = "encoders"
    VIEW_COUNT = "views"


@dataclass(frozen=True)
class AblationArm:
    name: str
    arch: IntegratorArch
    variant: FusionInputVariant
    views: tuple[int, ...]


def suite_arms(suite: AblationSuite,
               views: tuple[int, ...] = (0, 1)) -> list[AblationArm]:
    """The arms of each suite, baselines first."""
    suite = AblationSuite(suite)
    hh = IntegratorArch.HALF_HOURGLASS
    if suite == AblationSuite.INPUT_VARIANTS:
        return [
            AblationArm("heatmaps_only", hh, FusionInputVariant.HEATMAPS_ONLY, views),
            AblationArm("heatmaps_plus_image", hh,
                        FusionInputVariant.HEATMAPS_PLUS_IMAGE, views),
            AblationArm("heatmaps_plus_skips", hh,
                        FusionInputVariant.HEATMAPS_PLUS_SKIPS, views),
        ]
    if suite == AblationSuite.ENCODER_VARIANTS:
        return [
            AblationArm("simple_encoder", IntegratorArch.SIMPLE_ENCODER,
                        FusionInputVariant.HEATMAPS_ONLY, views),
            AblationArm("half_hourglass", hh, FusionInputVariant.HEATMAPS_ONLY,
                        views),
        ]
    if suite == AblationSuite.VIEW_COUNT:
        arms = [AblationArm(f"single_view_{v}", hh,
                            FusionInputVariant.HEATMAPS_PLUS_SKIPS, (v,))
                for v in views]
        arms.append(AblationArm("two_view", hh,
                                FusionInputVariant.HEATMAPS_PLUS_SKIPS, views))
        return arms
    raise ConfigError(f"unknown suite {suite!r}")


@dataclass(frozen=True)
class AblationSettings:
    """Shared protocol for every arm of a suite."""

    perceptron: PerceptronConfig
    trunk_channels: tuple[int, ...] = (24, 32, 32, 32)
    encoder_channels: tuple[int, ...] = ()
    stage1: TrainConfig = field(default_factory=stage1_config)
    stage2: TrainConfig = field(default_factory=stage2_config)
    views: tuple[int, ...] = (0, 1)

    def integrator_config(self, arm: AblationArm) -> IntegratorConfig:
        pc = self.perceptron
        return IntegratorConfig(
            arch=arm.arch,
            variant=arm.variant,
            num_joints=pc.num_joints,
            num_views=len(arm.views),
            heatmap_resolution=pc.heatmap_resolution,
            skip_channels=(pc.skip_channels
                           if arm.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS
                           else ()),
            trunk_channels=self.trunk_channels,
            encoder_channels=self.encoder_channels,
        )


@dataclass
class ArmResult:
    suite: str
    arm: str
    seed: int
    report: MetricsReport

    def to_dict(self) -> dict:
        return {"suite": self.suite, "arm": self.arm, "seed": self.seed,
                "report": self.report.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArmResult":
        return cls(suite=d["suite"], arm=d["arm"], seed=d["seed"],
                   report=MetricsReport.from_dict(d["report"]))


@dataclass
class ComparisonTable:
    """All arm results of one suite plus derived comparisons."""

    suite: str
    arm_names: list[str]
    seeds: list[int]
    results: list[ArmResult] = field(default_factory=list)

    def arm_results(self, arm: str) -> list[ArmResult]:
        return [r for r in self.results if r.arm == arm]

    def mpjpe_values(self, arm: str) -> list[float]:
        return [r.report.overall_mean_mm for r in self.arm_results(arm)]

    def median_mpjpe(self, arm: str) -> float:
        vals = self.mpjpe_values(arm)
        if not vals:
            raise DataError(f"no results for arm {arm!r}")
        return float(np.median(vals))

    def error_reduction(self, baseline: str, improved: str) -> float:
        """Relative error reduction (a - b) / a of medians."""
        a = self.median_mpjpe(baseline)
        b = self.median_mpjpe(improved)
        return (a - b) / a

    def rows(self) -> list[dict]:
        """One row per (arm, seed, subject) for the metrics table."""
        out = []
        for r in self.results:
            for s in r.report.subjects:
                out.append({
                    "experiment": f"{r.suite}/{r.arm}/seed{r.seed}",
                    "subject": s.subject_id,
                    "n_frames": s.n_frames,
                    "mpjpe_mm": s.mean_mm,
                    "variance_mm2": s.variance_mm2,
                    "std_mm": s.std_mm,
                })
        return out

    def summary(self) -> dict:
        meds = {arm: self.median_mpjpe(arm) for arm in self.arm_names
                if self.arm_results(arm)}
        baseline = self.arm_names[0] if self.arm_names else None
        reductions = {}
        if baseline in meds:
            for arm, med in meds.items():
                reductions[arm] = (meds[baseline] - med) / meds[baseline]
        return {"suite": self.suite, "median_mpjpe_mm": meds,
                "error_reduction_vs_first_arm": reductions}

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "arm_names": self.arm_names,
            "seeds": self.seeds,
            "results": [r.to_dict() for r in self.results],
            "summary": self.summary(),
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
        return path

    @classmethod
    def load(cls, path) -> "ComparisonTable":
        with open(path) as f:
            d = json.load(f)
        table = cls(suite=d["suite"], arm_names=d["arm_names"], seeds=d["seeds"])
        table.results = [ArmResult.from_dict(r) for r in d["results"]]
        return table


def _subset_views(split: SplitArrays, views: tuple[int, ...]) -> SplitArrays:
    """Restrict a split to a subset of its loaded views (by position)."""
    pos = [split.views.index(v) for v in views]
    return SplitArrays(
        images=split.images[:, pos],
        hm_coords=split.hm_coords[:, pos],
        pose3d_mm=split.pose3d_mm,
        pose3d_norm=split.pose3d_norm,
        subject_ids=split.subject_ids,
        record_ids=split.record_ids,
        views=tuple(views),
        heatmap_resolution=split.heatmap_resolution,
    )


def run_ablation(suite: AblationSuite, dataset: Dataset,
                 settings: AblationSettings, seeds: Sequence[int],
                 out_dir=None, verbose: bool = False) -> ComparisonTable:
    """Train and evaluate every arm of a suite for every seed.

    All arms of one seed share the stage-1 perceptron, the data order, and
    the training budgets. Partial results are written to
    ``<out_dir>/<suite>_table.json`` after every arm so an aborted run keeps
    what it finished.
    """
    suite = AblationSuite(suite)
    if not seeds:
        raise ConfigError("need at least one seed")
    arms = suite_arms(suite, settings.views)
    table = ComparisonTable(suite=suite.value, arm_names=[a.name for a in arms],
                            seeds=[int(s) for s in seeds])
    out_path = (Path(out_dir) / f"{suite.value}_table.json") if out_dir else None

    pc = settings.perceptron
    train_split = load_split(dataset, "train", pc.input_resolution,
                             pc.heatmap_resolution, settings.views)
    test_split = load_split(dataset, "test", pc.input_resolution,
                            pc.heatmap_resolution, settings.views)

    need_skips = any(a.variant == FusionInputVariant.HEATMAPS_PLUS_SKIPS
                     for a in arms)
    need_images = any(a.variant == FusionInputVariant.HEATMAPS_PLUS_IMAGE
                      for a in arms)

    try:
        for seed in seeds:
            perceptron = build_perceptron(pc, seed=seed)
            s1 = replace(settings.stage1, seed=seed)
            train_stage1(perceptron, train_split, s1)
            feats_train = compute_view_features(perceptron, train_split,
                                                need_skips, need_images)
            feats_test = compute_view_features(perceptron, test_split,
                                               need_skips, need_images)
            for arm in arms:
                pos = [settings.views.index(v) for v in arm.views]
                fused_train = fuse_views([feats_train[p] for p in pos], arm.variant)
                fused_test = fuse_views([feats_test[p] for p in pos], arm.variant)
                integ = build_integrator(settings.integrator_config(arm), seed=seed)
                s2 = replace(settings.stage2, seed=seed)
                train_stage2_on_features(integ, fused_train,
                                         train_split.pose3d_norm, s2)
                report = _evaluate_on_features(integ, fused_test, test_split,
                                               dataset, arm, seed, suite)
                table.results.append(ArmResult(suite=suite.value, arm=arm.name,
                                               seed=int(seed), report=report))
                if verbose:
                    print(f"[{suite.value}] seed={seed} arm={arm.name}: "
                          f"{report.overall_mean_mm:.2f} mm")
                if out_path is not None:
                    table.save(out_path)
    except Exception:
        if out_path is not None:
            table.save(out_path)
        raise
    return table


def _evaluate_on_features(integ, fused_test, test_split: SplitArrays,
                          dataset: Dataset, arm: AblationArm, seed: int,
                          suite: AblationSuite) -> MetricsReport:
    from .evaluation import build_report

    n = test_split.num_items
    preds = []
    for start in range(0, n, 64):
        idx = np.arange(start, min(start + 64, n))
        preds.append(integ.forward(_slice_fused(fused_test, idx)))
    pred_mm = denormalize_pose(np.concatenate(preds, axis=0),
                               dataset.norm_params)
    dists = np.sqrt(np.sum((pred_mm - test_split.pose3d_mm) ** 2, axis=-1))
    return build_report(
        experiment=f"{suite.value}/{arm.name}/seed{seed}",
        errors_mm=dists.mean(axis=1),
        per_joint_errors=dists.mean(axis=0),
        subject_ids=test_split.subject_ids,
        metadata={"suite": suite.value, "arm": arm.name, "seed": int(seed),
                  "arch": arm.arch.value, "variant": arm.variant.value,
                  "views": list(arm.views)},
    )
