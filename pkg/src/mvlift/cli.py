"""Command-line interface.

Subcommands: ``synth``, ``train-2d``, ``train-3d``, ``eval``,
``ablate --suite {inputs|encoders|views}``, ``report``. Common flags:
``--config <json-file>``, ``--seed``, ``--out``. Exit code is 0 on success;
failures print one JSON line ``{"error": {"category": ..., "message": ...}}``
to stderr and exit with the category's code (see ``mvlift.errors``).

The config file is a JSON document whose keys override the defaults returned
by :func:`default_config`; unknown keys are rejected. The full schema is
documented in the README.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import AblationSettings, AblationSuite, ComparisonTable, run_ablation
from .checkpoint import load_integrator, load_perceptron, save_checkpoint
from .errors import EXIT_CODES, ConfigError, DataError, MvliftError, StorageError
from .evaluation import MetricsReport, evaluate_mpjpe
from .integrator import IntegratorConfig, build_integrator
from .perceptron import PerceptronConfig, build_perceptron
from .report import emit_report
from .rig.dataset import CameraRig, OccluderSpec, build_default_dataset, load_dataset
from .training import (
    TrainConfig,
    load_split,
    stage1_config,
    stage2_config,
    train_stage1,
    train_stage2,
)


def default_config() -> dict:
    """Built-in configuration; a --config file overrides any subset of it."""
    return {
        "seed": 0,
        "views": [0, 1],
        "dataset": {
            "n_subjects": 4,
            "duration_frames": 200,
            "fps": 30.0,
            "norm_fit": "train",
            "occluder": None,
            "rig": {
                "azimuths_deg": [90.0, 135.0],
                "distance_mm": 3500.0,
                "height_mm": 1300.0,
                "focal_px": 300.0,
                "image_size": 256,
                "target_height_mm": 900.0,
            },
        },
        "perceptron": {
            "num_joints": 14,
            "input_resolution": 256,
            "heatmap_resolution": 64,
            "base_channels": 16,
            "num_stacks": 1,
        },
        "integrator": {
            "arch": "half_hourglass",
            "variant": "heatmaps_plus_skips",
            "trunk_channels": [24, 32, 32, 32],
            "encoder_channels": [],
        },
        "train_stage1": {
            "learning_rate": 0.00025,
            "epochs": 5,
            "batch_size": 8,
            "optimizer": "adam",
            "loss_kind": "euclidean",
        },
        "train_stage2": {
            "learning_rate": 0.0005,
            "epochs": 20,
            "batch_size": 8,
            "optimizer": "adam",
        },
    }


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str | None, seed_override: int | None = None) -> dict:
    cfg = default_config()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise StorageError(f"config file not found: {p}")
        try:
            with open(p) as f:
                user = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {p} is not valid JSON: {e}")
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, user)
    if seed_override is not None:
        cfg["seed"] = seed_override
    return cfg


def _perceptron_config(cfg: dict) -> PerceptronConfig:
    return PerceptronConfig(**cfg["perceptron"])


def _integrator_config(cfg: dict, num_views: int) -> IntegratorConfig:
    ic = cfg["integrator"]
    pc = _perceptron_config(cfg)
    return IntegratorConfig(
        arch=ic["arch"],
        variant=ic["variant"],
        num_joints=pc.num_joints,
        num_views=num_views,
        heatmap_resolution=pc.heatmap_resolution,
        skip_channels=(pc.skip_channels
                       if ic["variant"] == "heatmaps_plus_skips" else ()),
        trunk_channels=tuple(ic["trunk_channels"]),
        encoder_channels=tuple(ic["encoder_channels"]),
    )


def _train_config(section: dict, stage: str, seed: int) -> TrainConfig:
    maker = stage1_config if stage == "stage1" else stage2_config
    return maker(seed=seed, **section)


def cmd_synth(args) -> int:
    cfg = load_config(args.config, args.seed)
    ds_cfg = cfg["dataset"]
    rig = CameraRig.from_dict(ds_cfg["rig"])
    occluder = (OccluderSpec(**ds_cfg["occluder"])
                if ds_cfg.get("occluder") else None)
    dataset = build_default_dataset(
        args.out,
        n_subjects=ds_cfg["n_subjects"],
        seed=cfg["seed"],
        duration_frames=ds_cfg["duration_frames"],
        rig=rig,
        occluder=occluder,
        overwrite=args.overwrite,
        norm_fit=ds_cfg["norm_fit"],
    )
    print(f"wrote {len(dataset.records)} records "
          f"({len(dataset.split('train'))} train / {len(dataset.split('test'))} "
          f"test) to {dataset.root}")
    return 0


def cmd_train_2d(args) -> int:
    cfg = load_config(args.config, args.seed)
    dataset = load_dataset(args.data)
    pc = _perceptron_config(cfg)
    views = tuple(cfg["views"])
    split = load_split(dataset, "train", pc.input_resolution,
                       pc.heatmap_resolution, views)
    model = build_perceptron(pc, seed=cfg["seed"])
    model, curve = train_stage1(model, split,
                                _train_config(cfg["train_stage1"], "stage1",
                                              cfg["seed"]))
    save_checkpoint(args.out, model,
                    metadata={"stage": "stage1_2d", "views": list(views),
                              "loss_curve": curve, "dataset_seed": dataset.seed})
    print(f"stage-1 loss per epoch: {[round(v, 6) for v in curve]}")
    print(f"saved perceptron checkpoint to {args.out}")
    return 0


def cmd_train_3d(args) -> int:
    cfg = load_config(args.config, args.seed)
    dataset = load_dataset(args.data)
    perceptron, _ = load_perceptron(args.perceptron)
    pc = perceptron.config
    views = tuple(cfg["views"])
    split = load_split(dataset, "train", pc.input_resolution,
                       pc.heatmap_resolution, views)
    integ = build_integrator(_integrator_config(cfg, len(views)),
                             seed=cfg["seed"])
    integ, curve = train_stage2(integ, perceptron, split,
                                _train_config(cfg["train_stage2"], "stage2",
                                              cfg["seed"]))
    save_checkpoint(args.out, integ,
                    metadata={"stage": "stage2_3d", "views": list(views),
                              "loss_curve": curve, "dataset_seed": dataset.seed,
                              "perceptron_checkpoint": str(args.perceptron)})
    print(f"stage-2 loss per epoch: {[round(v, 6) for v in curve]}")
    print(f"saved integrator checkpoint to {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.data)
    perceptron, _ = load_perceptron(args.perceptron)
    integ, meta = load_integrator(args.integrator)
    views = tuple(meta.get("views", range(integ.config.num_views)))
    if len(views) != integ.config.num_views:
        raise ConfigError(f"checkpoint view order {views} does not match "
                          f"integrator num_views {integ.config.num_views}")
    pc = perceptron.config
    split = load_split(dataset, args.split, pc.input_resolution,
                       pc.heatmap_resolution, views)
    report = evaluate_mpjpe(perceptron, integ, split, dataset.norm_params,
                            experiment=f"eval/{args.split}",
                            metadata={"views": list(views)})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        json.dump(report.to_dict(), f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"MPJPE {report.overall_mean_mm:.2f} mm "
          f"(+/- {report.overall_std_frames_mm:.2f} over frames, "
          f"+/- {report.overall_std_subjects_mm:.2f} over subjects) "
          f"on {report.n_frames} frames")
    print(f"wrote report to {out}")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, args.seed)
    dataset = load_dataset(args.data)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg["seed"]]
    settings = AblationSettings(
        perceptron=_perceptron_config(cfg),
        trunk_channels=tuple(cfg["integrator"]["trunk_channels"]),
        encoder_channels=tuple(cfg["integrator"]["encoder_channels"]),
        stage1=_train_config(cfg["train_stage1"], "stage1", cfg["seed"]),
        stage2=_train_config(cfg["train_stage2"], "stage2", cfg["seed"]),
        views=tuple(cfg["views"]),
    )
    table = run_ablation(AblationSuite(args.suite), dataset, settings, seeds,
                         out_dir=args.out, verbose=True)
    summary = table.summary()
    print(json.dumps(summary, indent=1, sort_keys=True))
    reports = [r.report for r in table.results]
    emit_report(reports, args.out)
    print(f"wrote table and charts to {args.out}")
    return 0


def _load_reports(paths: list[str]) -> list[MetricsReport]:
    reports: list[MetricsReport] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files = sorted(p.glob("*.json"))
            if not files:
                raise DataError(f"no .json report files in {p}")
            reports.extend(_load_reports([str(f) for f in files]))
            continue
        if not p.exists():
            raise StorageError(f"no such report file: {p}")
        with open(p) as f:
            d = json.load(f)
        if "results" in d:  # a comparison table
            for r in d["results"]:
                reports.append(MetricsReport.from_dict(r["report"]))
        elif "experiment" in d:
            reports.append(MetricsReport.from_dict(d))
        else:
            raise DataError(f"{p} is neither a metrics report nor a "
                            f"comparison table")
    return reports


def cmd_report(args) -> int:
    reports = _load_reports(args.inputs)
    written = emit_report(reports, args.out)
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvlift",
        description="Multi-view 3D pose estimation for lifting motions: "
                    "synthetic data, two-stage training, evaluation, and "
                    "ablations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config file overriding defaults")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")

    p = sub.add_parser("synth", help="build a synthetic dataset")
    common(p)
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--overwrite", action="store_true",
                   help="replace an existing dataset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-2d", help="stage 1: train the view perceptron")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="perceptron checkpoint path")
    p.set_defaults(func=cmd_train_2d)

    p = sub.add_parser("train-3d", help="stage 2: train the multi-view integrator")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--perceptron", required=True,
                   help="stage-1 checkpoint (kept frozen)")
    p.add_argument("--out", required=True, help="integrator checkpoint path")
    p.set_defaults(func=cmd_train_3d)

    p = sub.add_parser("eval", help="evaluate 3D error on a split")
    p.add_argument("--data", required=True)
    p.add_argument("--perceptron", required=True)
    p.add_argument("--integrator", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--out", required=True, help="metrics report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run one ablation suite")
    common(p)
    p.add_argument("--suite", required=True,
                   choices=[s.value for s in AblationSuite])
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", help="comma-separated seeds (default: config seed)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="emit metrics table and charts")
    p.add_argument("inputs", nargs="+",
                   help="report/table JSON files or directories of them")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MvliftError as e:
        print(json.dumps({"error": {"category": e.category, "message": str(e)}}),
              file=sys.stderr)
        return EXIT_CODES.get(e.category, EXIT_CODES["internal"])
    except OSError as e:
        print(json.dumps({"error": {"category": "io", "message": str(e)}}),
              file=sys.stderr)
        return EXIT_CODES["io"]
    except Exception as e:  # keep the contract: nonzero + category on stderr
        print(json.dumps({"error": {"category": "internal",
                                    "message": f"{type(e).__name__}: {e}"}}),
              file=sys.stderr)
        return EXIT_CODES["internal"]


if __name__ == "__main__":
    sys.exit(main())
