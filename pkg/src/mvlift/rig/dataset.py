"""On-disk dataset builder and loader.

Layout under the dataset root::

    index.json                          # everything except pixels
    images/<sequence>/<cam>/f<frame>.png

The index is versioned JSON (format documented in the project README):
cameras, subjects, normalization parameters, and one record per kept frame
with per-view image paths, per-view 2D joints + visibility, 3D joints (mm),
occlusion flags, task metadata, and the train/test split label. Repetition 1
is the training split, repetition 2 the test split. Only odd frames of each
trajectory are kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..errors import ConfigError, DataError, StorageError
from ..skeleton import (
    CameraModel,
    NormParams,
    Pose2D,
    camera_looking_at,
    fit_norm_params,
    project_to_view,
)
from .render import OccluderRegion, RenderStyle, apply_occluder, render_view
from .subjects import SubjectProfile, default_subjects
from .trajectory import LiftTask, VerticalRange, full_task_grid, generate_lift_trajectory

FORMAT_VERSION = 1


@dataclass(frozen=True)
class CameraRig:
    """Placement of the synthetic cameras on a ring around the workspace."""

    azimuths_deg: tuple[float, ...] = (90.0, 135.0)
    distance_mm: float = 3500.0
    height_mm: float = 1300.0
    focal_px: float = 300.0
    image_size: int = 256
    target_height_mm: float = 900.0

    def build(self) -> list[CameraModel]:
        cams = []
        target = np.array([0.0, 0.0, self.target_height_mm])
        for i, az in enumerate(self.azimuths_deg):
            a = np.deg2rad(az)
            pos = np.array([self.distance_mm * np.cos(a),
                            self.distance_mm * np.sin(a),
                            self.height_mm])
            cams.append(camera_looking_at(pos, target, self.focal_px,
                                          (self.image_size, self.image_size),
                                          cam_id=f"cam{i}"))
        return cams

    def to_dict(self) -> dict:
        return {
            "azimuths_deg": list(self.azimuths_deg),
            "distance_mm": self.distance_mm,
            "height_mm": self.height_mm,
            "focal_px": self.focal_px,
            "image_size": self.image_size,
            "target_height_mm": self.target_height_mm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraRig":
        d = dict(d)
        d["azimuths_deg"] = tuple(d.get("azimuths_deg", (90.0, 135.0)))
        return cls(**d)


@dataclass(frozen=True)
class OccluderSpec:
    """Inject a distractor rectangle into one view of every frame.

    The rectangle tracks the projected load position (wrist midpoint) with
    seeded jitter, so it frequently hides the most informative joints of the
    occluded view.
    """

    view_index: int
    size_frac: float = 0.24
    jitter_frac: float = 0.10

    def region_for(self, rng: np.random.Generator, wrist_mid_px: np.ndarray,
                   image_size: int) -> OccluderRegion:
        side = int(round(self.size_frac * image_size))
        jitter = rng.uniform(-self.jitter_frac, self.jitter_frac, size=2) * image_size
        cx, cy = wrist_mid_px + jitter
        return OccluderRegion(x=int(round(cx - side / 2)),
                              y=int(round(cy - side / 2)),
                              width=side, height=side)

    def to_dict(self) -> dict:
        return {"view_index": self.view_index, "size_frac": self.size_frac,
                "jitter_frac": self.jitter_frac}


@dataclass
class DatasetRecord:
    record_id: str
    sequence_id: str
    subject_id: int
    vertical_range: str
    end_angle_deg: float
    repetition: int
    frame_index: int
    split: str
    image_paths: list[str]
    pose2d: list[Pose2D]
    pose3d: np.ndarray
    occluded: Optional[list[np.ndarray]] = None
    occluder: Optional[list[Optional[OccluderRegion]]] = None


@dataclass
class Dataset:
    root: Path
    cameras: list[CameraModel]
    norm_params: NormParams
    subjects: list[SubjectProfile]
    records: list[DatasetRecord]
    seed: int
    rig: Optional[CameraRig] = None

    def split(self, name: str) -> list[DatasetRecord]:
        if name not in ("train", "test"):
            raise DataError(f"unknown split {name!r}")
        return [r for r in self.records if r.split == name]

    def load_image(self, record: DatasetRecord, view: int) -> np.ndarray:
        path = self.root / record.image_paths[view]
        if not path.exists():
            raise StorageError(f"missing image file {path}")
        arr = np.asarray(Image.open(path), dtype=np.float64) / 255.0
        return arr


def save_image_png(path: Path, img: np.ndarray):
    """8-bit PNG with deterministic bytes for identical pixels."""
    arr = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def _pose2d_to_json(p: Pose2D) -> list[list]:
    return [[float(x), float(y), bool(v)]
            for (x, y), v in zip(p.coords, p.visible)]


def _pose2d_from_json(rows: list[list]) -> Pose2D:
    coords = np.array([[r[0], r[1]] for r in rows], dtype=np.float64)
    visible = np.array([r[2] for r in rows], dtype=bool)
    return Pose2D(coords=coords, visible=visible)


def build_dataset(subjects: Sequence[SubjectProfile],
                  tasks: Sequence[tuple],
                  cameras: Sequence[CameraModel],
                  seed: int,
                  out_dir,
                  *,
                  duration_frames: int = 200,
                  fps: float = 30.0,
                  overwrite: bool = False,
                  occluder: Optional[OccluderSpec] = None,
                  norm_fit: str = "train",
                  style: RenderStyle = RenderStyle(),
                  rig: Optional[CameraRig] = None) -> Dataset:
    """Generate, render, and write the dataset; returns the loaded view of it.

    Args:
        subjects: subject pool; every subject performs every task.
        tasks: (vertical_range, end_angle_deg, repetition) triples, e.g.
            :func:`full_task_grid`.
        cameras: the view cameras, ascending view index.
        seed: master seed; all motion jitter and occluder placement derive
            from it.
        out_dir: dataset root; refuses an existing index unless ``overwrite``.
        norm_fit: "train" fits normalization on repetition-1 poses only;
            "all" uses every record.
    """
    if not cameras:
        raise ConfigError("need at least one camera")
    if norm_fit not in ("train", "all"):
        raise ConfigError(f"norm_fit must be 'train' or 'all', got {norm_fit!r}")
    if occluder is not None and not (0 <= occluder.view_index < len(cameras)):
        raise ConfigError(f"occluder view {occluder.view_index} out of range")
    root = Path(out_dir)
    index_path = root / "index.json"
    if index_path.exists() and not overwrite:
        raise StorageError(f"dataset already exists at {index_path}; pass "
                           f"overwrite=True to replace it")
    root.mkdir(parents=True, exist_ok=True)

    subjects = sorted(subjects, key=lambda s: s.subject_id)
    records: list[DatasetRecord] = []
    train_poses = []
    all_poses = []

    for subject in subjects:
        for vertical_range, end_angle, repetition in tasks:
            task = LiftTask(vertical_range=vertical_range,
                            end_angle_deg=end_angle,
                            repetition=repetition,
                            subject_id=subject.subject_id,
                            duration_frames=duration_frames,
                            fps=fps)
            trajectory = generate_lift_trajectory(task, subject, seed)
            split = "train" if repetition == 1 else "test"
            seq = task.sequence_name
            occ_rng = np.random.default_rng(np.random.PCG64(np.random.SeedSequence(
                [seed, 0x0CC, subject.subject_id,
                 list(VerticalRange).index(task.vertical_range),
                 int(end_angle), repetition])))
            for frame_index in range(1, duration_frames, 2):
                pose3d = trajectory[frame_index]
                all_poses.append(pose3d)
                if split == "train":
                    train_poses.append(pose3d)
                image_paths, poses2d = [], []
                occluded_flags: list[np.ndarray] = []
                occ_regions: list[Optional[OccluderRegion]] = []
                for v, cam in enumerate(cameras):
                    p2d = project_to_view(pose3d, cam)
                    img = render_view(pose3d, cam, style)
                    region = None
                    flags = np.zeros(p2d.coords.shape[0], dtype=bool)
                    if occluder is not None and v == occluder.view_index:
                        wrist_mid = 0.5 * (p2d.coords[6] + p2d.coords[7])
                        region = occluder.region_for(occ_rng, wrist_mid,
                                                     cam.image_size[0])
                        img, flags = apply_occluder(img, region, p2d)
                    rel = f"images/{seq}/{cam.cam_id}/f{frame_index:04d}.png"
                    save_image_png(root / rel, img)
                    image_paths.append(rel)
                    poses2d.append(p2d)
                    occluded_flags.append(flags)
                    occ_regions.append(region)
                records.append(DatasetRecord(
                    record_id=f"{seq}_f{frame_index:04d}",
                    sequence_id=seq,
                    subject_id=subject.subject_id,
                    vertical_range=VerticalRange(vertical_range).value,
                    end_angle_deg=float(end_angle),
                    repetition=repetition,
                    frame_index=frame_index,
                    split=split,
                    image_paths=image_paths,
                    pose2d=poses2d,
                    pose3d=pose3d,
                    occluded=occluded_flags if occluder is not None else None,
                    occluder=occ_regions if occluder is not None else None,
                ))

    fit_on = train_poses if norm_fit == "train" else all_poses
    if not fit_on:
        raise DataError("dataset has no training poses to fit normalization")
    norm = fit_norm_params(fit_on)

    index = {
        "format_version": FORMAT_VERSION,
        "seed": int(seed),
        "norm_params": {**norm.to_dict(), "fitted_on": norm_fit},
        "cameras": [c.to_dict() for c in cameras],
        "camera_rig": rig.to_dict() if rig is not None else None,
        "occluder": occluder.to_dict() if occluder is not None else None,
        "subjects": [s.to_dict() for s in subjects],
        "duration_frames": duration_frames,
        "fps": fps,
        "records": [
            {
                "record_id": r.record_id,
                "sequence_id": r.sequence_id,
                "subject_id": r.subject_id,
                "vertical_range": r.vertical_range,
                "end_angle_deg": r.end_angle_deg,
                "repetition": r.repetition,
                "frame_index": r.frame_index,
                "split": r.split,
                "images": r.image_paths,
                "pose2d": [_pose2d_to_json(p) for p in r.pose2d],
                "pose3d": [[float(v) for v in row] for row in r.pose3d],
                "occluded": ([f.tolist() for f in r.occluded]
                             if r.occluded is not None else None),
                "occluder": ([reg.to_list() if reg is not None else None
                              for reg in r.occluder]
                             if r.occluder is not None else None),
            }
            for r in records
        ],
    }
    tmp = index_path.with_suffix(".json.tmp")
    with open(tmp, "w") as f:
        json.dump(index, f, indent=1, sort_keys=True)
        f.write("\n")
    tmp.replace(index_path)
    return load_dataset(root)


def load_dataset(root) -> Dataset:
    root = Path(root)
    index_path = root / "index.json"
    if not index_path.exists():
        raise StorageError(f"no dataset index at {index_path}")
    with open(index_path) as f:
        index = json.load(f)
    version = index.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported dataset format version {version!r}")
    cameras = [CameraModel.from_dict(d) for d in index["cameras"]]
    norm = NormParams.from_dict(index["norm_params"])
    subjects = [SubjectProfile.from_dict(d) for d in index["subjects"]]
    records = []
    for rd in index["records"]:
        occluded = None
        if rd.get("occluded") is not None:
            occluded = [np.array(f, dtype=bool) for f in rd["occluded"]]
        occluder = None
        if rd.get("occluder") is not None:
            occluder = [OccluderRegion(*reg) if reg is not None else None
                        for reg in rd["occluder"]]
        records.append(DatasetRecord(
            record_id=rd["record_id"],
            sequence_id=rd["sequence_id"],
            subject_id=rd["subject_id"],
            vertical_range=rd["vertical_range"],
            end_angle_deg=rd["end_angle_deg"],
            repetition=rd["repetition"],
            frame_index=rd["frame_index"],
            split=rd["split"],
            image_paths=rd["images"],
            pose2d=[_pose2d_from_json(p) for p in rd["pose2d"]],
            pose3d=np.array(rd["pose3d"], dtype=np.float64),
            occluded=occluded,
            occluder=occluder,
        ))
    rig = (CameraRig.from_dict(index["camera_rig"])
           if index.get("camera_rig") else None)
    return Dataset(root=root, cameras=cameras, norm_params=norm,
                   subjects=subjects, records=records,
                   seed=index.get("seed", 0), rig=rig)


def build_default_dataset(out_dir, *, n_subjects: int = 4, seed: int = 0,
                          duration_frames: int = 200,
                          rig: CameraRig = CameraRig(),
                          occluder: Optional[OccluderSpec] = None,
                          overwrite: bool = False,
                          norm_fit: str = "train") -> Dataset:
    """Full 18-task grid for a default subject pool and two-camera rig."""
    subjects = default_subjects(n_subjects, seed=seed)
    cameras = rig.build()
    return build_dataset(subjects, full_task_grid(), cameras, seed, out_dir,
                         duration_frames=duration_frames, overwrite=overwrite,
                         occluder=occluder, norm_fit=norm_fit, rig=rig)
