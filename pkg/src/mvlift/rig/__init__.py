from .dataset import (
    CameraRig,
    Dataset,
    DatasetRecord,
    OccluderSpec,
    build_dataset,
    build_default_dataset,
    load_dataset,
    save_image_png,
)
from .render import OccluderRegion, RenderStyle, apply_occluder, render_view
from .subjects import SubjectProfile, default_subjects
from .trajectory import (
    END_ANGLES_DEG,
    FLOOR_FRAC,
    KNUCKLE_FRAC,
    SHOULDER_FRAC,
    LiftTask,
    VerticalRange,
    full_task_grid,
    generate_lift_trajectory,
    wrist_azimuth_deg,
)

__all__ = [
    "CameraRig", "Dataset", "DatasetRecord", "END_ANGLES_DEG", "FLOOR_FRAC",
    "KNUCKLE_FRAC", "LiftTask", "OccluderRegion", "OccluderSpec",
    "RenderStyle", "SHOULDER_FRAC", "SubjectProfile", "VerticalRange",
    "apply_occluder", "build_dataset", "build_default_dataset",
    "default_subjects", "full_task_grid", "generate_lift_trajectory",
    "load_dataset", "render_view", "save_image_png", "wrist_azimuth_deg",
]
