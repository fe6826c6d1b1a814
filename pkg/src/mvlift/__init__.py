"""Multi-view 3D human pose estimation for lifting motions.

A numpy library implementing a two-network pipeline: per-view hourglass
perceptrons that emit joint heatmaps plus hierarchical skip features, and a
multi-view integration encoder that regresses normalized 3D joint
coordinates. Ships with a synthetic multi-camera lifting-motion rig, a
two-stage training harness, MPJPE evaluation, and an ablation suite runner.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    GeometryError,
    MvliftError,
    StorageError,
    TrainingDivergedError,
    UnsupportedCombinationError,
)
from .skeleton import (
    BONES,
    NUM_JOINTS,
    PARENT,
    CameraModel,
    JointId,
    NormParams,
    Pose2D,
    bone_lengths,
    camera_looking_at,
    denormalize_pose,
    fit_norm_params,
    in_unit_range,
    normalize_pose,
    project_to_view,
)
from .heatmaps import (
    decode_heatmap,
    decode_heatmaps,
    heatmap_loss,
    heatmap_loss_grad,
    image_to_heatmap_coords,
    render_heatmap,
    render_heatmap_batch,
    render_heatmaps,
)
from .perceptron import PerceptronConfig, PerceptronModel, build_perceptron
from .integrator import (
    FusedInput,
    FusionInputVariant,
    IntegratorArch,
    IntegratorConfig,
    IntegratorModel,
    ViewFeatures,
    build_integrator,
    fuse_views,
    integrator_forward,
    pose_loss,
    pose_loss_grad,
)
from .training import (
    SplitArrays,
    Stage,
    TrainConfig,
    load_split,
    stage1_config,
    stage1_loss,
    stage2_config,
    stage2_loss,
    fuse_split,
    train_stage1,
    train_stage2,
)
from .evaluation import MetricsReport, SubjectMetrics, evaluate_mpjpe, mpjpe_mm
from .ablation import (
    AblationArm,
    AblationSettings,
    AblationSuite,
    ComparisonTable,
    run_ablation,
    suite_arms,
)
from .report import emit_report, write_metrics_table
from .checkpoint import (
    load_integrator,
    load_perceptron,
    read_checkpoint,
    save_checkpoint,
)
from . import rig

__all__ = [name for name in dir() if not name.startswith("_")]
