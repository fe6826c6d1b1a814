"""Exception hierarchy shared across the package.

Every error carries a machine-readable ``category`` that the CLI maps to an
exit code, so scripted callers can branch on failure class without parsing
messages.
"""


class MvliftError(Exception):
    """Base class for all package errors."""

    category = "internal"


class ConfigError(MvliftError):
    """Invalid configuration: bad shapes, unknown keys, impossible settings."""

    category = "config"


class UnsupportedCombinationError(ConfigError):
    """Architecture/input-variant pairing that the integrator cannot support."""


class DataError(MvliftError):
    """Invalid or inconsistent data: poses, splits, dataset files."""

    category = "data"


class GeometryError(DataError):
    """Geometric preconditions violated (e.g. a joint behind the camera)."""


class TrainingDivergedError(MvliftError):
    """Loss became non-finite during training."""

    category = "training"

    def __init__(self, epoch, batch, loss):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class StorageError(MvliftError):
    """Filesystem-level failure (missing files, refuse-to-overwrite)."""

    category = "io"


#: Exit codes by error category, used by the CLI.
EXIT_CODES = {
    "config": 2,
    "data": 3,
    "training": 4,
    "io": 5,
    "internal": 70,
}
