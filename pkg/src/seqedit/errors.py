"""Exception types shared across the package."""


class SeqEditError(Exception):
    """Base class for everything this package raises on purpose."""


class ValidationError(SeqEditError):
    """Invalid input data, config, or checkpoint contents."""


class FormatError(ValidationError):
    """Malformed checkpoint container encountered while reading."""


class CompatibilityError(ValidationError):
    """Two checkpoints do not share the same tensor names/shapes."""


class ConfigError(ValidationError):
    """Invalid run configuration; message lists every violation found."""


class DivergenceError(SeqEditError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")


class StageError(SeqEditError):
    """A sequence aborted mid-run; records for the completed stages survive.

    ``records`` holds the StageRecord list accumulated before the failure so
    callers can persist partial progress instead of losing it.
    """

    def __init__(self, stage: int, method: str, records: list, cause: Exception):
        self.stage = stage
        self.method = method
        self.records = records
        super().__init__(f"stage {stage} ({method}) failed: {cause}")
