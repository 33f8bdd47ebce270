"""Sequential model editing: task-vector arithmetic over binary checkpoints,
plus a seeded continual-learning benchmark, metrics, and reporting."""

__version__ = "0.1.0"

from .checkpoint import (
    Checkpoint,
    digest,
    hash_bytes,
    read_checkpoint,
    validate_compatible,
    value_equal,
    write_checkpoint,
)
from .config import DEFAULT_CONFIG, SequenceConfig
from .editing import (
    MergeConfig,
    TrimSpec,
    apply,
    diff,
    edit_step,
    keep_count,
    sparsity_stats,
    trim,
)
from .errors import (
    CompatibilityError,
    ConfigError,
    DivergenceError,
    FormatError,
    SeqEditError,
    StageError,
    ValidationError,
)
from .metrics import MetricsTable, Table, awer, emit, metrics_to_table, stage_curve, werr
from .pipeline import (
    StageRecord,
    SweepPoint,
    compare_intermediate,
    lambda_sweep,
    run_sequence,
    run_stage,
)
from .seeding import rng_for, substream

__all__ = [
    "Checkpoint",
    "CompatibilityError",
    "ConfigError",
    "DEFAULT_CONFIG",
    "DivergenceError",
    "FormatError",
    "MergeConfig",
    "MetricsTable",
    "SeqEditError",
    "SequenceConfig",
    "StageError",
    "StageRecord",
    "SweepPoint",
    "Table",
    "TrimSpec",
    "ValidationError",
    "apply",
    "awer",
    "compare_intermediate",
    "diff",
    "digest",
    "edit_step",
    "emit",
    "hash_bytes",
    "keep_count",
    "lambda_sweep",
    "metrics_to_table",
    "read_checkpoint",
    "rng_for",
    "run_sequence",
    "run_stage",
    "sparsity_stats",
    "stage_curve",
    "substream",
    "trim",
    "validate_compatible",
    "value_equal",
    "werr",
    "write_checkpoint",
]
