"""Parameter-space arithmetic on checkpoints.

Task-vector construction (fine-tuned minus base), magnitude trimming that
keeps only the largest entries, scaled application back onto a base model,
and the combined per-stage edit step. All operations are pure functions on
immutable checkpoints and are bit-deterministic.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .checkpoint import (
    KIND_DELTA,
    KIND_MODEL,
    Checkpoint,
    digest,
    validate_compatible,
)
from .errors import ValidationError

SCOPE_GLOBAL = "global"
SCOPE_PER_TENSOR = "per-tensor"

METHOD_TASK_ARITHMETIC = "task-arithmetic"
METHOD_TIES = "ties"


@dataclass(frozen=True)
class TrimSpec:
    """Magnitude-trim parameters.

    ``k`` is the retained fraction in (0, 1]. Scope "global" pools every
    parameter before ranking; "per-tensor" ranks within each tensor. Exactly
    ceil(k*N) entries are kept; ties at the threshold magnitude are resolved
    in canonical order (lexicographic tensor name, then ascending flat index).
    """

    k: float
    scope: str = SCOPE_GLOBAL
    tie_policy: str = "keep-count"

    def __post_init__(self):
        if not (isinstance(self.k, (int, float)) and math.isfinite(self.k) and 0 < self.k <= 1):
            raise ValidationError(f"trim fraction k must be in (0, 1], got {self.k!r}")
        if self.scope not in (SCOPE_GLOBAL, SCOPE_PER_TENSOR):
            raise ValidationError(f"unknown trim scope {self.scope!r}")
        if self.tie_policy != "keep-count":
            raise ValidationError(f"unknown tie policy {self.tie_policy!r}")


@dataclass(frozen=True)
class MergeConfig:
    """How a task vector is merged into the base model.

    ``lam`` is the scaling factor on the task vector: 0 leaves the base
    untouched, 1 adopts the fine-tune fully. Values above 1 are permitted
    for sweep experiments but flagged with a warning.
    """

    method: str
    lam: float
    trim: TrimSpec | None = None

    def __post_init__(self):
        if self.method not in (METHOD_TASK_ARITHMETIC, METHOD_TIES):
            raise ValidationError(f"unknown merge method {self.method!r}")
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if self.method == METHOD_TIES and self.trim is None:
            raise ValidationError("ties merging requires a trim spec")
        if self.lam > 1:
            warnings.warn(f"lambda={self.lam} outside [0, 1]", stacklevel=2)


def keep_count(k: float, n: int) -> int:
    """ceil(k*n), guarded against float noise in decimal k (0.1*1000 != 100.0)."""
    return min(n, max(1, math.ceil(k * n - 1e-9)))


def _check_finite(tensors: dict[str, np.ndarray], what: str) -> None:
    for name, arr in tensors.items():
        flat = arr.reshape(-1)
        if not np.isfinite(flat).all():
            idx = int(np.flatnonzero(~np.isfinite(flat))[0])
            raise ValidationError(f"non-finite {what} in tensor {name!r} at flat index {idx}")


def diff(finetuned: Checkpoint, base: Checkpoint) -> Checkpoint:
    """Task vector: elementwise fine-tuned minus base.

    Both inputs must be model checkpoints with identical names/shapes. The
    result is a delta checkpoint whose meta records both source digests and
    inherits the fine-tuned model's stage.
    """
    validate_compatible(finetuned, base)
    if finetuned.kind != KIND_MODEL or base.kind != KIND_MODEL:
        raise ValidationError(
            f"diff expects two model checkpoints, got {finetuned.kind!r} and {base.kind!r}"
        )
    out = {n: finetuned.tensors[n] - base.tensors[n] for n in finetuned.tensors}
    _check_finite(out, "difference")
    meta = {
        "kind": KIND_DELTA,
        "stage": str(finetuned.stage),
        "finetuned_digest": digest(finetuned),
        "base_digest": digest(base),
    }
    return Checkpoint(out, meta)


def _keep_mask(values: list[np.ndarray], k: float) -> np.ndarray:
    """Boolean keep-mask over the canonical concatenation of ``values``.

    Keeps the ceil(k*N) entries of largest magnitude; entries tied at the
    threshold magnitude are kept in canonical-position order until the count
    is exact. Selection runs on a partition + threshold pass, so a full sort
    is never needed.
    """
    mag = np.abs(np.concatenate([v.reshape(-1) for v in values]))
    n = mag.size
    m = keep_count(k, n)
    if m >= n:
        return np.ones(n, dtype=bool)
    threshold = np.partition(mag, n - m)[n - m]
    mask = mag > threshold
    short = m - int(mask.sum())
    if short > 0:
        at_threshold = np.flatnonzero(mag == threshold)
        mask[at_threshold[:short]] = True
    return mask


def trim(tau: Checkpoint, spec: TrimSpec) -> Checkpoint:
    """Zero out all but the top-k fraction of task-vector entries by magnitude.

    Retained entries keep their exact original value; dropped entries become
    +0.0 so serialized bytes stay canonical. Deterministic for any input.
    """
    if tau.kind != KIND_DELTA:
        raise ValidationError(f"trim expects a delta checkpoint, got kind {tau.kind!r}")
    arrays = list(tau.tensors.values())
    if spec.scope == SCOPE_GLOBAL:
        mask = _keep_mask(arrays, spec.k)
        parts = np.split(mask, np.cumsum([a.size for a in arrays])[:-1])
    else:
        parts = [_keep_mask([a], spec.k) for a in arrays]
    out = {}
    for (name, arr), keep in zip(tau.tensors.items(), parts):
        out[name] = np.where(keep.reshape(arr.shape), arr, np.float32(0.0))
    meta = dict(tau.meta)
    meta["trim_k"] = repr(spec.k)
    meta["trim_scope"] = spec.scope
    return Checkpoint(out, meta)


def apply(base: Checkpoint, tau: Checkpoint, lam: float) -> Checkpoint:
    """Merged model: elementwise base + lam * tau.

    lam = 0 is an exact no-op (the base tensors are reused bit-for-bit, so
    the digest is preserved); lam = 1 recovers the fine-tuned values up to
    float32 rounding.
    """
    validate_compatible(base, tau)
    if base.kind != KIND_MODEL:
        raise ValidationError(f"apply expects a model base, got kind {base.kind!r}")
    if tau.kind != KIND_DELTA:
        raise ValidationError(f"apply expects a delta, got kind {tau.kind!r}")
    if not (isinstance(lam, (int, float)) and math.isfinite(lam)):
        raise ValidationError(f"lambda must be finite, got {lam!r}")
    if lam == 0:
        out: dict[str, np.ndarray] = dict(base.tensors)
    else:
        scale = np.float32(lam)
        out = {n: base.tensors[n] + scale * tau.tensors[n] for n in base.tensors}
        _check_finite(out, "merge result")
    meta = {
        "kind": KIND_MODEL,
        "stage": str(tau.stage),
        "base_digest": digest(base),
        "tau_digest": digest(tau),
        "lambda": repr(float(lam)),
    }
    return Checkpoint(out, meta)


def edit_step(
    base: Checkpoint, finetuned: Checkpoint, cfg: MergeConfig
) -> tuple[Checkpoint, Checkpoint]:
    """One editing step: diff, optional trim, scaled apply.

    Returns (edited model, task vector actually applied). Full adoption
    (lam = 1 with nothing trimmed away) is the identity base + (ft - base)
    = ft, so the fine-tuned tensors are adopted directly rather than routed
    through a float32 subtract/add round-trip; the endpoint is then exact,
    which keeps a lam=1 pipeline bit-identical to plain sequential training.
    """
    tau = diff(finetuned, base)
    if cfg.method == METHOD_TIES:
        tau = trim(tau, cfg.trim)
    nothing_trimmed = cfg.method != METHOD_TIES or cfg.trim.k == 1.0
    if cfg.lam == 1.0 and nothing_trimmed:
        meta = {
            "kind": KIND_MODEL,
            "stage": str(tau.stage),
            "base_digest": digest(base),
            "tau_digest": digest(tau),
            "lambda": repr(1.0),
        }
        return Checkpoint(finetuned.tensors, meta), tau
    return apply(base, tau, cfg.lam), tau


def sparsity_stats(tau: Checkpoint) -> dict:
    """Size, nonzero count, l2 norm, and max |value| of a task vector.

    The l2 norm is accumulated in float64 over the canonical order with
    numpy's pairwise summation, so repeated runs agree bit-for-bit.
    """
    if tau.kind != KIND_DELTA:
        raise ValidationError(f"stats expect a delta checkpoint, got kind {tau.kind!r}")
    flat = tau.flat()
    sq = flat.astype(np.float64) ** 2
    return {
        "n_total": int(flat.size),
        "n_nonzero": int(np.count_nonzero(flat)),
        "l2_norm": float(np.sqrt(np.sum(sq))),
        "max_abs": float(np.max(np.abs(flat))),
    }
