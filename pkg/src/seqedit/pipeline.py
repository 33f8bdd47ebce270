"""Sequential editing pipeline: train on domain 0, then fine-tune / edit / record.

Each later stage sees exactly one training split (its own); earlier domains
enter only through their evaluation splits. Identical config and seed yield
digest-identical checkpoints end to end.
"""

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .checkpoint import Checkpoint, digest
from .config import SequenceConfig
from .editing import MergeConfig, apply, diff, edit_step, trim
from .errors import SeqEditError, StageError, ValidationError
from .metrics import MetricsTable, Table, werr
from .toybench.data import DomainDataset, gen_domain
from .toybench.net import evaluate, init_checkpoint, train

EvalSet = tuple  # (x, y) arrays for one domain's evaluation split


def merge_asdict(cfg: MergeConfig) -> dict:
    out = {"method": cfg.method, "lambda": cfg.lam}
    if cfg.trim is not None:
        out["k"] = cfg.trim.k
        out["scope"] = cfg.trim.scope
    return out


@dataclass
class StageRecord:
    """Provenance for one stage: digests, merge settings, and both eval tables."""

    stage: int
    dataset_id: str
    base_digest: str
    intermediate_digest: str
    edited_digest: str
    merge: dict | None
    metrics_intermediate: MetricsTable
    metrics_edited: MetricsTable
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "dataset_id": self.dataset_id,
            "base_digest": self.base_digest,
            "intermediate_digest": self.intermediate_digest,
            "edited_digest": self.edited_digest,
            "merge": self.merge,
            "metrics_intermediate": self.metrics_intermediate.to_dict(),
            "metrics_edited": self.metrics_edited.to_dict(),
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StageRecord":
        return cls(
            stage=obj["stage"],
            dataset_id=obj["dataset_id"],
            base_digest=obj["base_digest"],
            intermediate_digest=obj["intermediate_digest"],
            edited_digest=obj["edited_digest"],
            merge=obj.get("merge"),
            metrics_intermediate=MetricsTable.from_dict(obj["metrics_intermediate"]),
            metrics_edited=MetricsTable.from_dict(obj["metrics_edited"]),
            wall_time=obj["wall_time"],
        )


def eval_over_domains(model: Checkpoint, eval_sets: Sequence[EvalSet]) -> dict[int, float]:
    return {d: evaluate(model, eval_sets[d]) for d in range(len(eval_sets))}


def run_stage(
    theta_prev: Checkpoint,
    dataset: DomainDataset,
    train_cfg,
    merge_cfg: MergeConfig,
    eval_sets: Sequence[EvalSet],
    method: str,
) -> tuple[Checkpoint, StageRecord]:
    """One stage: fine-tune theta_prev on the given dataset, edit, evaluate.

    ``eval_sets`` holds the evaluation arrays for domains 0..t; the only
    dataset object (and hence the only training split) this operation can
    reach is the current one.
    """
    t = dataset.spec.domain_index
    if t < 1:
        raise ValidationError(f"stages start at 1, got domain index {t}")
    if len(eval_sets) != t + 1:
        raise ValidationError(f"need eval sets for domains 0..{t}, got {len(eval_sets)}")
    started = time.perf_counter()
    theta_hat = train(theta_prev, dataset, train_cfg).with_meta(stage=str(t))
    theta_t, _tau = edit_step(theta_prev, theta_hat, merge_cfg)
    record = StageRecord(
        stage=t,
        dataset_id=dataset.spec.dataset_id,
        base_digest=digest(theta_prev),
        intermediate_digest=digest(theta_hat),
        edited_digest=digest(theta_t),
        merge=merge_asdict(merge_cfg),
        metrics_intermediate=MetricsTable.build(
            t, method, eval_over_domains(theta_hat, eval_sets)
        ),
        metrics_edited=MetricsTable.build(t, method, eval_over_domains(theta_t, eval_sets)),
        wall_time=time.perf_counter() - started,
    )
    return theta_t, record


def make_datasets(cfg: SequenceConfig) -> list[DomainDataset]:
    return [gen_domain(cfg.domain_spec(t)) for t in range(cfg.n_domains)]


def train_initial(
    cfg: SequenceConfig,
    dataset: DomainDataset,
    trainable_mask: dict | None = None,
) -> Checkpoint:
    """Train the starting checkpoint on domain 0 from a seeded fresh init."""
    init = init_checkpoint(cfg.model_spec, cfg.seed)
    return train(init, dataset, cfg.train_config(0, trainable_mask))


def run_sequence(
    cfg: SequenceConfig,
    mask_fn: Callable[[int], dict | None] | None = None,
    method_label: str | None = None,
    datasets: Sequence[DomainDataset] | None = None,
) -> tuple[Checkpoint, list[StageRecord]]:
    """Run all stages in order; returns the final checkpoint and all records.

    ``mask_fn(t)`` may restrict which tensors train at stage t >= 1. Datasets
    are regenerated from the config unless instrumented ones are supplied.
    A failure at stage t raises StageError carrying the records of the
    stages that finished, so callers can persist partial progress.
    """
    if datasets is None:
        datasets = make_datasets(cfg)
    elif len(datasets) != cfg.n_domains:
        raise ValidationError(
            f"got {len(datasets)} datasets for {cfg.n_domains} domains"
        )
    method = method_label or cfg.raw["merge"]["method"]
    theta = train_initial(cfg, datasets[0])
    records: list[StageRecord] = []
    eval_sets = [datasets[0].split(cfg.eval_split)]
    for t in range(1, cfg.n_domains):
        eval_sets.append(datasets[t].split(cfg.eval_split))
        mask = mask_fn(t) if mask_fn is not None else None
        try:
            theta, record = run_stage(
                theta,
                datasets[t],
                cfg.train_config(t, mask),
                cfg.merge_for_stage(t),
                eval_sets,
                method,
            )
        except SeqEditError as exc:
            raise StageError(t, method, records, exc) from exc
        records.append(record)
    return theta, records


@dataclass
class SweepPoint:
    """One scaling setting and its dev errors: old domains, new domain, all seen."""

    lam: float
    previous: float
    new: float
    all_seen: float


def lambda_sweep(
    cfg: SequenceConfig,
    stage: int,
    grid: Sequence[float],
    datasets: Sequence[DomainDataset] | None = None,
) -> list[SweepPoint]:
    """Vary the scaling factor for the edit at one stage, holding all else fixed.

    Stages before ``stage`` run under the configured merge settings; the probe
    stage's task vector (trimmed if the stage uses trimming) is applied once
    per grid value. Errors are measured on the dev split, the split used for
    picking hyperparameters.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValidationError("sweep grid is empty")
    for v in grid:
        if not (math.isfinite(v) and v >= 0):
            raise ValidationError(f"grid values must be finite and >= 0, got {v!r}")
    if not 1 <= stage <= cfg.final_stage:
        raise ValidationError(f"stage must be in 1..{cfg.final_stage}, got {stage}")
    if datasets is None:
        datasets = make_datasets(cfg)

    theta = train_initial(cfg, datasets[0])
    eval_sets = [datasets[0].split("dev")]
    for t in range(1, stage):
        eval_sets.append(datasets[t].split("dev"))
        theta, _ = run_stage(
            theta,
            datasets[t],
            cfg.train_config(t),
            cfg.merge_for_stage(t),
            eval_sets,
            cfg.raw["merge"]["method"],
        )
    eval_sets.append(datasets[stage].split("dev"))

    merge_cfg = cfg.merge_for_stage(stage)
    theta_hat = train(theta, datasets[stage], cfg.train_config(stage))
    theta_hat = theta_hat.with_meta(stage=str(stage))
    tau = diff(theta_hat, theta)
    if merge_cfg.trim is not None:
        tau = trim(tau, merge_cfg.trim)

    points = []
    for lam in grid:
        edited = apply(theta, tau, lam)
        errors = eval_over_domains(edited, eval_sets)
        old = [errors[d] for d in range(stage)]
        points.append(
            SweepPoint(
                lam=lam,
                previous=sum(old) / len(old),
                new=errors[stage],
                all_seen=sum(errors.values()) / len(errors),
            )
        )
    return points


def sweep_to_table(points: Sequence[SweepPoint]) -> Table:
    return Table(
        ["lambda", "previous_domains", "new_domain", "all_seen"],
        [[p.lam, p.previous, p.new, p.all_seen] for p in points],
    )


def compare_intermediate(records: Sequence[StageRecord]) -> Table:
    """Per-stage comparison of the fine-tuned and edited checkpoints.

    The reduction column is left blank when the fine-tuned error is zero
    (nothing to reduce against).
    """
    if not records:
        raise ValidationError("no stage records to compare")
    rows = []
    for record in sorted(records, key=lambda r: r.stage):
        inter = record.metrics_intermediate.awer
        edited = record.metrics_edited.awer
        reduction = werr(inter, edited) if inter > 0 else None
        rows.append([record.stage, inter, edited, reduction])
    return Table(["stage", "awer_intermediate", "awer_edited", "werr"], rows)
