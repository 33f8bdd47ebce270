"""Benchmark methods: the editing pipeline variants, restricted-update
baselines, and the two data-pooling oracles.

Method names and their settings:

  finetune    sequential fine-tuning (task-arithmetic merge, lambda 1)
  uoe         like finetune but only hidden weight matrices train per stage
  clrl        like finetune but one seeded random hidden layer trains per stage
  task-arith  task-vector merge; lambda from config when the config selects
              task-arithmetic, else the standard 0.4
  ties        trim-then-merge; settings from config when it selects ties,
              else lambda 0.6 with the configured k and scope
  multitask   oracle: one model trained on the union of all training splits
  separate    oracle: one model per domain, each scored on its own domain

The oracles ignore the merge settings and produce no stage records.
"""

import copy
import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..checkpoint import Checkpoint, digest
from ..config import SequenceConfig
from ..errors import ValidationError
from ..metrics import MetricsTable, werr
from ..pipeline import StageRecord, make_datasets, run_sequence
from ..seeding import rng_for, substream
from ..toybench.data import DomainDataset
from ..toybench.net import ToyModelSpec, evaluate, init_checkpoint, train

METHOD_ORDER = ("finetune", "uoe", "clrl", "task-arith", "ties", "multitask", "separate")
ORACLE_METHODS = ("multitask", "separate")
TASK_ARITH_DEFAULT_LAMBDA = 0.4
TIES_DEFAULT_LAMBDA = 0.6


@dataclass
class MethodRun:
    """Everything one method produced: per-stage records and the final table."""

    method: str
    records: list[StageRecord] = field(default_factory=list)
    final_metrics: MetricsTable | None = None
    model_digest: str | None = None


def uoe_mask(spec: ToyModelSpec) -> dict:
    """Trainable map restricted to the hidden weight matrices."""
    hidden_weights = {f"layer{i}.weight" for i in spec.hidden_layers()}
    return {name: name in hidden_weights for name in spec.param_names()}


def clrl_mask(spec: ToyModelSpec, master_seed: int, stage: int) -> dict:
    """Trainable map for one seeded random hidden layer (weight and bias)."""
    hidden = spec.hidden_layers()
    rng = rng_for(master_seed, "clrl", stage)
    layer = hidden[int(rng.integers(len(hidden)))]
    chosen = {f"layer{layer}.weight", f"layer{layer}.bias"}
    return {name: name in chosen for name in spec.param_names()}


def _config_for(method: str, cfg: SequenceConfig) -> SequenceConfig:
    """Resolve the merge settings a given method runs under."""
    base = cfg.raw["merge"]
    if method in ("finetune", "uoe", "clrl"):
        block = {"method": "task-arithmetic", "lambda": 1.0, "k": base["k"], "scope": base["scope"]}
    elif method == "task-arith":
        if base["method"] == "task-arithmetic":
            return cfg
        block = {
            "method": "task-arithmetic",
            "lambda": TASK_ARITH_DEFAULT_LAMBDA,
            "k": base["k"],
            "scope": base["scope"],
        }
    elif method == "ties":
        if base["method"] == "ties":
            return cfg
        block = {
            "method": "ties",
            "lambda": TIES_DEFAULT_LAMBDA,
            "k": base["k"],
            "scope": base["scope"],
        }
    else:
        return cfg
    raw = copy.deepcopy(cfg.raw)
    raw["merge"] = block
    return SequenceConfig.from_dict(raw)


def _pooled_train(datasets: Sequence[DomainDataset]) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for dataset in datasets:
        x, y = dataset.train
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def run_method(
    method: str,
    cfg: SequenceConfig,
    datasets: Sequence[DomainDataset] | None = None,
) -> MethodRun:
    """Run one benchmark method end to end and collect its metrics."""
    if method not in METHOD_ORDER:
        raise ValidationError(f"unknown method {method!r}; pick from {', '.join(METHOD_ORDER)}")
    if datasets is None:
        datasets = make_datasets(cfg)
    final_stage = cfg.final_stage
    spec = cfg.model_spec

    if method == "multitask":
        init = init_checkpoint(spec, cfg.seed)
        model = train(init, _pooled_train(datasets), cfg.train_config(0))
        errors = {
            d: evaluate(model, datasets[d].split(cfg.eval_split))
            for d in range(cfg.n_domains)
        }
        return MethodRun(
            method=method,
            final_metrics=MetricsTable.build(final_stage, method, errors),
            model_digest=digest(model),
        )

    if method == "separate":
        errors = {}
        for d in range(cfg.n_domains):
            init = init_checkpoint(spec, cfg.seed)
            train_cfg = dataclasses.replace(
                cfg.train_config(0), seed=substream(cfg.seed, "shuffle", d)
            )
            model = train(init, datasets[d], train_cfg)
            errors[d] = evaluate(model, datasets[d].split(cfg.eval_split))
        return MethodRun(
            method=method,
            final_metrics=MetricsTable.build(final_stage, method, errors),
        )

    run_cfg = _config_for(method, cfg)
    if method == "uoe":
        mask_fn = lambda t: uoe_mask(spec)
    elif method == "clrl":
        mask_fn = lambda t: clrl_mask(spec, cfg.seed, t)
    else:
        mask_fn = None
    theta, records = run_sequence(run_cfg, mask_fn=mask_fn, method_label=method, datasets=datasets)
    if records:
        final_metrics = records[-1].metrics_edited
    else:
        errors = {0: evaluate(theta, datasets[0].split(cfg.eval_split))}
        final_metrics = MetricsTable.build(0, method, errors)
    return MethodRun(
        method=method,
        records=records,
        final_metrics=final_metrics,
        model_digest=digest(theta),
    )


def run_bench(
    cfg: SequenceConfig,
    methods: Sequence[str],
    datasets: Sequence[DomainDataset] | None = None,
) -> list[MethodRun]:
    """Run the requested methods on shared datasets, in the canonical order.

    When the finetune baseline is among them, every other method's tables
    gain the relative-reduction column, stage by stage and at the end.
    """
    if not methods:
        raise ValidationError("no methods requested")
    unknown = [m for m in methods if m not in METHOD_ORDER]
    if unknown:
        raise ValidationError(f"unknown methods {unknown!r}; pick from {', '.join(METHOD_ORDER)}")
    seen = set()
    ordered = [m for m in METHOD_ORDER if m in methods and not (m in seen or seen.add(m))]
    if datasets is None:
        datasets = make_datasets(cfg)
    runs = [run_method(m, cfg, datasets) for m in ordered]

    baseline = next((r for r in runs if r.method == "finetune"), None)
    if baseline is not None:
        stage_awer = {r.stage: r.metrics_edited.awer for r in baseline.records}
        stage_awer[baseline.final_metrics.stage] = baseline.final_metrics.awer
        for run in runs:
            if run.method == "finetune":
                continue
            for record in run.records:
                base_awer = stage_awer.get(record.stage)
                if base_awer is not None and base_awer > 0:
                    record.metrics_edited.werr = werr(base_awer, record.metrics_edited.awer)
            base_awer = stage_awer.get(run.final_metrics.stage)
            if base_awer is not None and base_awer > 0:
                run.final_metrics.werr = werr(base_awer, run.final_metrics.awer)
    return runs
