"""Run configuration: one JSON document, explicit defaults, exhaustive validation.

Top-level keys: domains (count, angle_step, sizes, noise_sigma), model (dims),
train (stage0, later, batch_size, weight_decay), merge (method, lambda, k,
scope, optional per_stage overrides), eval_split, seed. Every violation is
collected and reported in one error before any compute starts.
"""

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .editing import (
    METHOD_TASK_ARITHMETIC,
    METHOD_TIES,
    MergeConfig,
    TrimSpec,
    SCOPE_GLOBAL,
    SCOPE_PER_TENSOR,
)
from .errors import ConfigError
from .seeding import substream
from .toybench.data import DomainSpec, default_domain_spec
from .toybench.net import ToyModelSpec, TrainConfig

DEFAULT_CONFIG = {
    "domains": {
        "count": 5,
        "angle_step": 25.0,
        "noise_sigma": 1.0,
        "sizes": {
            "stage0": {"train": 2000, "dev": 200, "test": 500},
            "later": {"train": 500, "dev": 200, "test": 500},
        },
    },
    "model": {"dims": [8, 32, 32, 4]},
    "train": {
        "stage0": {"epochs": 60, "lr": 5e-3},
        "later": {"epochs": 60, "lr": 5e-4},
        "batch_size": 64,
        "weight_decay": 0.1,
        "coupled_weight_decay": False,
    },
    "merge": {"method": "ties", "lambda": 0.6, "k": 0.5, "scope": "global"},
    "eval_split": "test",
    "seed": 42,
}


def _merge_defaults(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge_defaults(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_keys(obj: dict, allowed: set, where: str, problems: list) -> None:
    for key in obj:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def _validate(cfg: dict) -> list[str]:
    p: list[str] = []
    _check_keys(cfg, {"domains", "model", "train", "merge", "eval_split", "seed"}, "config", p)

    dom = cfg.get("domains", {})
    if not isinstance(dom, dict):
        p.append("domains: must be an object")
        dom = {}
    _check_keys(dom, {"count", "angle_step", "noise_sigma", "sizes"}, "domains", p)
    if not (_is_int(dom.get("count")) and dom["count"] >= 1):
        p.append(f"domains.count: need integer >= 1, got {dom.get('count')!r}")
    if not _is_num(dom.get("angle_step")):
        p.append(f"domains.angle_step: need finite number, got {dom.get('angle_step')!r}")
    if not (_is_num(dom.get("noise_sigma")) and dom["noise_sigma"] > 0):
        p.append(f"domains.noise_sigma: need positive number, got {dom.get('noise_sigma')!r}")
    sizes = dom.get("sizes", {})
    if not isinstance(sizes, dict):
        p.append("domains.sizes: must be an object")
        sizes = {}
    _check_keys(sizes, {"stage0", "later"}, "domains.sizes", p)
    for group in ("stage0", "later"):
        block = sizes.get(group, {})
        if not isinstance(block, dict):
            p.append(f"domains.sizes.{group}: must be an object")
            continue
        _check_keys(block, {"train", "dev", "test"}, f"domains.sizes.{group}", p)
        for split in ("train", "dev", "test"):
            if not (_is_int(block.get(split)) and block[split] > 0):
                p.append(
                    f"domains.sizes.{group}.{split}: need positive integer, "
                    f"got {block.get(split)!r}"
                )

    model = cfg.get("model", {})
    if not isinstance(model, dict):
        p.append("model: must be an object")
        model = {}
    _check_keys(model, {"dims"}, "model", p)
    dims = model.get("dims")
    if not (
        isinstance(dims, list)
        and len(dims) >= 2
        and all(_is_int(d) and d > 0 for d in dims)
    ):
        p.append(f"model.dims: need a list of >= 2 positive integers, got {dims!r}")
    elif dims[0] % 2 != 0:
        p.append(f"model.dims: input dim must be even for paired rotations, got {dims[0]}")

    train = cfg.get("train", {})
    if not isinstance(train, dict):
        p.append("train: must be an object")
        train = {}
    _check_keys(
        train, {"stage0", "later", "batch_size", "weight_decay", "coupled_weight_decay"},
        "train", p,
    )
    for group in ("stage0", "later"):
        block = train.get(group, {})
        if not isinstance(block, dict):
            p.append(f"train.{group}: must be an object")
            continue
        _check_keys(block, {"epochs", "lr"}, f"train.{group}", p)
        if not (_is_int(block.get("epochs")) and block["epochs"] >= 1):
            p.append(f"train.{group}.epochs: need integer >= 1, got {block.get('epochs')!r}")
        if not (_is_num(block.get("lr")) and block["lr"] > 0):
            p.append(f"train.{group}.lr: need positive number, got {block.get('lr')!r}")
    if not (_is_int(train.get("batch_size")) and train["batch_size"] >= 1):
        p.append(f"train.batch_size: need integer >= 1, got {train.get('batch_size')!r}")
    if not (_is_num(train.get("weight_decay")) and train["weight_decay"] >= 0):
        p.append(f"train.weight_decay: need number >= 0, got {train.get('weight_decay')!r}")
    if not isinstance(train.get("coupled_weight_decay", False), bool):
        p.append("train.coupled_weight_decay: need a boolean")

    merge = cfg.get("merge", {})
    if not isinstance(merge, dict):
        p.append("merge: must be an object")
        merge = {}
    _check_keys(merge, {"method", "lambda", "k", "scope", "per_stage"}, "merge", p)
    p.extend(_validate_merge_block(merge, "merge"))
    per_stage = merge.get("per_stage", {})
    if not isinstance(per_stage, dict):
        p.append("merge.per_stage: must be an object keyed by stage")
    else:
        for key, block in per_stage.items():
            if not (isinstance(key, str) and key.isdigit() and int(key) >= 1):
                p.append(f"merge.per_stage: stage keys must be strings of integers >= 1, got {key!r}")
            if not isinstance(block, dict):
                p.append(f"merge.per_stage[{key!r}]: must be an object")
                continue
            _check_keys(block, {"method", "lambda", "k", "scope"}, f"merge.per_stage[{key!r}]", p)
            p.extend(_validate_merge_block(block, f"merge.per_stage[{key!r}]", partial=True))

    if cfg.get("eval_split") not in ("dev", "test"):
        p.append(f"eval_split: must be 'dev' or 'test', got {cfg.get('eval_split')!r}")
    if not _is_int(cfg.get("seed")):
        p.append(f"seed: need an integer, got {cfg.get('seed')!r}")
    return p


def _validate_merge_block(block: dict, where: str, partial: bool = False) -> list[str]:
    p = []
    method = block.get("method")
    if (method is not None or not partial) and method not in (
        METHOD_TASK_ARITHMETIC,
        METHOD_TIES,
    ):
        p.append(
            f"{where}.method: must be '{METHOD_TASK_ARITHMETIC}' or '{METHOD_TIES}', "
            f"got {method!r}"
        )
    lam = block.get("lambda")
    if (lam is not None or not partial) and not (_is_num(lam) and lam >= 0):
        p.append(f"{where}.lambda: need finite number >= 0, got {lam!r}")
    k = block.get("k")
    if (k is not None or not partial) and not (_is_num(k) and 0 < k <= 1):
        p.append(f"{where}.k: need number in (0, 1], got {k!r}")
    scope = block.get("scope")
    if (scope is not None or not partial) and scope not in (SCOPE_GLOBAL, SCOPE_PER_TENSOR):
        p.append(f"{where}.scope: must be '{SCOPE_GLOBAL}' or '{SCOPE_PER_TENSOR}', got {scope!r}")
    return p


@dataclass(frozen=True)
class SequenceConfig:
    """Fully resolved run configuration."""

    raw: dict

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> "SequenceConfig":
        resolved = _merge_defaults(DEFAULT_CONFIG, overrides or {})
        problems = _validate(resolved)
        if problems:
            raise ConfigError("invalid config:\n" + "\n".join(f"  - {q}" for q in problems))
        return cls(raw=resolved)

    @classmethod
    def from_file(cls, path: str | Path) -> "SequenceConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(obj)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2) + "\n"

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def n_domains(self) -> int:
        return self.raw["domains"]["count"]

    @property
    def final_stage(self) -> int:
        return self.n_domains - 1

    @property
    def eval_split(self) -> str:
        return self.raw["eval_split"]

    @property
    def model_spec(self) -> ToyModelSpec:
        return ToyModelSpec(tuple(self.raw["model"]["dims"]))

    def domain_spec(self, t: int) -> DomainSpec:
        dom = self.raw["domains"]
        sizes = dom["sizes"]["stage0"] if t == 0 else dom["sizes"]["later"]
        return default_domain_spec(
            t,
            master_seed=self.seed,
            angle_step=dom["angle_step"],
            noise_sigma=dom["noise_sigma"],
            sizes=sizes,
            n_classes=self.model_spec.n_classes,
            input_dim=self.model_spec.input_dim,
        )

    def train_config(self, stage: int, trainable_mask: dict | None = None) -> TrainConfig:
        train = self.raw["train"]
        block = train["stage0"] if stage == 0 else train["later"]
        return TrainConfig(
            epochs=block["epochs"],
            learning_rate=block["lr"],
            batch_size=train["batch_size"],
            weight_decay=train["weight_decay"],
            coupled_weight_decay=train.get("coupled_weight_decay", False),
            trainable_mask=trainable_mask,
            seed=substream(self.seed, "shuffle", stage),
        )

    def merge_for_stage(self, stage: int) -> MergeConfig:
        block = dict(self.raw["merge"])
        override = block.pop("per_stage", {}).get(str(stage), {})
        block.update(override)
        return merge_config_from(block)

    def with_overrides(self, overrides: dict) -> "SequenceConfig":
        return SequenceConfig.from_dict(_merge_defaults(self.raw, overrides))


def merge_config_from(block: dict) -> MergeConfig:
    trim = None
    if block["method"] == METHOD_TIES:
        trim = TrimSpec(k=block["k"], scope=block["scope"])
    return MergeConfig(method=block["method"], lam=block["lambda"], trim=trim)
