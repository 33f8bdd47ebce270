"""Configuration resolution, validation, and derived objects."""

import json

import numpy as np
import pytest

from seqedit import ConfigError, SequenceConfig
from seqedit.config import DEFAULT_CONFIG, merge_config_from


def test_defaults_resolve():
    cfg = SequenceConfig.from_dict()
    assert cfg.seed == 42
    assert cfg.n_domains == 5
    assert cfg.final_stage == 4
    assert cfg.eval_split == "test"
    assert cfg.model_spec.layer_dims == (8, 32, 32, 4)
    assert cfg.raw == DEFAULT_CONFIG
    merge = cfg.merge_for_stage(1)
    assert merge.method == "ties"
    assert merge.lam == 0.6
    assert merge.trim.k == 0.5
    assert merge.trim.scope == "global"


def test_domain_spec_wiring():
    cfg = SequenceConfig.from_dict({"seed": 7})
    s0 = cfg.domain_spec(0)
    assert (s0.n_train, s0.n_dev, s0.n_test) == (2000, 200, 500)
    assert s0.rotation_angle == 0.0
    assert s0.master_seed == 7
    assert s0.noise_sigma == 1.0
    s2 = cfg.domain_spec(2)
    assert s2.rotation_angle == 50.0
    assert (s2.n_train, s2.n_dev, s2.n_test) == (500, 200, 500)


def test_train_config_wiring():
    cfg = SequenceConfig.from_dict()
    t0 = cfg.train_config(0)
    assert (t0.epochs, t0.learning_rate) == (60, 5e-3)
    assert (t0.batch_size, t0.weight_decay) == (64, 0.1)
    assert not t0.coupled_weight_decay
    t2 = cfg.train_config(2, trainable_mask={"layer0.weight": False})
    assert (t2.epochs, t2.learning_rate) == (60, 5e-4)
    assert t2.trainable_mask == {"layer0.weight": False}
    assert isinstance(t0.seed, np.random.SeedSequence)
    assert t0.seed.entropy != t2.seed.entropy


def test_validation_collects_every_problem():
    with pytest.raises(ConfigError) as err:
        SequenceConfig.from_dict({
            "domains": {"count": 0, "noise_sigma": -1.0,
                        "sizes": {"stage0": {"train": 0}}},
            "model": {"dims": [7, 16, 4]},
            "train": {"stage0": {"epochs": 0, "lr": -1.0}, "batch_size": 0},
            "merge": {"lambda": -0.5, "k": 2.0},
            "eval_split": "holdout",
            "seed": "forty-two",
        })
    msg = str(err.value)
    assert msg.startswith("invalid config:")
    for fragment in (
        "domains.count", "domains.noise_sigma", "domains.sizes.stage0.train",
        "input dim must be even", "train.stage0.epochs", "train.stage0.lr",
        "train.batch_size", "merge.lambda", "merge.k", "eval_split", "seed",
    ):
        assert fragment in msg, fragment
    assert msg.count("\n  - ") >= 11


def test_unknown_keys_rejected_everywhere():
    with pytest.raises(ConfigError, match=r"config: unknown key 'extra'"):
        SequenceConfig.from_dict({"extra": 1})
    with pytest.raises(ConfigError, match=r"domains: unknown key 'angle'"):
        SequenceConfig.from_dict({"domains": {"angle": 10}})
    with pytest.raises(ConfigError, match=r"merge: unknown key 'alpha'"):
        SequenceConfig.from_dict({"merge": {"alpha": 0.1}})
    with pytest.raises(ConfigError, match=r"train\.stage0: unknown key"):
        SequenceConfig.from_dict({"train": {"stage0": {"momentum": 0.9}}})


def test_bool_is_not_an_integer():
    with pytest.raises(ConfigError, match="seed: need an integer"):
        SequenceConfig.from_dict({"seed": True})


def test_per_stage_merge_overrides():
    cfg = SequenceConfig.from_dict({
        "merge": {"per_stage": {"2": {"method": "task-arithmetic", "lambda": 1.0},
                                "3": {"lambda": 0.25}}}
    })
    m1 = cfg.merge_for_stage(1)
    assert (m1.method, m1.lam) == ("ties", 0.6)
    m2 = cfg.merge_for_stage(2)
    assert (m2.method, m2.lam, m2.trim) == ("task-arithmetic", 1.0, None)
    m3 = cfg.merge_for_stage(3)
    assert (m3.method, m3.lam, m3.trim.k) == ("ties", 0.25, 0.5)


def test_per_stage_key_validation():
    with pytest.raises(ConfigError, match="per_stage: stage keys"):
        SequenceConfig.from_dict({"merge": {"per_stage": {"0": {"lambda": 0.5}}}})
    with pytest.raises(ConfigError, match="per_stage: stage keys"):
        SequenceConfig.from_dict({"merge": {"per_stage": {"two": {"lambda": 0.5}}}})
    with pytest.raises(ConfigError, match=r"per_stage\['1'\]: must be an object"):
        SequenceConfig.from_dict({"merge": {"per_stage": {"1": 0.5}}})
    with pytest.raises(ConfigError, match=r"per_stage\['1'\]\.k"):
        SequenceConfig.from_dict({"merge": {"per_stage": {"1": {"k": 0.0}}}})


def test_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 13, "domains": {"count": 3}}))
    cfg = SequenceConfig.from_file(path)
    assert cfg.seed == 13
    assert cfg.n_domains == 3
    assert cfg.raw["model"]["dims"] == [8, 32, 32, 4]

    bad = tmp_path / "bad.json"
    bad.write_text("{seed: 13")
    with pytest.raises(ConfigError, match="not valid JSON"):
        SequenceConfig.from_file(bad)

    listy = tmp_path / "list.json"
    listy.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="root must be a JSON object"):
        SequenceConfig.from_file(listy)


def test_to_json_round_trips():
    cfg = SequenceConfig.from_dict({"seed": 99})
    assert json.loads(cfg.to_json()) == cfg.raw
    assert cfg.to_json().endswith("\n")


def test_with_overrides_is_a_deep_merge():
    cfg = SequenceConfig.from_dict({"domains": {"count": 3}})
    bumped = cfg.with_overrides({"merge": {"lambda": 0.9}})
    assert bumped.n_domains == 3
    assert bumped.merge_for_stage(1).lam == 0.9
    assert cfg.merge_for_stage(1).lam == 0.6
    assert bumped.raw["train"] == cfg.raw["train"]


def test_merge_config_from_block():
    ta = merge_config_from({"method": "task-arithmetic", "lambda": 0.4,
                            "k": 0.5, "scope": "global"})
    assert ta.trim is None
    ties = merge_config_from({"method": "ties", "lambda": 0.6,
                              "k": 0.25, "scope": "per-tensor"})
    assert ties.trim.k == 0.25
    assert ties.trim.scope == "per-tensor"
