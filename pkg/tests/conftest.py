"""Shared fixtures: a fast benchmark config, random checkpoints, and the
acceptance-criterion reporter that prints one pass/fail line per criterion."""

import copy

import numpy as np
import pytest

from seqedit import Checkpoint, SequenceConfig

# Three domains, one hidden layer, a few epochs. Runs in well under a second
# while still driving the real training and editing code paths end to end.
TINY_OVERRIDES = {
    "domains": {
        "count": 3,
        "sizes": {
            "stage0": {"train": 64, "dev": 32, "test": 48},
            "later": {"train": 48, "dev": 32, "test": 48},
        },
    },
    "model": {"dims": [4, 16, 4]},
    "train": {
        "stage0": {"epochs": 3, "lr": 5e-3},
        "later": {"epochs": 2, "lr": 1e-3},
        "batch_size": 16,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@pytest.fixture
def make_tiny_config():
    """Factory for the fast 3-domain config, with optional overrides."""

    def factory(**overrides) -> SequenceConfig:
        return SequenceConfig.from_dict(_deep_merge(TINY_OVERRIDES, overrides))

    return factory


@pytest.fixture
def checkpoint_factory():
    """Factory for seeded random model checkpoints."""

    def factory(rng: np.random.Generator, n_tensors: int = 3, max_side: int = 6, meta=None):
        tensors = {}
        for i in range(n_tensors):
            shape = tuple(int(s) for s in rng.integers(1, max_side + 1, size=int(rng.integers(1, 3))))
            tensors[f"t{i:02d}"] = rng.standard_normal(shape).astype(np.float32)
        return Checkpoint(tensors, meta or {})

    return factory


_criterion_lines: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(num: int, name: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        line = f"criterion {num:02d} {name}: {status}"
        if detail:
            line += f" ({detail})"
        _criterion_lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
