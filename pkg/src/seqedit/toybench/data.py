"""Synthetic classification domains with a controllable shift dial.

Each domain is a Gaussian mixture: one class mean per label, shared across
all domains, with domain t observing every sample through a rotation by
t * angle_step degrees applied on consecutive coordinate pairs. Rotation is
orthogonal, so the domains are equally hard in isolation while drifting
steadily apart, enough to surface forgetting in a sequential run.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..seeding import rng_for

MEAN_SCALE = 2.0
_SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class DomainSpec:
    """Generative recipe for one domain; regenerating from it is exact."""

    domain_index: int
    rotation_angle: float
    n_train: int
    n_dev: int
    n_test: int
    noise_sigma: float = 1.0
    n_classes: int = 4
    input_dim: int = 8
    master_seed: int = 42

    def __post_init__(self):
        problems = []
        if self.domain_index < 0:
            problems.append(f"domain_index must be >= 0, got {self.domain_index}")
        if not 0 <= self.rotation_angle < 360:
            problems.append(f"rotation_angle must be in [0, 360), got {self.rotation_angle}")
        if min(self.n_train, self.n_dev, self.n_test) <= 0:
            problems.append("split sizes must be positive")
        if self.input_dim <= 0 or self.input_dim % 2 != 0:
            problems.append(f"input_dim must be positive and even, got {self.input_dim}")
        if self.n_classes < 2:
            problems.append(f"need at least 2 classes, got {self.n_classes}")
        if self.noise_sigma <= 0:
            problems.append(f"noise_sigma must be positive, got {self.noise_sigma}")
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def dataset_id(self) -> str:
        return f"domain_{self.domain_index}"


def default_domain_spec(
    t: int,
    master_seed: int = 42,
    angle_step: float = 25.0,
    noise_sigma: float = 1.0,
    sizes: dict | None = None,
    n_classes: int = 4,
    input_dim: int = 8,
) -> DomainSpec:
    """Default schedule: angle t * angle_step, a large first domain, smaller later ones."""
    if sizes is None:
        sizes = {"train": 2000, "dev": 200, "test": 500} if t == 0 else {
            "train": 500, "dev": 200, "test": 500}
    return DomainSpec(
        domain_index=t,
        rotation_angle=(t * angle_step) % 360.0,
        n_train=sizes["train"],
        n_dev=sizes["dev"],
        n_test=sizes["test"],
        noise_sigma=noise_sigma,
        n_classes=n_classes,
        input_dim=input_dim,
        master_seed=master_seed,
    )


@dataclass
class Split:
    x: np.ndarray  # float32 [n, input_dim]
    y: np.ndarray  # int64 [n]


@dataclass
class DomainDataset:
    """Materialized domain with train/dev/test splits and access counters.

    The counters exist so tests can assert the lifelong-learning constraint:
    a sequential stage may open exactly one training split (its own).
    """

    spec: DomainSpec
    _train: Split
    _dev: Split
    _test: Split
    access_counts: dict = field(default_factory=lambda: {s: 0 for s in _SPLITS})

    def _get(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        self.access_counts[split] += 1
        data: Split = getattr(self, f"_{split}")
        return data.x, data.y

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self._get("train")

    @property
    def dev(self) -> tuple[np.ndarray, np.ndarray]:
        return self._get("dev")

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self._get("test")

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name not in _SPLITS:
            raise ValidationError(f"unknown split {name!r}")
        return self._get(name)


def rotation_matrix(angle_deg: float, dim: int) -> np.ndarray:
    """Block-diagonal rotation by one angle on coordinate pairs (0,1), (2,3), ..."""
    theta = np.deg2rad(angle_deg)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.eye(dim)
    for i in range(0, dim, 2):
        rot[i, i] = c
        rot[i, i + 1] = -s
        rot[i + 1, i] = s
        rot[i + 1, i + 1] = c
    return rot


def class_means(master_seed: int, n_classes: int, input_dim: int) -> np.ndarray:
    """Per-class means, drawn once from the master seed and shared by all domains."""
    rng = rng_for(master_seed, "means")
    return rng.standard_normal((n_classes, input_dim)) * MEAN_SCALE


def gen_domain(spec: DomainSpec) -> DomainDataset:
    """Generate a domain dataset; splits come from disjoint seed substreams."""
    means = class_means(spec.master_seed, spec.n_classes, spec.input_dim)
    rot = rotation_matrix(spec.rotation_angle, spec.input_dim)
    sizes = {"train": spec.n_train, "dev": spec.n_dev, "test": spec.n_test}
    splits = {}
    for split_idx, name in enumerate(_SPLITS):
        rng = rng_for(spec.master_seed, "data", spec.domain_index, split_idx)
        n = sizes[name]
        y = rng.integers(0, spec.n_classes, size=n)
        noise = rng.standard_normal((n, spec.input_dim)) * spec.noise_sigma
        x = (means[y] + noise) @ rot.T
        splits[name] = Split(x.astype(np.float32), y.astype(np.int64))
    return DomainDataset(spec, splits["train"], splits["dev"], splits["test"])


def export_csv(dataset: DomainDataset, split: str, path: str | Path) -> None:
    """Write one split as CSV: x columns then the integer label."""
    x, y = dataset.split(split)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            writer.writerow([format(float(v), ".9g") for v in row] + [int(label)])


def import_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a split written by export_csv; values round-trip exactly in float32."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_cols = len(header) - 1
        xs, ys = [], []
        for row in reader:
            xs.append([np.float32(v) for v in row[:n_cols]])
            ys.append(int(row[n_cols]))
    return np.asarray(xs, dtype=np.float32), np.asarray(ys, dtype=np.int64)
