"""Self-contained continual-learning toy benchmark.

Synthetic rotated-Gaussian classification domains, a small dense network
trained from scratch with Adam, and the baseline/oracle runners used by the
sequential-editing pipeline.
"""

from .data import DomainDataset, DomainSpec, default_domain_spec, gen_domain
from .net import ToyModelSpec, TrainConfig, evaluate, init_checkpoint, train

__all__ = [
    "DomainDataset",
    "DomainSpec",
    "ToyModelSpec",
    "TrainConfig",
    "default_domain_spec",
    "evaluate",
    "gen_domain",
    "init_checkpoint",
    "train",
]
