"""Deterministic seed substreams.

Every random draw in a run flows from one master seed through a named
substream, so reruns with the same config reproduce every dataset sample,
shuffle order, and final digest.
"""

import numpy as np

# Stable stream codes; extending the table is fine, reordering is not.
_STREAMS = {"data": 0, "init": 1, "shuffle": 2, "clrl": 3, "means": 4}


def substream(master_seed: int, stream: str, *indices: int) -> np.random.SeedSequence:
    """SeedSequence for a named substream of the master seed."""
    return np.random.SeedSequence((master_seed, _STREAMS[stream], *indices))


def rng_for(master_seed: int, stream: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(substream(master_seed, stream, *indices))
