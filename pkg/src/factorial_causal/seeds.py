"""Seed plumbing: one master seed, per-task derived generators.

Every stochastic entry point takes either an integer seed or a ready
``numpy.random.Generator``. Pipelines that run several stochastic tasks
derive one child generator per task from ``(master_seed, task_label)``
via a hash of the label, so adding or reordering tasks (or running them
in parallel) never changes another task's stream.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError

_MASK64 = (1 << 64) - 1


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed or Generator to a Generator; reject None."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ConfigError("an explicit seed is required for reproducibility")
    return np.random.default_rng(int(seed) & _MASK64)


def label_entropy(label: str) -> int:
    """Stable 64-bit entropy word for a task label (blake2b prefix)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(master_seed: int, label: str) -> np.random.Generator:
    """Child generator for one named task under a master seed."""
    if master_seed is None:
        raise ConfigError("an explicit seed is required for reproducibility")
    seq = np.random.SeedSequence([int(master_seed) & _MASK64, label_entropy(label)])
    return np.random.default_rng(seq)
