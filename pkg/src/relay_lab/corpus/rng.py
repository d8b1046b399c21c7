"""Splittable, counter-based random streams for data generation.

Each sample draws from its own Philox stream keyed by
(seed, task, namespace, index), so generation order never matters and
parallel workers produce identical corpora.  Namespaces keep train, test
and pipeline-generated problem sets disjoint even under one seed.
"""

from __future__ import annotations

import numpy as np

NS_TRAIN = 0
NS_TEST = 1
NS_RELAY = 2
NS_SELFGEN = 3


def sample_rng(seed: int, task_ordinal: int, namespace: int, index: int) -> np.random.Generator:
    """Independent generator for one (seed, task, namespace, index) cell."""
    ss = np.random.SeedSequence(seed, spawn_key=(task_ordinal, namespace, index))
    return np.random.Generator(np.random.Philox(ss))
