"""Seed splitting.

Every random consumer derives its own generator from the master seed and a
tuple of integers naming the work item, e.g. ``(point, centroid)``.  Streams
for different keys are independent, so results do not depend on the order or
the worker in which items run.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int | None, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))
