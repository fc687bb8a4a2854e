"""Unconditional benchmark: chain transitions drawn uniformly from the training set."""
from __future__ import annotations

import numpy as np

from .dataset import TransitionSet
from .knn_engine import (
    STREAM_STEP, DimensionMismatch, EmptyTrainSet, PathSet, draw_initial, empty_paths, step_rng,
)


def naive_resample(train: TransitionSet, init_set: TransitionSet, T_n: int = 60, N: int = 1000,
                   seed: int = 0, init_pool=None) -> PathSet:
    if len(train) == 0:
        raise EmptyTrainSet("training set is empty")
    if init_set.levels != train.levels:
        raise DimensionMismatch("initial states and training set differ in levels")
    pool = np.arange(len(init_set)) if init_pool is None else np.asarray(init_pool, np.int64)
    init = pool[draw_initial(seed, len(pool), N)]
    P = empty_paths(N, T_n, train.levels)
    P.init_index[:] = init
    P.volumes[:, 0] = init_set.before[init]
    P.bid_ticks[:, 0] = init_set.bid_before[init]
    inc = train.increments
    m = len(train)
    for s in range(T_n):
        # same keyed stream as the KNN engine; the uniform picks a whole sample here
        u = step_rng(seed, STREAM_STEP, s).random(N)
        j = np.minimum((u * m).astype(np.int64), m - 1)
        P.neighbor[:, s] = j
        P.volumes[:, s + 1] = train.after[j]
        P.bid_ticks[:, s + 1] = P.bid_ticks[:, s] + inc[j]
    P.distance[:] = np.nan
    P.meta = {"kind": "naive", "config": {"T_n": T_n, "N": N, "seed": seed},
              "strategy": "noop", "levels": train.levels}
    return P


def step_pairs(paths: PathSet, first: int = 1):
    """(before, after) volume pairs of consecutive steps, pooled over paths.

    Step 0 comes from the initial pool rather than the resampled law, so the
    default skips it.
    """
    v = paths.volumes[paths.valid]
    a = v[:, first:-1].reshape(-1, v.shape[2])
    b = v[:, first + 1:].reshape(-1, v.shape[2])
    return a, b
