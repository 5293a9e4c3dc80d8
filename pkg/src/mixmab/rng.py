"""Deterministic random-stream splitting.

Every stream is seeded from ``SeedSequence((master_seed, device_id + 1, tag))``,
so adding or removing a device never perturbs the draws of another device,
and the subsystems of one device (placement, traffic, policy, shadowing)
never share a stream.  Device-independent streams use ``device_id = -1``.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    PLACEMENT = 0
    TRAFFIC = 1
    POLICY = 2
    SHADOWING = 3


def stream(master_seed: int, device_id: int, tag: Stream) -> np.random.Generator:
    seq = np.random.SeedSequence((int(master_seed), int(device_id) + 1, int(tag)))
    return np.random.Generator(np.random.PCG64(seq))
