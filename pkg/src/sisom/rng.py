"""Seeded randomness. Every random draw in a run comes from ``fork(seed, label)``.

Labels in use: ``data-gen``, ``init``, ``shuffle``, ``pool-init``, ``query``.
Sub-purposes append a suffix (``init/cycle-3``).
"""
import zlib

import numpy as np


def fork(seed, label):
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(key,)))
