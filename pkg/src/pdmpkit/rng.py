"""Counter-based uniform streams keyed by (seed, replication, stream id).

Every random decision in the toolkit consumes uniforms from an explicit
stream, so a replication is a pure function of its key and results do not
depend on how replications are scheduled across workers.  Holding-time
draws and jump-destination draws use disjoint stream ids, which keeps
common-random-number comparisons between two models aligned draw by draw.
"""
from __future__ import annotations

import numpy as np

HOLDING = 0
DESTINATION = 1
AUXILIARY = 2

_DENOM = float(1 << 53)


class UniformStream:
    """Deterministic stream of uniforms in the open interval (0, 1)."""

    def __init__(self, seed: int, rep: int, stream_id: int):
        self.key = (int(seed), int(rep), int(stream_id))
        bitgen = np.random.Philox(np.random.SeedSequence(self.key))
        self._gen = np.random.Generator(bitgen)

    def next(self) -> float:
        # integers in [1, 2^53) keep both endpoints of (0, 1) excluded
        return int(self._gen.integers(1, 1 << 53)) / _DENOM


def replication_streams(seed: int, rep: int) -> tuple[UniformStream, UniformStream]:
    """Holding-time and destination streams for one replication."""
    return UniformStream(seed, rep, HOLDING), UniformStream(seed, rep, DESTINATION)
