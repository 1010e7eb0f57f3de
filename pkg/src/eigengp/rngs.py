"""Counter-based random number streams.

Every replication of every study derives its own generator from
(seed, replication, stream) through a Philox key, so results are identical
no matter how replications are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

STREAM_DESIGN = 0
STREAM_NOISE = 1

_MASK64 = (1 << 64) - 1


def rng_stream(seed: int, replication: int = 0, stream: int = 0) -> np.random.Generator:
    if replication < 0 or stream < 0:
        raise ValueError("replication and stream must be nonnegative")
    key = np.array(
        [seed & _MASK64, ((replication << 16) | stream) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))
