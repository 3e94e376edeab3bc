"""Counter-based random substreams.

Every draw in a simulation comes from a Philox generator keyed by
``(seed, purpose, iteration, block)``.  Episodes are grouped in fixed-size
blocks, so a given episode always sees the same numbers no matter how the
batch is chunked or how many workers evaluate it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

#: Episodes per random block.  Part of the stream layout: changing it changes results.
BLOCK_SIZE = 512


class Purpose(IntEnum):
    THETA = 0
    REWARD_NOISE = 1
    POLICY_NOISE = 2
    SELF_PLAY_NOISE = 3
    TAU = 4


@dataclass(frozen=True)
class RandomStream:
    """Root of a family of independent substreams.

    >>> s = RandomStream(7)
    >>> a = s.generator(Purpose.THETA, 1, 0).standard_normal()
    >>> b = s.generator(Purpose.THETA, 1, 0).standard_normal()
    >>> a == b
    True
    """

    seed: int

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")

    def generator(self, purpose: Purpose, iteration: int = 0, block: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(purpose), int(iteration), int(block))
        )
        return np.random.Generator(np.random.Philox(seq))


def blocks(n: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """Split ``n`` episodes into ``(block_index, start, stop)`` triples."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return [(b, lo, min(lo + block_size, n)) for b, lo in enumerate(range(0, n, block_size))]


def pairwise_sum(parts):
    """Sum a sequence of arrays in a fixed pairwise-tree order."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to reduce")
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]
