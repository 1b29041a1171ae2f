"""Weighted sampling without replacement over unaggregated elements.

Each element (key, val) is scored with an independent Exp[val] draw and fed to
a bottom-k structure.  The minimum score of a key over the whole stream is
then Exp-distributed with rate equal to the key's total frequency, so the k
retained keys form a without-replacement sample drawn proportionally to
frequency.
"""

from __future__ import annotations

from .corestream import BottomK, check_element
from .errors import IncompatibleSketch
from .randomness import RandomSource, exp_draw


class PpsworSketch:
    """Bottom-k over per-element exponential scores.

    The random source is injected so runs can be replayed; sketches built over
    partitions of a stream merge to the sequential result when each partition
    source starts at the partition's draw offset.
    """

    __slots__ = ("sample", "rng")

    def __init__(self, k: int, rng: RandomSource | None = None):
        self.sample = BottomK(k)
        self.rng = rng if rng is not None else RandomSource()

    @property
    def k(self) -> int:
        return self.sample.k

    def process(self, key, val: float):
        check_element(key, val)
        return self.sample.process(key, exp_draw(val, self.rng.uniform()))

    def merge(self, other: "PpsworSketch") -> "PpsworSketch":
        if self.k != other.k:
            raise IncompatibleSketch(f"sample size mismatch: {self.k} != {other.k}")
        out = PpsworSketch(self.k, self.rng)
        out.sample = self.sample.merge(other.sample)
        return out
