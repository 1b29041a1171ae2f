"""Sampling primary keys proportionally to their sum-of-max weight.

Elements carry structured keys (primary, secondary).  Scoring an element as
hash(full key) / value means all elements sharing a full key get the same
hash, so the minimum score for that full key is hash / (max value).  Taking
the minimum over a primary key's secondaries yields an exponential seed whose
rate is the sum over secondaries of the maximum element value, and the
bottom-k of those seeds is a without-replacement sample of primary keys by
that weight.

Because the score hash is deterministic, the sketch itself is deterministic
given its hash seed: merging requires equal seeds and commutes with any
partition of the input.
"""

from __future__ import annotations

from typing import NamedTuple

from .corestream import BottomK, check_element
from .errors import IncompatibleSketch
from .randomness import ExpHash


class StructuredKey(NamedTuple):
    primary: object
    secondary: object


class SumMaxSketch:
    __slots__ = ("sample", "h")

    def __init__(self, k: int, h: ExpHash | None = None):
        self.sample = BottomK(k)
        self.h = h if h is not None else ExpHash()

    @property
    def k(self) -> int:
        return self.sample.k

    def process(self, key, val: float):
        """Score (primary, secondary) element and fold into the sample."""
        check_element(key, val)
        primary, secondary = key
        score = self.h.structured(primary, secondary) / val
        return self.sample.process(primary, score)

    def process_scored(self, primary, score: float):
        """Fold in a precomputed score for a primary key."""
        return self.sample.process(primary, score)

    def copy(self) -> "SumMaxSketch":
        out = SumMaxSketch.__new__(SumMaxSketch)
        out.sample = self.sample.copy()
        out.h = self.h
        return out

    def merge(self, other: "SumMaxSketch") -> "SumMaxSketch":
        if self.k != other.k:
            raise IncompatibleSketch(f"sample size mismatch: {self.k} != {other.k}")
        if self.h.seed != other.h.seed:
            raise IncompatibleSketch("cannot merge samples scored by different hash seeds")
        out = SumMaxSketch.__new__(SumMaxSketch)
        out.h = self.h
        out.sample = self.sample.merge(other.sample)
        return out
