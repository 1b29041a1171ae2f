"""Data elements and the composable bottom-k structure.

The bottom-k structure keeps, for each key, the minimum value seen for that
key, and retains the k (key, min-value) pairs with smallest values.  Its final
content is a pure function of the multiset of processed pairs, which is what
makes it mergeable: merging two structures and processing the union of their
streams give identical results.

Values are compared as ``(value, tie_hash(key))`` so that ties on equal values
break the same way in every instance.
"""

from __future__ import annotations

import heapq
from typing import Iterator, NamedTuple

from .errors import IncompatibleSketch, InvalidElement, InvalidParameter
from .randomness import tie_hash


class Element(NamedTuple):
    """One unaggregated observation: an opaque key with a positive value."""

    key: object
    val: float


def check_element(key, val) -> None:
    if not val > 0:
        raise InvalidElement(f"element value must be positive, got {val!r} for key {key!r}")


class BottomK:
    """Capacity-k map from key to minimum value, evicting the largest entry.

    ``entries`` maps each retained key to its running minimum value.  A lazy
    max-heap over ``(value, tie)`` supports O(log k) eviction and O(1)
    amortized access to the current eviction boundary.
    """

    __slots__ = ("k", "entries", "_ties", "_heap")

    def __init__(self, k: int):
        if k < 1:
            raise InvalidParameter(f"bottom-k capacity must be >= 1, got {k}")
        self.k = k
        self.entries: dict = {}
        self._ties: dict = {}
        # Max-heap via negated (value, tie); entries go stale when the key's
        # stored value changes or the key is evicted.
        self._heap: list = []

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return key in self.entries

    def items(self) -> Iterator[tuple[object, float]]:
        return iter(self.entries.items())

    def copy(self) -> "BottomK":
        out = BottomK(self.k)
        out.entries = dict(self.entries)
        out._ties = dict(self._ties)
        out._heap = list(self._heap)
        return out

    def _push(self, key, value: float) -> None:
        heapq.heappush(self._heap, (-value, -self._ties[key], key))

    def max_item(self) -> tuple[float, int] | None:
        """Largest live ``(value, tie)``, or None if empty."""
        heap = self._heap
        entries = self.entries
        while heap:
            nv, nt, key = heap[0]
            v = -nv
            if entries.get(key) == v and self._ties.get(key) == -nt:
                return v, -nt
            heapq.heappop(heap)
        return None

    def threshold_value(self) -> float:
        """Eviction boundary value: the max entry when full, else +inf."""
        if len(self.entries) < self.k:
            return float("inf")
        return self.max_item()[0]

    def _evict_max(self):
        heap = self._heap
        entries = self.entries
        while True:
            nv, nt, key = heapq.heappop(heap)
            if entries.get(key) == -nv and self._ties.get(key) == -nt:
                del entries[key]
                del self._ties[key]
                return key

    def process(self, key, value: float):
        """Fold in one (key, value) pair; returns the evicted key, if any."""
        entries = self.entries
        old = entries.get(key)
        if old is not None:
            if value < old:
                entries[key] = value
                self._push(key, value)
            return None
        if len(entries) >= self.k:
            mx = self.max_item()
            if value > mx[0]:
                return None
            tie = tie_hash(key)
            if value == mx[0] and tie >= mx[1]:
                return None
            entries[key] = value
            self._ties[key] = tie
            self._push(key, value)
            return self._evict_max()
        entries[key] = value
        self._ties[key] = tie_hash(key)
        self._push(key, value)
        return None

    def would_change(self, key, value: float) -> bool:
        """True if ``process(key, value)`` would alter the stored entries."""
        old = self.entries.get(key)
        if old is not None:
            return value < old
        if len(self.entries) < self.k:
            return True
        mx = self.max_item()
        return value < mx[0] or (value == mx[0] and tie_hash(key) < mx[1])

    def pop_max(self):
        """Remove and return the largest entry as (key, value), or None."""
        if not self.entries:
            return None
        mx = self.max_item()
        key = self._evict_max()
        return key, mx[0]

    def merge(self, other: "BottomK") -> "BottomK":
        """Combined structure over both inputs' streams; inputs unchanged."""
        if self.k != other.k:
            raise IncompatibleSketch(f"bottom-k capacity mismatch: {self.k} != {other.k}")
        out = self.copy()
        for key, value in other.entries.items():
            out.process(key, value)
        return out
