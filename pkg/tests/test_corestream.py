import numpy as np
import pytest

from freqsketch.corestream import BottomK, Element, check_element
from freqsketch.errors import IncompatibleSketch, InvalidElement, InvalidParameter
from freqsketch.randomness import tie_hash


def brute_force(pairs, k):
    """Independent oracle: per-key minimum, keep the k lowest by (value, tie)."""
    mins = {}
    for key, val in pairs:
        mins[key] = min(mins.get(key, float("inf")), val)
    ranked = sorted(mins.items(), key=lambda kv: (kv[1], tie_hash(kv[0])))
    return dict(ranked[:k])


def test_init():
    s = BottomK(3)
    assert s.k == 3 and len(s) == 0
    assert len(BottomK(1).entries) == 0
    with pytest.raises(InvalidParameter):
        BottomK(0)


def test_element_validation():
    assert Element("a", 2.0).val == 2.0
    with pytest.raises(InvalidElement):
        check_element("a", 0.0)
    with pytest.raises(InvalidElement):
        check_element("a", -1.0)


def test_per_key_min():
    s = BottomK(2)
    for key, val in [("a", 5.0), ("b", 3.0), ("a", 4.0)]:
        s.process(key, val)
    assert s.entries == {"a": 4.0, "b": 3.0}


def test_evict_max():
    s = BottomK(2)
    for key, val in [("a", 5.0), ("b", 3.0), ("c", 1.0)]:
        s.process(key, val)
    assert s.entries == {"b": 3.0, "c": 1.0}


def test_tie_break_by_key_hash():
    s = BottomK(2)
    for key in ("a", "b", "c"):
        s.process(key, 5.0)
    expected = sorted(["a", "b", "c"], key=tie_hash)[:2]
    assert sorted(s.entries) == sorted(expected)


def test_merge_basic():
    s1 = BottomK(2)
    s1.process("a", 4.0)
    s1.process("b", 3.0)
    s2 = BottomK(2)
    s2.process("a", 2.0)
    s2.process("c", 9.0)
    merged = s1.merge(s2)
    assert merged.entries == {"a": 2.0, "b": 3.0}
    # inputs untouched
    assert s1.entries == {"a": 4.0, "b": 3.0}


def test_merge_identity_and_idempotence():
    s = BottomK(3)
    for key, val in [("a", 1.0), ("b", 2.0), ("c", 3.0)]:
        s.process(key, val)
    assert s.merge(BottomK(3)).entries == s.entries
    assert s.merge(s).entries == s.entries


def test_merge_size_mismatch():
    with pytest.raises(IncompatibleSketch):
        BottomK(2).merge(BottomK(3))


@pytest.mark.parametrize("k", [1, 3, 7])
def test_partition_invariance_random_streams(k):
    gen = np.random.Generator(np.random.PCG64(99))
    pairs = [(f"k{gen.integers(0, 20)}", float(gen.random())) for _ in range(50)]
    expected = brute_force(pairs, k)

    whole = BottomK(k)
    for key, val in pairs:
        whole.process(key, val)
    assert whole.entries == expected

    for _ in range(20):
        mask = gen.random(len(pairs)) < 0.5
        parts = [BottomK(k), BottomK(k)]
        for (key, val), side in zip(pairs, mask):
            parts[int(side)].process(key, val)
        assert parts[0].merge(parts[1]).entries == expected


def test_capacity_invariant_and_eviction_reporting():
    gen = np.random.Generator(np.random.PCG64(5))
    s = BottomK(4)
    live = set()
    for _ in range(500):
        key = f"k{gen.integers(0, 40)}"
        val = float(gen.random())
        before = set(s.entries)
        evicted = s.process(key, val)
        assert len(s) <= 4
        if evicted is not None:
            assert evicted in before | {key}
            assert evicted not in s.entries
        live = set(s.entries)
    assert len(live) == 4


def test_pop_max_and_threshold():
    s = BottomK(3)
    assert s.threshold_value() == float("inf")
    for key, val in [("a", 1.0), ("b", 2.0), ("c", 3.0)]:
        s.process(key, val)
    assert s.threshold_value() == 3.0
    key, val = s.pop_max()
    assert (key, val) == ("c", 3.0)
    assert s.threshold_value() == float("inf")  # no longer full


def test_would_change():
    s = BottomK(2)
    s.process("a", 1.0)
    assert s.would_change("a", 0.5)
    assert not s.would_change("a", 1.5)
    assert s.would_change("b", 99.0)  # not full
    s.process("b", 2.0)
    assert s.would_change("c", 1.5)
    assert not s.would_change("c", 2.5)
