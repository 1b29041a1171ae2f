import math

import numpy as np
import pytest
import scipy.stats

from freqsketch.errors import IncompatibleSketch, InvalidElement
from freqsketch.ppswor import PpsworSketch
from freqsketch.randomness import RandomSource


class FixedUniforms:
    """Stand-in source feeding a prescribed uniform sequence."""

    def __init__(self, values):
        self.values = list(values)

    def uniform(self):
        return self.values.pop(0)


def test_single_element_closed_form():
    s = PpsworSketch(3, FixedUniforms([math.exp(-2)]))
    s.process("a", 2.0)
    assert s.sample.entries["a"] == pytest.approx(1.0, rel=1e-12)


def test_same_key_keeps_min_draw():
    s = PpsworSketch(3, FixedUniforms([0.5, 0.9]))
    s.process("a", 1.0)
    s.process("a", 1.0)
    assert s.sample.entries["a"] == pytest.approx(-math.log(0.9), rel=1e-12)


def test_rejects_nonpositive_value():
    s = PpsworSketch(3, RandomSource(1))
    with pytest.raises(InvalidElement):
        s.process("a", 0.0)


def test_seed_distribution_sums_rates():
    # Processing (a,1) then (a,2) leaves a seed distributed as the minimum of
    # Exp[1] and Exp[2], i.e. Exp[3].
    seeds = []
    for rep in range(10_000):
        s = PpsworSketch(2, RandomSource(rep))
        s.process("a", 1.0)
        s.process("a", 2.0)
        seeds.append(s.sample.entries["a"])
    assert scipy.stats.kstest(seeds, "expon", args=(0, 1 / 3)).pvalue > 0.01


def test_merge_identity_and_size_guard():
    s = PpsworSketch(3, RandomSource(5))
    for key in "abcd":
        s.process(key, 1.0)
    merged = s.merge(PpsworSketch(3, RandomSource(6)))
    assert merged.sample.entries == s.sample.entries
    with pytest.raises(IncompatibleSketch):
        s.merge(PpsworSketch(4, RandomSource(7)))


def test_partition_replay_equals_sequential():
    gen = np.random.Generator(np.random.PCG64(2))
    keys = [f"k{v}" for v in gen.integers(0, 30, 400)]
    vals = gen.random(400) + 0.1

    seq = PpsworSketch(5, RandomSource(9))
    for key, val in zip(keys, vals):
        seq.process(key, val)

    for cut in (1, 137, 399):
        s1 = PpsworSketch(5, RandomSource(9))
        for key, val in zip(keys[:cut], vals[:cut]):
            s1.process(key, val)
        s2 = PpsworSketch(5, RandomSource(9, counter=cut))
        for key, val in zip(keys[cut:], vals[cut:]):
            s2.process(key, val)
        assert s1.merge(s2).sample.entries == seq.sample.entries


def test_merged_key_seed_rate_adds_across_parts():
    seeds = []
    for rep in range(10_000):
        s1 = PpsworSketch(2, RandomSource(derive(rep, 0)))
        s2 = PpsworSketch(2, RandomSource(derive(rep, 1)))
        s1.process("a", 1.5)
        s2.process("a", 2.5)
        seeds.append(s1.merge(s2).sample.entries["a"])
    assert scipy.stats.kstest(seeds, "expon", args=(0, 1 / 4)).pvalue > 0.01


def derive(a, b):
    from freqsketch.randomness import derive_seed

    return derive_seed(a, b)


def test_first_pick_probability_proportional_to_weight():
    # Two keys, capacity 1: the heavier key wins with probability w1/(w1+w2).
    w1, w2 = 3.0, 1.0
    wins = 0
    trials = 100_000
    src = RandomSource(77)
    u = src.uniform_block(2 * trials)
    for t in range(trials):
        s1 = -math.log(u[2 * t]) / w1
        s2 = -math.log(u[2 * t + 1]) / w2
        wins += s1 < s2
    p = w1 / (w1 + w2)
    sigma = math.sqrt(p * (1 - p) / trials)
    observed = wins / trials

    # the sketch path agrees with the direct simulation
    sketch_wins = 0
    sub_trials = 20_000
    for t in range(sub_trials):
        s = PpsworSketch(1, RandomSource(77, counter=2 * t))
        s.process("h", w1)
        s.process("l", w2)
        sketch_wins += "h" in s.sample.entries
    assert abs(observed - p) < 3 * sigma
    assert abs(sketch_wins / sub_trials - p) < 3 * math.sqrt(p * (1 - p) / sub_trials)


def test_scaled_seeds_keep_retained_set():
    gen = np.random.Generator(np.random.PCG64(4))
    keys = [f"k{v}" for v in gen.integers(0, 50, 300)]
    s = PpsworSketch(6, RandomSource(13))
    for key in keys:
        s.process(key, 2.0)
    scaled = {key: val / 7.0 for key, val in s.sample.entries.items()}
    assert sorted(scaled, key=scaled.get) == sorted(
        s.sample.entries, key=s.sample.entries.get
    )
