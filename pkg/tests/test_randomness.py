import math

import numpy as np
import pytest
import scipy.stats

from freqsketch.errors import InvalidParameter
from freqsketch.randomness import (
    ExpHash,
    RandomSource,
    derive_seed,
    exp_draw,
    key_exp_hash,
    mix64,
    mix64_vec,
)


def test_exp_draw_closed_forms():
    assert exp_draw(1.0, math.exp(-1)) == pytest.approx(1.0, rel=1e-15)
    assert exp_draw(2.0, 0.5) == pytest.approx(math.log(2) / 2, rel=1e-15)


def test_exp_draw_rejects_bad_arguments():
    with pytest.raises(InvalidParameter):
        exp_draw(0.0, 0.5)
    with pytest.raises(InvalidParameter):
        exp_draw(-1.0, 0.5)
    for u in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(InvalidParameter):
            exp_draw(1.0, u)


def test_exp_draw_scaling_property():
    # Dividing the rate scales the draw: exp_draw(c*r, u) == exp_draw(r, u)/c.
    for u in (0.1, 0.5, 0.93):
        for c in (2.0, 4.0, 0.5):
            assert exp_draw(c * 3.0, u) == pytest.approx(exp_draw(3.0, u) / c, rel=1e-14)
        # powers of two scale exactly
        assert exp_draw(2.0 * 3.0, u) == exp_draw(3.0, u) / 2.0


def test_exp_draw_monte_carlo_mean():
    src = RandomSource(123)
    draws = -np.log(src.uniform_block(1_000_000)) / 4.0
    # mean 1/4, sd of the mean = (1/4)/1000
    assert abs(draws.mean() - 0.25) < 3 * 0.25 / 1000


def test_random_source_replay_and_offset():
    a = RandomSource(42)
    b = RandomSource(42)
    seq_a = [a.uniform() for _ in range(100)]
    seq_b = b.uniform_block(100).tolist()
    assert seq_a == seq_b

    tail = RandomSource(42, counter=60)
    assert tail.uniform_block(40).tolist() == seq_a[60:]


def test_uniform_matrix_counter_layout():
    src = RandomSource(7)
    flat = src.uniform_block(3 * 5)
    grid = RandomSource(7).uniform_matrix(0, 3, 5, 5)
    assert np.array_equal(grid.ravel(), flat)


def test_uniforms_in_open_interval():
    u = RandomSource(9).uniform_block(100_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_uniform_distribution_ks():
    u = RandomSource(10).uniform_block(100_000)
    assert scipy.stats.kstest(u, "uniform").pvalue > 0.01


def test_mix64_vec_matches_scalar():
    zs = np.array([0, 1, 2**63, 2**64 - 1, 123456789], dtype=np.uint64)
    out = mix64_vec(zs)
    for z, o in zip(zs.tolist(), out.tolist()):
        assert mix64(z) == o


def test_derive_seed_spreads():
    seeds = {derive_seed(1, i) for i in range(1000)}
    seeds |= {derive_seed(2, i) for i in range(1000)}
    assert len(seeds) == 2000


class TestExpHash:
    def test_deterministic(self):
        h = ExpHash(5)
        assert key_exp_hash(h, "a") == key_exp_hash(h, "a")
        assert key_exp_hash(ExpHash(5), "a") == key_exp_hash(h, "a")
        assert key_exp_hash(ExpHash(6), "a") != key_exp_hash(h, "a")

    def test_structured_matches_vector_path(self):
        h = ExpHash(17)
        w0, w1 = h.key_words("key")
        vec = h.structured_vec(w0, w1, np.arange(50, dtype=np.uint64))
        for i in range(50):
            assert h.structured("key", i) == vec[i]

    def test_structured_distinguishes_parts(self):
        h = ExpHash(3)
        assert h.structured("ab", "c") != h.structured("a", "bc")
        assert h.structured("a", 1) != h.structured("a", 2)

    def test_exp1_distribution_ks(self):
        h = ExpHash(21)
        values = np.array([h.exp1(f"key-{i}") for i in range(100_000)])
        assert scipy.stats.kstest(values, "expon").pvalue > 0.01

    def test_structured_distribution_ks(self):
        h = ExpHash(22)
        w0, w1 = h.key_words("shared")
        values = h.structured_vec(w0, w1, np.arange(100_000, dtype=np.uint64))
        assert scipy.stats.kstest(values, "expon").pvalue > 0.01
