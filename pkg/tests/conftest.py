import math

import numpy as np
import pytest

from freqsketch.randomness import ExpHash, RandomSource, derive_seed
from freqsketch.sampler import SamplerSketch


def make_sampler(k, eps, fn, seed, *, counter_elements=0, prune=True, trunc=True, batch=None):
    """Sampler with replayable randomness; counter_elements offsets the draw
    counter as if the sketch starts mid-stream at that element index."""
    r = math.ceil(k / eps)
    return SamplerSketch(
        k,
        eps,
        fn,
        rng=RandomSource(derive_seed(seed, 0), counter=counter_elements * (r + 1)),
        exp_hash=ExpHash(derive_seed(seed, 1)),
        sideline_prune=prune,
        ppswor_trunc=trunc,
        batch_size=batch,
    )


def sketch_state(sk):
    """Comparable snapshot of all three sub-structures."""
    return (
        sorted(sk.ppswor.sample.entries.items()),
        sorted(sk.summax.sample.entries.items()),
        sorted((key, i, v) for key, i, v, _ in sk.sideline.items()),
        sk.total,
        sk.gamma,
    )


def random_stream(n, n_keys, seed, values=(1, 2, 3)):
    """Random keys with small integer values (partial sums stay exact)."""
    gen = np.random.Generator(np.random.PCG64(seed))
    keys = [f"x{v}" for v in gen.integers(0, n_keys, n)]
    vals = gen.choice(values, size=n).astype(np.float64)
    return keys, vals


@pytest.fixture(scope="session")
def unit_stream_10k():
    return random_stream(10_000, 400, seed=11, values=(1, 2, 4))
