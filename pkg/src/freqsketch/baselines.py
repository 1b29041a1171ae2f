"""Benchmark samplers that require the data in aggregated form.

Both schemes below assume a table of exact (key, frequency) pairs, which is
what the sketch is designed to avoid materializing; they serve as estimate
quality baselines in the experiment harness.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameter
from .finalize import FinalSample
from .randomness import RandomSource


def aggregate(elements) -> dict:
    """Exact per-key sums of a stream of (key, val) pairs."""
    table: dict = {}
    for key, val in elements:
        table[key] = table.get(key, 0.0) + val
    return table


def ppswor_aggregated(table: dict, weights: dict, k: int, rng: RandomSource) -> FinalSample:
    """Without-replacement sample of table keys, proportional to ``weights``."""
    if k < 3:
        raise InvalidParameter(f"sample size must be >= 3, got {k}")
    keys = list(table.keys())
    w = np.array([weights[key] for key in keys], dtype=np.float64)
    if np.any(w <= 0):
        raise InvalidParameter("all weights must be positive")
    seeds = -np.log(rng.uniform_block(len(keys))) / w
    order = np.argsort(seeds, kind="stable")[: min(k, len(keys))]
    entries = [(keys[int(ix)], float(seeds[int(ix)])) for ix in order]
    tau = entries[k - 1][1] if len(entries) >= k else math.inf
    return FinalSample(
        entries=entries, tau=tau, gamma=math.inf, k=k, eps=0.0, r=0, fn_name="aggregated-ppswor"
    )


def ppswor_estimate(sample: FinalSample, weights: dict, query=None) -> float:
    """Sum estimator for an aggregated without-replacement sample.

    Inclusion probability below the threshold is the exponential CDF
    1 - exp(-weight * tau).
    """
    total = 0.0
    for key, _seed in sample.sampled:
        q = 1.0 if query is None else query.get(key, 0.0)
        if q == 0.0:
            continue
        w = weights[key]
        if sample.tau == math.inf:
            total += q * w
        else:
            total += q * w / -math.expm1(-w * sample.tau)
    return total


class PrioritySample:
    """Top-k keys by priority weight/uniform, with the (k+1)-th as threshold."""

    def __init__(self, entries: list, tau: float):
        self.entries = entries
        self.tau = tau


def priority_sample(table: dict, weights: dict, k: int, rng: RandomSource) -> PrioritySample:
    """Threshold sample of k keys with priorities weight / uniform.

    With k or fewer keys the sample is the whole table and estimation is
    exact (threshold zero).
    """
    if k < 1:
        raise InvalidParameter(f"sample size must be >= 1, got {k}")
    keys = list(table.keys())
    w = np.array([weights[key] for key in keys], dtype=np.float64)
    if np.any(w <= 0):
        raise InvalidParameter("all weights must be positive")
    priorities = w / rng.uniform_block(len(keys))
    if len(keys) <= k:
        return PrioritySample([(key, math.inf) for key in keys], 0.0)
    order = np.argsort(-priorities, kind="stable")
    tau = float(priorities[order[k]])
    entries = [(keys[int(ix)], float(priorities[int(ix)])) for ix in order[:k]]
    return PrioritySample(entries, tau)


def priority_estimate(sample: PrioritySample, weights: dict, query=None) -> float:
    """Sum estimator max(weight, threshold) over the retained keys."""
    total = 0.0
    for key, _priority in sample.entries:
        q = 1.0 if query is None else query.get(key, 0.0)
        if q == 0.0:
            continue
        total += q * max(weights[key], sample.tau)
    return total
