"""Composable sampling sketches for concave functions of key frequency.

Build a small weighted sample of keys from an unaggregated key-value stream,
tailored to a concave function f of each key's total value, without ever
aggregating the stream.  Samples merge across stream partitions and support
unbiased estimation of sums of f(frequency) after a second pass collects the
sampled keys' exact frequencies.
"""

from .baselines import aggregate, ppswor_aggregated, priority_sample
from .corestream import BottomK, Element
from .errors import (
    EmptySketch,
    IncompatibleSketch,
    IncompleteSecondPass,
    InvalidElement,
    InvalidParameter,
    LineError,
    NumericFailure,
    SketchError,
)
from .estimator import Estimate, FreqCollector, per_key_estimate, seed_cdf, sum_estimate
from .finalize import FinalSample, produce_sample, seed_rescale
from .ppswor import PpsworSketch
from .randomness import ExpHash, RandomSource, derive_seed, exp_draw, key_exp_hash
from .sampler import SamplerSketch
from .summax import StructuredKey, SumMaxSketch
from .transforms import (
    FunctionSpec,
    consistency_check,
    laplace_c,
    make_log,
    make_moment,
    make_soft_cap,
    resolve,
)

__all__ = [
    "BottomK",
    "Element",
    "Estimate",
    "ExpHash",
    "FinalSample",
    "FreqCollector",
    "FunctionSpec",
    "PpsworSketch",
    "RandomSource",
    "SamplerSketch",
    "SketchError",
    "StructuredKey",
    "SumMaxSketch",
    "aggregate",
    "consistency_check",
    "derive_seed",
    "exp_draw",
    "key_exp_hash",
    "laplace_c",
    "make_log",
    "make_moment",
    "make_soft_cap",
    "per_key_estimate",
    "ppswor_aggregated",
    "priority_sample",
    "produce_sample",
    "resolve",
    "seed_cdf",
    "seed_rescale",
    "sum_estimate",
    "EmptySketch",
    "IncompatibleSketch",
    "IncompleteSecondPass",
    "InvalidElement",
    "InvalidParameter",
    "LineError",
    "NumericFailure",
]
