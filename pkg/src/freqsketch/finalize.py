"""Producing the final sample from a sampler sketch.

The two sub-samples live on different scales: the plain exponential-score
sample is proportional to raw frequency, the sum-of-max sample to upper-range
mass.  Rescaling exponential seeds preserves the retained set, so the final
sample divides the first by lower_moment(gamma), multiplies the second by r,
and bottom-k merges them.  The k-1 lowest seeds are the sample; the k-th is
the inclusion threshold used by the estimator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .corestream import BottomK
from .errors import EmptySketch, InvalidParameter
from .sampler import SamplerSketch


@dataclass
class FinalSample:
    """Sampled keys with seeds, ascending, plus the inclusion threshold.

    When fewer than k keys exist, every key is in the sample and ``tau`` is
    infinite (each key is included with probability 1).
    """

    entries: list
    tau: float
    gamma: float
    k: int
    eps: float
    r: int
    fn_name: str

    @property
    def sampled(self) -> list:
        if len(self.entries) >= self.k:
            return self.entries[: self.k - 1]
        return self.entries

    def to_json(self) -> str:
        return json.dumps(
            {
                "keys": [key for key, _ in self.entries],
                "seeds": [seed for _, seed in self.entries],
                "tau": None if self.tau == math.inf else self.tau,
                "gamma_final": self.gamma,
                "params": {"k": self.k, "eps": self.eps, "r": self.r, "fn": self.fn_name},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FinalSample":
        obj = json.loads(text)
        params = obj["params"]
        return cls(
            entries=list(zip(obj["keys"], obj["seeds"])),
            tau=math.inf if obj["tau"] is None else obj["tau"],
            gamma=obj["gamma_final"],
            k=params["k"],
            eps=params["eps"],
            r=params["r"],
            fn_name=params["fn"],
        )


def seed_rescale(sample: BottomK, factor: float, mode: str = "multiply") -> BottomK:
    """Rescale every stored seed; the retained set and order are unchanged."""
    if not factor > 0:
        raise InvalidParameter(f"scale factor must be positive, got {factor}")
    if mode not in ("multiply", "divide"):
        raise InvalidParameter(f"mode must be multiply or divide, got {mode!r}")
    out = BottomK(sample.k)
    scale = factor if mode == "multiply" else 1.0 / factor
    for key, value in sample.entries.items():
        out.process(key, value * scale)
    return out


def produce_sample(sketch: SamplerSketch) -> FinalSample:
    """Extract the final sample; the sketch itself is left usable."""
    if not sketch.total > 0:
        raise EmptySketch("cannot produce a sample before any element was processed")
    gamma = sketch.gamma
    fn = sketch.fn
    r = sketch.r

    summax = sketch.summax.copy()
    tail_at_gamma = float(fn.tail_mass(gamma))
    if tail_at_gamma > 0:
        for key, i, _v, _score in list(sketch.sideline.items()):
            summax.process_scored(key, sketch.exp_hash.structured(key, i) / tail_at_gamma)

    scaled_summax = seed_rescale(summax.sample, r, "multiply")
    low_moment = float(fn.lower_moment(gamma))
    if low_moment > 0:
        scaled_ppswor = seed_rescale(sketch.ppswor.sample, low_moment, "divide")
        combined = scaled_ppswor.merge(scaled_summax)
    else:
        combined = scaled_summax

    entries = sorted(combined.entries.items(), key=lambda kv: (kv[1], str(kv[0])))
    tau = entries[sketch.k - 1][1] if len(entries) >= sketch.k else math.inf
    return FinalSample(
        entries=entries,
        tau=tau,
        gamma=gamma,
        k=sketch.k,
        eps=sketch.eps,
        r=r,
        fn_name=fn.name,
    )
