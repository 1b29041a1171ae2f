"""Inverse-probability estimation from a final sample.

A sampled key with frequency w contributes f(w) / Pr[seed < tau], where the
seed law is the minimum of the rescaled lower-range exponential (rate
w * lower_moment(gamma)) and r independent replica components, each an
exponential whose rate is tail_mass(max(y, gamma)) / r for y ~ Exp[w].
Writing q = 1 - p2 for one replica component,

    Pr[seed < t] = 1 - exp(-w * lower_moment(gamma) * t) * (1 - q)^r,
    q = (1 - e^(-w*gamma)) * (1 - e^(-tail_mass(gamma) * t / r))
        + integral over y > gamma of w e^(-w y) (1 - e^(-tail_mass(y) * t / r)).

Working with q directly keeps full precision when p2 is close to 1, which is
the common case for r in the hundreds.  For purely atomic densities
tail_mass is a step function and the integral collapses to a finite sum.

The second pass over the data is a trivial composable collector that sums
element values for the sampled keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import scipy.integrate

from .errors import IncompleteSecondPass, InvalidParameter, NumericFailure
from .finalize import FinalSample
from .transforms import FunctionSpec

_QUAD_REL = 1e-8
_QUAD_ABS = 1e-12


def _replica_complement(w: float, t: float, fn: FunctionSpec, gamma: float, r: int) -> float:
    """q = Pr[one replica component fires below t]; see module docstring."""
    tail_gamma = float(fn.tail_mass(gamma))
    q = -math.expm1(-w * gamma) * -math.expm1(-tail_gamma * t / r)

    if fn.density is None:
        # Step-function tail: sum over the constant segments above gamma.
        points = sorted(t0 for t0, _ in fn.atoms if t0 > gamma)
        lo = gamma
        for t0 in points:
            seg_tail = float(fn.tail_mass(t0))
            q += (math.exp(-w * lo) - math.exp(-w * t0)) * -math.expm1(-seg_tail * t / r)
            lo = t0
        return q

    # Substitute y = gamma + s/w so the exponential decay has unit scale
    # regardless of w; the integral becomes
    # e^(-w*gamma) * integral over s > 0 of e^(-s) (1 - e^(-tail(y(s)) t / r)).
    def integrand(s: float) -> float:
        y = gamma + s / w
        return math.exp(-s) * -math.expm1(-float(fn.tail_mass(y)) * t / r)

    breaks = sorted(w * (t0 - gamma) for t0, _ in fn.atoms if t0 > gamma)
    lo = 0.0
    tail_sum = 0.0
    for b in breaks + [math.inf]:
        res = scipy.integrate.quad(
            integrand, lo, b, epsabs=_QUAD_ABS, epsrel=_QUAD_REL, limit=200, full_output=1
        )
        if len(res) > 3:
            raise NumericFailure(f"seed CDF tail integral failed on ({lo}, {b}): {res[3]}")
        tail_sum += res[0]
        lo = b
    return q + math.exp(-w * gamma) * tail_sum


def seed_cdf(w: float, t: float, fn: FunctionSpec, gamma: float, r: int) -> float:
    """Pr[final seed of a key with frequency w is below t]."""
    if w <= 0 or gamma <= 0 or r < 1:
        raise InvalidParameter(f"bad seed CDF arguments w={w} gamma={gamma} r={r}")
    if t <= 0:
        return 0.0
    if t == math.inf:
        return 1.0
    q = _replica_complement(w, t, fn, gamma, r)
    q = min(q, 1.0)
    low_moment = float(fn.lower_moment(gamma))
    if q >= 1.0:
        return 1.0
    log_survival = -w * low_moment * t + r * math.log1p(-q)
    return -math.expm1(log_survival)


def per_key_estimate(
    nu: float, tau: float, fn: FunctionSpec, gamma: float, r: int
) -> float:
    """Unbiased estimate of f(frequency) for a sampled key."""
    if nu <= 0:
        raise InvalidParameter(f"frequency must be positive, got {nu}")
    value = float(fn.f(nu))
    if tau == math.inf:
        return value
    p = seed_cdf(nu, tau, fn, gamma, r)
    if p <= 0.0:
        raise NumericFailure(f"inclusion probability underflowed for nu={nu}, tau={tau}")
    return value / p


class FreqCollector:
    """Second-pass collector: exact frequencies of a fixed set of keys."""

    def __init__(self, targets):
        self.targets = set(targets)
        self.sums: dict = {key: 0.0 for key in self.targets}

    def process(self, key, val: float) -> None:
        if key in self.targets:
            self.sums[key] += val

    def process_stream(self, elements) -> "FreqCollector":
        for key, val in elements:
            if key in self.targets:
                self.sums[key] += val
        return self

    def merge(self, other: "FreqCollector") -> "FreqCollector":
        out = FreqCollector(self.targets | other.targets)
        for key in out.targets:
            out.sums[key] = self.sums.get(key, 0.0) + other.sums.get(key, 0.0)
        return out


@dataclass
class Estimate:
    value: float
    per_key: dict = field(default_factory=dict)


def sum_estimate(
    sample: FinalSample,
    freqs,
    fn: FunctionSpec,
    weights=None,
) -> Estimate:
    """Estimate sum over keys of L_x * f(frequency of x).

    ``freqs`` is a FreqCollector or a plain mapping covering every sampled
    key; ``weights`` maps keys to L_x (default: 1 everywhere).  Keys with a
    zero weight are skipped.
    """
    sums = freqs.sums if isinstance(freqs, FreqCollector) else freqs
    total = 0.0
    per_key: dict = {}
    for key, _seed in sample.sampled:
        weight = 1.0 if weights is None else weights.get(key, 0.0)
        if weight == 0.0:
            continue
        if key not in sums:
            raise IncompleteSecondPass(f"no collected frequency for sampled key {key!r}")
        nu = sums[key]
        if nu <= 0:
            raise IncompleteSecondPass(f"collected frequency for {key!r} is {nu}")
        est = per_key_estimate(nu, sample.tau, fn, sample.gamma, sample.r)
        per_key[key] = est
        total += weight * est
    return Estimate(value=total, per_key=per_key)
