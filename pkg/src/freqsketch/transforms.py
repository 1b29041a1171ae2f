"""Concave functions of frequency and their integral-transform data.

A function f here is represented through a nonnegative density a(t), possibly
with point masses, such that

    f(v) = integral over t of a(t) * (1 - exp(-v t)).

The sampler never looks at f directly; it only consumes two derived functions:

    tail_mass(g)    = integral of a(t) over t >= g   (point masses at t0 >= g)
    lower_moment(g) = integral of t * a(t) over t < g (point masses at t0 < g)

The boundary convention (tail includes masses at exactly g, lower moment does
not) makes the two ranges partition f exactly.

Closed forms registered here are never trusted blindly: ``consistency_check``
re-derives f by adaptive quadrature of the density plus point masses and is
exercised by the test suite for every registered function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.integrate
import scipy.special

from .errors import InvalidParameter, NumericFailure

QUAD_REL_TOL = 1e-8
QUAD_ABS_FLOOR = 1e-12


@dataclass(frozen=True)
class FunctionSpec:
    """A concave function of frequency packaged with its transform data.

    ``f``, ``tail_mass`` and ``lower_moment`` accept scalars or numpy arrays.
    ``density`` is the continuous part a(t) (None if purely atomic); ``atoms``
    lists point masses as (t0, mass) pairs.  ``density_pole`` is p when a(t)
    behaves like t**(-1-p) near zero, which quadrature must neutralize.
    """

    name: str
    f: Callable
    tail_mass: Callable
    lower_moment: Callable
    density: Callable | None = None
    atoms: tuple[tuple[float, float], ...] = field(default=())
    density_pole: float | None = None


def make_moment(p: float) -> FunctionSpec:
    """Frequency moment f(v) = v**p for 0 < p < 1."""
    if not 0.0 < p < 1.0:
        raise InvalidParameter(f"moment exponent must be in (0, 1), got {p}")
    g = math.gamma(1.0 - p)
    c = p / g
    # numpy ufuncs throughout: scalar and array evaluations must agree
    # bitwise (python's ** rounds differently from np.power).
    if p == 0.5:
        tail = lambda t: 1.0 / (np.sqrt(t) * g)  # noqa: E731
        lower = lambda t: np.sqrt(t) / g  # noqa: E731
        f = np.sqrt
    else:
        tail = lambda t: np.power(t, -p) / g  # noqa: E731
        lower = lambda t: (p / (1.0 - p)) * np.power(t, 1.0 - p) / g  # noqa: E731
        f = lambda v: np.power(v, p)  # noqa: E731
    return FunctionSpec(
        name=f"moment:{p:g}" if p != 0.5 else "sqrt",
        f=f,
        density=lambda t: c * np.power(t, -1.0 - p),
        tail_mass=tail,
        lower_moment=lower,
        density_pole=p,
    )


def make_log() -> FunctionSpec:
    """f(v) = ln(1 + v)."""
    return FunctionSpec(
        name="log1p",
        f=np.log1p,
        density=lambda t: np.exp(-t) / t,
        tail_mass=scipy.special.exp1,
        lower_moment=lambda t: -np.expm1(-t),
        density_pole=0.0,
    )


def make_soft_cap(T: float) -> FunctionSpec:
    """Smoothed cap f(v) = T * (1 - exp(-v / T)); a single point mass at 1/T.

    Approximates min(T, v) from below within a factor 1 - 1/e.
    """
    if not T > 0:
        raise InvalidParameter(f"cap threshold must be positive, got {T}")
    t0 = 1.0 / T
    return FunctionSpec(
        name=f"softcap:{T:g}",
        f=lambda v: -T * np.expm1(-np.asarray(v, dtype=float) / T),
        density=None,
        atoms=((t0, T),),
        tail_mass=lambda t: np.where(np.asarray(t, dtype=float) <= t0, T, 0.0),
        lower_moment=lambda t: np.where(np.asarray(t, dtype=float) > t0, 1.0, 0.0),
    )


def resolve(name: str) -> FunctionSpec:
    """Look up a function by CLI name: sqrt, moment:p, log1p, softcap:T."""
    if name == "sqrt":
        return make_moment(0.5)
    if name == "log1p":
        return make_log()
    if name.startswith("moment:"):
        try:
            p = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise InvalidParameter(f"bad moment exponent in {name!r}") from exc
        return make_moment(p)
    if name.startswith("softcap:"):
        try:
            T = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise InvalidParameter(f"bad cap threshold in {name!r}") from exc
        return make_soft_cap(T)
    raise InvalidParameter(f"unknown function name {name!r}")


def _quad(func, lo: float, hi: float) -> float:
    res = scipy.integrate.quad(
        func, lo, hi, epsabs=QUAD_ABS_FLOOR, epsrel=QUAD_REL_TOL, limit=200, full_output=1
    )
    if len(res) > 3:
        raise NumericFailure(f"quadrature failed on ({lo}, {hi}): {res[3]}")
    return res[0]


def laplace_c(spec: FunctionSpec, nu: float, lo: float = 0.0, hi: float = math.inf) -> float:
    """Range-restricted transform: integral of a(t)(1 - e^(-nu t)) over [lo, hi).

    Point masses contribute on the half-open range lo <= t0 < hi, matching the
    tail_mass / lower_moment boundary convention.
    """
    if lo < 0 or hi < lo:
        raise InvalidParameter(f"bad integration range ({lo}, {hi})")
    if nu < 0:
        raise InvalidParameter(f"frequency must be nonnegative, got {nu}")
    if nu == 0 or lo == hi:
        return 0.0

    total = 0.0
    for t0, mass in spec.atoms:
        if lo <= t0 < hi:
            total += mass * -math.expm1(-nu * t0)

    a = spec.density
    if a is None:
        return total

    def integrand(t: float) -> float:
        return float(a(t)) * -math.expm1(-nu * t)

    p = spec.density_pole
    cut = 1.0
    if p is not None and p > 0 and lo < cut:
        # Neutralize the t**(-1-p) endpoint singularity on the low piece with
        # the substitution s = t**(1-p).
        q = 1.0 - p
        seg_hi = min(hi, cut)

        def sub(s: float) -> float:
            t = s ** (1.0 / q)
            return integrand(t) * (s ** (p / q)) / q

        total += _quad(sub, lo**q, seg_hi**q)
        lo = seg_hi
        if lo >= hi:
            return total

    total += _quad(integrand, lo, hi)
    return total


def consistency_check(
    spec: FunctionSpec, nus=None, rel_tol: float = 1e-6
) -> float:
    """Verify f(nu) against quadrature of the density on a grid of nu values.

    Returns the worst relative error; raises NumericFailure beyond rel_tol.
    """
    if nus is None:
        nus = np.logspace(-2, 3, 20)
    worst = 0.0
    for nu in nus:
        nu = float(nu)
        direct = float(spec.f(nu))
        integral = laplace_c(spec, nu, 0.0, math.inf)
        err = abs(integral - direct) / max(abs(direct), 1e-300)
        worst = max(worst, err)
    if worst > rel_tol:
        raise NumericFailure(
            f"{spec.name}: closed form disagrees with quadrature (rel err {worst:.3g})"
        )
    return worst
