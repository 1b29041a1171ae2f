"""Randomness for the sketches.

Two sources of randomness are used and must stay distinct:

* ``RandomSource`` supplies the per-element exponential draws consumed while
  processing a stream.  It is a counter-indexed generator: draw ``c`` is a pure
  function of ``(seed, c)``, so a stream split into contiguous partitions can
  be replayed exactly by starting each partition's source at the right counter.
  Blocks of draws are also computable as numpy vectors, which the sampling
  sketch relies on for throughput.

* ``ExpHash`` is a seeded hash mapping keys to Exp[1] variates.  All sketch
  instances that may later be merged must share the same hash seed, so that a
  key receives the same variate everywhere.
"""

from __future__ import annotations

import hashlib
import math
import secrets

import numpy as np

from .errors import InvalidParameter

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
# 2^-53; uniforms are ((top 53 bits) + 0.5) * 2^-53, which lies in (0, 1).
_U53 = 1.0 / (1 << 53)

_TIE_SALT = b"freqsketch-tie"


def mix64(z: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def mix64_vec(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_A)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_B)
    z ^= z >> np.uint64(31)
    return z


def _bits_to_unit(bits: int) -> float:
    return ((bits >> 11) + 0.5) * _U53


def _bits_to_unit_vec(bits: np.ndarray) -> np.ndarray:
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def key_bytes(key) -> bytes:
    """Canonical byte encoding of a key, tagged by type."""
    if isinstance(key, str):
        return b"s" + key.encode("utf-8")
    if isinstance(key, (bytes, bytearray)):
        return b"b" + bytes(key)
    if isinstance(key, int):
        return b"i" + key.to_bytes(16, "big", signed=True)
    raise InvalidParameter(f"unsupported key type: {type(key).__name__}")


def tie_hash(key) -> int:
    """Stable 64-bit hash used to break value ties deterministically."""
    return int.from_bytes(
        hashlib.blake2b(key_bytes(key), digest_size=8, key=_TIE_SALT).digest(), "big"
    )


def exp_draw(rate: float, u: float) -> float:
    """Exponential variate with the given rate from a uniform in (0, 1)."""
    if rate <= 0:
        raise InvalidParameter(f"rate must be positive, got {rate}")
    if not 0.0 < u < 1.0:
        raise InvalidParameter(f"uniform variate must be in (0, 1), got {u}")
    return -math.log(u) / rate


class RandomSource:
    """Counter-indexed uniform/exponential generator.

    Draw ``c`` equals ``mix64(state + (c + 1) * GOLDEN)`` mapped to (0, 1),
    where ``state`` is the mixed seed.  Two sources with the same seed produce
    the same sequence; a source constructed at ``counter=n`` produces the tail
    of that sequence starting at draw ``n``.
    """

    __slots__ = ("seed", "counter", "_state")

    def __init__(self, seed: int | None = None, counter: int = 0):
        if seed is None:
            seed = secrets.randbits(64)
        self.seed = seed & _MASK64
        self.counter = counter
        self._state = mix64(self.seed)

    def clone_at(self, counter: int) -> "RandomSource":
        return RandomSource(self.seed, counter)

    def uniform(self) -> float:
        c = self.counter
        self.counter = c + 1
        return _bits_to_unit(mix64(self._state + (c + 1) * _GOLDEN))

    def uniform_block(self, n: int) -> np.ndarray:
        c = self.counter
        self.counter = c + n
        counters = np.arange(c + 1, c + n + 1, dtype=np.uint64)
        bits = mix64_vec(np.uint64(self._state) + counters * np.uint64(_GOLDEN))
        return _bits_to_unit_vec(bits)

    def uniform_matrix(self, base: int, rows: int, cols: int, stride: int) -> np.ndarray:
        """Uniforms for counters ``base + j*stride + i`` at cell ``(j, i)``.

        Does not advance ``counter``; callers that lay out draws in a custom
        counter pattern account for consumption themselves.  The finalizer is
        inlined and runs in place: this is the sketch's hottest loop.
        """
        g = np.uint64(_GOLDEN)
        z = (np.arange(rows, dtype=np.uint64) * np.uint64(stride) * g)[:, None] + (
            np.arange(cols, dtype=np.uint64) * g
        )
        z += np.uint64((self._state + (base + 1) * _GOLDEN) & _MASK64)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX_A)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX_B)
        z ^= z >> np.uint64(31)
        z >>= np.uint64(11)
        u = z.astype(np.float64)
        u += 0.5
        u *= _U53
        return u

    def exponential(self, rate: float) -> float:
        return exp_draw(rate, self.uniform())

    def exponential_block(self, rate: float, n: int) -> np.ndarray:
        if rate <= 0:
            raise InvalidParameter(f"rate must be positive, got {rate}")
        return -np.log(self.uniform_block(n)) / rate


def derive_seed(master: int, *indices: int) -> int:
    """Child seed for (master, path of indices); stable across runs."""
    z = mix64(master)
    for ix in indices:
        z = mix64(z ^ mix64((ix + 0x5851F42D4C957F2D) & _MASK64))
    return z


class ExpHash:
    """Seeded deterministic hash with Exp[1]-distributed output.

    Plain keys are digested directly.  Structured keys ``(primary, secondary)``
    digest the length-delimited primary to two 64-bit words and fold the
    secondary in with a bijective mixer, so distinct pairs cannot alias (e.g.
    ("ab","c") vs ("a","bc")) and per-secondary values can be computed as
    numpy vectors from the cached words.
    """

    __slots__ = ("seed", "_key")

    def __init__(self, seed: int | None = None):
        if seed is None:
            seed = secrets.randbits(64)
        self.seed = seed & _MASK64
        self._key = self.seed.to_bytes(8, "big")

    def exp1(self, key) -> float:
        """Exp[1] variate for a plain key."""
        digest = hashlib.blake2b(b"\x00" + key_bytes(key), digest_size=8, key=self._key).digest()
        return -math.log(_bits_to_unit(int.from_bytes(digest, "big")))

    def key_words(self, primary) -> tuple[int, int]:
        """128-bit keyed digest of a primary key, as two 64-bit words."""
        kb = key_bytes(primary)
        digest = hashlib.blake2b(
            b"\x01" + len(kb).to_bytes(8, "big") + kb, digest_size=16, key=self._key
        ).digest()
        return int.from_bytes(digest[:8], "big"), int.from_bytes(digest[8:], "big")

    @staticmethod
    def _canon_secondary(secondary) -> int:
        if isinstance(secondary, int):
            return secondary & _MASK64
        return int.from_bytes(
            hashlib.blake2b(key_bytes(secondary), digest_size=8).digest(), "big"
        )

    def structured(self, primary, secondary) -> float:
        """Exp[1] variate for a structured ``(primary, secondary)`` key."""
        w0, w1 = self.key_words(primary)
        return self.structured_from_words(w0, w1, secondary)

    def structured_from_words(self, w0: int, w1: int, secondary) -> float:
        s = self._canon_secondary(secondary)
        bits = mix64(w0 ^ mix64(w1 + (s + 1) * _GOLDEN))
        # np.log, not math.log: scalar and vector paths must agree bitwise.
        return float(-np.log(_bits_to_unit(bits)))

    def structured_vec(self, w0: int, w1: int, secondaries: np.ndarray) -> np.ndarray:
        """Vector of variates for integer secondaries under one primary."""
        z = np.uint64(w1) + (secondaries.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
        bits = mix64_vec(np.uint64(w0) ^ mix64_vec(z))
        return -np.log(_bits_to_unit_vec(bits))


def key_exp_hash(h: ExpHash, key) -> float:
    """Exp[1] variate for a key; structured 2-tuples hash both parts."""
    if isinstance(key, tuple) and len(key) == 2:
        return h.structured(key[0], key[1])
    return h.exp1(key)
