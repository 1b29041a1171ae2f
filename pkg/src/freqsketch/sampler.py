"""The composable sampling sketch for a concave function of frequency.

Each input element (key, val) is handled on two ranges of the function's
transform density, split at an adaptive threshold gamma = 2*eps / (sum of all
values seen):

* Lower range: the element goes into a plain exponential-score bottom-k
  (``ppswor``), whose seeds are later rescaled by lower_moment(gamma).

* Upper range: the element spawns r = ceil(k/eps) replica draws
  y_i ~ Exp[val] under keys (key, i).  A replica whose running minimum draw y
  is at or above gamma is scored into the sum-of-max sketch with value
  tail_mass(y); replicas still below gamma wait in the sideline buffer, keyed
  by (key, i) with their minimum draw, and are flushed as gamma shrinks.

Merging sums the totals, recomputes gamma, merges the three sub-structures
(sideline by per-pair minimum), and flushes against the new gamma.

Two size optimizations are flag-controlled and on by default; neither changes
the produced sample:

* sideline pruning drops a pair whose scored insertion could not modify the
  sum-of-max sample now (and hence never could later);
* ppswor truncation drops entries whose rescaled seed already exceeds
  r * lower_moment(gamma) * (sum-of-max eviction boundary), re-applied as
  gamma shrinks.

Pruned state is a pure function of (gamma, sum-of-max content, pair minima),
which keeps merges exact: partition sketches merge to the sequential sketch
entry for entry under replayed randomness.
"""

from __future__ import annotations

import heapq
import math
from typing import Sequence

import numpy as np

from .corestream import check_element
from .errors import IncompatibleSketch, InvalidElement, InvalidParameter
from .ppswor import PpsworSketch
from .randomness import ExpHash, RandomSource, derive_seed
from .summax import SumMaxSketch
from .transforms import FunctionSpec, resolve


class Sideline:
    """Buffer of pending replica pairs: (key, i) -> minimum draw.

    Supports per-pair minimum updates, popping all pairs with value at or
    above a threshold (max-first), and, when pruning, popping pairs by score.
    Both heaps are lazy: an item is live only while the stored (value, score)
    still matches.
    """

    __slots__ = ("outer", "n", "_vheap", "_sheap", "top_bound")

    def __init__(self):
        self.outer: dict = {}
        self.n = 0
        self._vheap: list = []
        self._sheap: list = []
        # Upper bound on the largest live value; refreshed after flushes.
        self.top_bound = -math.inf

    def find(self, key):
        return self.outer.get(key)

    def put(self, key, i: int, v: float, score: float | None) -> bool:
        """Insert or overwrite a pair; returns True if the key is new."""
        inner = self.outer.get(key)
        fresh_key = inner is None
        if fresh_key:
            inner = {}
            self.outer[key] = inner
        if i not in inner:
            self.n += 1
        inner[i] = (v, score)
        heapq.heappush(self._vheap, (-v, key, i))
        if score is not None:
            heapq.heappush(self._sheap, (-score, key, i))
        if v > self.top_bound:
            self.top_bound = v
        return fresh_key

    def remove(self, key, i: int) -> bool:
        """Remove a pair; returns True if the key left the buffer."""
        inner = self.outer[key]
        del inner[i]
        self.n -= 1
        if not inner:
            del self.outer[key]
            return True
        return False

    def _peek(self, heap, slot: int):
        outer = self.outer
        while heap:
            negval, key, i = heap[0]
            inner = outer.get(key)
            if inner is not None:
                rec = inner.get(i)
                if rec is not None and rec[slot] == -negval:
                    return -negval, key, i, rec
            heapq.heappop(heap)
        return None

    def peek_value(self):
        return self._peek(self._vheap, 0)

    def peek_score(self):
        return self._peek(self._sheap, 1)

    def pop(self, heap_name: str):
        """Pop the live top of the named heap; returns (key, i, v, score, key_gone)."""
        heap = self._vheap if heap_name == "value" else self._sheap
        top = self._peek(heap, 0 if heap_name == "value" else 1)
        if top is None:
            return None
        _, key, i, rec = top
        heapq.heappop(heap)
        key_gone = self.remove(key, i)
        return key, i, rec[0], rec[1], key_gone

    def refresh_top(self) -> None:
        top = self.peek_value()
        self.top_bound = top[0] if top is not None else -math.inf

    def items(self):
        for key, inner in self.outer.items():
            for i, (v, score) in inner.items():
                yield key, i, v, score


class SamplerSketch:
    """Composable sketch producing a size-(k-1) weighted sample of keys."""

    def __init__(
        self,
        k: int,
        eps: float,
        fn: FunctionSpec | str,
        seed: int | None = None,
        *,
        rng: RandomSource | None = None,
        exp_hash: ExpHash | None = None,
        sideline_prune: bool = True,
        ppswor_trunc: bool = True,
        batch_size: int | None = None,
    ):
        if k < 3:
            raise InvalidParameter(f"sample size must be >= 3, got {k}")
        if not 0.0 < eps <= 0.5:
            raise InvalidParameter(f"eps must be in (0, 1/2], got {eps}")
        if isinstance(fn, str):
            fn = resolve(fn)
        self.k = k
        self.eps = float(eps)
        self.r = math.ceil(k / eps)
        self.fn = fn
        if rng is None:
            rng = RandomSource(None if seed is None else derive_seed(seed, 0))
        if exp_hash is None:
            exp_hash = ExpHash(None if seed is None else derive_seed(seed, 1))
        self.rng = rng
        self.exp_hash = exp_hash
        self.ppswor = PpsworSketch(k, rng)
        self.summax = SumMaxSketch(k, exp_hash)
        self.sideline = Sideline()
        self.total = 0.0
        self.gamma = math.inf
        self.sideline_prune = sideline_prune
        self.ppswor_trunc = ppswor_trunc
        self._batch = batch_size
        # Per input key: (w0, w1, probe replica indices, their hash variates,
        # smallest variate outside the probes).  The probes are the replicas
        # with the smallest hash variates; any other replica's score is at
        # least probe_rest / tail_mass(smallest draw), which decides most
        # elements without touching their replica rows.
        self._key_cache: dict = {}
        self._rows_cached = 0
        self._probes = min(4, self.r)
        self._arange_r = np.arange(self.r, dtype=np.uint64)
        self._trunc_bound = math.inf
        # Cached eviction boundaries of the two bottom-k structures.
        self._sm_bound = math.inf
        self._pp_max = -math.inf
        # Union of keys across the three sub-structures, by reference count.
        self._refs: dict = {}
        # Size history, measured after each processed element.
        self.max_distinct_keys = 0
        self.max_stored_elements = 0
        self.sideline_size_sum = 0
        self.sideline_size_max = 0
        self.elements_seen = 0

    # -- key hash caching -------------------------------------------------

    def _key_info(self, key):
        info = self._key_cache.get(key)
        if info is None:
            w0, w1 = self.exp_hash.key_words(key)
            hrow = self.exp_hash.structured_vec(w0, w1, self._arange_r)
            s = self._probes
            if self.r > s:
                part = np.argpartition(hrow, s)
                probe_ix = np.sort(part[:s])
                rest_min = float(hrow[part[s:]].min())
            else:
                probe_ix = np.arange(self.r)
                rest_min = math.inf
            info = [w0, w1, tuple(probe_ix.tolist()), tuple(hrow[probe_ix].tolist()), rest_min, None]
            if len(self._key_cache) >= 400_000:
                self._key_cache.clear()
                self._rows_cached = 0
            self._key_cache[key] = info
        return info

    def _hash_row(self, info) -> np.ndarray:
        row = info[5]
        if row is None:
            row = self.exp_hash.structured_vec(info[0], info[1], self._arange_r)
            # Keys that take the full replica path tend to do so repeatedly.
            if self._rows_cached < 50_000:
                info[5] = row
                self._rows_cached += 1
        return row

    # -- bookkeeping -------------------------------------------------------

    def _ref_add(self, key) -> None:
        self._refs[key] = self._refs.get(key, 0) + 1

    def _ref_drop(self, key) -> None:
        c = self._refs[key] - 1
        if c:
            self._refs[key] = c
        else:
            del self._refs[key]

    def size(self) -> tuple[int, int]:
        """(distinct keys, stored elements) across all sub-structures."""
        stored = len(self.ppswor.sample.entries) + len(self.summax.sample.entries) + self.sideline.n
        return len(self._refs), stored

    # -- sub-structure feeds ----------------------------------------------

    def _feed_ppswor(self, key, seed_value: float) -> None:
        sample = self.ppswor.sample
        was_in = key in sample.entries
        evicted = sample.process(key, seed_value)
        if evicted is not None and evicted == key and not was_in:
            return
        if not was_in and key in sample.entries:
            self._ref_add(key)
        if evicted is not None:
            self._ref_drop(evicted)
        mx = sample.max_item()
        self._pp_max = mx[0] if mx is not None else -math.inf

    def _feed_summax(self, key, score: float) -> None:
        sample = self.summax.sample
        was = sample.entries.get(key)
        evicted = sample.process(key, score)
        if evicted is not None and evicted == key and was is None:
            return
        now = sample.entries.get(key)
        if now is None or now == was:
            return
        if was is None:
            self._ref_add(key)
        if evicted is not None:
            self._ref_drop(evicted)
        self._sm_bound = sample.threshold_value()
        if self.sideline_prune:
            inner = self.sideline.outer.get(key)
            if inner:
                doomed = [i for i, rec in inner.items() if rec[1] >= now]
                for i in doomed:
                    if self.sideline.remove(key, i):
                        self._ref_drop(key)
            if self._sm_bound != math.inf:
                self._prune_scores(self._sm_bound)

    def _prune_scores(self, bound: float) -> None:
        side = self.sideline
        while True:
            top = side.peek_score()
            if top is None or top[0] < bound:
                return
            popped = side.pop("score")
            if popped[4]:
                self._ref_drop(popped[0])

    def _flush_sideline(self, gamma: float) -> None:
        side = self.sideline
        fn_tail = self.fn.tail_mass
        while True:
            top = side.peek_value()
            if top is None:
                side.top_bound = -math.inf
                return
            if top[0] < gamma:
                side.top_bound = top[0]
                return
            key, i, v, score, key_gone = side.pop("value")
            if key_gone:
                self._ref_drop(key)
            if score is None:
                tail = float(fn_tail(v))
                if tail > 0:
                    score = self.exp_hash.structured(key, i) / tail
                else:
                    continue
            self._feed_summax(key, score)

    def _sideline_insert(self, key, i: int, v: float, h: float, tail: float) -> None:
        """Admit a below-gamma pair, subject to pruning when enabled."""
        if self.sideline_prune:
            if tail <= 0:
                return
            score = h / tail
            entry = self.summax.sample.entries.get(key)
            if entry is not None:
                if score >= entry:
                    return
            elif score >= self._sm_bound:
                return
        else:
            score = None
        if self.sideline.put(key, i, v, score):
            self._ref_add(key)

    def _trunc_ppswor(self, b_gamma: float) -> None:
        if b_gamma <= 0:
            bound = 0.0
        elif self._sm_bound == math.inf:
            bound = math.inf
        else:
            bound = self.r * b_gamma * self._sm_bound
        self._trunc_bound = bound
        if self._pp_max < bound:
            return
        sample = self.ppswor.sample
        while sample.entries:
            mx = sample.max_item()
            if mx[0] < bound:
                self._pp_max = mx[0]
                return
            key, _ = sample.pop_max()
            self._ref_drop(key)
        self._pp_max = -math.inf

    def _track(self) -> None:
        ns = self.sideline.n
        self.sideline_size_sum += ns
        if ns > self.sideline_size_max:
            self.sideline_size_max = ns
        d = len(self._refs)
        stored = len(self.ppswor.sample.entries) + len(self.summax.sample.entries) + ns
        if d > self.max_distinct_keys:
            self.max_distinct_keys = d
        if stored > self.max_stored_elements:
            self.max_stored_elements = stored
        self.elements_seen += 1

    # -- processing --------------------------------------------------------

    def process(self, key, val: float) -> None:
        check_element(key, val)
        self.process_batch([key], np.array([val], dtype=np.float64))

    def process_batch(self, keys: Sequence, vals) -> None:
        """Process a run of elements; equivalent to processing them one by one."""
        m = len(keys)
        if m == 0:
            return
        vals = np.asarray(vals, dtype=np.float64)
        if vals.shape != (m,):
            raise InvalidElement("keys and values must have equal length")
        if not np.all(vals > 0):
            bad = int(np.argmin(vals > 0))
            raise InvalidElement(
                f"element value must be positive, got {vals[bad]!r} for key {keys[bad]!r}"
            )
        step = self._batch or max(1, 262144 // (self.r + 1))
        for lo in range(0, m, step):
            self._run_batch(keys[lo : lo + step], vals[lo : lo + step])

    def _run_batch(self, keys: Sequence, vals: np.ndarray) -> None:
        m = len(keys)
        r = self.r
        c0 = self.rng.counter
        self.rng.counter = c0 + m * (r + 1)
        U = self.rng.uniform_matrix(c0, m, r + 1, r + 1)
        pp_seeds = (-np.log(U[:, 0]) / vals).tolist()
        Urep = U[:, 1:]
        # Smallest replica draw of each element, in the same arithmetic the
        # row path uses, so skip decisions match element-wise processing.
        ymin = -np.log(Urep.max(axis=1)) / vals
        a_ymin = np.asarray(self.fn.tail_mass(ymin), dtype=np.float64)

        sums = self.total + np.cumsum(vals)
        gammas = 2.0 * self.eps / sums
        # A draw at or above the previous element's gamma can neither enter
        # the sideline nor undercut a pending pair of the same key.
        calm = (ymin >= np.concatenate(([self.gamma], gammas[:-1]))).tolist()
        b_gam = np.asarray(self.fn.lower_moment(gammas), dtype=np.float64).tolist()

        s = self._probes
        probe_ix = np.empty((m, s), dtype=np.int64)
        probe_h = np.empty((m, s), dtype=np.float64)
        rest_h = np.empty(m, dtype=np.float64)
        infos = []
        cache_get = self._key_cache.get
        for j, key in enumerate(keys):
            info = cache_get(key)
            if info is None:
                info = self._key_info(key)
            infos.append(info)
            probe_ix[j] = info[2]
            probe_h[j] = info[3]
            rest_h[j] = info[4]

        # Exact scores at the probe replicas, and a lower bound for the rest.
        probe_y = -np.log(Urep[np.arange(m)[:, None], probe_ix]) / vals[:, None]
        probe_tail = np.asarray(self.fn.tail_mass(probe_y), dtype=np.float64)
        with np.errstate(divide="ignore"):
            cand = np.min(
                np.where(probe_tail > 0, probe_h / probe_tail, math.inf), axis=1
            ).tolist()
            rest_bound = np.where(a_ymin > 0, rest_h / a_ymin, math.inf).tolist()

        gammas = gammas.tolist()
        vals_l = vals.tolist()
        sums_l = sums.tolist()

        trunc_on = self.ppswor_trunc
        side = self.sideline

        for j in range(m):
            key = keys[j]
            gamma = gammas[j]
            self.total = sums_l[j]
            self.gamma = gamma

            seed_value = pp_seeds[j]
            if not trunc_on or seed_value < self._trunc_bound:
                self._feed_ppswor(key, seed_value)

            # When every draw clears the previous gamma, pending pairs are
            # untouched and nothing enters the sideline; the only possible
            # effect is a sum-of-max update, decided from the probe scores.
            slow = True
            if calm[j] and rest_bound[j] >= self._sm_bound:
                c_ = cand[j]
                if c_ >= self._sm_bound:
                    slow = False
                elif side.outer.get(key) is None:
                    # cand is below every non-probe score: it is the true
                    # minimum score of this element's replicas.
                    self._feed_summax(key, c_)
                    slow = False
            if slow:
                self._element_replicas(key, vals_l[j], gamma, Urep[j], infos[j])

            if side.top_bound >= gamma:
                self._flush_sideline(gamma)
            if trunc_on:
                self._trunc_ppswor(b_gam[j])
            self._track()

    def _element_replicas(self, key, val: float, gamma: float, urow: np.ndarray, info) -> None:
        """Full replica handling for one element (the non-skipped path)."""
        y = -np.log(urow) / val
        inner = self.sideline.outer.get(key)
        if inner:
            # Fold existing pair minima into this element's draws; the pairs
            # are re-admitted below against the settled sketch state.
            doomed = list(inner.keys())
            merged = y.copy()
            for i in doomed:
                v = inner[i][0]
                if v < merged[i]:
                    merged[i] = v
            for i in doomed:
                if self.sideline.remove(key, i):
                    self._ref_drop(key)
            y = merged
        hrow = self._hash_row(info)
        tails = np.asarray(self.fn.tail_mass(y), dtype=np.float64)
        flush = y >= gamma
        ok = flush & (tails > 0)
        if ok.any():
            scores = hrow[ok] / tails[ok]
            self._feed_summax(key, float(scores.min()))
        if not flush.all():
            stay = np.flatnonzero(~flush)
            y_l = y[stay].tolist()
            h_l = hrow[stay].tolist()
            t_l = tails[stay].tolist()
            for pos, i in enumerate(stay.tolist()):
                self._sideline_insert(key, i, y_l[pos], h_l[pos], t_l[pos])

    # -- merging -----------------------------------------------------------

    def _check_compatible(self, other: "SamplerSketch") -> None:
        if (
            self.k != other.k
            or self.eps != other.eps
            or self.fn.name != other.fn.name
            or self.exp_hash.seed != other.exp_hash.seed
        ):
            raise IncompatibleSketch(
                "sketches must share sample size, eps, function, and hash seed"
            )

    def merge(self, other: "SamplerSketch") -> "SamplerSketch":
        """Combined sketch over both inputs' streams; inputs unchanged."""
        self._check_compatible(other)
        out = SamplerSketch(
            self.k,
            self.eps,
            self.fn,
            rng=self.rng,
            exp_hash=self.exp_hash,
            sideline_prune=self.sideline_prune,
            ppswor_trunc=self.ppswor_trunc,
            batch_size=self._batch,
        )
        out.total = self.total + other.total
        out.gamma = 2.0 * out.eps / out.total if out.total > 0 else math.inf
        out.ppswor.sample = self.ppswor.sample.merge(other.ppswor.sample)
        out.summax = self.summax.merge(other.summax)
        out._refresh_bounds()
        out._key_cache = dict(self._key_cache)
        out._key_cache.update(other._key_cache)

        # Union of pending pairs with per-pair minima.
        pairs: dict = {}
        for side in (self.sideline, other.sideline):
            for key, i, v, _ in side.items():
                prev = pairs.get((key, i))
                if prev is None or v < prev:
                    pairs[(key, i)] = v

        # Flush everything the combined gamma has overtaken, then re-admit
        # the rest against the settled sub-structures.
        out._rebuild_refs()
        gamma = out.gamma
        pending: list = []
        fn_tail = out.fn.tail_mass
        for (key, i), v in pairs.items():
            tail = float(fn_tail(v))
            if v >= gamma:
                if tail > 0:
                    out._feed_summax(key, out.exp_hash.structured(key, i) / tail)
            else:
                pending.append((key, i, v, tail))
        for key, i, v, tail in pending:
            if out.sideline_prune:
                if tail <= 0:
                    continue
                h = out.exp_hash.structured(key, i)
            else:
                h = 0.0
            out._sideline_insert(key, i, v, h, tail)
        if out.ppswor_trunc:
            out._trunc_ppswor(float(out.fn.lower_moment(gamma)) if gamma != math.inf else 0.0)

        out._rebuild_refs()
        out.max_distinct_keys = max(self.max_distinct_keys, other.max_distinct_keys)
        out.max_stored_elements = max(self.max_stored_elements, other.max_stored_elements)
        out.sideline_size_sum = self.sideline_size_sum + other.sideline_size_sum
        out.sideline_size_max = max(self.sideline_size_max, other.sideline_size_max)
        out.elements_seen = self.elements_seen + other.elements_seen
        d, stored = out.size()
        out.max_distinct_keys = max(out.max_distinct_keys, d)
        out.max_stored_elements = max(out.max_stored_elements, stored)
        return out

    def _refresh_bounds(self) -> None:
        self._sm_bound = self.summax.sample.threshold_value()
        mx = self.ppswor.sample.max_item()
        self._pp_max = mx[0] if mx is not None else -math.inf

    def _rebuild_refs(self) -> None:
        refs: dict = {}

        def add(key):
            refs[key] = refs.get(key, 0) + 1

        for key in self.ppswor.sample.entries:
            add(key)
        for key in self.summax.sample.entries:
            add(key)
        for key in self.sideline.outer:
            add(key)
        self._refs = refs

    # -- serialization -----------------------------------------------------

    def to_state(self) -> dict:
        """JSON-compatible snapshot; keys must be strings."""
        return {
            "k": self.k,
            "eps": self.eps,
            "r": self.r,
            "fn": self.fn.name,
            "rng_seed": self.rng.seed,
            "rng_counter": self.rng.counter,
            "hash_seed": self.exp_hash.seed,
            "sideline_prune": self.sideline_prune,
            "ppswor_trunc": self.ppswor_trunc,
            "total": self.total,
            "elements_seen": self.elements_seen,
            "ppswor": sorted(self.ppswor.sample.entries.items()),
            "summax": sorted(self.summax.sample.entries.items()),
            "sideline": sorted(
                [key, i, v, score] for key, i, v, score in self.sideline.items()
            ),
            "max_distinct_keys": self.max_distinct_keys,
            "max_stored_elements": self.max_stored_elements,
        }

    @classmethod
    def from_state(cls, state: dict) -> "SamplerSketch":
        out = cls(
            state["k"],
            state["eps"],
            state["fn"],
            rng=RandomSource(state["rng_seed"], state["rng_counter"]),
            exp_hash=ExpHash(state["hash_seed"]),
            sideline_prune=state["sideline_prune"],
            ppswor_trunc=state["ppswor_trunc"],
        )
        out.total = state["total"]
        out.gamma = 2.0 * out.eps / out.total if out.total > 0 else math.inf
        out.elements_seen = state["elements_seen"]
        for key, value in state["ppswor"]:
            out.ppswor.sample.process(key, value)
        for key, value in state["summax"]:
            out.summax.sample.process(key, value)
        for key, i, v, score in state["sideline"]:
            out.sideline.put(key, i, v, score)
        out._refresh_bounds()
        out._rebuild_refs()
        if out.ppswor_trunc:
            out._trunc_ppswor(
                float(out.fn.lower_moment(out.gamma)) if out.gamma != math.inf else 0.0
            )
        out.max_distinct_keys = state["max_distinct_keys"]
        out.max_stored_elements = state["max_stored_elements"]
        return out
