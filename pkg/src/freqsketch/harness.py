"""Experiment harness: ingestion, synthetic streams, and the error protocol.

An experiment repeats, for each sample size k: build the sketch over the
stream, produce the final sample, collect sampled-key frequencies in a second
pass, and estimate the sum of f(frequency) (optionally restricted to a key
domain).  It reports the normalized root mean squared error over repetitions
next to the worst-case bound 2 / ((1 - eps) * sqrt(k - 2)) and the same
statistic for two aggregated-data baselines, plus sketch size maxima.
"""

from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .errors import InvalidParameter, LineError
from .estimator import FreqCollector, sum_estimate
from .finalize import produce_sample
from .randomness import ExpHash, RandomSource, derive_seed
from .sampler import SamplerSketch
from .transforms import resolve


def ingest(path: str):
    """Yield (key, value) pairs from a TSV file.

    Each line is ``key<TAB>value``; a line without a tab is an occurrence
    with value 1.  Malformed or non-positive values fail fast.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, raw = line.partition("\t")
            if not sep:
                yield key, 1.0
                continue
            try:
                val = float(raw)
            except ValueError:
                raise LineError(lineno, f"bad value {raw!r}") from None
            if not val > 0:
                raise LineError(lineno, f"value must be positive, got {raw}")
            yield key, val


def zipf_stream(alpha: float, n: int, seed: int) -> tuple[list, np.ndarray]:
    """n unit-value elements with integer keys drawn i.i.d. from Zipf(alpha)."""
    if not alpha > 1:
        raise InvalidParameter(f"zipf exponent must exceed 1, got {alpha}")
    gen = np.random.Generator(np.random.PCG64(seed))
    draws = gen.zipf(alpha, size=n) if n else np.array([], dtype=np.int64)
    keys = [str(v) for v in draws.tolist()]
    return keys, np.ones(n, dtype=np.float64)


def load_source(source: str, n: int | None = None, seed: int = 0) -> tuple[str, list, np.ndarray]:
    """Resolve a source spec to (label, keys, values).

    ``source`` is a file path or ``zipf:alpha[:n[:seed]]``; ``n``/``seed``
    fill in missing zipf fields.
    """
    if source.startswith("zipf:"):
        parts = source.split(":")[1:]
        alpha = float(parts[0])
        zn = int(parts[1]) if len(parts) > 1 else n
        zseed = int(parts[2]) if len(parts) > 2 else seed
        if zn is None:
            raise InvalidParameter("zipf source needs an element count")
        keys, vals = zipf_stream(alpha, zn, zseed)
        return f"zipf{alpha:g}-n{zn}", keys, vals
    keys = []
    vals = []
    for key, val in ingest(source):
        keys.append(key)
        vals.append(val)
    return os.path.basename(source), keys, np.asarray(vals, dtype=np.float64)


@dataclass
class ExperimentConfig:
    source: str
    fn_name: str = "sqrt"
    ks: tuple = (25,)
    eps: float = 0.5
    reps: int = 200
    seed: int = 1
    n: int | None = None
    domain_prefix: str | None = None
    second_pass: str = "table"
    track_size: bool = True
    size_sample_every: int = 1
    sideline_prune: bool = True
    ppswor_trunc: bool = True
    partitions: int = 1
    jobs: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidParameter("repetitions must be >= 1")
        if any(k < 3 for k in self.ks):
            raise InvalidParameter("every sample size must be >= 3")
        if self.second_pass not in ("table", "collector"):
            raise InvalidParameter(f"unknown second pass mode {self.second_pass!r}")


@dataclass
class ReportRow:
    dataset: str
    fn: str
    k: int
    eps: float
    reps: int
    bound: float
    nrmse: float
    nrmse_ppswor: float
    nrmse_priority: float
    keys_avg: float
    keys_max: int
    elems_avg: float
    elems_max: int


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    truth: dict
    rows: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "dataset",
                "fn",
                "k",
                "eps",
                "reps",
                "bound",
                "nrmse",
                "nrmse_ppswor",
                "nrmse_priority",
                "keys_avg",
                "keys_max",
                "elems_avg",
                "elems_max",
            ]
        )
        for row in self.rows:
            writer.writerow(
                [
                    row.dataset,
                    row.fn,
                    row.k,
                    repr(row.eps),
                    row.reps,
                    f"{row.bound:.3f}",
                    repr(row.nrmse),
                    repr(row.nrmse_ppswor),
                    repr(row.nrmse_priority),
                    repr(row.keys_avg),
                    row.keys_max,
                    repr(row.elems_avg),
                    row.elems_max,
                ]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": {
                    "source": self.config.source,
                    "fn": self.config.fn_name,
                    "ks": list(self.config.ks),
                    "eps": self.config.eps,
                    "reps": self.config.reps,
                    "seed": self.config.seed,
                    "domain_prefix": self.config.domain_prefix,
                    "partitions": self.config.partitions,
                },
                "truth": self.truth,
                "rows": [vars(row) for row in self.rows],
                "raw": self.raw,
            }
        )


def variance_bound(k: int, eps: float) -> float:
    """Worst-case coefficient of variation of the sum estimator."""
    return 2.0 / ((1.0 - eps) * math.sqrt(k - 2))


def build_sketch(
    keys,
    vals,
    k: int,
    eps: float,
    fn_name: str,
    seed: int,
    *,
    partitions: int = 1,
    sideline_prune: bool = True,
    ppswor_trunc: bool = True,
) -> SamplerSketch:
    """Sketch a stream, optionally as merged contiguous partitions."""
    fn = resolve(fn_name)
    hash_seed = derive_seed(seed, 1)
    stream_seed = derive_seed(seed, 0)
    if partitions <= 1:
        sketch = SamplerSketch(
            k,
            eps,
            fn,
            rng=RandomSource(stream_seed),
            exp_hash=ExpHash(hash_seed),
            sideline_prune=sideline_prune,
            ppswor_trunc=ppswor_trunc,
        )
        sketch.process_batch(keys, vals)
        return sketch
    n = len(keys)
    bounds = [round(t * n / partitions) for t in range(partitions + 1)]
    merged = None
    for t in range(partitions):
        lo, hi = bounds[t], bounds[t + 1]
        part = SamplerSketch(
            k,
            eps,
            fn,
            rng=RandomSource(stream_seed, counter=lo * (math.ceil(k / eps) + 1)),
            exp_hash=ExpHash(hash_seed),
            sideline_prune=sideline_prune,
            ppswor_trunc=ppswor_trunc,
        )
        part.process_batch(keys[lo:hi], vals[lo:hi])
        merged = part if merged is None else merged.merge(part)
    return merged


_WORKER: dict = {}


def _init_worker(keys, vals, table, weights, cfg: ExperimentConfig):
    _WORKER["keys"] = keys
    _WORKER["vals"] = vals
    _WORKER["table"] = table
    _WORKER["weights"] = weights
    _WORKER["cfg"] = cfg


def _run_rep(args) -> tuple:
    k, rep = args
    cfg: ExperimentConfig = _WORKER["cfg"]
    keys, vals = _WORKER["keys"], _WORKER["vals"]
    table, weights = _WORKER["table"], _WORKER["weights"]
    fn = resolve(cfg.fn_name)
    rep_seed = derive_seed(cfg.seed, k, rep)

    sketch = build_sketch(
        keys,
        vals,
        k,
        cfg.eps,
        cfg.fn_name,
        rep_seed,
        partitions=cfg.partitions,
        sideline_prune=cfg.sideline_prune,
        ppswor_trunc=cfg.ppswor_trunc,
    )
    sample = produce_sample(sketch)
    sampled_keys = [key for key, _ in sample.sampled]
    if cfg.second_pass == "collector":
        freqs = FreqCollector(sampled_keys).process_stream(zip(keys, vals)).sums
    else:
        freqs = {key: table[key] for key in sampled_keys}
    query = None
    if cfg.domain_prefix is not None:
        query = {key: 1.0 for key in sampled_keys if key.startswith(cfg.domain_prefix)}
    est = sum_estimate(sample, freqs, fn, weights=query).value

    base_rng = RandomSource(derive_seed(rep_seed, 100))
    pps = baselines.ppswor_aggregated(table, weights, k, base_rng)
    pps_query = None
    if cfg.domain_prefix is not None:
        pps_query = {key: 1.0 for key, _ in pps.sampled if key.startswith(cfg.domain_prefix)}
    pps_est = baselines.ppswor_estimate(pps, weights, pps_query)

    pri_rng = RandomSource(derive_seed(rep_seed, 101))
    pri = baselines.priority_sample(table, weights, k, pri_rng)
    pri_query = None
    if cfg.domain_prefix is not None:
        pri_query = {key: 1.0 for key, _ in pri.entries if key.startswith(cfg.domain_prefix)}
    pri_est = baselines.priority_estimate(pri, weights, pri_query)

    return est, pps_est, pri_est, sketch.max_distinct_keys, sketch.max_stored_elements


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    label, keys, vals = load_source(cfg.source, n=cfg.n, seed=derive_seed(cfg.seed, 999))
    fn = resolve(cfg.fn_name)
    table = baselines.aggregate(zip(keys, vals))
    weights = {key: float(fn.f(nu)) for key, nu in table.items()}
    if cfg.domain_prefix is None:
        truth = sum(weights.values())
    else:
        truth = sum(w for key, w in weights.items() if key.startswith(cfg.domain_prefix))

    report = ExperimentReport(config=cfg, truth={"statistic": truth, "dataset": label})
    jobs = max(1, cfg.jobs)
    for k in cfg.ks:
        tasks = [(k, rep) for rep in range(cfg.reps)]
        if jobs > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(jobs, _init_worker, (keys, vals, table, weights, cfg)) as pool:
                results = pool.map(_run_rep, tasks, chunksize=max(1, cfg.reps // (4 * jobs)))
        else:
            _init_worker(keys, vals, table, weights, cfg)
            results = [_run_rep(task) for task in tasks]

        ests = np.array([res[0] for res in results])
        pps = np.array([res[1] for res in results])
        pri = np.array([res[2] for res in results])
        key_maxima = [res[3] for res in results]
        elem_maxima = [res[4] for res in results]

        def nrmse(values: np.ndarray) -> float:
            if truth == 0:
                return 0.0
            return float(np.sqrt(np.mean((values - truth) ** 2)) / truth)

        report.rows.append(
            ReportRow(
                dataset=label,
                fn=cfg.fn_name,
                k=k,
                eps=cfg.eps,
                reps=cfg.reps,
                bound=variance_bound(k, cfg.eps),
                nrmse=nrmse(ests),
                nrmse_ppswor=nrmse(pps),
                nrmse_priority=nrmse(pri),
                keys_avg=float(np.mean(key_maxima)),
                keys_max=int(max(key_maxima)),
                elems_avg=float(np.mean(elem_maxima)),
                elems_max=int(max(elem_maxima)),
            )
        )
        report.raw[str(k)] = {
            "estimates": ests.tolist(),
            "ppswor": pps.tolist(),
            "priority": pri.tolist(),
            "max_keys": key_maxima,
            "max_elements": elem_maxima,
        }
    return report
