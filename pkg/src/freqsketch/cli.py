"""Command line interface.

Subcommands:
  gen-zipf     write a synthetic TSV stream
  sketch       build a sketch over a stream and serialize it
  sample       produce the final sample from a serialized sketch
  estimate     second pass plus sum estimation from a final sample
  experiment   full repeated-error protocol with baselines
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import SketchError
from .estimator import FreqCollector, sum_estimate
from .finalize import FinalSample, produce_sample
from .harness import ExperimentConfig, build_sketch, ingest, load_source, run_experiment
from .sampler import SamplerSketch
from .transforms import resolve


def _add_sketch_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True, help="sample size")
    p.add_argument("--eps", type=float, default=0.5, help="accuracy/time tradeoff in (0, 1/2]")
    p.add_argument("--fn", default="sqrt", help="function name: sqrt, moment:p, log1p, softcap:T")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--partitions", type=int, default=1, help="sketch in N merged partitions")
    p.add_argument("--no-opt-sideline", action="store_true", help="disable sideline pruning")
    p.add_argument(
        "--no-opt-ppswor-trunc", action="store_true", help="disable ppswor truncation"
    )


def _build(args) -> SamplerSketch:
    _label, keys, vals = load_source(args.input, n=getattr(args, "n", None), seed=args.seed)
    return build_sketch(
        keys,
        vals,
        args.k,
        args.eps,
        args.fn,
        args.seed,
        partitions=args.partitions,
        sideline_prune=not args.no_opt_sideline,
        ppswor_trunc=not args.no_opt_ppswor_trunc,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="freqsketch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-zipf", help="write a synthetic zipf TSV stream")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", required=True)

    p = sub.add_parser("sketch", help="build and serialize a sketch")
    p.add_argument("--input", required=True, help="TSV path or zipf:alpha:n:seed")
    p.add_argument("--output", required=True)
    _add_sketch_opts(p)

    p = sub.add_parser("sample", help="produce the final sample from a sketch file")
    p.add_argument("--input", required=True, help="serialized sketch JSON")
    p.add_argument("--output", required=True)

    p = sub.add_parser("estimate", help="second pass and sum estimate")
    p.add_argument("--sample", required=True, help="final sample JSON")
    p.add_argument("--input", required=True, help="the data stream (TSV path)")
    p.add_argument("--domain-prefix", default=None, help="restrict to keys with this prefix")
    p.add_argument("--output", default=None)

    p = sub.add_parser("experiment", help="repeated error protocol with baselines")
    p.add_argument("--input", required=True, help="TSV path or zipf:alpha:n:seed")
    p.add_argument("--k", required=True, help="comma-separated sample sizes")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--fn", default="sqrt")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--n", type=int, default=None, help="element count for zipf sources")
    p.add_argument("--domain-prefix", default=None)
    p.add_argument("--second-pass", choices=("table", "collector"), default="table")
    p.add_argument("--track-size", action="store_true", default=True)
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-opt-sideline", action="store_true")
    p.add_argument("--no-opt-ppswor-trunc", action="store_true")
    p.add_argument("--output", required=True, help="output prefix (.csv and .json)")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except SketchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "gen-zipf":
        from .harness import zipf_stream

        keys, _vals = zipf_stream(args.alpha, args.n, args.seed)
        with open(args.output, "w", encoding="utf-8") as fh:
            for key in keys:
                fh.write(f"{key}\t1\n")
        print(f"wrote {len(keys)} elements to {args.output}")
        return 0

    if args.command == "sketch":
        sketch = _build(args)
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(sketch.to_state(), fh)
        d, stored = sketch.size()
        print(f"sketched {sketch.elements_seen} elements: {d} keys, {stored} stored entries")
        return 0

    if args.command == "sample":
        with open(args.input, "r", encoding="utf-8") as fh:
            sketch = SamplerSketch.from_state(json.load(fh))
        sample = produce_sample(sketch)
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(sample.to_json())
        print(f"final sample: {len(sample.sampled)} keys, tau={sample.tau}")
        return 0

    if args.command == "estimate":
        with open(args.sample, "r", encoding="utf-8") as fh:
            sample = FinalSample.from_json(fh.read())
        fn = resolve(sample.fn_name)
        collector = FreqCollector([key for key, _ in sample.sampled])
        collector.process_stream(ingest(args.input))
        weights = None
        if args.domain_prefix is not None:
            weights = {
                key: 1.0
                for key, _ in sample.sampled
                if key.startswith(args.domain_prefix)
            }
        est = sum_estimate(sample, collector, fn, weights=weights)
        payload = {"estimate": est.value, "per_key": est.per_key}
        text = json.dumps(payload)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        print(text)
        return 0

    if args.command == "experiment":
        cfg = ExperimentConfig(
            source=args.input,
            fn_name=args.fn,
            ks=tuple(int(s) for s in args.k.split(",")),
            eps=args.eps,
            reps=args.reps,
            seed=args.seed,
            n=args.n,
            domain_prefix=args.domain_prefix,
            second_pass=args.second_pass,
            track_size=args.track_size,
            sideline_prune=not args.no_opt_sideline,
            ppswor_trunc=not args.no_opt_ppswor_trunc,
            partitions=args.partitions,
            jobs=args.jobs,
        )
        report = run_experiment(cfg)
        with open(args.output + ".csv", "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        with open(args.output + ".json", "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        print(report.to_csv(), end="")
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
