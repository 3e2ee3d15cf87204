"""Command line interface.

Exit codes: 0 on success, 1 when any benchmark cell failed or a hardness
check did not pass, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from .bench import (
    ExperimentConfig,
    TrialRecord,
    _basis_query_trace,
    build_dataset,
    emit_csv,
    is_failed,
    run_experiment,
)
from .errors import SpectrumFloorError, TraceKitError
from .estimators import (
    ALGORITHMS,
    DISTRIBUTIONS,
    estimate_eigenvalue_moments,
    estimate_trace,
)
from .hardness import sample_spiked_pair, sample_wigner, trace_law_check
from .linop import power_operator
from .sketch import DEFAULT_SPLIT

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _algo_list(text: str) -> list[str]:
    algos = [part.strip() for part in text.split(",") if part.strip()]
    for algo in algos:
        if algo not in ALGORITHMS:
            raise argparse.ArgumentTypeError(f"unknown algorithm {algo!r}")
    return algos


def _split_arg(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"split needs three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"split fractions must be numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracekit",
        description="Matrix-free stochastic trace estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="run the failure-count / timing benchmark grid")
    bench.add_argument("--dataset", required=True, help="dataset spec, e.g. synthetic(2000)")
    bench.add_argument("--algos", type=_algo_list, default=list(ALGORITHMS))
    bench.add_argument("--m", type=_int_list, required=True, help="comma-separated query budgets")
    bench.add_argument("--epsilon", type=float, default=0.01)
    bench.add_argument("--trials", type=int, default=100)
    bench.add_argument("--repeats", type=int, default=10)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    bench.add_argument("--split", type=_split_arg, default=DEFAULT_SPLIT)
    bench.add_argument("--out", required=True, help="CSV output path")
    bench.add_argument("--no-timing", action="store_true", help="omit the wall_time column")
    bench.add_argument("--oracle-delay-ms", type=float, default=0.0)

    trace = sub.add_parser("trace", help="print a single trace estimate")
    trace.add_argument("--dataset", required=True)
    trace.add_argument("--algo", choices=ALGORITHMS, default="na_hutch_pp")
    trace.add_argument("--m", type=int, required=True)
    trace.add_argument("--seed", type=int, default=0)
    trace.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    trace.add_argument("--split", type=_split_arg, default=DEFAULT_SPLIT)

    moments = sub.add_parser("moments", help="estimate eigenvalue moments tr(K^i)/n")
    moments.add_argument("--dataset", required=True)
    moments.add_argument("--max-p", type=int, required=True)
    moments.add_argument("--m", type=int, required=True)
    moments.add_argument("--algos", type=_algo_list, default=["hutchinson"])
    moments.add_argument("--seed", type=int, default=0)
    moments.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    moments.add_argument("--split", type=_split_arg, default=DEFAULT_SPLIT)
    moments.add_argument("--epsilon", type=float, default=0.1, help="failure tolerance for CSV rows")
    moments.add_argument("--out", default=None, help="optional CSV output path")

    hardness = sub.add_parser("hardness", help="statistical checks of the hard-instance generators")
    hardness.add_argument("--check", choices=("trace-law", "spiked-pair"), required=True)
    hardness.add_argument("--delta", type=float, default=math.exp(-16.0))
    hardness.add_argument("--samples", type=int, default=1000)
    hardness.add_argument("--n", type=int, default=100)
    hardness.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_bench(args) -> int:
    config = ExperimentConfig(
        dataset=args.dataset,
        algorithms=tuple(args.algos),
        budgets=tuple(args.m),
        epsilon=args.epsilon,
        trials=args.trials,
        repeats=args.repeats,
        workers=args.workers,
        base_seed=args.seed,
        distribution=args.dist,
        split=tuple(args.split),
        oracle_delay_ms=args.oracle_delay_ms,
    )
    result = run_experiment(config)
    if result.records:
        emit_csv(result.records, args.out, include_timing=not args.no_timing)
        print(f"wrote {len(result.records)} trial records to {args.out}")
    for failure in result.failed_cells:
        print(
            f"cell failed: algorithm={failure.algorithm} m={failure.m} "
            f"trial={failure.trial_index}: {failure.message}",
            file=sys.stderr,
        )
    return EXIT_FAILED if result.failed_cells else EXIT_OK


def _cmd_trace(args) -> int:
    dataset = build_dataset(args.dataset)
    est = estimate_trace(
        dataset.operator,
        args.algo,
        args.m,
        distribution=args.dist,
        seed=args.seed,
        split=tuple(args.split),
    )
    rel = (
        abs(est.value - dataset.reference_trace) / abs(dataset.reference_trace)
        if dataset.reference_trace != 0.0
        else float("nan")
    )
    print(f"dataset          {dataset.dataset_id}")
    print(f"algorithm        {est.algorithm}")
    print(f"queries          {est.m}")
    print(f"estimate         {est.value!r}")
    print(f"reference_trace  {dataset.reference_trace!r}")
    print(f"relative_error   {rel:.6e}")
    if "triangles" in dataset.meta:
        print(f"triangle_count   {est.value / 6.0!r} (reference {dataset.meta['triangles']!r})")
    return EXIT_OK


def _cmd_moments(args) -> int:
    dataset = build_dataset(args.dataset)
    K = dataset.operator
    n = K.dim
    references = []
    for i in range(1, args.max_p + 1):
        references.append(_basis_query_trace(power_operator(K, i)) / n)
    records = []
    print(f"dataset {dataset.dataset_id}, n = {n}, m = {args.m}")
    header = "p    reference        " + "".join(f"{algo:>18s}" for algo in args.algos)
    print(header)
    per_algo = {}
    for algo in args.algos:
        start = time.perf_counter()
        moments = estimate_eigenvalue_moments(
            K,
            args.max_p,
            args.m,
            algorithm=algo,
            distribution=args.dist,
            seed=args.seed,
            split=tuple(args.split),
        )
        wall = time.perf_counter() - start
        per_algo[algo] = moments
        for i, value in enumerate(moments, start=1):
            records.append(
                TrialRecord(
                    dataset=f"{dataset.dataset_id}#p{i}",
                    algorithm=algo,
                    m=args.m,
                    epsilon=args.epsilon,
                    estimate=value,
                    reference_trace=references[i - 1],
                    failed=is_failed(value, references[i - 1], args.epsilon),
                    wall_time=wall / args.max_p,
                    seed=args.seed,
                    trial_index=0,
                )
            )
    for i in range(1, args.max_p + 1):
        row = f"{i:<4d} {references[i - 1]:<16.10g}"
        for algo in args.algos:
            row += f"{per_algo[algo][i - 1]:>18.10g}"
        print(row)
    if args.out:
        emit_csv(records, args.out)
        print(f"wrote {len(records)} moment records to {args.out}")
    return EXIT_OK


def _cmd_hardness(args) -> int:
    if args.check == "trace-law":
        samples = [sample_wigner(args.n, seed=args.seed + i) for i in range(args.samples)]
        report = trace_law_check(samples)
        print(f"samples          {report.num_samples} (n = {report.n})")
        print(f"mean trace       {report.mean:.6f} (|mean| <= 4 SE = {4 * report.mean_se:.6f}: {report.mean_ok})")
        print(f"variance ratio   {report.variance_ratio:.4f} (in [0.85, 1.15]: {report.variance_ok})")
        print(f"result           {'PASS' if report.passed else 'FAIL'}")
        return EXIT_OK if report.passed else EXIT_FAILED
    # spiked-pair: exact trace populations of both labels must separate
    p_traces = [
        sample_spiked_pair(args.delta, seed=args.seed + i, label="P").trace()
        for i in range(args.samples)
    ]
    q_traces = [
        sample_spiked_pair(args.delta, seed=args.seed + i, label="Q").trace()
        for i in range(args.samples)
    ]
    lo_p, hi_q = min(p_traces), max(q_traces)
    disjoint = lo_p > hi_q
    print(f"draws per label  {args.samples} (delta = {args.delta!r})")
    print(f"P traces         [{lo_p:.3f}, {max(p_traces):.3f}]")
    print(f"Q traces         [{min(q_traces):.3f}, {hi_q:.3f}]")
    print(f"separated        {disjoint}")
    return EXIT_OK if disjoint else EXIT_FAILED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    handlers = {
        "bench": _cmd_bench,
        "trace": _cmd_trace,
        "moments": _cmd_moments,
        "hardness": _cmd_hardness,
    }
    try:
        return handlers[args.command](args)
    except SpectrumFloorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (TraceKitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
