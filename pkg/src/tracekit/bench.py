"""Benchmark harness: datasets, trial execution, timing, CSV emission.

Datasets compose an oracle with a reference trace. For function-of-matrix
oracles (Estrada, inverse) the reference is the oracle's own exact diagonal,
obtained by n standard-basis queries, so failure counts measure estimator
error rather than Lanczos error. Trials are seeded ``base_seed +
trial_index`` and their estimates never depend on scheduling: query blocks
are cut into the same per-worker column chunks whether those chunks run
serially or on a thread pool.
"""

from __future__ import annotations

import csv
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, TraceKitError
from .estimators import ALGORITHMS, DISTRIBUTIONS, estimate_trace
from .linop import (
    LinearOperator,
    dense_operator,
    diagonal_operator,
    lanczos_function_operator,
    power_operator,
    read_matrix_market,
)
from .sketch import DEFAULT_SPLIT, split_counts, validate_split

__all__ = [
    "CSV_COLUMNS",
    "Dataset",
    "TrialRecord",
    "CellFailure",
    "CellTiming",
    "ExperimentConfig",
    "ExperimentResult",
    "ChunkedOracle",
    "build_dataset",
    "parse_dataset_spec",
    "effective_workers",
    "run_experiment",
    "parallel_trial_runner",
    "emit_csv",
    "is_failed",
]

CSV_COLUMNS = (
    "dataset",
    "algorithm",
    "m",
    "epsilon",
    "estimate",
    "reference_trace",
    "failed",
    "wall_time",
    "seed",
    "trial_index",
)

DEFAULT_LANCZOS_STEPS = 40
# Diagonal jitter added to kernel recipes so the inverse oracle stays clear
# of the Ritz floor.
KERNEL_JITTER = 1e-6

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")
_DATASET_NAMES = ("synthetic", "estrada", "triangles", "inverse", "raw")


@dataclass(frozen=True)
class Dataset:
    """An oracle plus the reference trace the failure metric compares against."""

    dataset_id: str
    operator: LinearOperator
    reference_trace: float
    meta: dict = field(default_factory=dict)


def parse_dataset_spec(spec: str) -> tuple[str, list[str]]:
    match = _SPEC_RE.match(str(spec))
    if not match:
        raise ConfigError(
            f"dataset spec {spec!r} is not of the form name(arg, ...); "
            "known names: synthetic, estrada, triangles, inverse, raw"
        )
    name = match.group(1)
    if name not in _DATASET_NAMES:
        raise ConfigError(f"unknown dataset {name!r}; known names: {', '.join(_DATASET_NAMES)}")
    raw_args = match.group(2).strip()
    args = [a.strip() for a in raw_args.split(",")] if raw_args else []
    return name, args


def _basis_query_trace(op: LinearOperator, chunk: int = 256) -> float:
    """Exact oracle trace via n standard-basis queries (the reference method)."""
    total = 0.0
    for start in range(0, op.dim, chunk):
        cols = min(chunk, op.dim - start)
        E = np.zeros((op.dim, cols))
        for j in range(cols):
            E[start + j, j] = 1.0
        R = op.apply(E)
        total += float(sum(R[start + j, j] for j in range(cols)))
    return total


def _rbf_kernel_matrix(source: str) -> np.ndarray:
    # source = "rbf:N" or "rbf:N:seed"; unit length scale, fixed jitter.
    parts = source.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"kernel spec {source!r} must be rbf:N or rbf:N:seed")
    try:
        n = int(parts[1])
        kseed = int(parts[2]) if len(parts) == 3 else 0
    except ValueError:
        raise ConfigError(f"kernel spec {source!r} has non-integer fields") from None
    if n < 1:
        raise ConfigError(f"kernel size must be positive, got {n}")
    rng = np.random.default_rng(kseed)
    points = rng.random((n, 2))
    sq = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    K = np.exp(-0.5 * sq)
    K[np.diag_indices(n)] += KERNEL_JITTER
    return K


def _int_arg(args: list[str], index: int, default: int, what: str) -> int:
    if len(args) <= index or not args[index]:
        return default
    try:
        return int(args[index])
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {args[index]!r}") from None


def build_dataset(spec: str) -> Dataset:
    """Construct the oracle and reference trace for a dataset spec string.

    Supported specs:
      synthetic(N)                diagonal matrix with entries 1/i^2
      estrada(PATH[, STEPS])      tr(exp(A)) of a graph adjacency, Lanczos oracle
      triangles(PATH)             tr(A^3) of a graph adjacency (count = trace/6)
      inverse(SOURCE[, STEPS])    tr(A^-1), SOURCE a Matrix Market path or rbf:N[:seed]
      raw(PATH)                   the Matrix Market matrix itself
    """
    name, args = parse_dataset_spec(spec)
    if name == "synthetic":
        n = _int_arg(args, 0, 0, "synthetic size")
        if n < 1:
            raise ConfigError(f"synthetic(N) needs a positive size, got {spec!r}")
        diag = 1.0 / np.arange(1, n + 1, dtype=float) ** 2
        return Dataset(
            dataset_id=f"synthetic({n})",
            operator=diagonal_operator(diag),
            reference_trace=float(diag.sum()),
        )
    if name == "raw":
        if len(args) != 1 or not args[0]:
            raise ConfigError(f"raw(PATH) needs exactly one path, got {spec!r}")
        mat = read_matrix_market(args[0])
        return Dataset(
            dataset_id=f"raw({args[0]})",
            operator=mat.to_operator(),
            reference_trace=float(mat.diagonal().sum()),
        )
    if name == "triangles":
        if len(args) != 1 or not args[0]:
            raise ConfigError(f"triangles(PATH) needs exactly one path, got {spec!r}")
        mat = read_matrix_market(args[0])
        csr = mat.to_csr()
        trace_cubed = float((csr @ csr).multiply(csr).sum())
        return Dataset(
            dataset_id=f"triangles({args[0]})",
            operator=power_operator(mat.to_operator(), 3),
            reference_trace=trace_cubed,
            meta={"triangles": trace_cubed / 6.0},
        )
    if name == "estrada":
        if not args or not args[0]:
            raise ConfigError(f"estrada(PATH[, STEPS]) needs a path, got {spec!r}")
        mat = read_matrix_market(args[0])
        steps = min(_int_arg(args, 1, DEFAULT_LANCZOS_STEPS, "estrada steps"), mat.dim)
        op = lanczos_function_operator(mat.to_operator(), "exp", steps)
        return Dataset(
            dataset_id=f"estrada({args[0]},{steps})",
            operator=op,
            reference_trace=_basis_query_trace(op),
            meta={"lanczos_steps": steps},
        )
    if name == "inverse":
        if not args or not args[0]:
            raise ConfigError(f"inverse(SOURCE[, STEPS]) needs a source, got {spec!r}")
        source = args[0]
        if source.startswith("rbf:"):
            base = dense_operator(_rbf_kernel_matrix(source), psd=True)
        else:
            base = read_matrix_market(source).to_operator(psd=True)
        steps = min(_int_arg(args, 1, DEFAULT_LANCZOS_STEPS, "inverse steps"), base.dim)
        op = lanczos_function_operator(base, "inverse", steps)
        return Dataset(
            dataset_id=f"inverse({source},{steps})",
            operator=op,
            reference_trace=_basis_query_trace(op),
            meta={"lanczos_steps": steps},
        )
    raise ConfigError(f"unknown dataset {name!r} in spec {spec!r}")


def is_failed(estimate: float, reference_trace: float, epsilon: float) -> bool:
    """The failure metric: estimate outside (1 +/- epsilon) * reference."""
    return bool(
        estimate < (1.0 - epsilon) * reference_trace
        or estimate > (1.0 + epsilon) * reference_trace
    )


@dataclass(frozen=True)
class TrialRecord:
    dataset: str
    algorithm: str
    m: int
    epsilon: float
    estimate: float
    reference_trace: float
    failed: bool
    wall_time: float
    seed: int
    trial_index: int


@dataclass(frozen=True)
class CellFailure:
    """Partial-results marker for a cell whose trial raised."""

    algorithm: str
    m: int
    trial_index: int
    message: str


@dataclass(frozen=True)
class CellTiming:
    algorithm: str
    m: int
    workers: int
    sequential_seconds: float
    parallel_seconds: float
    estimates_identical: bool

    @property
    def speedup(self) -> float:
        if self.parallel_seconds == 0.0:
            return float("inf")
        return self.sequential_seconds / self.parallel_seconds


@dataclass
class ExperimentConfig:
    dataset: str
    algorithms: tuple = ALGORITHMS
    budgets: tuple = (50, 100, 150)
    epsilon: float = 0.01
    trials: int = 100
    repeats: int = 10
    workers: int = 1
    base_seed: int = 0
    distribution: str = "gaussian"
    split: tuple = DEFAULT_SPLIT
    oracle_delay_ms: float = 0.0

    def validate(self) -> None:
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if not self.budgets:
            raise ConfigError("at least one query budget is required")
        for m in self.budgets:
            if int(m) != m or m < 1:
                raise ConfigError(f"query budgets must be positive integers, got {m!r}")
            if m < 3 and ("hutch_pp" in self.algorithms or "na_hutch_pp" in self.algorithms):
                raise ConfigError(f"m = {m} is below the minimum budget of the ++ estimators")
            if "na_hutch_pp" in self.algorithms:
                try:
                    split_counts(m, self.split)
                except TraceKitError as exc:
                    raise ConfigError(f"budget m = {m}: {exc}") from None
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if not 0.0 < self.epsilon:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.oracle_delay_ms < 0.0:
            raise ConfigError(f"oracle delay must be nonnegative, got {self.oracle_delay_ms}")
        validate_split(self.split)


@dataclass
class ExperimentResult:
    records: list
    failed_cells: list

    @property
    def ok(self) -> bool:
        return not self.failed_cells


class ChunkedOracle(LinearOperator):
    """Applies blocks in fixed per-worker column chunks, optionally slowed.

    The chunk boundaries depend only on (block width, workers), never on the
    execution mode, so sequential and thread-pool runs see bit-identical
    responses. ``delay_ms`` sleeps per column inside the owning worker,
    modelling an expensive oracle.
    """

    def __init__(
        self,
        base: LinearOperator,
        workers: int = 1,
        delay_ms: float = 0.0,
        executor: Optional[ThreadPoolExecutor] = None,
    ):
        self.base = base
        self.workers = max(1, int(workers))
        self.delay_ms = float(delay_ms)
        self.executor = executor
        super().__init__(base.dim, self._chunked, base.symmetric, base.psd)

    def _run_chunk(self, Q: np.ndarray, idx: np.ndarray) -> np.ndarray:
        if self.delay_ms > 0.0:
            time.sleep(self.delay_ms * idx.size / 1000.0)
        return self.base.apply(Q[:, idx])

    def _chunked(self, Q: np.ndarray) -> np.ndarray:
        pieces = np.array_split(np.arange(Q.shape[1]), min(self.workers, Q.shape[1]))
        if self.executor is None:
            parts = [self._run_chunk(Q, idx) for idx in pieces]
        else:
            parts = list(self.executor.map(lambda idx: self._run_chunk(Q, idx), pieces))
        return parts[0] if len(parts) == 1 else np.hstack(parts)


def effective_workers(requested: int) -> int:
    """Requested worker count capped by the TRACEKIT_THREADS environment variable."""
    cap = os.environ.get("TRACEKIT_THREADS")
    workers = max(1, int(requested))
    if cap is None or cap == "":
        return workers
    try:
        cap_value = int(cap)
    except ValueError:
        raise ConfigError(f"TRACEKIT_THREADS must be an integer, got {cap!r}") from None
    if cap_value < 1:
        raise ConfigError(f"TRACEKIT_THREADS must be >= 1, got {cap_value}")
    return min(workers, cap_value)


def _run_cell(
    dataset: Dataset,
    config: ExperimentConfig,
    algorithm: str,
    m: int,
    workers: int,
    executor: Optional[ThreadPoolExecutor],
) -> tuple[list, Optional[CellFailure]]:
    records = []
    oracle = ChunkedOracle(dataset.operator, workers, config.oracle_delay_ms, executor)
    total_trials = config.trials * config.repeats
    for trial_index in range(total_trials):
        seed = config.base_seed + trial_index
        start = time.perf_counter()
        try:
            est = estimate_trace(
                oracle,
                algorithm,
                m,
                distribution=config.distribution,
                seed=seed,
                split=config.split,
            )
        except Exception as exc:  # worker or estimator failure: mark cell, keep partials
            return records, CellFailure(algorithm, m, trial_index, f"{type(exc).__name__}: {exc}")
        wall = time.perf_counter() - start
        records.append(
            TrialRecord(
                dataset=dataset.dataset_id,
                algorithm=algorithm,
                m=int(m),
                epsilon=config.epsilon,
                estimate=est.value,
                reference_trace=dataset.reference_trace,
                failed=is_failed(est.value, dataset.reference_trace, config.epsilon),
                wall_time=wall,
                seed=seed,
                trial_index=trial_index,
            )
        )
    return records, None


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> ExperimentResult:
    """Run every (algorithm, m) cell of the experiment grid.

    Trial i uses seed ``base_seed + i`` with i running over all
    trials * repeats trials of a cell, so records are reproducible and
    independent of the execution mode. With ``workers > 1`` the query-block
    columns of each trial are applied concurrently on a thread pool; records
    are still emitted in deterministic (algorithm, m, trial) order. A trial
    error aborts its cell, keeping the completed trials plus a
    :class:`CellFailure` marker.
    """
    config.validate()
    ds = dataset or build_dataset(config.dataset)
    workers = effective_workers(config.workers)
    records: list = []
    failures: list = []
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for algorithm in config.algorithms:
            for m in config.budgets:
                cell_records, failure = _run_cell(ds, config, algorithm, m, workers, executor)
                records.extend(cell_records)
                if failure is not None:
                    failures.append(failure)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
    return ExperimentResult(records=records, failed_cells=failures)


def parallel_trial_runner(
    config: ExperimentConfig,
    workers: Optional[int] = None,
    dataset: Optional[Dataset] = None,
) -> list[CellTiming]:
    """Time every cell sequentially and on a worker pool.

    Both modes use identical column chunking, so the per-seed estimates must
    match bit for bit; the report records whether they did along with the
    wall-clock totals. Non-adaptive algorithms submit one block per trial
    and keep the pool saturated; hutch_pp synchronizes between its two
    rounds.
    """
    config.validate()
    ds = dataset or build_dataset(config.dataset)
    w = effective_workers(workers if workers is not None else config.workers)
    timings = []
    for algorithm in config.algorithms:
        for m in config.budgets:
            start = time.perf_counter()
            seq_records, seq_failure = _run_cell(ds, config, algorithm, m, w, None)
            seq_seconds = time.perf_counter() - start
            with ThreadPoolExecutor(max_workers=w) as executor:
                start = time.perf_counter()
                par_records, par_failure = _run_cell(ds, config, algorithm, m, w, executor)
                par_seconds = time.perf_counter() - start
            identical = (
                seq_failure is None
                and par_failure is None
                and len(seq_records) == len(par_records)
                and all(
                    a.estimate == b.estimate and a.seed == b.seed
                    for a, b in zip(seq_records, par_records)
                )
            )
            timings.append(
                CellTiming(
                    algorithm=algorithm,
                    m=int(m),
                    workers=w,
                    sequential_seconds=seq_seconds,
                    parallel_seconds=par_seconds,
                    estimates_identical=identical,
                )
            )
    return timings


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records, path, include_timing: bool = True) -> None:
    """Write trial records with full round-trip float precision.

    Row order follows the record list, which run_experiment emits
    deterministically. ``include_timing=False`` drops the wall_time column so
    repeated runs of a seeded experiment produce byte-identical files.
    """
    records = list(records)
    if not records:
        raise TraceKitError("emit_csv needs at least one record")
    columns = [c for c in CSV_COLUMNS if include_timing or c != "wall_time"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for record in records:
            writer.writerow([_format_cell(getattr(record, c)) for c in columns])
