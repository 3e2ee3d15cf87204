import math

import numpy as np
import pytest
import scipy.linalg

from tracekit import (
    ChunkedOracle,
    ConfigError,
    ExperimentConfig,
    LinearOperator,
    TraceKitError,
    build_dataset,
    diagonal_operator,
    emit_csv,
    is_failed,
    parallel_trial_runner,
    parse_dataset_spec,
    run_experiment,
)
from tracekit.bench import _basis_query_trace, effective_workers


def write_path_graph(tmp_path, n, name="path.mtx"):
    lines = [f"%%MatrixMarket matrix coordinate pattern symmetric", f"{n} {n} {n - 1}"]
    lines += [f"{i + 1} {i}" for i in range(1, n)]
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestDatasetSpecs:
    def test_parse_forms(self):
        assert parse_dataset_spec("synthetic(5000)") == ("synthetic", ["5000"])
        assert parse_dataset_spec("estrada(g.mtx, 30)") == ("estrada", ["g.mtx", "30"])
        with pytest.raises(ConfigError):
            parse_dataset_spec("synthetic")
        with pytest.raises(ConfigError):
            parse_dataset_spec("mystery(1)")

    def test_synthetic_reference(self):
        ds = build_dataset("synthetic(5000)")
        assert ds.reference_trace == pytest.approx(1.64473, abs=1e-5)
        assert ds.operator.dim == 5000
        assert ds.operator.psd is True

    def test_triangles_k3(self, k3_path):
        ds = build_dataset(f"triangles({k3_path})")
        assert ds.reference_trace == 6.0
        assert ds.meta["triangles"] == 1.0

    def test_triangles_reference_matches_brute_force(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 20
        A = (rng.random((n, n)) < 0.3).astype(float)
        A = np.triu(A, 1)
        A = A + A.T
        rows, cols = np.nonzero(np.triu(A))
        lines = ["%%MatrixMarket matrix coordinate pattern symmetric", f"{n} {n} {len(rows)}"]
        lines += [f"{i + 1} {j + 1}" for i, j in zip(rows, cols)]
        path = tmp_path / "g.mtx"
        path.write_text("\n".join(lines) + "\n")
        ds = build_dataset(f"triangles({path})")
        assert ds.reference_trace == pytest.approx(np.trace(np.linalg.matrix_power(A, 3)))

    def test_estrada_reference_cross_check(self, tmp_path):
        # reference comes from basis queries through the Lanczos oracle; on a
        # small graph that agrees with the dense matrix exponential
        path = write_path_graph(tmp_path, 12)
        ds = build_dataset(f"estrada({path})")
        A = np.zeros((12, 12))
        for i in range(11):
            A[i, i + 1] = A[i + 1, i] = 1.0
        exact = float(np.trace(scipy.linalg.expm(A)))
        assert abs(ds.reference_trace - exact) <= 1e-6 * exact

    def test_inverse_kernel_reference_cross_check(self):
        ds = build_dataset("inverse(rbf:40, 40)")
        from tracekit.bench import _rbf_kernel_matrix

        K = _rbf_kernel_matrix("rbf:40")
        exact = float(np.trace(np.linalg.inv(K)))
        assert abs(ds.reference_trace - exact) <= 1e-6 * exact

    def test_raw_dataset(self, tmp_path):
        path = tmp_path / "m.mtx"
        path.write_text(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 3.0\n2 2 4.0\n"
        )
        ds = build_dataset(f"raw({path})")
        assert ds.reference_trace == 7.0

    def test_steps_clamped_to_dim(self, k3_path):
        ds = build_dataset(f"estrada({k3_path}, 40)")
        assert ds.meta["lanczos_steps"] == 3

    def test_bad_specs(self):
        with pytest.raises(ConfigError):
            build_dataset("synthetic(0)")
        with pytest.raises(ConfigError):
            build_dataset("synthetic(abc)")
        with pytest.raises(ConfigError):
            build_dataset("inverse(rbf:0)")

    def test_basis_query_trace_chunking(self):
        diag = np.arange(1.0, 301.0)
        op = diagonal_operator(diag)
        assert _basis_query_trace(op, chunk=64) == pytest.approx(diag.sum())


class TestFailureFlag:
    def test_exact_boundary_semantics(self):
        assert not is_failed(99.0, 100.0, 0.01)
        assert not is_failed(101.0, 100.0, 0.01)
        assert is_failed(98.999, 100.0, 0.01)
        assert is_failed(101.001, 100.0, 0.01)

    def test_flag_recomputable_from_record(self):
        config = ExperimentConfig(
            dataset="synthetic(200)",
            algorithms=("hutchinson",),
            budgets=(10,),
            epsilon=0.05,
            trials=20,
            repeats=1,
        )
        result = run_experiment(config)
        for record in result.records:
            assert record.failed == is_failed(record.estimate, record.reference_trace, record.epsilon)


class TestRunExperiment:
    def test_deterministic_records(self):
        config = ExperimentConfig(
            dataset="synthetic(100)",
            algorithms=("na_hutch_pp", "hutchinson"),
            budgets=(8, 12),
            trials=3,
            repeats=2,
            base_seed=17,
        )
        first = run_experiment(config)
        second = run_experiment(config)
        assert first.ok and second.ok
        assert len(first.records) == 2 * 2 * 6
        for a, b in zip(first.records, second.records):
            assert a.estimate == b.estimate
            assert a.seed == b.seed
            assert a.trial_index == b.trial_index

    def test_seeds_follow_base_plus_index(self):
        config = ExperimentConfig(
            dataset="synthetic(50)",
            algorithms=("hutchinson",),
            budgets=(5,),
            trials=4,
            repeats=2,
            base_seed=100,
        )
        records = run_experiment(config).records
        assert [r.seed for r in records] == [100 + i for i in range(8)]

    def test_hutchinson_failure_count_positive_at_tight_epsilon(self):
        config = ExperimentConfig(
            dataset="synthetic(2000)",
            algorithms=("hutchinson",),
            budgets=(50,),
            epsilon=0.01,
            trials=100,
            repeats=1,
        )
        records = run_experiment(config).records
        assert sum(r.failed for r in records) > 0

    def test_parallel_estimates_bit_identical(self):
        base = ExperimentConfig(
            dataset="synthetic(300)",
            algorithms=("na_hutch_pp", "hutch_pp", "hutchinson"),
            budgets=(12,),
            trials=4,
            repeats=1,
            workers=1,
        )
        seq = run_experiment(base)
        par = run_experiment(
            ExperimentConfig(**{**base.__dict__, "workers": 4})
        )
        assert [r.estimate for r in seq.records] == [r.estimate for r in par.records]

    def test_cell_failure_keeps_partial_results(self):
        calls = {"n": 0}

        def flaky(Q):
            calls["n"] += 1
            if calls["n"] > 3:
                raise RuntimeError("oracle died")
            return Q.copy()

        from tracekit import Dataset

        op = LinearOperator(10, flaky, symmetric=True, psd=True)
        ds = Dataset(dataset_id="flaky", operator=op, reference_trace=10.0)
        config = ExperimentConfig(
            dataset="unused",
            algorithms=("hutchinson",),
            budgets=(4,),
            trials=10,
            repeats=1,
        )
        result = run_experiment(config, dataset=ds)
        assert len(result.failed_cells) == 1
        assert result.failed_cells[0].trial_index == 3
        assert len(result.records) == 3
        assert not result.ok

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(dataset="synthetic(10)", algorithms=("bogus",)))
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(dataset="synthetic(10)", trials=0))
        with pytest.raises(ConfigError):
            run_experiment(
                ExperimentConfig(dataset="synthetic(10)", algorithms=("na_hutch_pp",), budgets=(3,))
            )

    def test_workers_env_cap(self, monkeypatch):
        monkeypatch.setenv("TRACEKIT_THREADS", "2")
        assert effective_workers(8) == 2
        monkeypatch.setenv("TRACEKIT_THREADS", "junk")
        with pytest.raises(ConfigError):
            effective_workers(8)
        monkeypatch.delenv("TRACEKIT_THREADS")
        assert effective_workers(8) == 8


class TestChunkedOracle:
    def test_chunking_matches_plain_apply_values(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((30, 30))
        A = A + A.T
        from tracekit import dense_operator

        base = dense_operator(A)
        chunked = ChunkedOracle(base, workers=4)
        Q = rng.standard_normal((30, 10))
        assert np.allclose(chunked.apply(Q), base.apply(Q), rtol=0, atol=1e-13)

    def test_sequential_and_pooled_chunks_identical(self):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(1)
        A = rng.standard_normal((40, 40))
        A = A + A.T
        from tracekit import dense_operator

        base = dense_operator(A)
        Q = rng.standard_normal((40, 11))
        seq = ChunkedOracle(base, workers=3).apply(Q)
        with ThreadPoolExecutor(max_workers=3) as pool:
            par = ChunkedOracle(base, workers=3, executor=pool).apply(Q)
        assert np.array_equal(seq, par)


class TestParallelTrialRunner:
    def test_degenerate_pool_within_tolerance(self):
        config = ExperimentConfig(
            dataset="synthetic(100)",
            algorithms=("na_hutch_pp",),
            budgets=(20,),
            trials=10,
            repeats=1,
            workers=1,
            oracle_delay_ms=1.0,
        )
        (timing,) = parallel_trial_runner(config, workers=1)
        assert timing.estimates_identical
        assert timing.parallel_seconds <= 1.2 * timing.sequential_seconds

    def test_speedup_with_slowed_oracle(self):
        config = ExperimentConfig(
            dataset="synthetic(100)",
            algorithms=("na_hutch_pp",),
            budgets=(40,),
            trials=10,
            repeats=1,
            oracle_delay_ms=1.0,
        )
        (timing,) = parallel_trial_runner(config, workers=4)
        assert timing.estimates_identical
        assert timing.speedup >= 2.0


class TestEmitCsv:
    def _one_record_result(self):
        config = ExperimentConfig(
            dataset="synthetic(50)",
            algorithms=("hutchinson",),
            budgets=(5,),
            trials=1,
            repeats=1,
        )
        return run_experiment(config)

    def test_two_line_file(self, tmp_path):
        result = self._one_record_result()
        out = tmp_path / "r.csv"
        emit_csv(result.records, out)
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == "dataset,algorithm,m,epsilon,estimate,reference_trace,failed,wall_time,seed,trial_index"

    def test_byte_identical_without_timing(self, tmp_path):
        config = ExperimentConfig(
            dataset="synthetic(80)",
            algorithms=("na_hutch_pp",),
            budgets=(8,),
            trials=5,
            repeats=1,
            base_seed=3,
        )
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        emit_csv(run_experiment(config).records, a, include_timing=False)
        emit_csv(run_experiment(config).records, b, include_timing=False)
        assert a.read_bytes() == b.read_bytes()
        assert "wall_time" not in a.read_text().splitlines()[0]

    def test_round_trip_precision(self, tmp_path):
        result = self._one_record_result()
        out = tmp_path / "r.csv"
        emit_csv(result.records, out)
        import csv as csv_mod

        with open(out) as fh:
            row = next(csv_mod.DictReader(fh))
        assert float(row["estimate"]) == result.records[0].estimate
        assert float(row["reference_trace"]) == result.records[0].reference_trace

    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(TraceKitError):
            emit_csv([], tmp_path / "x.csv")


class TestReferenceCrossCheck:
    def test_basis_reference_equals_exact_at_desk_scale(self, tmp_path):
        # every dataset with n <= 2000: basis-query reference vs dense truth
        path = write_path_graph(tmp_path, 16)
        cases = []
        ds = build_dataset(f"estrada({path})")
        A = np.zeros((16, 16))
        for i in range(15):
            A[i, i + 1] = A[i + 1, i] = 1.0
        cases.append((ds, float(np.trace(scipy.linalg.expm(A)))))
        ds2 = build_dataset("inverse(rbf:30)")
        from tracekit.bench import _rbf_kernel_matrix

        cases.append((ds2, float(np.trace(np.linalg.inv(_rbf_kernel_matrix("rbf:30"))))))
        for ds, exact in cases:
            assert abs(ds.reference_trace - exact) <= 1e-6 * abs(exact)
