import pytest

from csv_helpers import write_bench_csv


@pytest.fixture
def bench_csv(tmp_path):
    return write_bench_csv(
        tmp_path / "results.csv",
        algorithms=("hutchinson", "hutch_pp", "na_hutch_pp"),
        budgets=(50, 100, 150),
    )
