"""Matrix-free stochastic trace estimation toolkit.

Estimators (Hutchinson, Hutch++, NA-Hutch++) see implicit matrices only
through matrix-vector product oracles. The package also provides the
Gaussian-sketch low-rank approximant behind NA-Hutch++, Lanczos f(A)v
oracles, adversarial hard-instance generators, and a seeded benchmark
harness with sequential and parallel execution.
"""

from .bench import (
    CSV_COLUMNS,
    CellFailure,
    CellTiming,
    ChunkedOracle,
    Dataset,
    ExperimentConfig,
    ExperimentResult,
    TrialRecord,
    build_dataset,
    effective_workers,
    emit_csv,
    is_failed,
    parallel_trial_runner,
    parse_dataset_spec,
    run_experiment,
)
from .errors import (
    BudgetError,
    ConfigError,
    DimensionError,
    MatrixMarketError,
    ParameterError,
    SpectrumFloorError,
    SymmetryError,
    TraceKitError,
)
from .estimators import (
    ALGORITHMS,
    DISTRIBUTIONS,
    TraceEstimate,
    estimate_eigenvalue_moments,
    estimate_trace,
    hutch_pp,
    hutchinson,
    na_hutch_pp,
    query_budget_for,
)
from .hardness import (
    SHIFT_COEFFICIENT,
    SPIKE_CONSTANT,
    SpikedInstance,
    TraceLawReport,
    WignerSample,
    sample_shifted_wigner_psd,
    sample_spiked_pair,
    sample_wigner,
    trace_law_check,
)
from .linop import (
    CountingOperator,
    LanczosFactorization,
    LinearOperator,
    SparseSymmetricMatrix,
    dense_operator,
    diagonal_operator,
    identity_operator,
    lanczos_factorize,
    lanczos_function_operator,
    power_operator,
    read_matrix_market,
    symmetry_probe,
)
from .sketch import (
    DEFAULT_SPLIT,
    LowRankFactors,
    SketchPack,
    low_rank_approximant,
    make_sketch_pack,
    materialize_approximant,
    pseudoinverse,
    residual_operator,
    split_counts,
)

__version__ = "0.1.0"
