"""Stochastic trace estimators.

Three estimators share one calling convention: an oracle, a total query
budget, a query-vector distribution and a seed. ``hutchinson`` and
``na_hutch_pp`` are non-adaptive (every query vector exists before the
oracle answers anything, submitted as a single block); ``hutch_pp`` spends
a first round on range finding and a second on the deflated estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, ParameterError
from .linop import CountingOperator, LinearOperator, power_operator
from .sketch import DEFAULT_SPLIT, factors_from_responses, make_sketch_pack

__all__ = [
    "ALGORITHMS",
    "DISTRIBUTIONS",
    "TraceEstimate",
    "hutchinson",
    "hutch_pp",
    "na_hutch_pp",
    "estimate_trace",
    "estimate_eigenvalue_moments",
    "query_budget_for",
]

ALGORITHMS = ("hutchinson", "hutch_pp", "na_hutch_pp")
DISTRIBUTIONS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class TraceEstimate:
    """A trace estimate with full provenance.

    ``m`` is the audited oracle-query count (number of columns actually sent
    to the oracle), not the requested budget. ``adaptive_rounds`` is 1 for
    the non-adaptive estimators and 2 for hutch_pp.
    """

    value: float
    algorithm: str
    m: int
    distribution: str
    seed: int
    adaptive_rounds: int


def _sample_block(rng: np.random.Generator, n: int, cols: int, distribution: str) -> np.ndarray:
    if distribution == "gaussian":
        return rng.standard_normal((n, cols))
    if distribution == "rademacher":
        return rng.integers(0, 2, size=(n, cols)) * 2.0 - 1.0
    raise ParameterError(f"unknown query distribution {distribution!r}")


def hutchinson(
    A: LinearOperator,
    l: int,
    distribution: str = "gaussian",
    seed: int = 0,
) -> TraceEstimate:
    """Plain stochastic trace estimate (1/l) tr(Q^T A Q).

    Unbiased for both distributions; exact on diagonal matrices with
    rademacher queries. All l query vectors go to the oracle in one block.
    """
    if int(l) != l or l < 1:
        raise BudgetError(f"hutchinson needs at least one query, got l = {l!r}")
    audit = CountingOperator(A)
    rng = np.random.default_rng(seed)
    Q = _sample_block(rng, A.dim, int(l), distribution)
    Y = audit.apply(Q)
    value = float(np.sum(Q * Y) / l)
    return TraceEstimate(
        value=value,
        algorithm="hutchinson",
        m=audit.columns,
        distribution=distribution,
        seed=int(seed),
        adaptive_rounds=audit.calls,
    )


def hutch_pp(
    A: LinearOperator,
    m: int,
    distribution: str = "gaussian",
    seed: int = 0,
) -> TraceEstimate:
    """Variance-reduced estimate with one adaptive round of deflation.

    Budget split: floor(m/3) columns sketch the range, floor(m/3) pay for the
    exact trace on the captured subspace, and the remainder feeds the
    deflated stochastic term, so the audited total is exactly m. Round one
    queries A S; after orthonormalization, round two queries
    A [Q | (I - Q Q^T) G] in a single block.
    """
    if int(m) != m or m < 3:
        raise BudgetError(f"hutch_pp needs m >= 3 queries, got m = {m!r}")
    m = int(m)
    p = m // 3
    g = m - 2 * p
    audit = CountingOperator(A)
    rng = np.random.default_rng(seed)

    S = _sample_block(rng, A.dim, p, distribution)
    Y = audit.apply(S)
    Q, _ = np.linalg.qr(Y)

    G = _sample_block(rng, A.dim, g, distribution)
    G_defl = G - Q @ (Q.T @ G)
    responses = audit.apply(np.hstack([Q, G_defl]))
    AQ = responses[:, :p]
    AG_defl = responses[:, p:]
    value = float(np.trace(Q.T @ AQ)) + float(np.sum(G_defl * AG_defl)) / g
    return TraceEstimate(
        value=value,
        algorithm="hutch_pp",
        m=audit.columns,
        distribution=distribution,
        seed=int(seed),
        adaptive_rounds=audit.calls,
    )


def na_hutch_pp(
    A: LinearOperator,
    m: int,
    split=DEFAULT_SPLIT,
    distribution: str = "gaussian",
    seed: int = 0,
) -> TraceEstimate:
    """Non-adaptive variance-reduced estimate from a single query block.

    The S, R, G blocks of a seeded sketch pack are submitted to the oracle
    at once. The returned value is

        tr((S^T Z)^+ (W^T Z)) + (tr(G^T A G) - tr(G^T Z (S^T Z)^+ W^T G)) / g

    with Z = A R, W = A S, and g the actual G column count (equal to c3 * m
    whenever that is integral). The same G serves both correction terms.
    The gaussian distribution carries the estimator's guarantees; rademacher
    is offered as an experimental option.
    """
    pack = make_sketch_pack(A.dim, m, split=split, seed=seed, distribution=distribution)
    s, r, g = pack.counts
    audit = CountingOperator(A)
    responses = audit.apply(np.hstack([pack.S, pack.R, pack.G]))
    W = responses[:, :s]
    Z = responses[:, s : s + r]
    AG = responses[:, s + r :]

    factors = factors_from_responses(pack.S, Z, W)
    low_rank_term = factors.trace()
    X = (pack.G.T @ Z) @ factors.core_pinv
    correction = (float(np.sum(pack.G * AG)) - float(np.sum(X * (pack.G.T @ W)))) / g
    return TraceEstimate(
        value=low_rank_term + correction,
        algorithm="na_hutch_pp",
        m=audit.columns,
        distribution=distribution,
        seed=int(seed),
        adaptive_rounds=audit.calls,
    )


def estimate_trace(
    A: LinearOperator,
    algorithm: str,
    m: int,
    distribution: str = "gaussian",
    seed: int = 0,
    split=DEFAULT_SPLIT,
) -> TraceEstimate:
    """Dispatch by algorithm tag with a uniform signature."""
    if algorithm == "hutchinson":
        return hutchinson(A, m, distribution=distribution, seed=seed)
    if algorithm == "hutch_pp":
        return hutch_pp(A, m, distribution=distribution, seed=seed)
    if algorithm == "na_hutch_pp":
        return na_hutch_pp(A, m, split=split, distribution=distribution, seed=seed)
    raise ParameterError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def estimate_eigenvalue_moments(
    K: LinearOperator,
    max_p: int,
    m: int,
    algorithm: str = "hutchinson",
    distribution: str = "gaussian",
    seed: int = 0,
    split=DEFAULT_SPLIT,
) -> list[float]:
    """Estimate the spectral moments tr(K^i) / n for i = 1..max_p.

    Moment i uses ``power_operator(K, i)`` and an independent estimator call
    with budget m, seeded ``seed + i``. K must be claimed PSD.
    """
    if K.psd is not True:
        raise ParameterError("eigenvalue moments require a claimed-PSD operator")
    if int(max_p) != max_p or max_p < 1:
        raise ParameterError(f"max_p must be a positive integer, got {max_p!r}")
    moments = []
    for i in range(1, int(max_p) + 1):
        op = power_operator(K, i)
        est = estimate_trace(op, algorithm, m, distribution=distribution, seed=seed + i, split=split)
        moments.append(est.value / K.dim)
    return moments


def query_budget_for(epsilon: float, delta: float, budget_constant: int = 4) -> tuple[int, int, int]:
    """Advisory (m, k, l) for a target (epsilon, delta).

    k = l = ceil(sqrt(ln(1/delta)) / epsilon) balances the rank against the
    residual sample count, and m = budget_constant * (k + ceil(ln(1/delta))).
    Estimators take an explicit m; this is guidance only.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if not 0.0 < delta < 0.5:
        raise ParameterError(f"delta must lie in (0, 0.5), got {delta!r}")
    log_inv = math.log(1.0 / delta)
    # Shave floating-point fuzz so analytically integral ratios stay integral.
    guard = 1.0 - 1e-12
    k = math.ceil(math.sqrt(log_inv) / epsilon * guard)
    l = k
    m = int(budget_constant) * (k + math.ceil(log_inv * guard))
    return m, k, l
