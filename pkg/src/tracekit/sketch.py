"""Gaussian sketching and the non-adaptive low-rank approximant.

The approximant is ``A_tilde = (A R) (S^T A R)^+ (A S)^T`` built from the
three seeded query blocks S, R, G of a :class:`SketchPack`. Its trace is
available without ever forming an n x n matrix, and the implicit residual
``A - A_tilde`` is exposed as another linear operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, DimensionError, ParameterError
from .linop import LinearOperator

__all__ = [
    "DEFAULT_SPLIT",
    "SketchPack",
    "LowRankFactors",
    "split_counts",
    "make_sketch_pack",
    "pseudoinverse",
    "factors_from_responses",
    "low_rank_approximant",
    "residual_operator",
    "materialize_approximant",
]

# Query budget split (c1, c2, c3) between the S, R and G blocks.
DEFAULT_SPLIT = (0.25, 0.5, 0.25)

_BLOCK_NAMES = ("S", "R", "G")


def validate_split(split) -> tuple[float, float, float]:
    if len(split) != 3:
        raise ParameterError(f"split must have three entries, got {split!r}")
    c1, c2, c3 = (float(c) for c in split)
    if min(c1, c2, c3) <= 0.0:
        raise ParameterError(f"split fractions must be positive, got {split!r}")
    if abs(c1 + c2 + c3 - 1.0) > 1e-9:
        raise ParameterError(f"split fractions must sum to 1, got {split!r}")
    if not c1 < c2:
        raise ParameterError(f"split requires c1 < c2, got {split!r}")
    return c1, c2, c3


def split_counts(m: int, split=DEFAULT_SPLIT) -> tuple[int, int, int]:
    """Round the budget into (s, r, g) column counts, G absorbing the remainder."""
    c1, c2, _ = validate_split(split)
    if int(m) != m or m < 1:
        raise BudgetError(f"budget m must be a positive integer, got {m!r}")
    m = int(m)
    s = round(c1 * m)
    r = round(c2 * m)
    g = m - s - r
    for name, count in zip(_BLOCK_NAMES, (s, r, g)):
        if count < 1:
            raise BudgetError(
                f"budget m = {m} with split {tuple(split)} rounds the {name} block to "
                f"{count} columns; every block needs at least one"
            )
    return s, r, g


@dataclass(frozen=True)
class SketchPack:
    """The three non-adaptive query blocks with their provenance.

    Blocks are drawn consecutively (S, then R, then G) from the stream
    determined by ``seed``, so equal inputs give identical blocks entrywise.
    Entries are i.i.d. standard normal unless ``distribution`` says
    rademacher.
    """

    S: np.ndarray
    R: np.ndarray
    G: np.ndarray
    split: tuple[float, float, float]
    m: int
    seed: int
    distribution: str = "gaussian"

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def counts(self) -> tuple[int, int, int]:
        return self.S.shape[1], self.R.shape[1], self.G.shape[1]


def _draw(rng: np.random.Generator, n: int, cols: int, distribution: str) -> np.ndarray:
    if distribution == "gaussian":
        return rng.standard_normal((n, cols))
    if distribution == "rademacher":
        return rng.integers(0, 2, size=(n, cols)) * 2.0 - 1.0
    raise ParameterError(f"unknown query distribution {distribution!r}")


def make_sketch_pack(
    n: int,
    m: int,
    split=DEFAULT_SPLIT,
    seed: int = 0,
    distribution: str = "gaussian",
) -> SketchPack:
    if n < 1:
        raise DimensionError(f"sketch dimension must be positive, got {n}")
    s, r, g = split_counts(m, split)
    rng = np.random.default_rng(seed)
    S = _draw(rng, n, s, distribution)
    R = _draw(rng, n, r, distribution)
    G = _draw(rng, n, g, distribution)
    return SketchPack(S=S, R=R, G=G, split=tuple(split), m=int(m), seed=int(seed), distribution=distribution)


def pseudoinverse(M: np.ndarray) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudoinverse via SVD with an explicit cutoff.

    Singular values at or below ``max(p, q) * eps * sigma_max`` are treated
    as zero. Returns the q x p pseudoinverse and the count of retained
    singular values. A zero matrix maps to a zero pseudoinverse of rank 0.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f"pseudoinverse needs a p x q block, got shape {M.shape}")
    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((M.shape[1], M.shape[0])), 0
    tol = max(M.shape) * np.finfo(float).eps * sv[0]
    rank = int(np.count_nonzero(sv > tol))
    if rank == 0:
        return np.zeros((M.shape[1], M.shape[0])), 0
    return (Vt[:rank].T / sv[:rank]) @ U[:, :rank].T, rank


@dataclass(frozen=True)
class LowRankFactors:
    """Factors of ``A_tilde = left @ core_pinv @ right.T`` with left = A R,
    core = S^T A R, right = A S."""

    left: np.ndarray
    core: np.ndarray
    right: np.ndarray
    core_pinv: np.ndarray
    effective_rank: int

    def trace(self) -> float:
        """tr(A_tilde) without forming the n x n matrix."""
        return float(np.sum(self.core_pinv * (self.left.T @ self.right)))


def factors_from_responses(S: np.ndarray, Z: np.ndarray, W: np.ndarray) -> LowRankFactors:
    """Assemble factors from already-computed responses Z = A R, W = A S."""
    core = S.T @ Z
    core_pinv, rank = pseudoinverse(core)
    return LowRankFactors(left=Z, core=core, right=W, core_pinv=core_pinv, effective_rank=rank)


def low_rank_approximant(A: LinearOperator, pack: SketchPack) -> LowRankFactors:
    """Build the sketch approximant with exactly r + s oracle queries.

    The R and S blocks are submitted to the oracle as one non-adaptive batch.
    """
    if pack.n != A.dim:
        raise DimensionError(f"sketch pack is for dimension {pack.n}, operator has {A.dim}")
    r = pack.R.shape[1]
    responses = A.apply(np.hstack([pack.R, pack.S]))
    Z = responses[:, :r]
    W = responses[:, r:]
    return factors_from_responses(pack.S, Z, W)


def residual_operator(A: LinearOperator, factors: LowRankFactors) -> LinearOperator:
    """Implicit ``Delta = A - A_tilde``; one fresh A-query per applied column."""
    if factors.left.shape[0] != A.dim:
        raise DimensionError(
            f"factors are for dimension {factors.left.shape[0]}, operator has {A.dim}"
        )
    left = factors.left
    right = factors.right
    core_pinv = factors.core_pinv

    def matmat(V: np.ndarray) -> np.ndarray:
        return A.apply(V) - left @ (core_pinv @ (right.T @ V))

    return LinearOperator(A.dim, matmat, symmetric=A.symmetric, psd=None)


def materialize_approximant(factors: LowRankFactors) -> np.ndarray:
    """Dense n x n A_tilde, for diagnostics and tests only."""
    return factors.left @ factors.core_pinv @ factors.right.T
