"""Adversarial instance generators and their statistical sanity checks.

Wigner draws, identity-shifted PSD Wigner matrices, and the spiked P/Q
distribution pair give seeded hard inputs for stress-testing the estimators.
All generators are pure functions of (size, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError

__all__ = [
    "WignerSample",
    "SpikedInstance",
    "TraceLawReport",
    "SPIKE_CONSTANT",
    "SHIFT_COEFFICIENT",
    "sample_wigner",
    "sample_shifted_wigner_psd",
    "sample_spiked_pair",
    "trace_law_check",
]

# Rank-1 spike scale for the P distribution; large enough that exact P and Q
# trace populations separate at desk scale.
SPIKE_CONSTANT = 32.0
# Identity shift coefficient 6 * sqrt(ln(1/delta)); the smaller main-text
# constant 2 does not guarantee PSD instances.
SHIFT_COEFFICIENT = 6.0


@dataclass(frozen=True)
class WignerSample:
    """G + G^T for G with i.i.d. standard normal entries."""

    n: int
    matrix: np.ndarray
    seed: int

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def sample_wigner(n: int, seed: int = 0) -> WignerSample:
    """Draw a symmetric n x n Wigner matrix; diagonal entries are N(0, 4)."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((int(n), int(n)))
    return WignerSample(n=int(n), matrix=G + G.T, seed=int(seed))


def sample_shifted_wigner_psd(
    n: int,
    seed: int = 0,
    opnorm_constant: float = 3.0,
) -> tuple[np.ndarray, bool]:
    """I + (G + G^T) / (2 C sqrt(n)) with C = 3; PSD with high probability.

    The flag reports an exact smallest-eigenvalue check, so the rare non-PSD
    draw is returned with ``psd_flag = False`` rather than raised.
    """
    sample = sample_wigner(n, seed)
    matrix = np.eye(sample.n) + sample.matrix / (2.0 * opnorm_constant * math.sqrt(sample.n))
    smallest = float(np.linalg.eigvalsh(matrix)[0])
    return matrix, bool(smallest >= 0.0)


@dataclass(frozen=True)
class SpikedInstance:
    """One draw from the spiked pair; label P carries the rank-1 planted spike."""

    label: str
    matrix: np.ndarray
    spike_direction: Optional[np.ndarray]
    delta: float
    shift_used: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def sample_spiked_pair(delta: float, seed: int = 0, label: str = "Q") -> SpikedInstance:
    """Draw from distribution P or Q at failure-probability target delta.

    With L = ln(1/delta) and n = ceil(L): label Q is W + 6 sqrt(L) I; label P
    adds 32 L^(3/2) g g^T / ||g||^2 for an independent standard normal g.
    Both labels consume the Wigner draw and g in the same order, so P minus Q
    at equal seed is exactly the spike term.
    """
    if not 0.0 < delta < 0.5:
        raise ParameterError(f"delta must lie in (0, 0.5), got {delta!r}")
    if label not in ("P", "Q"):
        raise ParameterError(f"label must be 'P' or 'Q', got {label!r}")
    log_inv = math.log(1.0 / delta)
    n = math.ceil(log_inv * (1.0 - 1e-12))
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    W = G + G.T
    g = rng.standard_normal(n)

    shift = SHIFT_COEFFICIENT * math.sqrt(log_inv)
    matrix = W + shift * np.eye(n)
    direction = None
    if label == "P":
        direction = g / np.linalg.norm(g)
        matrix = matrix + (SPIKE_CONSTANT * log_inv**1.5) * np.outer(direction, direction)
    return SpikedInstance(
        label=label,
        matrix=matrix,
        spike_direction=direction,
        delta=float(delta),
        shift_used=shift,
    )


@dataclass(frozen=True)
class TraceLawReport:
    """Outcome of the Wigner trace-law check tr(W) ~ N(0, 4n)."""

    n: int
    num_samples: int
    mean: float
    mean_se: float
    variance_ratio: float
    mean_ok: bool
    variance_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.variance_ok


def trace_law_check(samples: Sequence[WignerSample]) -> TraceLawReport:
    """z-test the sample mean against 0 and ratio-test the variance against 4n.

    Requires at least 100 samples of equal dimension. Passes iff the mean is
    within 4 standard errors of 0 and the variance ratio lies in
    [0.85, 1.15].
    """
    if len(samples) < 100:
        raise ParameterError(f"trace_law_check needs at least 100 samples, got {len(samples)}")
    n = samples[0].n
    if any(s.n != n for s in samples):
        raise ParameterError("trace_law_check requires samples of equal dimension")
    traces = np.array([s.trace() for s in samples])
    mean = float(traces.mean())
    se = math.sqrt(4.0 * n / len(samples))
    ratio = float(traces.var(ddof=1) / (4.0 * n))
    return TraceLawReport(
        n=n,
        num_samples=len(samples),
        mean=mean,
        mean_se=se,
        variance_ratio=ratio,
        mean_ok=abs(mean) <= 4.0 * se,
        variance_ok=0.85 <= ratio <= 1.15,
    )
