"""Matrix-vector product oracles.

Implicit symmetric matrices are exposed only through :class:`LinearOperator`,
whose ``apply`` maps a block of query vectors to the block of responses.
Concrete constructors cover dense and diagonal matrices, sparse symmetric
matrices read from Matrix Market files, integer matrix powers, and Lanczos
approximations of f(A)v for f in {exp, log, inverse}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionError,
    MatrixMarketError,
    ParameterError,
    SpectrumFloorError,
    SymmetryError,
)

__all__ = [
    "LinearOperator",
    "CountingOperator",
    "LanczosFactorization",
    "SparseSymmetricMatrix",
    "dense_operator",
    "diagonal_operator",
    "identity_operator",
    "power_operator",
    "lanczos_factorize",
    "lanczos_function_operator",
    "read_matrix_market",
    "symmetry_probe",
]

# Dense input must satisfy max|A - A^T| <= SYMMETRY_RTOL * max|A|.
SYMMETRY_RTOL = 1e-12
# Lanczos recurrence stops early once beta_j <= BREAKDOWN_RTOL * ||v||.
BREAKDOWN_RTOL = 1e-14
# Ritz values at or below RITZ_FLOOR_RTOL * theta_max are unsafe for log/inverse.
RITZ_FLOOR_RTOL = 1e-12


class LinearOperator:
    """Oracle access to an implicit symmetric ``dim x dim`` matrix.

    ``apply`` accepts a single vector of shape ``(dim,)`` or a block of shape
    ``(dim, b)`` and returns the matching responses. The oracle must be
    deterministic; all randomness lives in the caller's query vectors.
    Operators are immutable after construction and safe for concurrent
    read-only use.

    ``psd`` is a tri-state claim: ``True`` (claimed PSD), ``False`` (claimed
    not PSD) or ``None`` (unknown). It gates the f(A)v oracles for
    f in {log, inverse}.
    """

    def __init__(
        self,
        dim: int,
        matmat: Callable[[np.ndarray], np.ndarray],
        symmetric: bool = True,
        psd: Optional[bool] = None,
    ):
        if dim < 1:
            raise DimensionError(f"operator dimension must be positive, got {dim}")
        self.dim = int(dim)
        self._matmat = matmat
        self.symmetric = bool(symmetric)
        self.psd = psd

    def apply(self, queries: np.ndarray) -> np.ndarray:
        Q = np.asarray(queries, dtype=float)
        single = Q.ndim == 1
        if single:
            Q = Q[:, None]
        if Q.ndim != 2 or Q.shape[0] != self.dim:
            raise DimensionError(
                f"query block has shape {np.shape(queries)}, expected ({self.dim},) or ({self.dim}, b)"
            )
        out = self._matmat(Q)
        return out[:, 0] if single else out

    def __repr__(self):  # pragma: no cover
        return f"<{type(self).__name__} dim={self.dim} symmetric={self.symmetric} psd={self.psd}>"


class CountingOperator(LinearOperator):
    """Wraps an operator and audits how it is queried.

    ``calls`` counts apply invocations (adaptive rounds as seen by the
    oracle), ``columns`` counts individual query vectors. Estimators wrap
    their oracle in one of these so the reported budget is the audited count.
    """

    def __init__(self, base: LinearOperator):
        self.base = base
        self.calls = 0
        self.columns = 0
        self.block_sizes: list[int] = []
        super().__init__(base.dim, self._counted, base.symmetric, base.psd)

    def _counted(self, Q: np.ndarray) -> np.ndarray:
        self.calls += 1
        self.columns += Q.shape[1]
        self.block_sizes.append(Q.shape[1])
        return self.base.apply(Q)


def dense_operator(A: np.ndarray, psd: Optional[bool] = None) -> LinearOperator:
    """Wrap an explicit symmetric matrix.

    Raises :class:`DimensionError` for non-square input and
    :class:`SymmetryError` when max|A - A^T| exceeds ``1e-12 * max|A|``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    deviation = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if deviation > SYMMETRY_RTOL * scale:
        raise SymmetryError(
            f"matrix is not symmetric: max|A - A^T| = {deviation:.3e} "
            f"> {SYMMETRY_RTOL:.0e} * max|A| = {SYMMETRY_RTOL * scale:.3e}"
        )
    return LinearOperator(A.shape[0], lambda Q: A @ Q, symmetric=True, psd=psd)


def diagonal_operator(diag: np.ndarray) -> LinearOperator:
    """Operator for diag(d); PSD claim is derived from the sign of d."""
    d = np.array(diag, dtype=float).ravel()
    if d.size < 1:
        raise DimensionError("diagonal must be non-empty")
    psd = bool(np.all(d >= 0.0))
    return LinearOperator(d.size, lambda Q: d[:, None] * Q, symmetric=True, psd=psd)


def identity_operator(dim: int) -> LinearOperator:
    return LinearOperator(dim, lambda Q: Q.copy(), symmetric=True, psd=True)


def power_operator(base: LinearOperator, p: int) -> LinearOperator:
    """Operator computing A^p v by applying the base oracle ``p`` times."""
    if int(p) != p or p < 1:
        raise ParameterError(
            f"power must be a positive integer, got {p!r}; use identity_operator for p = 0"
        )
    p = int(p)

    def matmat(Q: np.ndarray) -> np.ndarray:
        out = Q
        for _ in range(p):
            out = base.apply(out)
        return out

    if base.symmetric and p % 2 == 0:
        psd = True
    else:
        psd = base.psd
    return LinearOperator(base.dim, matmat, symmetric=base.symmetric, psd=psd)


@dataclass(frozen=True)
class LanczosFactorization:
    """Result of a (possibly truncated) symmetric Lanczos run.

    ``alpha`` holds the k diagonal coefficients, ``beta`` the k-1 nonnegative
    off-diagonal coefficients, ``basis`` the n x k orthonormal Lanczos
    vectors, and ``start_norm`` the Euclidean norm of the starting vector.
    """

    alpha: np.ndarray
    beta: np.ndarray
    basis: np.ndarray
    start_norm: float

    @property
    def steps(self) -> int:
        return self.alpha.size

    def tridiagonal(self) -> np.ndarray:
        T = np.diag(self.alpha)
        if self.beta.size:
            T += np.diag(self.beta, 1) + np.diag(self.beta, -1)
        return T


def lanczos_factorize(base: LinearOperator, v: np.ndarray, steps: int) -> LanczosFactorization:
    """Run ``steps`` Lanczos iterations from start vector ``v``.

    Uses full reorthogonalization against all prior basis vectors (applied
    twice, which keeps basis^T basis orthonormal to well below 1e-8 at desk
    scale). If beta falls to ``1e-14 * ||v||`` an invariant subspace has been
    found and the factorization is truncated there; this is exact, not an
    error. All scratch is allocated per call.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size != base.dim:
        raise DimensionError(f"start vector has length {v.size}, operator dim is {base.dim}")
    if int(steps) != steps or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    if steps > base.dim:
        raise ParameterError(f"steps = {steps} exceeds operator dimension {base.dim}")
    start_norm = float(np.linalg.norm(v))
    if start_norm == 0.0:
        raise ParameterError("Lanczos start vector must be nonzero")

    n = base.dim
    basis = np.zeros((n, steps))
    alpha = np.zeros(steps)
    beta = np.zeros(max(steps - 1, 0))
    basis[:, 0] = v / start_norm
    beta_prev = 0.0
    q_prev = np.zeros(n)
    used = steps
    for j in range(steps):
        w = base.apply(basis[:, j])
        alpha[j] = float(basis[:, j] @ w)
        w = w - alpha[j] * basis[:, j] - beta_prev * q_prev
        active = basis[:, : j + 1]
        w -= active @ (active.T @ w)
        w -= active @ (active.T @ w)
        if j + 1 == steps:
            break
        b = float(np.linalg.norm(w))
        if b <= BREAKDOWN_RTOL * start_norm:
            used = j + 1
            break
        beta[j] = b
        q_prev = basis[:, j]
        beta_prev = b
        basis[:, j + 1] = w / b
    return LanczosFactorization(
        alpha=alpha[:used].copy(),
        beta=beta[: used - 1].copy(),
        basis=basis[:, :used].copy(),
        start_norm=start_norm,
    )


_SCALAR_FUNCS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp": np.exp,
    "log": np.log,
    "inverse": lambda t: 1.0 / t,
}


def lanczos_function_operator(
    base: LinearOperator,
    func: Union[str, Callable[[np.ndarray], np.ndarray]],
    steps: int,
) -> LinearOperator:
    """Operator approximating f(A)v via a per-column Lanczos run.

    Each query column is used as its own Lanczos start vector; the response
    is ``||v|| * basis @ U f(Theta) U^T e1`` where ``T = U Theta U^T`` is the
    eigendecomposition of the tridiagonal matrix. Exact when
    ``steps >= base.dim`` up to roundoff. For f in {log, inverse} the base
    must be claimed PSD, and any Ritz value at or below
    ``1e-12 * max(Ritz)`` raises :class:`SpectrumFloorError`.
    """
    if not base.symmetric:
        raise ParameterError("lanczos_function_operator requires a symmetric base operator")
    if int(steps) != steps or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps!r}")
    if steps > base.dim:
        raise ParameterError(f"steps = {steps} exceeds operator dimension {base.dim}")
    steps = int(steps)

    if callable(func):
        tag, f = "custom", func
    else:
        tag = str(func)
        if tag not in _SCALAR_FUNCS:
            raise ParameterError(f"unknown function tag {tag!r}; expected exp, log, inverse or a callable")
        f = _SCALAR_FUNCS[tag]
    if tag in ("log", "inverse") and base.psd is not True:
        raise ParameterError(f"f = {tag} requires a claimed-PSD base operator")

    def matmat(Q: np.ndarray) -> np.ndarray:
        out = np.zeros_like(Q)
        for j in range(Q.shape[1]):
            v = Q[:, j]
            if not np.any(v):
                continue
            fac = lanczos_factorize(base, v, steps)
            theta, U = np.linalg.eigh(fac.tridiagonal())
            if tag in ("log", "inverse"):
                floor = RITZ_FLOOR_RTOL * theta[-1]
                if theta[0] <= floor:
                    raise SpectrumFloorError(
                        f"Ritz value {theta[0]:.6e} at or below spectrum floor "
                        f"{floor:.6e} while applying f = {tag}"
                    )
            y = U @ (f(theta) * U[0, :])
            out[:, j] = fac.start_norm * (fac.basis @ y)
        return out

    if tag == "exp":
        psd = True
    elif tag == "inverse":
        psd = True
    else:
        psd = None
    return LinearOperator(base.dim, matmat, symmetric=True, psd=psd)


class SparseSymmetricMatrix:
    """Symmetric sparse matrix in compressed row storage.

    The full symmetric pattern is stored explicitly: entry (i, j) is present
    iff (j, i) is present with equal value, and column indices are strictly
    increasing within each row.
    """

    def __init__(self, csr: sp.csr_matrix):
        m = sp.csr_matrix(csr).copy()
        m.sum_duplicates()
        m.sort_indices()
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected square sparse matrix, got shape {m.shape}")
        self._csr = m
        self.dim = m.shape[0]

    @classmethod
    def from_coo(cls, dim, rows, cols, values) -> "SparseSymmetricMatrix":
        """Assemble from 0-based triplets; duplicates are summed."""
        m = sp.coo_matrix((values, (rows, cols)), shape=(dim, dim)).tocsr()
        return cls(m)

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_csr(self) -> sp.csr_matrix:
        return self._csr.copy()

    def symmetry_deviation(self) -> float:
        d = self._csr - self._csr.T
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def to_operator(self, psd: Optional[bool] = None) -> LinearOperator:
        csr = self._csr
        return LinearOperator(self.dim, lambda Q: csr @ Q, symmetric=True, psd=psd)


def _parse_header(line: str) -> tuple[str, str]:
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket":
        raise MatrixMarketError(f"line 1: malformed Matrix Market banner: {line.strip()!r}")
    _, obj, fmt, field, symmetry = tokens
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"line 1: only 'matrix coordinate' files are supported, got {obj} {fmt}")
    if field not in ("real", "integer", "pattern"):
        raise MatrixMarketError(f"line 1: unsupported field {field!r}; expected real, integer or pattern")
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"line 1: unsupported symmetry {symmetry!r}; expected general or symmetric")
    return field, symmetry


def read_matrix_market(path) -> SparseSymmetricMatrix:
    """Read a Matrix Market coordinate file as a symmetric sparse matrix.

    Accepts real, integer or pattern fields with a general or symmetric
    header and 1-based indices. Pattern entries get value 1.0 and duplicate
    coordinates are summed. Symmetric-header files are mirrored into full
    storage; general-header files must already be symmetric, otherwise a
    :class:`MatrixMarketError` naming the offending line is raised.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("line 1: empty file")
    field, symmetry = _parse_header(lines[0])

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"line {lineno}: malformed size line: {text!r}")
        try:
            nrows, ncols, nnz = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(f"line {lineno}: malformed size line: {text!r}") from None
        size = (nrows, ncols, nnz)
        break
    if size is None:
        raise MatrixMarketError(f"line {len(lines)}: missing size line")
    nrows, ncols, nnz = size
    if nrows != ncols:
        raise MatrixMarketError(f"line {lineno}: matrix must be square, got {nrows} x {ncols}")
    if nrows < 1:
        raise MatrixMarketError(f"line {lineno}: dimension must be positive, got {nrows}")

    want_values = field != "pattern"
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    first_line: dict[tuple[int, int], int] = {}
    seen = 0
    for entry_lineno in range(lineno + 1, len(lines) + 1):
        text = lines[entry_lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        if seen == nnz:
            raise MatrixMarketError(
                f"line {entry_lineno}: unexpected extra entry; header declared {nnz} entries"
            )
        parts = text.split()
        expected = 3 if want_values else 2
        if len(parts) != expected:
            raise MatrixMarketError(
                f"line {entry_lineno}: expected {expected} fields, got {len(parts)}: {text!r}"
            )
        try:
            i = int(parts[0])
            j = int(parts[1])
            v = float(parts[2]) if want_values else 1.0
        except ValueError:
            raise MatrixMarketError(f"line {entry_lineno}: malformed entry: {text!r}") from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(
                f"line {entry_lineno}: index ({i}, {j}) out of range for a {nrows} x {ncols} matrix"
            )
        i -= 1
        j -= 1
        rows.append(i)
        cols.append(j)
        vals.append(v)
        first_line.setdefault((i, j), entry_lineno)
        if symmetry == "symmetric" and i != j:
            rows.append(j)
            cols.append(i)
            vals.append(v)
        seen += 1
    if seen != nnz:
        raise MatrixMarketError(
            f"line {len(lines)}: file ended after {seen} entries, header declared {nnz}"
        )

    mat = SparseSymmetricMatrix.from_coo(nrows, rows, cols, vals)
    if symmetry == "general":
        csr = mat.to_csr()
        diff = csr - csr.T
        if diff.nnz:
            scale = float(np.max(np.abs(csr.data))) if csr.nnz else 0.0
            deviation = float(np.max(np.abs(diff.data)))
            if deviation > SYMMETRY_RTOL * scale:
                bad = np.unravel_index(np.argmax(np.abs(diff.toarray())), diff.shape)
                where = first_line.get((bad[0], bad[1])) or first_line.get((bad[1], bad[0]))
                raise MatrixMarketError(
                    f"line {where}: general-header matrix is asymmetric at "
                    f"({bad[0] + 1}, {bad[1] + 1}); deviation {deviation:.3e}"
                )
    return mat


def estimate_operator_norm(op: LinearOperator, iterations: int = 20, seed: int = 0) -> float:
    """Crude power-iteration estimate of ||A||_2, for probe tolerances."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim)
    v /= np.linalg.norm(v)
    norm = 0.0
    for _ in range(iterations):
        w = op.apply(v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
    return norm


def symmetry_probe(
    op: LinearOperator,
    pairs: int = 20,
    seed: int = 0,
    rtol: float = 1e-8,
) -> tuple[bool, float]:
    """Check |u^T(Av) - v^T(Au)| <= rtol * ||u|| ||v|| ||A||_est on random pairs.

    Returns (passed, worst_ratio) where worst_ratio is the largest observed
    deviation divided by its tolerance.
    """
    norm_est = estimate_operator_norm(op, seed=seed)
    if norm_est == 0.0:
        return True, 0.0
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(pairs):
        u = rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim)
        lhs = abs(float(u @ op.apply(v)) - float(v @ op.apply(u)))
        bound = rtol * float(np.linalg.norm(u)) * float(np.linalg.norm(v)) * norm_est
        worst = max(worst, lhs / bound)
    return worst <= 1.0, worst
