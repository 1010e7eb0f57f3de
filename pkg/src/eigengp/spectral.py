"""Symmetric eigendecomposition of PSD matrices: full and top-m."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .errors import NumericalError

# Below this size (or above this rank fraction) a dense decomposition beats
# the Krylov iteration.
_DENSE_SIZE = 400
_DENSE_RANK_FRACTION = 0.25


@dataclass(frozen=True)
class SpectralDecomposition:
    """Leading eigenpairs of a symmetric PSD matrix.

    eigenvalues are nonincreasing, eigenvectors orthonormal columns;
    ``rank_retained`` is the number of retained pairs out of ``source_dim``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank_retained: int
    source_dim: int

    def reconstruction(self) -> np.ndarray:
        """sum_j mu_j v_j v_j^T over the retained pairs."""
        return (self.eigenvectors * self.eigenvalues[None, :]) @ self.eigenvectors.T


def _check_symmetric(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if np.array_equal(A, A.T):
        return A
    asym = float(np.abs(A - A.T).max(initial=0.0))
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if asym > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (A + A.T)


def _clamp_negatives(values: np.ndarray, trace: float) -> np.ndarray:
    floor = -1e-10 * max(trace, np.finfo(float).tiny)
    if values.min(initial=0.0) < floor:
        raise NumericalError(
            f"matrix is not PSD: eigenvalue {values.min():.3e} below {floor:.3e}"
        )
    return np.maximum(values, 0.0)


def eig_symmetric(A) -> SpectralDecomposition:
    """Full decomposition with eigenvalues sorted in decreasing order.

    Small negative eigenvalues (within -1e-10 * trace) are clamped to zero;
    anything more negative raises, as does a non-symmetric input.
    """
    A = _check_symmetric(A)
    try:
        values, vectors = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    values = values[::-1]
    vectors = vectors[:, ::-1]
    values = _clamp_negatives(values, float(np.trace(A)))
    n = A.shape[0]
    return SpectralDecomposition(values, vectors, n, n)


def top_m(A, m: int) -> SpectralDecomposition:
    """The m largest eigenpairs of a symmetric PSD matrix.

    Uses an implicitly restarted Lanczos iteration when m is a small
    fraction of n, and falls back to the dense solver otherwise.  The
    Lanczos start vector is fixed so results are deterministic.
    """
    A = _check_symmetric(A)
    n = A.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    use_dense = n < _DENSE_SIZE or m > _DENSE_RANK_FRACTION * n
    if use_dense:
        full = eig_symmetric(A)
        return SpectralDecomposition(
            full.eigenvalues[:m].copy(), full.eigenvectors[:, :m].copy(), m, n
        )
    v0 = np.full(n, 1.0 / np.sqrt(n))
    try:
        values, vectors = scipy.sparse.linalg.eigsh(A, k=m, which="LA", v0=v0)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise NumericalError(f"Lanczos iteration did not converge: {exc}") from exc
    order = np.argsort(values)[::-1]
    values = _clamp_negatives(values[order], float(np.trace(A)))
    return SpectralDecomposition(values, vectors[:, order], m, n)
