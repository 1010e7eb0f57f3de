"""Cholesky helpers with the shared jitter-escalation policy."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import FactorizationError

JITTER_START = 1e-10
JITTER_MAX = 1e-6


def jittered_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of A, adding tau * mean(diag) to the diagonal
    if needed, with tau escalating tenfold from 1e-10 up to 1e-6."""
    A = np.asarray(A, dtype=float)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(A)))
    if scale <= 0:
        scale = 1.0
    tau = JITTER_START
    eye = np.eye(A.shape[0])
    while tau <= JITTER_MAX:
        try:
            return np.linalg.cholesky(A + tau * scale * eye)
        except np.linalg.LinAlgError:
            tau *= 10.0
    raise FactorizationError(
        f"Cholesky failed for {A.shape[0]}x{A.shape[0]} matrix even with "
        f"jitter {JITTER_MAX:g} * mean diagonal"
    )


def solve_lower(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve L Z = B for lower-triangular L."""
    return scipy.linalg.solve_triangular(L, B, lower=True)


def chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve (L L^T) X = B given the lower factor."""
    Z = scipy.linalg.solve_triangular(L, B, lower=True)
    return scipy.linalg.solve_triangular(L.T, Z, lower=False)


def chol_logdet(L: np.ndarray) -> float:
    """log det(L L^T)."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
