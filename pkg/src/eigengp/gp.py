"""Exact Gaussian process regression posterior and credible bands.

For data y = f(x) + eps with iid N(0, sigma^2) noise and a centered GP prior
with kernel k, the posterior is again a GP with

    mean(x)    = K_xf (sigma^2 I + K_ff)^-1 y
    cov(x, y)  = k(x, y) - K_xf (sigma^2 I + K_ff)^-1 K_fy.

All solves go through a jittered Cholesky factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.special

from .kernels import KernelSpec, as_points, cross_gram, gram_matrix, kernel_diag
from .linalg import jittered_cholesky, solve_lower

EXACT = "Exact"
VARIATIONAL = "Variational"

_VARIANCE_FLOOR = -1e-10


@dataclass
class Dataset:
    """Regression data: design points (n, d), responses (n,), noise level,
    and optionally the generating truth for simulated data.

    A zero noise level is admitted only so noiseless simulations can be
    represented; posterior computations assume noise_sd > 0.
    """

    xs: np.ndarray
    ys: np.ndarray
    noise_sd: float
    truth: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.xs = as_points(self.xs)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.shape[0] != self.ys.shape[0]:
            raise ValueError("xs and ys must have equal length")
        if self.noise_sd < 0:
            raise ValueError("noise_sd cannot be negative")

    @property
    def n(self) -> int:
        return self.xs.shape[0]


@dataclass
class GaussianPredictive:
    """A Gaussian law for function values on a query grid."""

    grid: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    provenance: str

    def __post_init__(self):
        self.cov = 0.5 * (self.cov + self.cov.T)

    def variances(self) -> np.ndarray:
        """Marginal variances, clamped at zero from below."""
        v = np.diag(self.cov).copy()
        if v.min(initial=0.0) < _VARIANCE_FLOOR * max(1.0, v.max(initial=1.0)):
            raise ValueError("covariance has a substantially negative diagonal")
        return np.maximum(v, 0.0)


@dataclass(frozen=True)
class CredibleBand:
    """Pointwise intervals mean +/- z * sd of posterior mass `level`."""

    lower: np.ndarray
    upper: np.ndarray
    level: float

    def widths(self) -> np.ndarray:
        return self.upper - self.lower


def exact_posterior(
    data: Dataset, spec: KernelSpec, grid, k_ff: np.ndarray | None = None
) -> GaussianPredictive:
    """Posterior mean and covariance on a query grid.

    Pass ``k_ff`` to reuse a precomputed training Gram matrix.
    """
    grid = as_points(grid, spec.dim)
    if grid.shape[0] == 0:
        raise ValueError("query grid is empty")
    K_ff = gram_matrix(spec, data.xs) if k_ff is None else k_ff
    K_n = K_ff + data.noise_sd**2 * np.eye(data.n)
    L = jittered_cholesky(K_n)
    K_fx = cross_gram(spec, data.xs, grid)
    S = solve_lower(L, K_fx)
    alpha = solve_lower(L, data.ys)
    mean = S.T @ alpha
    K_xx = gram_matrix(spec, grid)
    cov = K_xx - S.T @ S
    return GaussianPredictive(grid, mean, cov, EXACT)


def prior_variances(spec: KernelSpec, grid) -> np.ndarray:
    return kernel_diag(spec, as_points(grid, spec.dim))


def gaussian_quantile(p) -> float | np.ndarray:
    """Standard normal quantile (rational-approximation implementation)."""
    return scipy.special.ndtri(p)


def credible_band(pred: GaussianPredictive, level: float) -> CredibleBand:
    """Centered pointwise interval of posterior mass `level` at each grid point."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    z = float(gaussian_quantile(0.5 * (1.0 + level)))
    half = z * np.sqrt(pred.variances())
    return CredibleBand(pred.mean - half, pred.mean + half, level)
