"""Sparse variational GP regression with spectrally constructed inducing variables.

Two constructions of m inducing variables u_1..u_m are provided:

* "matrix":   u_j = v_j^T f(x_1..x_n), where v_j is the eigenvector of the
  Gram matrix K_ff for its j-th largest eigenvalue mu_j.  Then
  K_uu = diag(mu_j), K_fu[:, j] = mu_j v_j, and the Nystrom matrix
  Q_ff = sum_{j<=m} mu_j v_j v_j^T is the best rank-m approximation of K_ff.
* "operator": u_j = integral of f phi_j dG for eigenfunctions phi_j of the
  covariance operator with eigenvalues lambda_j.  Then K_uu = diag(lambda_j),
  K_fu[i, j] = lambda_j phi_j(x_i), and Q_ff = sum_{j<=m} lambda_j
  phi_j(xs) phi_j(xs)^T.

The optimal variational distribution over u is Gaussian with

    Sigma' = K_uu (K_uu + K_uf K_fu / sigma^2)^-1 K_uu
    mu'    = K_uu (K_uu + K_uf K_fu / sigma^2)^-1 K_uf y / sigma^2

and the divergence from the optimal variational posterior to the exact one
has the closed form

    KL = 1/2 ( y^T (Q_n^-1 - K_n^-1) y + log |Q_n|/|K_n|
               + tr(K_n - Q_n) / sigma^2 ),

with K_n = sigma^2 I + K_ff and Q_n = sigma^2 I + Q_ff, evaluated here via
Cholesky log-determinants and triangular solves on the rank-m factor of Q_ff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError
from .gp import VARIATIONAL, Dataset, GaussianPredictive
from .kernels import KernelSpec, OperatorEigensystem, as_points, cross_gram, gram_matrix
from .linalg import chol_logdet, chol_solve, jittered_cholesky, solve_lower
from .spectral import top_m

# Nystrom matrices above this size stay in factored (n x m) form.
MATERIALIZE_LIMIT = 2000

_RANK_TOL = 1e-14
_KL_FLOOR = -1e-8

MATRIX = "matrix"
OPERATOR = "operator"


@dataclass
class InducingSet:
    """Covariance structure induced by a choice of m inducing variables.

    ``k_uu`` is diagonal for both constructions; ``q_factor`` is the n x m
    matrix F with F F^T = Q_ff = K_fu K_uu^-1 K_uf.  ``q_ff`` is materialized
    at construction for n <= MATERIALIZE_LIMIT and kept in factored form
    above that (``nystrom()`` materializes on demand either way).  ``basis``
    holds the Gram eigenvectors (matrix method); ``eigensystem`` the operator
    eigensystem (operator method); both are needed for out-of-sample
    cross-covariances.  ``k_ff`` keeps a reference to the training Gram
    matrix when available.
    """

    method: str
    m: int
    k_uu: np.ndarray
    k_fu: np.ndarray
    xs: np.ndarray | None = None
    basis: np.ndarray | None = None
    eigensystem: OperatorEigensystem | None = None
    k_ff: np.ndarray | None = None
    q_ff: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.q_ff is None and self.n <= MATERIALIZE_LIMIT:
            self.nystrom()

    @property
    def n(self) -> int:
        return self.k_fu.shape[0]

    @property
    def q_factor(self) -> np.ndarray:
        """F with F F^T = Q_ff (k_uu is diagonal, so this is a rescaling)."""
        d = np.sqrt(np.diag(self.k_uu))
        return self.k_fu / d[None, :]

    def nystrom(self) -> np.ndarray:
        """Materialized Q_ff (cached)."""
        if self.q_ff is None:
            F = self.q_factor
            self.q_ff = F @ F.T
        return self.q_ff

    def cross_cov(self, spec: KernelSpec, pts) -> np.ndarray:
        """K_xu at new points: cov(f(x), u_j) for each grid point x.

        Matrix method: cov(f(x), v_j^T f) = sum_i v_j^i k(x, x_i).
        Operator method: cov(f(x), u_j) = lambda_j phi_j(x).
        """
        pts = as_points(pts, spec.dim)
        if self.method == MATRIX:
            if self.xs is None:
                raise ValueError(
                    "matrix-method inducing set was built without training "
                    "points; out-of-sample prediction is unavailable"
                )
            return cross_gram(spec, pts, self.xs) @ self.basis
        lam = np.diag(self.k_uu)
        phi = self.eigensystem.feature_matrix(pts, self.m)
        return phi * lam[None, :]


@dataclass
class VariationalParams:
    """Gaussian variational distribution over the inducing vector."""

    mean: np.ndarray
    cov: np.ndarray


def _check_rank(values: np.ndarray, label: str) -> None:
    if values[-1] <= _RANK_TOL * values[0]:
        usable = max(1, int(np.sum(values > _RANK_TOL * values[0])))
        raise ConditioningError(
            f"{label} is numerically rank deficient at m = {len(values)}; "
            f"largest usable m is {usable}"
        )


def inducing_from_matrix(k_ff: np.ndarray, m: int, xs=None) -> InducingSet:
    """Inducing variables from the m leading eigenpairs of the Gram matrix."""
    k_ff = np.asarray(k_ff, dtype=float)
    n = k_ff.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    dec = top_m(k_ff, m)
    _check_rank(dec.eigenvalues, "Gram eigenvalue sequence")
    mu = dec.eigenvalues
    V = dec.eigenvectors
    return InducingSet(
        method=MATRIX,
        m=m,
        k_uu=np.diag(mu),
        k_fu=V * mu[None, :],
        xs=None if xs is None else as_points(xs),
        basis=V,
        k_ff=k_ff,
    )


def inducing_from_operator(
    eigsys: OperatorEigensystem, xs, m: int, k_ff: np.ndarray | None = None
) -> InducingSet:
    """Inducing variables from the m leading operator eigenfunctions."""
    if not 1 <= m <= eigsys.count:
        raise ValueError(f"m must be in [1, {eigsys.count}], got {m}")
    lam = eigsys.eigenvalues(m)
    _check_rank(lam, "operator eigenvalue sequence")
    xs = as_points(xs)
    phi = eigsys.feature_matrix(xs, m)
    return InducingSet(
        method=OPERATOR,
        m=m,
        k_uu=np.diag(lam),
        k_fu=phi * lam[None, :],
        xs=xs,
        eigensystem=eigsys,
        k_ff=k_ff,
    )


def optimal_variational_params(ind: InducingSet, data: Dataset) -> VariationalParams:
    """The KL-optimal Gaussian distribution over the inducing vector."""
    sigma2 = data.noise_sd**2
    k_uu = ind.k_uu
    M = k_uu + ind.k_fu.T @ ind.k_fu / sigma2
    L = jittered_cholesky(M)
    half = solve_lower(L, k_uu)             # L^-1 K_uu
    cov = half.T @ half                     # K_uu M^-1 K_uu
    rhs = solve_lower(L, ind.k_fu.T @ data.ys / sigma2)
    mean = half.T @ rhs                     # K_uu M^-1 K_uf y / sigma^2
    return VariationalParams(mean=mean, cov=cov)


def variational_predictive(
    ind: InducingSet, params: VariationalParams, spec: KernelSpec, grid
) -> GaussianPredictive:
    """Predictive law of the variational posterior on a query grid:

        mean(x)   = K_xu K_uu^-1 mu'
        cov(x, y) = k(x, y) - K_xu K_uu^-1 (K_uu - Sigma') K_uu^-1 K_uy.
    """
    grid = as_points(grid, spec.dim)
    if grid.shape[0] == 0:
        raise ValueError("query grid is empty")
    K_xu = ind.cross_cov(spec, grid)
    L_uu = jittered_cholesky(ind.k_uu)
    W = solve_lower(L_uu, K_xu.T)           # L^-1 K_ux, shape (m, g)
    mean = W.T @ solve_lower(L_uu, params.mean)
    K_xx = gram_matrix(spec, grid)
    # K_xu K_uu^-1 K_ux
    nystrom_part = W.T @ W
    # K_xu K_uu^-1 Sigma' K_uu^-1 K_ux
    inner = solve_lower(L_uu, solve_lower(L_uu, params.cov).T)
    smoothed = W.T @ inner @ W
    cov = K_xx - nystrom_part + smoothed
    return GaussianPredictive(grid, mean, cov, VARIATIONAL)


def variational_mean(
    ind: InducingSet, params: VariationalParams, spec: KernelSpec, pts
) -> np.ndarray:
    """Variational posterior mean K_xu K_uu^-1 mu' at arbitrary points,
    without forming the predictive covariance."""
    K_xu = ind.cross_cov(spec, pts)
    L_uu = jittered_cholesky(ind.k_uu)
    return K_xu @ chol_solve(L_uu, params.mean)


def kl_variational_to_posterior(
    ind: InducingSet, data: Dataset, k_ff: np.ndarray | None = None
) -> float:
    """Exact KL divergence from the optimal variational posterior to the
    true posterior (a nonnegative scalar, clamped at zero from below).

    The Gram matrix K_ff is taken from ``ind`` when it was recorded at
    construction; pass it explicitly otherwise.
    """
    if k_ff is None:
        k_ff = ind.k_ff
    if k_ff is None:
        raise ValueError("K_ff is required: pass k_ff or build the inducing "
                         "set with it attached")
    sigma2 = data.noise_sd**2
    n = data.n
    y = data.ys

    L_k = jittered_cholesky(k_ff + sigma2 * np.eye(n))
    logdet_kn = chol_logdet(L_k)
    y_kn = solve_lower(L_k, y)
    quad_k = float(y_kn @ y_kn)

    F = ind.q_factor
    B = np.eye(ind.m) + F.T @ F / sigma2
    L_b = jittered_cholesky(B)
    logdet_qn = n * np.log(sigma2) + chol_logdet(L_b)
    fy = solve_lower(L_b, F.T @ y)
    quad_q = (y @ y - fy @ fy / sigma2) / sigma2

    trace_term = (float(np.trace(k_ff)) - float(np.sum(F * F))) / sigma2
    kl = 0.5 * (quad_q - quad_k + logdet_qn - logdet_kn + trace_term)
    if kl < _KL_FLOOR:
        raise ConditioningError(f"KL evaluated to {kl:.3e}, below the clamp floor")
    return max(kl, 0.0)
