"""Monte Carlo verification of the approximation bounds behind sparse GP rates.

The quality of an inducing-variable construction is measured through the
expected trace and spectral norm of K_ff - Q_ff over the draw of the design
points.  For kernels whose operator eigenvalues decay polynomially,
lambda_j ~ j^(-1-2 alpha/d), these satisfy

    E tr(K_ff - Q_ff)  <= C n m^(-2 alpha/d),
    E |K_ff - Q_ff|    <= C n m^(-1-2 alpha/d)   (matrix construction),

while geometric eigenvalue decay gives n exp(-D b m) for both.  This module
estimates the left-hand sides by simulation, attaches the matching
theoretical envelope, checks the empirical eigenvalue tail inequality

    E sum_{j >= j0} mu_j / n  <=  sum_{j >= j0} lambda_j,

measures the concentration of empirical basis inner products around
orthonormality, and fits log-log rate slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import (
    SQUARED_EXPONENTIAL,
    KernelSpec,
    OperatorEigensystem,
    gram_matrix,
    operator_eigensystem,
)
from .parallel import parallel_map
from .rngs import STREAM_DESIGN, rng_stream
from .svgp import MATRIX, OPERATOR

EXPECTED_TRACE = "ExpectedTrace"
EXPECTED_NORM = "ExpectedNorm"

# Fraction of the proven ceiling sqrt(2a) used for the geometric decay
# constant; any value strictly below the ceiling is admissible.
EXP_DECAY_FRACTION = 0.9

DEFAULT_REPLICATIONS = 100


@dataclass(frozen=True)
class BoundEstimate:
    """MC estimate of an expected reduction quantity with its envelope."""

    quantity: str
    n: int
    m: int
    mc_mean: float
    mc_stderr: float
    theoretical_bound: float
    replications: int

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("need at least two replications for a standard error")
        if self.mc_stderr < 0:
            raise ValueError("standard error cannot be negative")


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(value) against log(n)."""

    sample_sizes: np.ndarray
    values: np.ndarray
    slope: float
    slope_stderr: float


@dataclass(frozen=True)
class TailBoundCheck:
    """Empirical eigenvalue tail sum against the operator tail sum."""

    n: int
    j0: int
    lhs_mean: float
    lhs_stderr: float
    rhs: float
    holds: bool
    replications: int


@dataclass(frozen=True)
class OrthonormalityCheck:
    """Concentration of empirical basis inner products around n * delta_jk."""

    n: int
    basis_size: int
    replications: int
    deviations: np.ndarray  # per replication, normalized by sqrt(n log n)
    threshold: float
    exceedance_fraction: float
    exceedance_bound: float
    exceedance_stderr: float


def _mean_stderr(samples: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(len(samples)))
    return mean, stderr


def decay_bounds(spec: KernelSpec, n: int, m: int) -> tuple[float, float]:
    """(trace, norm) envelopes C n m^(-2a/d) and C n m^(-1-2a/d) for polynomial
    eigenvalue decay, or n exp(-D b m) for geometric decay."""
    if spec.kind == SQUARED_EXPONENTIAL:
        a = 1.0 / (4.0 * spec.input_measure.variance)
        decay = EXP_DECAY_FRACTION * math.sqrt(2.0 * a)
        envelope = n * math.exp(-decay * spec.length_scale * m)
        return envelope, envelope
    rate = 2.0 * spec.alpha / spec.dim
    trace = n * (1.0 / rate) * m ** (-rate)
    norm = n * m ** (-1.0 - rate)
    return trace, norm


def _pair_reductions_matrix(k_ff: np.ndarray, ms: list[int]) -> dict[int, tuple[float, float]]:
    """(trace, norm) of K - Q for the matrix construction at each m, from one
    eigenvalue decomposition."""
    mu = np.linalg.eigvalsh(k_ff)[::-1]
    mu = np.maximum(mu, 0.0)
    tails = np.concatenate([np.cumsum(mu[::-1])[::-1], [0.0]])
    out = {}
    for m in ms:
        norm = mu[m] if m < len(mu) else 0.0
        out[m] = (float(tails[m]), float(norm))
    return out


def _pair_reductions_operator(
    k_ff: np.ndarray, eigsys: OperatorEigensystem, xs: np.ndarray, ms: list[int]
) -> dict[int, tuple[float, float]]:
    """(trace, norm) of K - Q for the operator construction, subtracting
    rank-1 eigenfunction terms incrementally as m grows."""
    ms = sorted(ms)
    lam = eigsys.eigenvalues(ms[-1])
    phi = eigsys.feature_matrix(xs, ms[-1])
    residual = k_ff.copy()
    out = {}
    prev = 0
    for m in ms:
        block = phi[:, prev:m]
        residual -= (block * lam[prev:m][None, :]) @ block.T
        prev = m
        trace = float(np.trace(residual))
        norm = float(np.linalg.eigvalsh(residual)[-1])
        out[m] = (trace, norm)
    return out


def reduction_grid(
    spec: KernelSpec,
    method: str,
    ns: list[int],
    ms: list[int],
    reps: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
    threads: int = 1,
) -> list[BoundEstimate]:
    """Expected-reduction estimates over an (n, m) grid, sharing the sampled
    Gram matrices across the m values.  Returns trace and norm estimates
    interleaved, ordered by (n, m).  Replications run concurrently over
    `threads` workers; results do not depend on the worker count."""
    if reps < 10:
        raise ValueError("need at least 10 replications")
    if method not in (MATRIX, OPERATOR):
        raise ValueError(f"unknown method {method!r}")
    eigsys = operator_eigensystem(spec) if method == OPERATOR else None

    def one_replication(args):
        n, rep = args
        rng = rng_stream(seed, rep, STREAM_DESIGN)
        xs = spec.input_measure.sample(rng, n, spec.dim)
        k_ff = gram_matrix(spec, xs)
        if method == MATRIX:
            return _pair_reductions_matrix(k_ff, ms)
        return _pair_reductions_operator(k_ff, eigsys, xs, ms)

    estimates = []
    for n in ns:
        per_rep = parallel_map(
            one_replication, [(n, rep) for rep in range(reps)], threads=threads
        )
        traces = {m: np.array([r[m][0] for r in per_rep]) for m in ms}
        norms = {m: np.array([r[m][1] for r in per_rep]) for m in ms}
        for m in ms:
            bound_tr, bound_nm = decay_bounds(spec, n, m)
            mean, stderr = _mean_stderr(traces[m])
            estimates.append(
                BoundEstimate(EXPECTED_TRACE, n, m, mean, stderr, bound_tr, reps)
            )
            mean, stderr = _mean_stderr(norms[m])
            estimates.append(
                BoundEstimate(EXPECTED_NORM, n, m, mean, stderr, bound_nm, reps)
            )
    return estimates


def estimate_expected_reduction(
    spec: KernelSpec,
    method: str,
    n: int,
    m: int,
    reps: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
) -> tuple[BoundEstimate, BoundEstimate]:
    """MC estimates of E tr(K_ff - Q_ff) and E |K_ff - Q_ff| at one (n, m)."""
    trace_est, norm_est = reduction_grid(spec, method, [n], [m], reps, seed)
    return trace_est, norm_est


def check_eigenvalue_tail_bound(
    spec: KernelSpec,
    n: int,
    j0: int,
    reps: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
) -> TailBoundCheck:
    """Check E sum_{j>=j0} mu_j / n <= sum_{j>=j0} lambda_j at three MC
    standard errors, where mu_j are Gram eigenvalues and lambda_j operator
    eigenvalues."""
    if not 1 <= j0 <= n:
        raise ValueError(f"j0 must be in [1, {n}]")
    eigsys = operator_eigensystem(spec)
    samples = np.empty(reps)
    for rep in range(reps):
        rng = rng_stream(seed, rep, STREAM_DESIGN)
        xs = spec.input_measure.sample(rng, n, spec.dim)
        mu = np.linalg.eigvalsh(gram_matrix(spec, xs))[::-1]
        samples[rep] = float(np.sum(mu[j0 - 1 :])) / n
    lhs_mean, lhs_stderr = _mean_stderr(samples)
    rhs = eigsys.eigenvalue_tail(j0)
    return TailBoundCheck(
        n=n,
        j0=j0,
        lhs_mean=lhs_mean,
        lhs_stderr=lhs_stderr,
        rhs=rhs,
        holds=lhs_mean <= rhs + 3.0 * lhs_stderr,
        replications=reps,
    )


def empirical_orthonormality(
    basis: OperatorEigensystem,
    n: int,
    M: int,
    reps: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
) -> OrthonormalityCheck:
    """Distribution of sup_{l,k <= M} |<phi_l, phi_k> - n delta_lk| over design
    draws, normalized by sqrt(n log n).

    The exceedance fraction above the threshold C = 4 C_phi^2 is reported
    together with its union-Hoeffding ceiling M^2 n^(-(C/C_phi^2)^2 / 2).
    """
    if basis.sup_bound is None:
        raise ValueError("orthonormality concentration needs a uniformly bounded basis")
    if M > basis.count:
        raise ValueError(f"basis has only {basis.count} functions")
    c_phi = basis.sup_bound
    threshold = 4.0 * c_phi**2
    scale = math.sqrt(n * math.log(n))
    deviations = np.empty(reps)
    for rep in range(reps):
        rng = rng_stream(seed, rep, STREAM_DESIGN)
        xs = rng.random((n, 1))
        phi = basis.feature_matrix(xs, M)
        gram = phi.T @ phi - n * np.eye(M)
        deviations[rep] = np.abs(gram).max() / scale
    exceed = float(np.mean(deviations >= threshold))
    bound = M**2 * n ** (-((threshold / c_phi**2) ** 2) / 2.0)
    stderr = math.sqrt(exceed * (1.0 - exceed) / reps)
    return OrthonormalityCheck(
        n=n,
        basis_size=M,
        replications=reps,
        deviations=deviations,
        threshold=threshold,
        exceedance_fraction=exceed,
        exceedance_bound=bound,
        exceedance_stderr=stderr,
    )


def fit_rate(ns, values) -> RateFit:
    """Least-squares slope of log(value) on log(n), with its standard error."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.ndim != 1:
        raise ValueError("sample sizes and values must be 1-D of equal length")
    if len(ns) < 3:
        raise ValueError("need at least three points to fit a rate")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise ValueError("rate fits need positive sizes and values")
    x = np.log(ns)
    y = np.log(values)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("sample sizes are all equal")
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = len(ns) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    return RateFit(ns, values, slope, math.sqrt(sigma2 / sxx))
