"""Covariance kernels, their Gram matrices, and closed-form operator eigensystems.

Three kernel families are supported:

* Matern with smoothness alpha and length scale ell, normalized so that
  k(x, x) = 1:  k(r) = (2^(1-alpha)/Gamma(alpha)) (sqrt(2 alpha) r/ell)^alpha
  K_alpha(sqrt(2 alpha) r/ell).
* Squared exponential with length scale b:  k(x, y) = exp(-|x-y|^2 / b^2).
* Random series on [0, 1]^d:  k(x, y) = sum_{j<=J} j^(-1-2 alpha/d)
  phi_j(x) phi_j(y) over a uniformly bounded cosine basis.

Each kernel carries the sampling distribution of the design points
(``input_measure``), since the operator eigensystem and all expected-value
diagnostics are defined relative to it.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .bessel import bessel_k
from .errors import UnsupportedKernelError

MATERN = "Matern"
SQUARED_EXPONENTIAL = "SquaredExponential"
RANDOM_SERIES = "RandomSeries"

UNIFORM_UNIT_CUBE = "UniformUnitCube"
CENTERED_GAUSSIAN = "CenteredGaussian"

# Largest feature-block kept in memory when accumulating series Gram matrices.
_SERIES_BLOCK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class InputMeasure:
    """Distribution G of the design points: uniform on [0,1]^d or N(0, variance)^d."""

    kind: str = UNIFORM_UNIT_CUBE
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in (UNIFORM_UNIT_CUBE, CENTERED_GAUSSIAN):
            raise ValueError(f"unknown input measure {self.kind!r}")
        if self.kind == CENTERED_GAUSSIAN and self.variance <= 0:
            raise ValueError("Gaussian input measure needs positive variance")

    def sample(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        if self.kind == UNIFORM_UNIT_CUBE:
            return rng.random((n, dim))
        return rng.normal(0.0, math.sqrt(self.variance), size=(n, dim))


def default_series_truncation(alpha: float, dim: int) -> int:
    """Truncation level keeping the neglected trace below 1e-8 of the total."""
    return max(100_000, math.ceil((2.0 * alpha / dim * 1e8) ** (dim / (2.0 * alpha))))


@dataclass(frozen=True)
class KernelSpec:
    """A positive-definite covariance kernel with its input distribution.

    Parameters
    ----------
    kind : one of MATERN, SQUARED_EXPONENTIAL, RANDOM_SERIES.
    alpha : smoothness (Matern order, or series decay exponent).
    length_scale : ell for Matern, b for squared exponential.
    dim : input dimension d.
    series_truncation : number of series terms J (random series only);
        defaults to `default_series_truncation`.
    basis : series basis family; only "Cosine" is implemented.
    input_measure : distribution of the design points.
    """

    kind: str
    alpha: float
    length_scale: float = 1.0
    dim: int = 1
    series_truncation: int | None = None
    basis: str = "Cosine"
    input_measure: InputMeasure = field(default_factory=InputMeasure)

    def __post_init__(self):
        if self.kind not in (MATERN, SQUARED_EXPONENTIAL, RANDOM_SERIES):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.kind == RANDOM_SERIES:
            if self.basis != "Cosine":
                raise ValueError(f"unsupported series basis {self.basis!r}")
            if self.series_truncation is None:
                object.__setattr__(
                    self,
                    "series_truncation",
                    default_series_truncation(self.alpha, self.dim),
                )
            if self.series_truncation < 1:
                raise ValueError("series_truncation must be >= 1")

    def with_truncation(self, J: int) -> "KernelSpec":
        return replace(self, series_truncation=J)

    def to_json(self) -> str:
        measure: dict = {"kind": self.input_measure.kind}
        if self.input_measure.kind == CENTERED_GAUSSIAN:
            measure["variance"] = self.input_measure.variance
        return json.dumps(
            {
                "kind": self.kind,
                "alpha": self.alpha,
                "length_scale": self.length_scale,
                "dim": self.dim,
                "J": self.series_truncation,
                "basis": self.basis if self.kind == RANDOM_SERIES else None,
                "input_measure": measure,
            }
        )

    @staticmethod
    def from_json(text: str) -> "KernelSpec":
        raw = json.loads(text)
        measure_raw = raw.get("input_measure", {"kind": UNIFORM_UNIT_CUBE})
        measure = InputMeasure(
            kind=measure_raw["kind"],
            variance=measure_raw.get("variance", 1.0),
        )
        return KernelSpec(
            kind=raw["kind"],
            alpha=raw["alpha"],
            length_scale=raw.get("length_scale", 1.0),
            dim=raw.get("dim", 1),
            series_truncation=raw.get("J"),
            basis=raw.get("basis") or "Cosine",
            input_measure=measure,
        )


def as_points(xs, dim: int | None = None) -> np.ndarray:
    """Promote an array of points to shape (n, d)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.ndim != 2:
        raise ValueError("points must form a 1-D or 2-D array")
    if dim is not None and xs.shape[1] != dim:
        raise ValueError(f"points have dimension {xs.shape[1]}, expected {dim}")
    return xs


# --------------------------------------------------------------------------
# isotropic profiles
# --------------------------------------------------------------------------


def _matern_profile(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    alpha = spec.alpha
    z = (math.sqrt(2.0 * alpha) / spec.length_scale) * r
    out = np.ones_like(z)
    # exp(-z) underflows past ~745, so the kernel is an exact double zero
    # there; cutting off avoids inf * 0 in the polynomial prefactor.
    inner = (z > 0) & (z <= 700.0)
    out[z > 700.0] = 0.0
    if inner.any():
        zp = z[inner]
        c1 = 2.0 ** (1.0 - alpha) / math.gamma(alpha)
        out[inner] = c1 * zp**alpha * bessel_k(alpha, zp)
    return out


def _sqexp_profile(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    return np.exp(-((r / spec.length_scale) ** 2))


# --------------------------------------------------------------------------
# series basis
# --------------------------------------------------------------------------


def _cosine_1d(indices: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Columns phi_j(t) for 1-based indices: phi_1 = 1, phi_j = sqrt2 cos((j-1) pi t)."""
    out = np.empty((t.size, indices.size))
    first = indices == 1
    if first.any():
        out[:, first] = 1.0
    rest = ~first
    if rest.any():
        freq = (indices[rest] - 1).astype(float)
        out[:, rest] = math.sqrt(2.0) * np.cos(np.pi * t[:, None] * freq[None, :])
    return out


def _graded_multi_indices(dim: int, count: int) -> np.ndarray:
    """First `count` multi-indices in N^dim, graded by total degree then lex."""
    rows = []
    total = dim
    while len(rows) < count:
        for combo in itertools.combinations(range(1, total), dim - 1):
            cuts = (0,) + combo + (total,)
            rows.append([cuts[i + 1] - cuts[i] for i in range(dim)])
            if len(rows) == count:
                break
        total += 1
    return np.asarray(rows, dtype=int)


class _SeriesBasis:
    """Tensorized cosine basis on [0,1]^d with a fixed graded enumeration."""

    def __init__(self, dim: int, count: int):
        self.dim = dim
        self.count = count
        if dim > 1:
            self._indices = _graded_multi_indices(dim, count)

    def columns(self, pts: np.ndarray, js: np.ndarray) -> np.ndarray:
        """Matrix of phi_j(x_i) for the 1-based indices in `js`."""
        if self.dim == 1:
            return _cosine_1d(js, pts[:, 0])
        cols = np.ones((pts.shape[0], js.size))
        idx = self._indices[js - 1]
        for axis in range(self.dim):
            cols *= _cosine_1d(idx[:, axis], pts[:, axis])
        return cols

    @property
    def sup_bound(self) -> float:
        return math.sqrt(2.0) ** self.dim


def series_eigenvalues(spec: KernelSpec, js: np.ndarray) -> np.ndarray:
    return js.astype(float) ** (-1.0 - 2.0 * spec.alpha / spec.dim)


def _series_basis(spec: KernelSpec) -> _SeriesBasis:
    return _SeriesBasis(spec.dim, spec.series_truncation)


def _series_accumulate(
    spec: KernelSpec, xs: np.ndarray, ys: np.ndarray | None
) -> np.ndarray:
    """sum_j lambda_j phi_j(xs) phi_j(ys)^T, accumulated in j-blocks."""
    basis = _series_basis(spec)
    J = spec.series_truncation
    n = xs.shape[0]
    m = n if ys is None else ys.shape[0]
    block = max(1, _SERIES_BLOCK_ENTRIES // max(n, m))
    out = np.zeros((n, m))
    for start in range(1, J + 1, block):
        js = np.arange(start, min(start + block, J + 1))
        lam = series_eigenvalues(spec, js)
        phi_x = basis.columns(xs, js)
        phi_y = phi_x if ys is None else basis.columns(ys, js)
        out += (phi_x * lam[None, :]) @ phi_y.T
    return out


# --------------------------------------------------------------------------
# public kernel evaluation
# --------------------------------------------------------------------------


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for a single pair of points."""
    xp = as_points(np.atleast_1d(x), spec.dim)
    yp = as_points(np.atleast_1d(y), spec.dim)
    if spec.kind == RANDOM_SERIES:
        return float(_series_accumulate(spec, xp, yp)[0, 0])
    r = np.array([np.linalg.norm(xp[0] - yp[0])])
    if spec.kind == MATERN:
        return float(_matern_profile(spec, r)[0])
    return float(_sqexp_profile(spec, r)[0])


def gram_matrix(spec: KernelSpec, xs) -> np.ndarray:
    """Symmetric Gram matrix [k(x_i, x_j)].

    Isotropic kernels are evaluated on the condensed pairwise distances,
    so the result is exactly symmetric by construction.
    """
    xs = as_points(xs, spec.dim)
    if spec.kind == RANDOM_SERIES:
        K = _series_accumulate(spec, xs, None)
        return 0.5 * (K + K.T)
    n = xs.shape[0]
    profile = _matern_profile if spec.kind == MATERN else _sqexp_profile
    if n == 1:
        return profile(spec, np.zeros((1, 1)))
    K = squareform(profile(spec, pdist(xs)))
    np.fill_diagonal(K, profile(spec, np.zeros(1))[0])
    return K


def cross_gram(spec: KernelSpec, xs, ys) -> np.ndarray:
    """Rectangular covariance matrix [k(x_i, y_j)]."""
    xs = as_points(xs, spec.dim)
    ys = as_points(ys, spec.dim)
    if spec.kind == RANDOM_SERIES:
        return _series_accumulate(spec, xs, ys)
    r = cdist(xs, ys)
    profile = _matern_profile if spec.kind == MATERN else _sqexp_profile
    return profile(spec, r)


def kernel_diag(spec: KernelSpec, xs) -> np.ndarray:
    """Vector of k(x_i, x_i) without forming the Gram matrix."""
    xs = as_points(xs, spec.dim)
    if spec.kind == RANDOM_SERIES:
        basis = _series_basis(spec)
        J = spec.series_truncation
        block = max(1, _SERIES_BLOCK_ENTRIES // xs.shape[0])
        out = np.zeros(xs.shape[0])
        for start in range(1, J + 1, block):
            js = np.arange(start, min(start + block, J + 1))
            lam = series_eigenvalues(spec, js)
            out += (basis.columns(xs, js) ** 2 * lam[None, :]).sum(axis=1)
        return out
    return np.ones(xs.shape[0])


# --------------------------------------------------------------------------
# operator eigensystems
# --------------------------------------------------------------------------


class OperatorEigensystem:
    """Eigenpairs (lambda_j, phi_j) of the covariance operator against G.

    ``eigenvalue_fn`` maps a 1-based index array to eigenvalues, and
    ``eigenfunction_fn`` maps (j, points) to the values of phi_j.  ``count``
    is the number of numerically usable pairs.
    """

    def __init__(
        self,
        count: int,
        eigenvalue_fn: Callable[[np.ndarray], np.ndarray],
        eigenfunction_fn: Callable[[int, np.ndarray], np.ndarray],
        sup_bound: float | None = None,
    ):
        self.count = count
        self._eigenvalue_fn = eigenvalue_fn
        self._eigenfunction_fn = eigenfunction_fn
        self.sup_bound = sup_bound

    def eigenvalues(self, m: int) -> np.ndarray:
        """The m largest eigenvalues, in decreasing order."""
        if not 1 <= m <= self.count:
            raise ValueError(f"m must be in [1, {self.count}], got {m}")
        return self._eigenvalue_fn(np.arange(1, m + 1))

    def eigenvalue_tail(self, j0: int, upto: int | None = None) -> float:
        """sum_{j >= j0} lambda_j, truncated at `upto` (defaults to count)."""
        hi = self.count if upto is None else min(upto, self.count)
        if j0 > hi:
            return 0.0
        js = np.arange(j0, hi + 1)
        return float(self._eigenvalue_fn(js).sum())

    def eigenfunction(self, j: int, pts) -> np.ndarray:
        if not 1 <= j <= self.count:
            raise ValueError(f"index must be in [1, {self.count}], got {j}")
        return self._eigenfunction_fn(j, np.asarray(pts, dtype=float))

    def feature_matrix(self, pts, m: int) -> np.ndarray:
        """Matrix [phi_j(x_i)] with columns j = 1..m."""
        pts = np.asarray(pts, dtype=float)
        return np.column_stack([self.eigenfunction(j, pts) for j in range(1, m + 1)])


def _hermite_eigensystem(spec: KernelSpec) -> OperatorEigensystem:
    """Closed-form eigensystem of the squared exponential kernel against
    G = N(0, v), via the Hermite-function expansion.

    With density p(x) proportional to exp(-2 a x^2) (a = 1/(4v)) and kernel
    exponent 1/b^2, the eigenvalues are sqrt(2a/A) (1/(A b^2))^(j-1) with
    A = a + b^-2 + sqrt(a^2 + 2 a b^-2).  Eigenfunctions are normalized
    Hermite polynomials times a Gaussian envelope; their correctness is
    pinned down by the numerically checked integral eigen-equation.
    """
    if spec.dim != 1:
        raise UnsupportedKernelError(
            "squared exponential eigensystem is implemented for dim = 1 only"
        )
    a = 1.0 / (4.0 * spec.input_measure.variance)
    b_inv2 = 1.0 / spec.length_scale**2
    c = math.sqrt(a * a + 2.0 * a * b_inv2)
    A = a + b_inv2 + c
    ratio = 1.0 / (A * spec.length_scale**2)
    lead = math.sqrt(2.0 * a / A)

    # usable count: stop before the geometric decay underflows
    count = min(100_000, int(1 - 690.0 / math.log(ratio)))

    def eigenvalue_fn(js: np.ndarray) -> np.ndarray:
        return lead * ratio ** (js.astype(float) - 1.0)

    norm = (c / a) ** 0.25
    scale = math.sqrt(2.0 * c)

    def eigenfunction_fn(j: int, pts: np.ndarray) -> np.ndarray:
        pts = as_points(pts, 1)[:, 0]
        u = scale * pts
        k = j - 1
        # normalized Hermite recurrence: h_{k+1} = u sqrt(2/(k+1)) h_k
        #                                          - sqrt(k/(k+1)) h_{k-1}
        h_prev = np.ones_like(u)
        if k == 0:
            h = h_prev
        else:
            h = math.sqrt(2.0) * u
            for i in range(1, k):
                h, h_prev = (
                    u * math.sqrt(2.0 / (i + 1)) * h
                    - math.sqrt(i / (i + 1.0)) * h_prev,
                    h,
                )
        return norm * h * np.exp(-(c - a) * pts * pts)

    return OperatorEigensystem(count, eigenvalue_fn, eigenfunction_fn)


def _series_eigensystem(spec: KernelSpec) -> OperatorEigensystem:
    basis = _series_basis(spec)

    def eigenvalue_fn(js: np.ndarray) -> np.ndarray:
        return series_eigenvalues(spec, js)

    def eigenfunction_fn(j: int, pts: np.ndarray) -> np.ndarray:
        pts = as_points(pts, spec.dim)
        return basis.columns(pts, np.array([j]))[:, 0]

    return OperatorEigensystem(
        spec.series_truncation, eigenvalue_fn, eigenfunction_fn, basis.sup_bound
    )


def operator_eigensystem(spec: KernelSpec) -> OperatorEigensystem:
    """Closed-form eigensystem of the covariance operator, where one exists.

    Supported combinations: squared exponential with a centered Gaussian
    input measure, and the random series kernel with the uniform measure.
    The Matern kernel has no closed-form eigensystem.
    """
    if spec.kind == SQUARED_EXPONENTIAL:
        if spec.input_measure.kind != CENTERED_GAUSSIAN:
            raise UnsupportedKernelError(
                "squared exponential eigensystem requires a Gaussian input measure"
            )
        return _hermite_eigensystem(spec)
    if spec.kind == RANDOM_SERIES:
        if spec.input_measure.kind != UNIFORM_UNIT_CUBE:
            raise UnsupportedKernelError(
                "series eigensystem is defined against the uniform measure"
            )
        return _series_eigensystem(spec)
    raise UnsupportedKernelError(f"no closed-form eigensystem for {spec.kind}")
