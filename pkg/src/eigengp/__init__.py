"""Sparse variational GP regression with spectrally constructed inducing variables."""

from .bessel import bessel_k
from .errors import (
    ConditioningError,
    ConfigError,
    FactorizationError,
    NumericalError,
    UnsupportedKernelError,
)
from .gp import (
    CredibleBand,
    Dataset,
    GaussianPredictive,
    credible_band,
    exact_posterior,
)
from .kernels import (
    InputMeasure,
    KernelSpec,
    OperatorEigensystem,
    cross_gram,
    gram_matrix,
    kernel_diag,
    kernel_eval,
    operator_eigensystem,
)
from .metrics import (
    BandSummary,
    QuadratureRule,
    band_summary,
    gaussian_rule,
    hellinger,
    l2_distance,
    mc_rule,
    uniform_rule,
)
from .spectral import SpectralDecomposition, eig_symmetric, top_m
from .svgp import (
    InducingSet,
    VariationalParams,
    inducing_from_matrix,
    inducing_from_operator,
    kl_variational_to_posterior,
    optimal_variational_params,
    variational_mean,
    variational_predictive,
)
from .theory import (
    BoundEstimate,
    OrthonormalityCheck,
    RateFit,
    TailBoundCheck,
    check_eigenvalue_tail_bound,
    empirical_orthonormality,
    estimate_expected_reduction,
    fit_rate,
    reduction_grid,
)

__version__ = "0.1.0"
