"""Config-driven simulation studies comparing exact and variational posteriors.

Three preset experiments:

* ``matern``: x ~ uniform[0, 1], truth |x - 0.4|^a - |x - 0.2|^a, Matern
  kernel of order a (defaults a = 0.6, sigma = 0.2, n = 3000), inducing
  variables from Gram eigenvectors.
* ``sqexp``: x ~ N(0, 1), truth |x + 1|^a - |x + 3/2|^a clipped outside
  [-6, 6], squared exponential kernel with n-dependent length scale
  4 n^(-1/(1+2a)) (defaults a = 0.8, sigma = 0.2, n = 5000), inducing
  variables from operator eigenfunctions.
* ``series``: random series kernel on [0, 1]; either construction.

Every study is replicated with counter-based RNG streams keyed by
(seed, replication), runs replications concurrently when asked, and writes
CSV files with full float precision so outputs are byte-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError
from .gp import Dataset, credible_band, exact_posterior
from .kernels import (
    CENTERED_GAUSSIAN,
    MATERN,
    RANDOM_SERIES,
    SQUARED_EXPONENTIAL,
    UNIFORM_UNIT_CUBE,
    InputMeasure,
    KernelSpec,
    gram_matrix,
    operator_eigensystem,
)
from .metrics import band_summary, hellinger, l2_distance, rule_for_measure
from .parallel import parallel_map
from .rngs import STREAM_DESIGN, STREAM_NOISE, rng_stream
from .svgp import (
    MATRIX,
    OPERATOR,
    inducing_from_matrix,
    inducing_from_operator,
    kl_variational_to_posterior,
    optimal_variational_params,
    variational_mean,
    variational_predictive,
)
from .theory import empirical_orthonormality, fit_rate, reduction_grid

EXPERIMENTS = ("matern", "sqexp", "series")
TRUTHS = ("benchmark", "zero")

BAND_LEVEL = 0.95

# Series studies default to a reduced truncation: the neglected tail is
# orders of magnitude below Monte Carlo noise, and Gram assembly is linear
# in the truncation level.
SERIES_STUDY_TRUNCATION = 10_000


def matern_benchmark_truth(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    """|x - 0.4|^alpha - |x - 0.2|^alpha on the first coordinate."""

    def f0(pts: np.ndarray) -> np.ndarray:
        x = np.asarray(pts, dtype=float)
        x = x[:, 0] if x.ndim == 2 else x
        return np.abs(x - 0.4) ** alpha - np.abs(x - 0.2) ** alpha

    return f0


def sqexp_benchmark_truth(alpha: float) -> Callable[[np.ndarray], np.ndarray]:
    """|x + 1|^alpha - |x + 3/2|^alpha, held constant outside [-6, 6] so the
    truth is square integrable against any input law."""

    def f0(pts: np.ndarray) -> np.ndarray:
        x = np.asarray(pts, dtype=float)
        x = x[:, 0] if x.ndim == 2 else x
        t = np.clip(x, -6.0, 6.0)
        return np.abs(t + 1.0) ** alpha - np.abs(t + 1.5) ** alpha

    return f0


def _zero_truth(pts: np.ndarray) -> np.ndarray:
    return np.zeros(np.asarray(pts).shape[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one study; unspecified fields take experiment defaults."""

    experiment: str = "matern"
    method: str | None = None
    n: int | None = None
    m: int | None = None
    alpha: float | None = None
    sigma: float | None = None
    length_scale: float | None = None
    series_truncation: int | None = None
    measure_variance: float = 1.0
    truth: str = "benchmark"
    truth_fn: Callable[[np.ndarray], np.ndarray] | None = None
    seed: int = 0
    replications: int = 1
    grid_size: int = 200
    out_dir: str | None = None
    threads: int = 1
    ns: tuple[int, ...] | None = None
    ms: tuple[int, ...] | None = None
    basis_size: int = 30
    reps_by_n: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.method is not None and self.method not in (MATRIX, OPERATOR):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.truth not in TRUTHS and self.truth_fn is None:
            raise ConfigError(f"unknown truth {self.truth!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for name in ("n", "m"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n is not None and self.m is not None and self.m > self.n:
            raise ConfigError(f"m = {self.m} exceeds n = {self.n}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")


_DEFAULTS = {
    "matern": dict(method=MATRIX, n=3000, m=40, alpha=0.6, sigma=0.2, length_scale=1.0),
    "sqexp": dict(method=OPERATOR, n=5000, m=80, alpha=0.8, sigma=0.2, length_scale=None),
    "series": dict(method=MATRIX, n=400, m=16, alpha=1.0, sigma=0.2, length_scale=1.0),
}

_CONFIG_KEYS = {
    "experiment", "method", "n", "m", "alpha", "sigma", "length_scale",
    "series_truncation", "measure_variance", "truth", "seed", "replications",
    "grid_size", "out_dir", "threads", "ns", "ms", "basis_size",
    "reps_by_n",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a validated config from parsed JSON, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    for key in ("ns", "ms"):
        if key in kwargs and kwargs[key] is not None:
            try:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key} must be a list of integers") from exc
    if "reps_by_n" in kwargs and kwargs["reps_by_n"]:
        try:
            kwargs["reps_by_n"] = {int(k): int(v) for k, v in kwargs["reps_by_n"].items()}
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError("reps_by_n must map sample sizes to counts") from exc
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Fill experiment defaults for any unset field; the default m is capped
    at the configured n."""
    defaults = _DEFAULTS[config.experiment]
    updates = {}
    for key, value in defaults.items():
        if getattr(config, key) is None:
            updates[key] = value
    if config.m is None:
        n = config.n if config.n is not None else defaults["n"]
        updates["m"] = min(defaults["m"], n)
    resolved = replace(config, **updates) if updates else config
    if resolved.experiment == "sqexp" and resolved.length_scale is None:
        b = 4.0 * resolved.n ** (-1.0 / (1.0 + 2.0 * resolved.alpha))
        resolved = replace(resolved, length_scale=b)
    if resolved.experiment == "series" and resolved.series_truncation is None:
        resolved = replace(resolved, series_truncation=SERIES_STUDY_TRUNCATION)
    return resolved


def build_kernel(config: ExperimentConfig, n: int | None = None) -> KernelSpec:
    """Kernel spec for a resolved config; `n` overrides the sample size that
    enters the squared exponential length-scale rule."""
    config = resolve(config)
    if config.experiment == "matern":
        return KernelSpec(
            MATERN,
            alpha=config.alpha,
            length_scale=config.length_scale,
            input_measure=InputMeasure(UNIFORM_UNIT_CUBE),
        )
    if config.experiment == "sqexp":
        b = config.length_scale
        if n is not None:
            b = 4.0 * n ** (-1.0 / (1.0 + 2.0 * config.alpha))
        return KernelSpec(
            SQUARED_EXPONENTIAL,
            alpha=config.alpha,
            length_scale=b,
            input_measure=InputMeasure(CENTERED_GAUSSIAN, config.measure_variance),
        )
    return KernelSpec(
        RANDOM_SERIES,
        alpha=config.alpha,
        length_scale=config.length_scale,
        series_truncation=config.series_truncation,
        input_measure=InputMeasure(UNIFORM_UNIT_CUBE),
    )


def truth_function(config: ExperimentConfig) -> Callable[[np.ndarray], np.ndarray]:
    config = resolve(config)
    if config.truth_fn is not None:
        return config.truth_fn
    if config.truth == "zero":
        return _zero_truth
    if config.experiment == "matern":
        return matern_benchmark_truth(config.alpha)
    if config.experiment == "sqexp":
        return sqexp_benchmark_truth(config.alpha)
    return _zero_truth


def simulate(config: ExperimentConfig, replication: int = 0, n: int | None = None) -> Dataset:
    """Draw one data set: x ~ G iid, y = f0(x) + sigma * N(0, 1) noise.

    Fully reproducible from (seed, replication); the design and noise come
    from separate streams.
    """
    config = resolve(config)
    n = config.n if n is None else n
    spec = build_kernel(config, n=n)
    f0 = truth_function(config)
    design_rng = rng_stream(config.seed, replication, STREAM_DESIGN)
    noise_rng = rng_stream(config.seed, replication, STREAM_NOISE)
    xs = spec.input_measure.sample(design_rng, n, spec.dim)
    ys = f0(xs) + config.sigma * noise_rng.standard_normal(n)
    return Dataset(xs=xs, ys=ys, noise_sd=config.sigma, truth=f0)


# --------------------------------------------------------------------------
# single replication fit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicationRecord:
    replication: int
    kl: float
    l2_error: float
    hellinger_error: float
    coverage: float
    mean_width: float
    seconds_exact: float
    seconds_variational: float


@dataclass(frozen=True)
class RunResult:
    """Per-replication diagnostics plus (mean, stderr) aggregates.

    Timings cover the posterior linear algebra only; the Gram matrix is
    shared by both fits and excluded from both.
    """

    config: ExperimentConfig
    records: list[ReplicationRecord]

    def aggregate(self, name: str) -> tuple[float, float]:
        values = np.array([getattr(r, name) for r in self.records], dtype=float)
        mean = float(np.mean(values))
        stderr = (
            float(np.std(values, ddof=1) / np.sqrt(len(values)))
            if len(values) > 1
            else 0.0
        )
        return mean, stderr


def _build_inducing(config, spec, data, k_ff, m=None):
    m = config.m if m is None else m
    if config.method == MATRIX:
        return inducing_from_matrix(k_ff, m, xs=data.xs)
    eigsys = operator_eigensystem(spec)
    return inducing_from_operator(eigsys, data.xs, m, k_ff=k_ff)


def fit_replication(
    config: ExperimentConfig,
    replication: int = 0,
    n: int | None = None,
    m: int | None = None,
    want_predictives: bool = False,
):
    """Fit the exact and the variational posterior on one simulated data set."""
    config = resolve(config)
    data = simulate(config, replication, n=n)
    spec = build_kernel(config, n=data.n)
    f0 = truth_function(config)
    lo, hi = float(data.xs[:, 0].min()), float(data.xs[:, 0].max())
    grid = np.linspace(lo, hi, config.grid_size)[:, None]

    k_ff = gram_matrix(spec, data.xs)

    t0 = time.perf_counter()
    exact = exact_posterior(data, spec, grid, k_ff=k_ff)
    t_exact = time.perf_counter() - t0

    t0 = time.perf_counter()
    ind = _build_inducing(config, spec, data, k_ff, m=m)
    params = optimal_variational_params(ind, data)
    variational = variational_predictive(ind, params, spec, grid)
    t_var = time.perf_counter() - t0

    kl = kl_variational_to_posterior(ind, data)

    rule = rule_for_measure(spec.input_measure, spec.dim, seed=config.seed)
    var_mean_fn = lambda pts: variational_mean(ind, params, spec, pts)
    l2 = l2_distance(var_mean_fn, f0, rule)
    hell = hellinger(var_mean_fn, f0, config.sigma, rule) if config.sigma > 0 else 0.0
    band = credible_band(variational, BAND_LEVEL)
    summary = band_summary(band, f0, grid)

    record = ReplicationRecord(
        replication=replication,
        kl=kl,
        l2_error=l2,
        hellinger_error=hell,
        coverage=summary.coverage,
        mean_width=summary.mean_width,
        seconds_exact=t_exact,
        seconds_variational=t_var,
    )
    if want_predictives:
        return record, exact, variational, data
    return record


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Replicated fits, run concurrently over `config.threads` workers."""
    config = resolve(config)
    records = parallel_map(
        lambda rep: fit_replication(config, rep),
        range(config.replications),
        threads=config.threads,
    )
    result = RunResult(config, records)
    if config.out_dir is not None:
        _write_run_result(result)
    return result


# --------------------------------------------------------------------------
# posterior curve dumps
# --------------------------------------------------------------------------

CURVE_COLUMNS = (
    "x", "f0", "exact_mean", "exact_lo", "exact_hi", "var_mean", "var_lo", "var_hi"
)


def posterior_curves(config: ExperimentConfig):
    """Exact and variational means and 95% bands on a uniform grid over the
    data range, from a single replication."""
    config = resolve(config)
    _, exact, variational, data = fit_replication(config, 0, want_predictives=True)
    f0 = truth_function(config)
    exact_band = credible_band(exact, BAND_LEVEL)
    var_band = credible_band(variational, BAND_LEVEL)
    rows = np.column_stack(
        [
            exact.grid[:, 0],
            f0(exact.grid),
            exact.mean,
            exact_band.lower,
            exact_band.upper,
            variational.mean,
            var_band.lower,
            var_band.upper,
        ]
    )
    if config.out_dir is not None:
        write_csv(Path(config.out_dir) / "curves.csv", CURVE_COLUMNS, rows)
    return rows


# --------------------------------------------------------------------------
# KL growth and contraction-rate studies
# --------------------------------------------------------------------------


def inducing_count_rule(n: int, alpha: float) -> int:
    """m = round(n^(1/(1+2 alpha))), the scaling that keeps the variational
    posterior rate optimal for a kernel of smoothness alpha in d = 1."""
    return int(round(n ** (1.0 / (1.0 + 2.0 * alpha))))


def _replicated_metric(config, n, m, reps, metric):
    values = parallel_map(
        lambda rep: getattr(fit_replication(config, rep, n=n, m=m), metric),
        range(reps),
        threads=config.threads,
    )
    arr = np.asarray(values, dtype=float)
    sd = float(np.std(arr, ddof=1)) if reps > 1 else 0.0
    return float(np.mean(arr)), sd, float(sd / np.sqrt(reps))


def kl_table(config: ExperimentConfig):
    """Mean KL divergence versus sample size with m = round(n^(1/(1+2a))).

    Returns (rows, rate) where each row is
    {n, m, reps, kl_mean, kl_sd, kl_stderr} and rate is the log-log fit of
    the mean KL against n.
    """
    config = resolve(config)
    ns = config.ns or (100, 300, 1000, 3000)
    rows = []
    for n in ns:
        m = inducing_count_rule(n, config.alpha)
        reps = config.reps_by_n.get(n, config.replications)
        kl_mean, kl_sd, kl_stderr = _replicated_metric(config, n, m, reps, "kl")
        rows.append(
            dict(n=n, m=m, reps=reps, kl_mean=kl_mean, kl_sd=kl_sd, kl_stderr=kl_stderr)
        )
    rate = (
        fit_rate([r["n"] for r in rows], [r["kl_mean"] for r in rows])
        if len(rows) >= 3
        else None
    )
    if config.out_dir is not None:
        write_csv(
            Path(config.out_dir) / "kl_table.csv",
            ("n", "m", "reps", "kl_mean", "kl_sd", "kl_stderr"),
            [[r["n"], r["m"], r["reps"], r["kl_mean"], r["kl_sd"], r["kl_stderr"]] for r in rows],
        )
    return rows, rate


def rate_study(config: ExperimentConfig):
    """Mean L2(G) error of the variational posterior mean versus sample size,
    with the same m rule as `kl_table`; returns (rows, rate fit)."""
    config = resolve(config)
    ns = config.ns or (200, 500, 1200, 3000)
    rows = []
    for n in ns:
        m = inducing_count_rule(n, config.alpha)
        reps = config.reps_by_n.get(n, config.replications)
        l2_mean, l2_sd, l2_stderr = _replicated_metric(config, n, m, reps, "l2_error")
        rows.append(
            dict(n=n, m=m, reps=reps, l2_mean=l2_mean, l2_sd=l2_sd, l2_stderr=l2_stderr)
        )
    rate = (
        fit_rate([r["n"] for r in rows], [r["l2_mean"] for r in rows])
        if len(rows) >= 3
        else None
    )
    if config.out_dir is not None:
        write_csv(
            Path(config.out_dir) / "rate_study.csv",
            ("n", "m", "reps", "l2_mean", "l2_sd", "l2_stderr"),
            [[r["n"], r["m"], r["reps"], r["l2_mean"], r["l2_sd"], r["l2_stderr"]] for r in rows],
        )
    return rows, rate


def bounds_check(config: ExperimentConfig):
    """Expected trace/norm reductions over the configured (n, m) grid."""
    config = resolve(config)
    spec = build_kernel(config)
    ns = config.ns or (100, 200, 400, 800)
    ms = config.ms or (4, 8, 16, 32)
    estimates = reduction_grid(
        spec,
        config.method,
        list(ns),
        list(ms),
        reps=config.replications,
        seed=config.seed,
        threads=config.threads,
    )
    if config.out_dir is not None:
        write_csv(
            Path(config.out_dir) / "bounds_check.csv",
            ("quantity", "n", "m", "mc_mean", "mc_stderr", "bound", "reps", "seed"),
            [
                [e.quantity, e.n, e.m, e.mc_mean, e.mc_stderr, e.theoretical_bound,
                 e.replications, config.seed]
                for e in estimates
            ],
        )
    return estimates


def orthonormality_study(config: ExperimentConfig):
    """Concentration of empirical basis inner products for the series basis."""
    config = resolve(config)
    if config.experiment != "series":
        raise ConfigError("orthonormality study needs the series experiment")
    basis = operator_eigensystem(build_kernel(config))
    check = empirical_orthonormality(
        basis, config.n, config.basis_size, reps=config.replications, seed=config.seed
    )
    if config.out_dir is not None:
        write_csv(
            Path(config.out_dir) / "orthonormality.csv",
            ("n", "M", "rep", "normalized_deviation"),
            [
                [check.n, check.basis_size, rep, dev]
                for rep, dev in enumerate(check.deviations)
            ],
        )
    return check


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows) -> Path:
    """UTF-8 CSV with a header row and 17-significant-digit floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def _write_run_result(result: RunResult) -> None:
    # Wall times stay out of the CSVs so identical configs produce
    # byte-identical files; they remain available on the records.
    out = Path(result.config.out_dir)
    write_csv(
        out / "fit_replications.csv",
        (
            "replication", "kl", "l2_error", "hellinger_error", "coverage",
            "mean_width",
        ),
        [
            [
                r.replication, r.kl, r.l2_error, r.hellinger_error, r.coverage,
                r.mean_width,
            ]
            for r in result.records
        ],
    )
    metrics = ("kl", "l2_error", "hellinger_error", "coverage", "mean_width")
    rows = []
    for name in metrics:
        mean, stderr = result.aggregate(name)
        rows.append([name, mean, stderr])
    write_csv(out / "fit_summary.csv", ("metric", "mean", "stderr"), rows)


def write_dataset_csv(path, data: Dataset) -> Path:
    header = tuple(f"x{i+1}" for i in range(data.xs.shape[1])) + ("y",)
    rows = np.column_stack([data.xs, data.ys])
    return write_csv(path, header, rows)
