"""Distances between regression functions and credible-band diagnostics.

The Hellinger distance between the observation densities of two regression
functions f1, f2 under noise level sigma is

    d_H(f1, f2)^2 = integral of 1 - exp(-(f1(x) - f2(x))^2 / (8 sigma^2)) dG(x),

estimated by fixed quadrature rules against the input measure G:
Gauss-Legendre with 512 nodes for the uniform measure on [0, 1] and
Gauss-Hermite with 256 nodes for a centered Gaussian, with a Monte Carlo
fallback in higher dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gp import CredibleBand
from .kernels import (
    CENTERED_GAUSSIAN,
    UNIFORM_UNIT_CUBE,
    InputMeasure,
    as_points,
)

GAUSS_LEGENDRE_NODES = 512
GAUSS_HERMITE_NODES = 256
MC_FALLBACK_NODES = 200_000


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (k, d) and probability weights integrating against a measure G."""

    nodes: np.ndarray
    weights: np.ndarray
    measure: InputMeasure

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


def uniform_rule(n_nodes: int = GAUSS_LEGENDRE_NODES) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] with weights summing to one."""
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    nodes = 0.5 * (t + 1.0)
    return QuadratureRule(nodes[:, None], 0.5 * w, InputMeasure(UNIFORM_UNIT_CUBE))


def gaussian_rule(variance: float = 1.0, n_nodes: int = GAUSS_HERMITE_NODES) -> QuadratureRule:
    """Gauss-Hermite rule for N(0, variance) with weights summing to one."""
    t, w = np.polynomial.hermite.hermgauss(n_nodes)
    nodes = math.sqrt(2.0 * variance) * t
    return QuadratureRule(
        nodes[:, None], w / math.sqrt(math.pi), InputMeasure(CENTERED_GAUSSIAN, variance)
    )


def mc_rule(
    measure: InputMeasure, dim: int, n_nodes: int = MC_FALLBACK_NODES, seed: int = 0
) -> QuadratureRule:
    """Equal-weight Monte Carlo rule; the fallback for dim > 1."""
    rng = np.random.default_rng(seed)
    nodes = measure.sample(rng, n_nodes, dim)
    return QuadratureRule(nodes, np.full(n_nodes, 1.0 / n_nodes), measure)


def rule_for_measure(measure: InputMeasure, dim: int = 1, seed: int = 0) -> QuadratureRule:
    if dim > 1:
        return mc_rule(measure, dim, seed=seed)
    if measure.kind == UNIFORM_UNIT_CUBE:
        return uniform_rule()
    return gaussian_rule(measure.variance)


def _eval(f, nodes: np.ndarray) -> np.ndarray:
    out = np.asarray(f(nodes), dtype=float)
    if out.shape != (nodes.shape[0],):
        raise ValueError("function must map (k, d) points to (k,) values")
    return out


def hellinger(
    f1: Callable[[np.ndarray], np.ndarray],
    f2: Callable[[np.ndarray], np.ndarray],
    sigma: float,
    rule: QuadratureRule,
) -> float:
    """Hellinger distance between the observation laws of f1 and f2."""
    d = _eval(f1, rule.nodes) - _eval(f2, rule.nodes)
    h2 = rule.integrate(1.0 - np.exp(-(d * d) / (8.0 * sigma**2)))
    return math.sqrt(max(h2, 0.0))


def l2_distance(
    f1: Callable[[np.ndarray], np.ndarray],
    f2: Callable[[np.ndarray], np.ndarray],
    rule: QuadratureRule,
) -> float:
    """L2(G) distance between two regression functions."""
    d = _eval(f1, rule.nodes) - _eval(f2, rule.nodes)
    return math.sqrt(max(rule.integrate(d * d), 0.0))


@dataclass(frozen=True)
class BandSummary:
    coverage: float
    mean_width: float


def band_summary(
    band: CredibleBand, truth: Callable[[np.ndarray], np.ndarray], grid
) -> BandSummary:
    """Fraction of grid points where the truth lies inside the band, and the
    average band width."""
    grid = as_points(grid)
    f0 = _eval(truth, grid)
    if f0.shape != band.lower.shape:
        raise ValueError("band and grid sizes disagree")
    inside = (band.lower <= f0) & (f0 <= band.upper)
    return BandSummary(float(np.mean(inside)), float(np.mean(band.widths())))
