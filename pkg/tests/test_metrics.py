"""Quadrature rules, Hellinger and L2 distances, band summaries."""

import math

import numpy as np
import pytest

from eigengp import (
    band_summary,
    gaussian_rule,
    hellinger,
    l2_distance,
    mc_rule,
    uniform_rule,
)
from eigengp.gp import CredibleBand
from eigengp.kernels import CENTERED_GAUSSIAN, InputMeasure


def const(c):
    return lambda pts: np.full(pts.shape[0], float(c))


def coord(pts):
    return pts[:, 0]


class TestQuadratureRules:
    def test_weights_sum_to_one(self):
        assert uniform_rule().weights.sum() == pytest.approx(1.0, abs=1e-10)
        assert gaussian_rule().weights.sum() == pytest.approx(1.0, abs=1e-10)

    def test_uniform_polynomial_exactness(self):
        """512-node Gauss-Legendre integrates x^k on [0, 1] for k <= 1023."""
        rule = uniform_rule()
        x = rule.nodes[:, 0]
        for k in (0, 1, 2, 3, 10, 100, 511, 1023):
            got = rule.integrate(x**k)
            assert got == pytest.approx(1.0 / (k + 1), abs=1e-12)

    def test_gaussian_moments(self):
        """E t^(2k) = (2k-1)!! under N(0, 1)."""
        rule = gaussian_rule(variance=1.0)
        t = rule.nodes[:, 0]
        expected = 1.0
        for k in range(1, 11):
            expected *= 2 * k - 1
            got = rule.integrate(t ** (2 * k))
            assert got == pytest.approx(expected, rel=1e-10)

    def test_gauss_hermite_high_degree_exactness(self):
        """256 nodes integrate Hermite products up to degree 511: the
        normalized Hermite functions of degrees 254, 255 are orthonormal
        under the rule."""
        t, w = np.polynomial.hermite.hermgauss(256)
        sq = np.sqrt(w)
        g_prev = sq.copy()                      # sqrt(w) h_0
        g = t * math.sqrt(2.0) * sq             # sqrt(w) h_1
        for k in range(1, 255):
            g, g_prev = (
                t * math.sqrt(2.0 / (k + 1)) * g - math.sqrt(k / (k + 1.0)) * g_prev,
                g,
            )
        # g is sqrt(w) h_255, g_prev is sqrt(w) h_254
        root_pi = math.sqrt(math.pi)
        assert float(g @ g) / root_pi == pytest.approx(1.0, rel=1e-10)
        assert float(g_prev @ g_prev) / root_pi == pytest.approx(1.0, rel=1e-10)
        assert abs(float(g @ g_prev)) / root_pi <= 1e-10

    def test_mc_fallback_dimension(self):
        rule = mc_rule(InputMeasure(CENTERED_GAUSSIAN, 1.0), dim=2, n_nodes=5000, seed=1)
        assert rule.nodes.shape == (5000, 2)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)


class TestHellinger:
    def test_identical_functions(self):
        rule = uniform_rule()
        assert hellinger(coord, coord, 0.5, rule) == 0.0

    def test_constant_shift_closed_form(self):
        """f1 - f2 = c gives sqrt(1 - exp(-c^2 / (8 sigma^2)))."""
        rule = uniform_rule()
        c = sigma = 1.0
        expected = math.sqrt(1.0 - math.exp(-(c**2) / (8.0 * sigma**2)))
        got = hellinger(const(c), const(0.0), sigma, rule)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_symmetry_and_unit_bound(self):
        rule = uniform_rule()
        rng = np.random.default_rng(0)
        for _ in range(5):
            a, b, freq = rng.uniform(0.5, 3.0, 3)
            f1 = lambda p: a * np.sin(freq * p[:, 0])
            f2 = lambda p: b * p[:, 0] ** 2
            d12 = hellinger(f1, f2, 0.3, rule)
            d21 = hellinger(f2, f1, 0.3, rule)
            assert d12 == pytest.approx(d21, rel=1e-14)
            assert 0.0 <= d12 <= 1.0

    def test_quadrature_matches_monte_carlo(self):
        """Squared distance within three standard errors of a 1e6-sample
        Monte Carlo average, for random function pairs."""
        rule = uniform_rule()
        rng = np.random.default_rng(123)
        sigma = 0.4
        for _ in range(10):
            a, b = rng.uniform(0.3, 2.0, 2)
            freq = rng.uniform(1.0, 8.0)
            f1 = lambda p: a * np.sin(freq * p[:, 0])
            f2 = lambda p: b * (p[:, 0] - 0.5)
            x = rng.random((1_000_000, 1))
            vals = 1.0 - np.exp(-((f1(x) - f2(x)) ** 2) / (8 * sigma**2))
            mc_mean = vals.mean()
            mc_stderr = vals.std(ddof=1) / math.sqrt(len(vals))
            quad_sq = hellinger(f1, f2, sigma, rule) ** 2
            assert abs(quad_sq - mc_mean) <= 3 * mc_stderr


class TestL2Distance:
    def test_identical(self):
        assert l2_distance(coord, coord, uniform_rule()) == 0.0

    def test_constant_difference(self):
        c = 0.7
        assert l2_distance(const(c), const(0.0), uniform_rule()) == pytest.approx(
            c, rel=1e-12
        )

    def test_hellinger_bounded_by_l2(self):
        """1 - e^-u <= u gives d_H <= ||f1 - f2|| / (sqrt(8) sigma)."""
        rule = uniform_rule()
        rng = np.random.default_rng(7)
        sigma = 0.35
        for _ in range(10):
            a, freq = rng.uniform(0.2, 3.0, 2)
            f1 = lambda p: a * np.cos(freq * p[:, 0])
            f2 = const(rng.uniform(-1, 1))
            dh = hellinger(f1, f2, sigma, rule)
            dl2 = l2_distance(f1, f2, rule)
            assert dh <= dl2 / (math.sqrt(8.0) * sigma) + 1e-12


class TestBandSummary:
    def test_zero_width_band_at_truth(self):
        grid = np.linspace(0, 1, 20)[:, None]
        truth = coord
        values = truth(grid)
        band = CredibleBand(values.copy(), values.copy(), 0.95)
        summary = band_summary(band, truth, grid)
        assert summary.coverage == 1.0
        assert summary.mean_width == 0.0

    def test_shifted_band_misses_truth(self):
        grid = np.linspace(0, 1, 20)[:, None]
        values = coord(grid)
        band = CredibleBand(values + 1.0, values + 2.0, 0.95)
        summary = band_summary(band, coord, grid)
        assert summary.coverage == 0.0
        assert summary.mean_width == pytest.approx(1.0)

    def test_partial_coverage(self):
        grid = np.linspace(0, 1, 10)[:, None]
        lower = np.full(10, -0.5)
        upper = np.full(10, 0.5)
        band = CredibleBand(lower, upper, 0.95)
        summary = band_summary(band, coord, grid)
        assert 0.0 < summary.coverage < 1.0
