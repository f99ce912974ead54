import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad

from pegspace.eda import GLOBAL_BOUNDS
from pegspace.stats import (
    bin_success_rate, histogram_fit, linfit, paired_t_test, special_cdf, special_sf,
)


def chi2_pdf(x, df):
    return x ** (df / 2 - 1) * math.exp(-x / 2) / (2 ** (df / 2) * math.gamma(df / 2))


def t_pdf(x, df):
    norm = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    return norm * (1 + x * x / df) ** (-(df + 1) / 2)


class TestSpecialCdf:
    def test_chi2_at_zero(self):
        assert special_cdf("chi2", 0.0, 3) == 0.0

    @pytest.mark.parametrize("df", [1, 2, 7, 30, 200])
    def test_t_at_zero(self, df):
        assert special_cdf("t", 0.0, df) == 0.5

    # frozen values from adaptive quadrature of the density
    @pytest.mark.parametrize("x,df,expected", [
        (3.841, 1, 0.9499863162360391),
        (12.5, 6, 0.9483000251641517),
        (30.0, 24, 0.8152482009760686),
    ])
    def test_chi2_frozen(self, x, df, expected):
        assert_allclose(special_cdf("chi2", x, df), expected, atol=1e-10)

    @pytest.mark.parametrize("x,df,expected", [
        (1.5, 3, 0.8847080673775884),
        (-2.2, 10, 0.026220534224676573),
        (0.7, 150, 0.7574942345735527),
    ])
    def test_t_frozen(self, x, df, expected):
        assert_allclose(special_cdf("t", x, df), expected, atol=1e-10)

    @pytest.mark.parametrize("x,df", [(0.5, 2), (4.0, 5), (20.0, 12), (150.0, 140)])
    def test_chi2_quadrature(self, x, df):
        area, _ = quad(chi2_pdf, 0, x, args=(df,), epsabs=1e-13, epsrel=1e-13, limit=200)
        assert_allclose(special_cdf("chi2", x, df), area, atol=1e-10)

    @pytest.mark.parametrize("x,df", [(0.3, 1), (-1.7, 4), (2.5, 25), (-0.9, 200)])
    def test_t_quadrature(self, x, df):
        area, _ = quad(t_pdf, 0, x, args=(df,), epsabs=1e-13, epsrel=1e-13, limit=200)
        assert_allclose(special_cdf("t", x, df), 0.5 + area, atol=1e-10)

    def test_upper_tail(self):
        assert_allclose(special_sf("chi2", 12.5, 6) + special_cdf("chi2", 12.5, 6), 1.0, atol=1e-15)
        assert_allclose(special_sf("t", 1.5, 3), 1 - 0.8847080673775884, atol=1e-12)
        assert special_sf("chi2", 0.0, 4) == 1.0
        # far tail that 1 - cdf would round to zero
        assert 0 < special_sf("chi2", 200.0, 24) < 1e-20
        assert 1 - special_cdf("chi2", 200.0, 24) == 0.0

    @pytest.mark.parametrize("kind", ["t", "chi2"])
    def test_monotone_and_bounded(self, kind):
        xs = np.linspace(-5 if kind == "t" else 0, 60, 600)
        for df in (1, 3, 10, 50, 200):
            cdf = special_cdf(kind, xs, df)
            assert np.all(np.diff(cdf) >= 0)
            assert np.all((cdf >= 0) & (cdf <= 1))

    def test_invalid(self):
        with pytest.raises(ValueError):
            special_cdf("t", 1.0, 0)
        with pytest.raises(ValueError):
            special_cdf("f", 1.0, 3)


class TestBinSuccessRate:
    def test_all_successes(self):
        X = np.random.default_rng(0).uniform(GLOBAL_BOUNDS[:, 0], GLOBAL_BOUNDS[:, 1], (200, 8))
        h = bin_success_rate((X, np.ones(200, bool)), "k_z")
        assert np.all(h.rates[~h.empty] == 100.0)

    def test_two_point_hand_case(self):
        X = np.full((2, 8), 0.5)
        X[:, 2] = [100, 900]
        h = bin_success_rate((X, np.array([False, True])), "k_z", n_bins=2)
        assert_array_equal(h.rates, [0.0, 100.0])
        assert_array_equal(h.edges, [50, 525, 1000])

    def test_counts_partition(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(GLOBAL_BOUNDS[:, 0], GLOBAL_BOUNDS[:, 1], (333, 8))
        X[0, 6] = GLOBAL_BOUNDS[6, 1]
        y = rng.random(333) < 0.3
        h = bin_success_rate((X, y), "zeta_t")
        assert h.counts.sum() == 333
        assert h.successes.sum() == y.sum()

    def test_empty_bins_flagged_and_skipped(self):
        X = np.full((6, 8), 0.5)
        X[:, 0] = [60, 70, 500, 510, 990, 995]
        h = bin_success_rate((X, np.array([0, 0, 1, 0, 1, 1], bool)), "k_x", n_bins=10)
        assert h.empty.sum() == 7
        assert np.all(np.isnan(h.rates[h.empty]))
        fit = histogram_fit(h)
        assert fit.n == 3

    def test_errors(self):
        X = np.ones((2, 8))
        with pytest.raises(ValueError):
            bin_success_rate((X, np.ones(2, bool)), "k_q")
        with pytest.raises(ValueError):
            bin_success_rate((X, np.ones(2, bool)), "k_x", n_bins=1)

    def test_independent_parameter_fit_not_significant(self):
        # success depends on k_z only, so the damping-ratio slope is null
        significant = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            X = rng.uniform(GLOBAL_BOUNDS[:, 0], GLOBAL_BOUNDS[:, 1], (2000, 8))
            y = rng.random(2000) < X[:, 2] / 1000
            significant += histogram_fit(bin_success_rate((X, y), "zeta_t")).p_value <= 0.05
        assert significant <= 10


class TestLinfit:
    def test_exact_line(self):
        x = np.arange(6.0)
        fit = linfit(x, 2 * x + 1)
        assert_allclose([fit.slope, fit.intercept, fit.r_squared], [2, 1, 1], atol=1e-12)
        assert fit.p_value < 1e-12

    def test_constant(self):
        fit = linfit(np.arange(5.0), np.full(5, 3.0))
        assert (fit.slope, fit.r_squared, fit.p_value) == (0.0, 0.0, 1.0)

    def test_noisy_against_normal_equations(self):
        x = np.arange(1.0, 9.0)
        y = np.array([2.9, 5.3, 6.8, 9.4, 10.7, 13.1, 15.2, 16.8])
        A = np.column_stack([x, np.ones(8)])
        beta = np.linalg.solve(A.T @ A, A.T @ y)
        fit = linfit(x, y)
        assert_allclose([fit.slope, fit.intercept], beta, rtol=1e-10)
        assert_allclose(fit.r_squared, 0.997182474130965, rtol=1e-10)
        assert_allclose(fit.slope, 1.98809523809524, rtol=1e-10)
        assert fit.p_value < 1e-8
        assert fit.n == 8

    def test_errors(self):
        with pytest.raises(ValueError):
            linfit([1, 2, 3], [1, 2])
        with pytest.raises(ValueError):
            linfit([1, 2], [1, 2])
        with pytest.raises(ValueError):
            linfit([2, 2, 2], [1, 2, 3])

    @given(arrays(float, st.integers(3, 30), elements=st.floats(-100, 100)),
           st.integers(0, 2**32))
    def test_residuals_orthogonal(self, x, seed):
        if np.ptp(x) < 1e-3:
            return
        y = np.random.default_rng(seed).normal(size=x.size) * 10
        fit = linfit(x, y)
        resid = y - (fit.slope * x + fit.intercept)
        scale = np.abs(x).max() * np.abs(y).max() * x.size + 1
        assert abs(resid @ x) < 1e-8 * scale
        assert abs(resid.sum()) < 1e-8 * scale
        assert 0 <= fit.r_squared <= 1 and 0 <= fit.p_value <= 1


class TestPairedT:
    def test_equal_samples(self):
        t, p = paired_t_test([1, 2, 3], [1, 2, 3])
        assert (t, p) == (0.0, 1.0)

    def test_sign_flip(self):
        a, b = [1.2, 2.3, 0.8, 1.9], [1.0, 2.6, 1.5, 2.4]
        t1, p1 = paired_t_test(a, b)
        t2, p2 = paired_t_test(b, a)
        assert t1 == -t2 and p1 == p2

    def test_five_pairs(self):
        a = np.array([1.2, 2.3, 0.8, 1.9, 2.7])
        b = np.array([1.0, 2.6, 1.5, 2.4, 2.9])
        d = a - b
        t_direct = d.mean() / (d.std(ddof=1) / math.sqrt(5))
        t, p = paired_t_test(a, b, one_sided=True)
        assert_allclose(t, t_direct, rtol=1e-12)
        assert_allclose(t, -1.978141420187361, rtol=1e-8)
        assert_allclose(p, 0.059527272030314604, rtol=1e-8)
        _, p_two = paired_t_test(a, b)
        assert_allclose(p_two, 2 * p, rtol=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [2.0])
        with pytest.raises(ValueError):
            paired_t_test([1.0, 2.0], [2.0])
