import math

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import special, stats

from monodecomp.errors import InputError, SampleTooSmall, SingularDesign
from monodecomp.experiment import drop_one_regressions, ols_fit, weight_grid, welch_t_test
from monodecomp.experiment.stats import betainc, f_upper_p, t_two_sided_p

# Computed once with scipy.stats.ttest_ind(A, B, equal_var=False) and frozen.
WELCH_A = [1, 2, 3, 4, 5]
WELCH_B = [2, 3, 4, 5, 6]
WELCH_T, WELCH_DF, WELCH_P = -1.0, 8.0, 0.34659350708733416


def test_welch_frozen_values():
    res = welch_t_test(WELCH_A, WELCH_B)
    assert res.t == WELCH_T
    assert res.df == WELCH_DF
    assert res.p == pytest.approx(WELCH_P, abs=1e-12)


def test_welch_identical_and_degenerate_samples():
    res = welch_t_test([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert res.t == 0.0 and res.p == 1.0
    res = welch_t_test([3.0, 3.0], [3.0, 3.0, 3.0])
    assert res.t == 0.0 and res.p == 1.0
    res = welch_t_test([3.0, 3.0], [4.0, 4.0])
    assert res.t == -math.inf and res.p == 0.0
    with pytest.raises(SampleTooSmall):
        welch_t_test([1.0], [1.0, 2.0])


def test_welch_against_scipy_on_random_samples():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.normal(0, rng.uniform(0.1, 3), size=rng.integers(2, 30))
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.1, 3), size=rng.integers(2, 30))
        ref = stats.ttest_ind(a, b, equal_var=False)
        res = welch_t_test(a, b)
        assert res.t == pytest.approx(ref.statistic, rel=1e-10)
        assert res.p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


def test_betainc_against_scipy():
    for a in (0.5, 1.0, 2.5, 7.0, 40.0):
        for b in (0.5, 1.0, 3.0, 12.0):
            for x in (0.0, 1e-6, 0.1, 0.37, 0.5, 0.9, 0.999999, 1.0):
                assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-10, abs=1e-15)
    with pytest.raises(InputError):
        betainc(0, 1, 0.5)


def test_tail_probabilities_against_scipy():
    for df in (1, 2.5, 8, 30, 200):
        for t in (0.0, 0.3, 1.0, 2.2, 6.0):
            assert t_two_sided_p(t, df) == pytest.approx(2 * stats.t.sf(t, df), rel=1e-9)
    for d1, d2 in ((1, 5), (3, 20), (10, 100)):
        for f in (0.2, 1.0, 4.0):
            assert f_upper_p(f, d1, d2) == pytest.approx(stats.f.sf(f, d1, d2), rel=1e-9)


def test_ols_exact_line():
    fit = ols_fit([[1], [2], [3]], [2, 4, 6])
    assert fit.coefficients[0] == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.r_squared == 1.0


def test_ols_constant_response():
    fit = ols_fit([[1, 5], [2, 3], [3, 9], [4, 1]], [7, 7, 7, 7])
    assert fit.coefficients == (0.0, 0.0)
    assert fit.intercept == 7.0
    assert fit.r_squared == 0.0
    assert fit.p_values == (1.0, 1.0)


def test_ols_against_statsmodels():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(20, 2))
    y = x @ [1.5, -0.5] + 0.3 + rng.normal(scale=0.2, size=20)
    fit = ols_fit(x, y)
    ref = sm.OLS(y, sm.add_constant(x, prepend=False)).fit()
    assert np.allclose(fit.coefficients, ref.params[:2], rtol=0, atol=1e-8)
    assert fit.intercept == pytest.approx(ref.params[2], abs=1e-8)
    assert np.allclose(fit.std_errors, ref.bse[:2], rtol=1e-8)
    assert np.allclose(fit.p_values, ref.pvalues[:2], rtol=1e-6)
    assert fit.r_squared == pytest.approx(ref.rsquared, abs=1e-10)
    assert fit.f_statistic == pytest.approx(ref.fvalue, rel=1e-8)
    assert fit.f_p_value == pytest.approx(ref.f_pvalue, rel=1e-6)


def test_ols_without_intercept():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(15, 3))
    y = x @ [1.0, 2.0, 3.0] + rng.normal(scale=0.1, size=15)
    fit = ols_fit(x, y, with_intercept=False)
    ref = sm.OLS(y, x).fit()
    assert fit.intercept is None
    assert np.allclose(fit.coefficients, ref.params, atol=1e-8)
    assert fit.r_squared == pytest.approx(ref.rsquared, abs=1e-10)


def test_ols_errors():
    with pytest.raises(SingularDesign):
        ols_fit([[1, 2], [2, 4], [3, 6], [4, 8]], [1, 2, 3, 4])
    with pytest.raises(SampleTooSmall):
        ols_fit([[1], [2]], [1, 2])
    with pytest.raises(InputError):
        ols_fit([[1], [2], [3]], [1, 2])


def test_weight_family_needs_drop_one():
    grid = np.array(weight_grid(4), dtype=float)
    y = grid @ [0.01, -0.02, 0.005, 0.0] + 0.1
    with pytest.raises(SingularDesign):
        ols_fit(grid, y)
    fits = drop_one_regressions(grid, y, ["wc", "ws", "we", "wi"])
    assert [om for om, _ in fits] == ["wc", "ws", "we", "wi"]
    for omitted, fit in fits:
        assert not isinstance(fit, SingularDesign), omitted
        assert len(fit.coefficients) == 3


def test_drop_one_reports_singular_subdesigns():
    x = [[1, 1, 0], [2, 2, 0], [3, 3, 1], [4, 4, 0], [5, 5, 1]]
    fits = dict(drop_one_regressions(x, [1, 2, 3, 4, 5], ["a", "b", "c"]))
    assert isinstance(fits["c"], SingularDesign)
    assert not isinstance(fits["a"], SingularDesign)
