from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mollow_cqed.transition import line_fit, segmented_regression, transition_locator

X = np.linspace(200, 4900, 12)


def hinge(x, knee, a=4.0, b=3e-3, b2=-5e-4):
    return a + b * x + (b2 - b) * np.maximum(x - knee, 0)


def test_exact_knee_recovered():
    x = np.arange(500, 4001, 250.0)
    assert transition_locator(x, y=hinge(x, 2000.0)) == 2000.0


def test_straight_line_has_no_transition():
    assert transition_locator(X, y=1 + 2e-3 * X) is None


def test_upward_kink_is_not_a_transition():
    # convex power broadening is not the anomalous slope drop
    assert transition_locator(X, y=hinge(X, 2500.0, b=1e-3, b2=4e-3)) is None


def test_noise_only_has_no_transition():
    y = 5 + np.random.default_rng(3).normal(scale=0.05, size=X.size)
    assert transition_locator(X, y=y) is None


def test_records_and_dicts_accepted():
    y = hinge(X, X[5])
    recs = [SimpleNamespace(omega_sq=a, lower_fwhm=b) for a, b in zip(X, y)]
    dicts = [dict(omega_sq=a, lower_fwhm=b) for a, b in zip(X, y)]
    assert transition_locator(recs) == transition_locator(dicts) == X[5]


def test_rows_without_linewidth_skipped():
    y = hinge(X, X[5])
    dicts = [dict(omega_sq=a, lower_fwhm=b) for a, b in zip(X, y)]
    dicts.insert(3, dict(omega_sq=1234.0, lower_fwhm=None))
    assert transition_locator(dicts) == X[5]


def test_too_few_points():
    with pytest.raises(ValueError):
        segmented_regression([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_order_independent():
    y = hinge(X, X[6])
    perm = np.random.default_rng(0).permutation(X.size)
    assert segmented_regression(X[perm], y[perm]) == segmented_regression(X, y)


def test_line_fit_r2():
    _, slope, r2 = line_fit(X, 3 + 0.5 * X)
    assert slope == pytest.approx(0.5)
    assert r2 == pytest.approx(1.0)


@given(
    st.integers(2, 9),
    st.floats(1e-3, 1e-2),
    st.floats(-0.8, 0.3),
    st.integers(0, 2**31 - 1),
)
def test_concave_knee_found_under_small_noise(k, slope, ratio, seed):
    knee = X[k]
    y = hinge(X, knee, b=slope, b2=ratio * slope)
    jump = slope * (1 - ratio) * (X[-1] - knee)
    assume(jump > 1.0)
    y = y + np.random.default_rng(seed).normal(scale=1e-3, size=X.size)
    seg = segmented_regression(X, y)
    assert seg.knee == knee
    assert transition_locator(X, y=y) == knee
