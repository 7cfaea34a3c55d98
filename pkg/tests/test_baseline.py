import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drnn.baseline import (
    FeatureVector,
    SingularSystemError,
    feature_matrix,
    linear_predict,
    ridge_fit,
    window_features,
)


def normal_equations(U, z, lam):
    return np.linalg.solve(U.T @ U + lam * np.eye(U.shape[1]), U.T @ z)


def test_identity_design_returns_target():
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(ridge_fit(np.eye(3), z, 0.0), z, rtol=1e-14)


def test_ridge_shrinks_the_identity_solution():
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(ridge_fit(np.eye(3), z, 1.0), z / 2, rtol=1e-14)


def test_exact_fit_recovers_weights():
    rng = np.random.default_rng(0)
    U = rng.normal(size=(40, 5))
    w = rng.normal(size=5)
    np.testing.assert_allclose(ridge_fit(U, U @ w), w, rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 50), m=st.integers(1, 10), lam=st.floats(1e-3, 10.0),
       seed=st.integers(0, 2**31))
def test_matches_normal_equations(n, m, lam, seed):
    rng = np.random.default_rng(seed)
    U, z = rng.normal(size=(n, m)), rng.normal(size=n)
    expected = normal_equations(U, z, lam)
    np.testing.assert_allclose(ridge_fit(U, z, lam), expected, rtol=1e-8, atol=1e-12)


def test_rank_deficient_design_without_penalty_is_rejected():
    U = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(SingularSystemError):
        ridge_fit(U, np.ones(3), 0.0)
    # a positive penalty makes the system solvable
    assert np.all(np.isfinite(ridge_fit(U, np.ones(3), 0.1)))


@pytest.mark.parametrize("args", [(np.ones((3, 2)), np.ones(4), 0.0),
                                  (np.ones((3, 2)), np.ones(3), -1.0)])
def test_bad_arguments(args):
    with pytest.raises(ValueError):
        ridge_fit(*args)


def test_linear_predict():
    U = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(linear_predict(U, [1.0, -1.0]), [-1.0, -1.0])
    with pytest.raises(ValueError):
        linear_predict(U, [1.0])


def test_window_features_by_hand():
    f = window_features([1.0, -1.0, 2.0, 0.0])
    assert f == FeatureVector(energy=6.0, rms_amplitude=np.sqrt(1.5), coastline=7.0,
                              hjorth_variance=1.25)


def test_constant_window_has_zero_line_length_and_variance():
    f = window_features(np.full(16, 3.0))
    assert f.coastline == 0.0 and f.hjorth_variance == 0.0
    assert f.rms_amplitude == pytest.approx(3.0)


def test_window_features_need_two_samples():
    with pytest.raises(ValueError):
        window_features([1.0])


def test_feature_matrix_rows_and_stride():
    x = np.arange(10.0)
    F = feature_matrix(x, 4, stride=2)
    assert F.shape == (4, 4)
    np.testing.assert_allclose(F[1], window_features(x[2:6]).as_tuple())
    assert feature_matrix(x, 4).shape == (2, 4)
    with pytest.raises(ValueError):
        feature_matrix(x, 4, stride=0)
