"""Closed-form ridge regression and hand-engineered EEG window features."""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np
import scipy.linalg


class SingularSystemError(ArithmeticError):
    pass


def ridge_fit(U, z, lam: float = 0.0) -> np.ndarray:
    """Solve (U^T U + lam I) w = U^T z by Cholesky factorization.

    With ``lam == 0`` the design must have full column rank; otherwise
    :class:`SingularSystemError` is raised rather than returning noise.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    n, m = U.shape
    if n < 1 or m < 1:
        raise ValueError("U must be at least 1x1")
    if z.shape[0] != n:
        raise ValueError(f"U has {n} rows but z has {z.shape[0]} entries")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0 and np.linalg.matrix_rank(U) < m:
        raise SingularSystemError("U^T U is singular; use lambda > 0")
    gram = U.T @ U
    gram[np.diag_indices(m)] += lam
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, U.T @ z)


def linear_predict(U, w) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    w = np.asarray(w, dtype=float).reshape(-1)
    if U.shape[1] != w.shape[0]:
        raise ValueError(f"U has {U.shape[1]} columns but w has {w.shape[0]} entries")
    return U @ w


@dataclass(frozen=True)
class FeatureVector:
    energy: float
    rms_amplitude: float
    coastline: float
    hjorth_variance: float

    def as_tuple(self) -> tuple:
        return astuple(self)


def window_features(window) -> FeatureVector:
    """Energy, RMS amplitude, coastline (line length) and Hjorth activity.

    Hjorth activity uses the biased 1/n variance.
    """
    x = np.asarray(window, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < 2:
        raise ValueError("window needs at least 2 samples")
    energy = float(np.dot(x, x))
    return FeatureVector(
        energy=energy,
        rms_amplitude=float(np.sqrt(energy / n)),
        coastline=float(np.abs(np.diff(x)).sum()),
        hjorth_variance=float(np.var(x)),
    )


def feature_matrix(series, window: int, stride: int | None = None) -> np.ndarray:
    """Features of consecutive windows of a 1-d series, one row per window."""
    x = np.asarray(series, dtype=float).reshape(-1)
    stride = window if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = [window_features(x[i:i + window]).as_tuple()
            for i in range(0, x.shape[0] - window + 1, stride)]
    return np.array(rows).reshape(-1, 4)
