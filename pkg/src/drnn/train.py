"""Online predict-correct training by gradient descent through time and space."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .gradient import JacobianSet, weight_jacobian
from .netcore import NetworkState, evaluate_instant, forward_step


class StaleJacobianError(RuntimeError):
    pass


class NumericalError(ArithmeticError):
    """Non-finite prediction or weights during training."""


@dataclass
class TrainingSchedule:
    eta: float = 0.01
    horizon_q: int = 1
    epochs: int = 1
    freeze_after: int | None = None
    convergence_tol: float = 1e-4
    recompute: bool = True
    clip_norm: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if int(self.horizon_q) != self.horizon_q or self.horizon_q < 1:
            raise ValueError("horizon_q must be an integer >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainingReport:
    """Per-instant record of one training run.

    ``labels`` and ``sq_error`` are NaN where no target existed;
    ``weight_delta_norm`` is NaN where no update was applied.
    """

    predictions: np.ndarray
    labels: np.ndarray
    sq_error: np.ndarray
    weight_delta_norm: np.ndarray
    final_weights: np.ndarray
    convergence_tol: float
    horizon_q: int = 1
    max_weight_delta: float = field(init=False)

    def __post_init__(self):
        norms = self.weight_delta_norm[np.isfinite(self.weight_delta_norm)]
        self.max_weight_delta = float(norms.max()) if norms.size else 0.0

    @property
    def n_updates(self) -> int:
        return int(np.isfinite(self.weight_delta_norm).sum())

    @property
    def converged_at(self) -> int | None:
        """First instant whose update norm fell below the tolerance."""
        below = np.flatnonzero(self.weight_delta_norm < self.convergence_tol)
        return int(below[0]) if below.size else None

    def scored(self, start: int = 0, stop: int | None = None):
        """(predictions, labels) at the labeled instants in [start, stop)."""
        stop = len(self.sq_error) if stop is None else stop
        idx = np.arange(start, stop)
        idx = idx[np.isfinite(self.sq_error[idx])]
        return self.predictions[idx], self.labels[idx]

    def mse(self, start: int = 0, stop: int | None = None) -> float:
        pred, lab = self.scored(start, stop)
        return float(np.mean((pred - lab) ** 2))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instant", "prediction", "label", "sq_error", "weight_delta_norm"])
            for k in range(len(self.sq_error)):
                writer.writerow([k, _fmt(self.predictions[k]), _fmt(self.labels[k]),
                                 _fmt(self.sq_error[k]), _fmt(self.weight_delta_norm[k])])


def _fmt(value) -> str:
    values = np.atleast_1d(value)
    return ";".join("" if np.isnan(v) else repr(float(v)) for v in values)


def sgd_update(state: NetworkState, error, eta: float, jac: JacobianSet,
               clip_norm: float | None = None) -> float:
    """w <- w - eta * J^T error over every bank; returns ||delta w||_2.

    J is (N_O x n_weights) so the transpose is what lands in weight space.
    """
    if jac.J is None or jac.instant_stamp != (state.steps, state.weight_version):
        raise StaleJacobianError("Jacobian does not match the current state")
    error = np.asarray(error, dtype=float).reshape(-1)
    delta = -eta * (jac.J.T @ error)
    norm = float(np.linalg.norm(delta))
    if clip_norm is not None and norm > clip_norm:
        delta *= clip_norm / norm
        norm = clip_norm
    if norm > 0.0:
        state.add_to_weights(delta)
    return norm


def recompute_history(state: NetworkState) -> None:
    """Replay the retained window (oldest first) with the current weights.

    Only the instants the window actually spans are recomputed; the outputs
    at the boundary lag are kept.
    """
    for lag in range(state.depth - 1, -1, -1):
        evaluate_instant(state, lag)


def _step(state: NetworkState, x, label, schedule: TrainingSchedule):
    prediction = forward_step(state, x)
    if not np.all(np.isfinite(prediction)):
        raise NumericalError(f"non-finite prediction at step {state.steps}")
    if label is None:
        return prediction, None
    label = np.asarray(label, dtype=float).reshape(-1)
    if label.shape != prediction.shape:
        raise ValueError(f"label has {label.size} values, network has {prediction.size} outputs")
    jac = weight_jacobian(state)
    norm = sgd_update(state, prediction - label, schedule.eta, jac, schedule.clip_norm)
    if not np.isfinite(norm):
        raise NumericalError(f"non-finite weight update at step {state.steps}")
    if schedule.recompute:
        recompute_history(state)
    return prediction, norm


def online_step(state: NetworkState, x, label, schedule: TrainingSchedule) -> np.ndarray:
    """Predict; if ``label`` (the target of this prediction) is given, correct.

    Returns the prediction made before any correction.
    """
    return _step(state, x, label, schedule)[0]


def train_series(state: NetworkState, inputs, labels, schedule: TrainingSchedule) -> TrainingReport:
    """Run ``online_step`` over a series.

    ``labels[k]`` is the observation at instant k (or None); the prediction
    emitted at instant k is paired with ``labels[k + q]``.  From instant
    ``freeze_after`` on, predictions are still scored but never update.
    """
    inputs = [np.asarray(x, dtype=float).reshape(-1) for x in inputs]
    if not inputs:
        raise ValueError("inputs must be nonempty")
    labels = list(labels) if labels is not None else []
    q, n = schedule.horizon_q, len(inputs)
    n_out = state.config.n_outputs
    total = n * schedule.epochs

    predictions = np.empty((total, n_out))
    targets = np.full((total, n_out), np.nan)
    sq_error = np.full(total, np.nan)
    delta = np.full(total, np.nan)

    t = 0
    for _ in range(schedule.epochs):
        for k in range(n):
            target = labels[k + q] if k + q < len(labels) else None
            train_on = target
            if schedule.freeze_after is not None and k >= schedule.freeze_after:
                train_on = None
            pred, norm = _step(state, inputs[k], train_on, schedule)
            predictions[t] = pred
            if target is not None:
                targets[t] = target
                sq_error[t] = float(np.sum((pred - targets[t]) ** 2))
            if norm is not None:
                delta[t] = norm
            t += 1

    if n_out == 1:
        predictions, targets = predictions[:, 0], targets[:, 0]
    return TrainingReport(predictions=predictions, labels=targets, sq_error=sq_error,
                          weight_delta_norm=delta, final_weights=state.weight_vector(),
                          convergence_tol=schedule.convergence_tol, horizon_q=q)
