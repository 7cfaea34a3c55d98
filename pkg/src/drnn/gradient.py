"""Derivatives of network outputs with respect to the joint state-and-parameter
vector, computed by dynamic programming over the unrolled space-time graph.

The graph spans instants ``-(d-1) .. 0`` where ``d = state.depth`` (the
backprop extent, or fewer instants early in a run).  Hidden outputs at lag
``d`` are the truncation boundary: they are inputs to the unrolled function and
nothing older is differentiated through.

The recursion walks from the oldest instant to the present.  For every layer
it forms the derivative of the layer outputs with respect to *all* tracked
columns as::

    D_layer = diag(f') W_below D_below + diag(f') W_rec D_layer(lag+1) + direct

where ``direct`` holds the distance-1 weight derivatives ``f'(a_r) x~_c``.
Derivatives at larger distances are therefore weighted sums of already-known
distance-1 derivatives, one matrix product per layer per instant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .netcore import NetworkState, activate


class StaleStateError(RuntimeError):
    """Raised when derivatives are requested before any forward step."""


def activation_derivative(kind: str, a):
    a = np.asarray(a, dtype=float)
    if kind == "tanh":
        t = np.tanh(a)
        return 1.0 - t * t
    if kind == "logistic":
        s = 1.0 / (1.0 + np.exp(-a))
        return s * (1.0 - s)
    if kind == "identity":
        return np.ones_like(a)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class LayerJacobian:
    """Distance-1 derivatives of one layer at one instant.

    ``weights[r, c]`` is d y_r / d W[r, c]; derivatives with respect to other
    rows' weights are zero, so a matrix (not a 3-d array) suffices.
    """

    name: str
    upstream: np.ndarray
    recurrent: np.ndarray | None
    weights: np.ndarray


@dataclass
class JacobianSet:
    J: np.ndarray | None
    H: np.ndarray | None
    F: np.ndarray | None
    instant_stamp: tuple[int, int]


def _stamp(state: NetworkState) -> tuple[int, int]:
    return (state.steps, state.weight_version)


def _layer_locals(state: NetworkState, lag: int, with_output: bool) -> list[LayerJacobian]:
    cfg = state.config
    bank = state.bank_for_lag(lag)
    y, a = state.outputs_at(lag), state.preacts_at(lag)
    prev = state.outputs_at(lag + 1)
    act = cfg.activation
    result = []

    vis = cfg.visible_units()
    wv = state.visible_matrix(bank)
    fp = activation_derivative(act, a[vis])
    x_aug = np.concatenate(([1.0], state.input_at(lag)))
    result.append(LayerJacobian("visible", fp[:, None] * wv[:, 1:], None, np.outer(fp, x_aug)))

    below = y[vis]
    for layer, wh in enumerate(state.hidden_matrices(bank)):
        units = cfg.hidden_units(layer)
        k = below.shape[0]
        fp = activation_derivative(act, a[units])
        x_aug = np.concatenate(([1.0], below, prev[units]))
        result.append(LayerJacobian(f"h{layer + 1}", fp[:, None] * wh[:, 1:1 + k],
                                    fp[:, None] * wh[:, 1 + k:], np.outer(fp, x_aug)))
        below = y[units]

    if with_output:
        out = cfg.output_units()
        wz = state.output_matrix()
        fp = activation_derivative(cfg.output_activation, a[out])
        x_aug = np.concatenate(([1.0], below))
        result.append(LayerJacobian("output", fp[:, None] * wz[:, 1:], None, np.outer(fp, x_aug)))
    return result


def local_jacobians(state: NetworkState) -> list[LayerJacobian]:
    """Distance-1 derivatives of every layer at the current instant, in
    evaluation order (visible, hidden 1..N_L, output)."""
    if state.steps == 0:
        raise StaleStateError("no forward step has been performed")
    return _layer_locals(state, 0, with_output=True)


@lru_cache(maxsize=None)
def _direct_rows(rows: int, cols: int) -> np.ndarray:
    return np.repeat(np.arange(rows), cols)


def _add_direct(D: np.ndarray, lj: LayerJacobian, start: int | None) -> None:
    if start is None:
        return
    rows, cols = lj.weights.shape
    D[_direct_rows(rows, cols), start + np.arange(rows * cols)] += lj.weights.ravel()


def _seed(D: np.ndarray, cols) -> None:
    if cols is not None:
        D[np.arange(D.shape[0]), cols] = 1.0


def _propagate(state: NetworkState, depth: int, n_cols: int, weight_col, seed_col):
    """Run the recursion; return (dz, lag-0 layer derivatives)."""
    cfg = state.config
    n_h = cfg.hidden_width
    prev = []
    for layer in range(cfg.n_hidden_layers):
        D = np.zeros((n_h, n_cols))
        _seed(D, seed_col(depth, cfg.hidden_units(layer)))
        prev.append(D)

    current = []
    for lag in range(depth - 1, -1, -1):
        bank = state.bank_for_lag(lag)
        locs = _layer_locals(state, lag, with_output=lag == 0)
        dv = np.zeros((cfg.n_visible, n_cols))
        _add_direct(dv, locs[0], weight_col(bank, "visible"))
        _seed(dv, seed_col(lag, cfg.visible_units()))
        below = dv
        current = [dv]
        for layer in range(cfg.n_hidden_layers):
            lj = locs[1 + layer]
            D = lj.upstream @ below
            D += lj.recurrent @ prev[layer]
            _add_direct(D, lj, weight_col(bank, lj.name))
            _seed(D, seed_col(lag, cfg.hidden_units(layer)))
            current.append(D)
            below = D
        prev = current[1:]

    lz = locs[-1]
    dz = lz.upstream @ prev[-1]
    _add_direct(dz, lz, weight_col(0, "output"))
    _seed(dz, seed_col(0, cfg.output_units()))
    return dz, current + [dz]


def _units(sl: slice) -> np.ndarray:
    return np.arange(sl.start, sl.stop)


def _require_step(state: NetworkState) -> None:
    if state.steps == 0:
        raise StaleStateError("no forward step has been performed")


def output_jacobian(state: NetworkState) -> JacobianSet:
    """H = d z / d x (every joint element) and its weight slice J."""
    _require_step(state)
    imap = state.index_map

    def seed_col(lag, units):
        return imap.output_index(lag, _units(units))

    H, _ = _propagate(state, state.depth, imap.size, imap.section_start, seed_col)
    return JacobianSet(J=H[:, imap.weight_start:], H=H, F=None, instant_stamp=_stamp(state))


def weight_jacobian(state: NetworkState) -> JacobianSet:
    """J only: the same recursion restricted to weight columns (training path)."""
    _require_step(state)
    imap = state.index_map

    def weight_col(bank, name):
        return imap.section_start(bank, name) - imap.weight_start

    J, _ = _propagate(state, state.depth, imap.n_weights_total, weight_col,
                      lambda lag, units: None)
    return JacobianSet(J=J, H=None, F=None, instant_stamp=_stamp(state))


def state_jacobian(state: NetworkState) -> JacobianSet:
    """F = d x(k) / d x(k-1) for the transition just performed.

    Rows of past outputs are the lag shift; rows of current outputs come from
    one instant of the recursion with lag-1 hidden outputs mapped to the
    previous vector's lag-0 entries; weight rows are the identity (shared) or
    the bank shift (per_instant).
    """
    _require_step(state)
    cfg, imap = state.config, state.index_map
    n_u, size = cfg.n_units, imap.size
    F = np.zeros((size, size))

    units = np.arange(n_u)
    for lag in range(1, cfg.bptt_extent + 1):
        F[imap.output_index(lag, units), imap.output_index(lag - 1, units)] = 1.0

    def seed_col(lag, sl):
        return imap.output_index(0, _units(sl)) if lag == 1 else None

    _, layers = _propagate(state, 1, size, imap.section_start, seed_col)
    row_slices = [cfg.visible_units()]
    row_slices += [cfg.hidden_units(layer) for layer in range(cfg.n_hidden_layers)]
    row_slices.append(cfg.output_units())
    for sl, D in zip(row_slices, layers):
        F[imap.output_index(0, _units(sl))] = D

    w0 = imap.weight_start
    n_first = imap.n_bank_weights
    idx = np.arange(w0, w0 + n_first)
    F[idx, idx] = 1.0
    for bank in range(1, cfg.n_banks):
        new = imap.bank_start(bank) + np.arange(imap.n_vh_weights)
        old_start = imap.bank_start(bank - 1) + (imap.n_output_weights if bank == 1 else 0)
        F[new, old_start + np.arange(imap.n_vh_weights)] = 1.0
    return JacobianSet(J=None, H=None, F=F, instant_stamp=_stamp(state))


# -- finite-difference oracle ----------------------------------------------


def _unpack(state: NetworkState, w: np.ndarray):
    imap = state.index_map
    sections = imap.sections
    out = sections[0]
    wz = w[:out.size].reshape(out.rows, out.cols)
    banks = []
    for bank in range(state.config.n_banks):
        base = imap.n_output_weights + bank * imap.n_vh_weights
        mats = []
        for section in sections[1:]:
            start = base + section.offset - imap.n_output_weights
            mats.append(w[start:start + section.size].reshape(section.rows, section.cols))
        banks.append(mats)
    return wz, banks


def replay_output(state: NetworkState, weights=None, override=None) -> np.ndarray:
    """Recompute the current outputs by replaying the retained input window
    from the boundary hidden outputs.

    ``override = (lag, unit, value)`` pins one unit output to ``value`` once
    its layer has been evaluated (or at the boundary).  Written without the
    recursion above so it can serve as an oracle for it.
    """
    cfg = state.config
    w = state.weight_vector() if weights is None else np.asarray(weights, dtype=float)
    wz, banks = _unpack(state, w)
    d = state.depth

    def pin(lag, sl, values):
        if override is not None and override[0] == lag and sl.start <= override[1] < sl.stop:
            values = values.copy()
            values[override[1] - sl.start] = override[2]
        return values

    hidden = [pin(d, cfg.hidden_units(l), state.outputs_at(d)[cfg.hidden_units(l)].copy())
              for l in range(cfg.n_hidden_layers)]
    below = None
    for lag in range(d - 1, -1, -1):
        mats = banks[state.bank_for_lag(lag)]
        u = state.input_at(lag)
        below = activate(cfg.activation, mats[-1] @ np.concatenate(([1.0], u)))
        below = pin(lag, cfg.visible_units(), below)
        for layer in range(cfg.n_hidden_layers):
            x_aug = np.concatenate(([1.0], below, hidden[layer]))
            h = activate(cfg.activation, mats[layer] @ x_aug)
            hidden[layer] = pin(lag, cfg.hidden_units(layer), h)
            below = hidden[layer]
    z = activate(cfg.output_activation, wz @ np.concatenate(([1.0], below)))
    return pin(0, cfg.output_units(), z)


def finite_difference_jacobian(state: NetworkState, step: float = 1e-5,
                               include_state: bool = False) -> np.ndarray:
    """Central differences of the current outputs w.r.t. every weight (or,
    with ``include_state``, every joint-vector element)."""
    if step <= 0:
        raise ValueError("step must be positive")
    _require_step(state)
    imap = state.index_map
    w = state.weight_vector()
    n_o = state.config.n_outputs
    n_w = imap.n_weights_total
    columns = []
    if include_state:
        for index in range(imap.weight_start):
            _, lag, unit = imap.decode(index)
            base = state.outputs_at(lag)[unit]
            plus = replay_output(state, w, (lag, unit, base + step))
            minus = replay_output(state, w, (lag, unit, base - step))
            columns.append((plus - minus) / (2 * step))
    for j in range(n_w):
        wp, wm = w.copy(), w.copy()
        wp[j] += step
        wm[j] -= step
        columns.append((replay_output(state, wp) - replay_output(state, wm)) / (2 * step))
    return np.array(columns).T.reshape(n_o, -1)


def dump_csv(jac: JacobianSet, state: NetworkState, path, which: str = "J") -> None:
    """Write one of J/H/F as ``row,col,value`` lines with readable labels."""
    imap = state.index_map
    matrix = getattr(jac, which)
    if matrix is None:
        raise ValueError(f"{which} was not computed")
    if which == "F":
        row_labels = imap.labels
    else:
        row_labels = [f"z{i}" for i in range(matrix.shape[0])]
    col_labels = imap.labels[imap.weight_start:] if which == "J" else imap.labels
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        for r, row in enumerate(matrix):
            for c, value in enumerate(row):
                writer.writerow([row_labels[r], col_labels[c], repr(float(value))])
