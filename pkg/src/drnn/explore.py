"""Exhaustive error-surface exploration of the 7-weight 1-1-1-1 network.

Each grid point fixes all seven weights; the network is run teacher-forced
over the target series (input at instant k is ``target[k]``, the output is
scored against ``target[k + 1]``) from zero history, and the point's error is
the mean squared one-step error.  Points are evaluated in vectorized batches;
every point's arithmetic is elementwise and independent of batch size, so any
chunking or worker count yields bit-identical results.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netcore import NetworkConfig

WEIGHT_NAMES = ("w_v_bias", "w_v_in", "w_h_bias", "w_h_vis", "w_h_rec", "w_o_bias", "w_o_hid")
# position of each explored weight inside the flat 7-weight bank
# (bank order: output bias, output<-hidden, hidden bias, hidden<-visible,
#  hidden recurrent, visible bias, visible<-input)
BANK_POSITION = (5, 6, 2, 3, 4, 0, 1)

EXPLORE_CONFIG = NetworkConfig(n_inputs=1, n_visible=1, n_hidden_layers=1, hidden_width=1,
                               n_outputs=1, bptt_extent=1)


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """One value list per explored weight, in ``WEIGHT_NAMES`` order."""

    axes: tuple[tuple[float, ...], ...]
    eval_length: int = 1024
    value_range: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        axes = tuple(tuple(float(v) for v in axis) for axis in self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) != len(WEIGHT_NAMES):
            raise ValueError(f"need {len(WEIGHT_NAMES)} value lists, got {len(axes)}")
        lo, hi = self.value_range
        for name, axis in zip(WEIGHT_NAMES, axes):
            if not axis:
                raise ValueError(f"value list for {name} is empty")
            if any(not lo <= v < hi for v in axis):
                raise ValueError(f"value list for {name} leaves [{lo}, {hi})")
        if self.eval_length < 1:
            raise ValueError("eval_length must be >= 1")

    @classmethod
    def from_groups(cls, visible, hidden, output, **kwargs) -> "GridSpec":
        """Same list for every weight of a group (2 visible, 3 hidden, 2 output)."""
        return cls(axes=(visible,) * 2 + (hidden,) * 3 + (output,) * 2, **kwargs)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)


def default_spec(eval_length: int = 1024) -> GridSpec:
    """2 visible, 4 hidden and 32 output values per weight: 2^18 points."""
    return GridSpec.from_groups(
        visible=(-1.5, 1.5),
        hidden=np.linspace(-2.0, 2.0, 4, endpoint=False),
        output=np.linspace(-2.0, 2.0, 32, endpoint=False),
        eval_length=eval_length,
    )


def grid_size(spec: GridSpec) -> int:
    return int(np.prod(spec.shape, dtype=np.int64))


def evaluate_points(weights: np.ndarray, target: np.ndarray, eval_length: int) -> np.ndarray:
    """Teacher-forced MSE for each row of ``weights`` (n_points x 7, in
    ``WEIGHT_NAMES`` order)."""
    w = np.asarray(weights, dtype=float)
    v_b, v_in, h_b, h_vis, h_rec, o_b, o_hid = (w[:, i] for i in range(7))
    h = np.zeros(w.shape[0])
    err = np.zeros(w.shape[0])
    for k in range(eval_length):
        v = np.tanh(v_b + v_in * target[k])
        h = np.tanh(h_b + h_vis * v + h_rec * h)
        z = np.tanh(o_b + o_hid * h)
        err += (z - target[k + 1]) ** 2
    return err / eval_length


def _points(spec: GridSpec, flat: np.ndarray) -> np.ndarray:
    coords = np.unravel_index(flat, spec.shape)
    return np.column_stack([np.asarray(axis)[c] for axis, c in zip(spec.axes, coords)])


def _chunk(args):
    spec, target, start, stop = args
    flat = np.arange(start, stop)
    return start, evaluate_points(_points(spec, flat), target, spec.eval_length)


@dataclass
class ErrorTensor:
    spec: GridSpec
    mse: np.ndarray            # shape spec.shape, indexed like WEIGHT_NAMES
    visited: int

    @property
    def min_over_output(self) -> np.ndarray:
        """Minimum over both output weights for every visible/hidden setting."""
        return self.mse.min(axis=(5, 6))

    @property
    def projection(self) -> np.ndarray:
        """Minimum over hidden bias and output weights, indexed by
        (v_bias, v_in, h_vis, h_rec)."""
        return self.mse.min(axis=(2, 5, 6))

    @property
    def best_index(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(np.argmin(self.mse), self.mse.shape))

    def output_slice(self) -> np.ndarray:
        """Error over all output-weight pairs at the best visible/hidden setting."""
        return self.mse[self.best_index[:5]]

    def to_csv(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        path = directory / "tensor.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(WEIGHT_NAMES) + ["mse"])
            for idx in itertools.product(*(range(n) for n in self.mse.shape)):
                values = [self.spec.axes[a][i] for a, i in enumerate(idx)]
                writer.writerow([repr(v) for v in values] + [repr(float(self.mse[idx]))])
        written.append(path)

        proj = self.projection
        for i, vb in enumerate(self.spec.axes[0]):
            for j, vi in enumerate(self.spec.axes[1]):
                path = directory / f"projection_v{i}_{j}.csv"
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["w_v_bias", "w_v_in", "w_h_vis", "w_h_rec", "min_mse"])
                    for a, hv in enumerate(self.spec.axes[3]):
                        for b, hr in enumerate(self.spec.axes[4]):
                            writer.writerow([repr(vb), repr(vi), repr(hv), repr(hr),
                                             repr(float(proj[i, j, a, b]))])
                written.append(path)

        path = directory / "output_slice.csv"
        best = self.best_index
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(WEIGHT_NAMES) + ["mse"])
            fixed = [self.spec.axes[a][best[a]] for a in range(5)]
            for a, ob in enumerate(self.spec.axes[5]):
                for b, oh in enumerate(self.spec.axes[6]):
                    writer.writerow([repr(v) for v in fixed + [ob, oh]]
                                    + [repr(float(self.mse[best[:5] + (a, b)]))])
        written.append(path)
        return written


def explore_error_surface(spec: GridSpec, target, config: NetworkConfig = EXPLORE_CONFIG,
                          workers: int = 1, chunk_size: int = 16384,
                          order=None) -> ErrorTensor:
    """Evaluate every grid point; ``order`` optionally permutes the chunk
    schedule (results are keyed by grid position, never by completion)."""
    if config.weight_mode != "shared" or config.n_weights != 7 or \
            (config.n_inputs, config.n_visible, config.n_hidden_layers, config.hidden_width,
             config.n_outputs, config.bptt_extent) != (1, 1, 1, 1, 1, 1):
        raise TopologyError("exploration needs the 7-weight 1-1-1-1 network with B = 1")
    target = np.asarray(target, dtype=float).reshape(-1)
    if target.shape[0] < spec.eval_length + 1:
        raise ValueError(f"target needs {spec.eval_length + 1} samples, has {target.shape[0]}")
    total = grid_size(spec)
    jobs = [(spec, target, s, min(s + chunk_size, total)) for s in range(0, total, chunk_size)]
    if order is not None:
        jobs = [jobs[i] for i in order]
    flat = np.full(total, np.nan)
    visited = 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk, jobs))
    else:
        results = map(_chunk, jobs)
    for start, values in results:
        flat[start:start + values.shape[0]] = values
        visited += values.shape[0]
    return ErrorTensor(spec=spec, mse=flat.reshape(spec.shape), visited=visited)
