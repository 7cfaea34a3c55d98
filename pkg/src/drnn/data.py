"""Synthetic series, EEG recording ingestion and supervised-series assembly.

Recording files:

* data CSV: one row per sample, ``sample_index,ch1,...,chC``; an optional
  non-numeric header row is skipped; indices must run 0, 1, 2, ...
* annotation file: one ``start,end`` line per seizure, half-open sample range;
  blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


class RecordingFormatError(DataError):
    """A data or annotation line could not be parsed."""


class IntervalOrderError(DataError):
    """An interval has start >= end."""


class IntervalOverlapError(DataError):
    """Intervals are unsorted or overlap."""


class IntervalRangeError(DataError):
    """An interval falls outside the recording."""


# -- generators -------------------------------------------------------------


def gen_sine(n: int, period: float, amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    if period < 2:
        raise ValueError("period must be >= 2")
    k = np.arange(n)
    return amplitude * np.sin(2 * np.pi * k / period + phase)


def gen_mackey_glass(n: int, tau: float = 17.0, beta: float = 0.2, gamma: float = 0.1,
                     exponent: float = 10.0, dt: float = 1.0, x0: float = 1.2,
                     subsample: int = 1) -> np.ndarray:
    """Explicit-Euler solution of dx/dt = beta x(t-tau) / (1 + x(t-tau)^p) - gamma x(t).

    The history before t = 0 is held at ``x0``.  Returns ``n`` samples spaced
    ``dt * subsample`` apart, starting with ``x0``.
    """
    if tau < 0 or dt <= 0 or subsample < 1:
        raise ValueError("need tau >= 0, dt > 0, subsample >= 1")
    delay = int(round(tau / dt))
    n_steps = (n - 1) * subsample
    x = np.empty(n_steps + 1)
    x[0] = x0
    for i in range(n_steps):
        lagged = x[i - delay] if i >= delay else x0
        x[i + 1] = x[i] + dt * (beta * lagged / (1.0 + lagged ** exponent) - gamma * x[i])
    return x[::subsample].copy()


def add_gaussian_noise(series, sigma: float, seed: int = 0) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    series = np.asarray(series, dtype=float)
    if sigma == 0:
        return series.copy()
    rng = np.random.default_rng(seed)
    return series + rng.normal(0.0, sigma, size=series.shape)


def write_series(path, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float).reshape(-1)):
            writer.writerow([i, repr(float(v))])


def read_series(path) -> np.ndarray:
    """Read the last column of an ``index,value`` CSV (header optional)."""
    values = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            try:
                values.append(float(row[-1]))
            except ValueError:
                if line_no == 1:
                    continue
                raise RecordingFormatError(f"{path}:{line_no}: not a number: {row[-1]!r}") from None
    return np.array(values)


# -- recordings ---------------------------------------------------------------


@dataclass
class LabeledRecording:
    samples: np.ndarray
    sample_rate: float = 200.0
    seizure_intervals: list[tuple[int, int]] = field(default_factory=list)
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise DataError("samples must be a (T, C) matrix with C >= 1")
        self.seizure_intervals = [(int(s), int(e)) for s, e in self.seizure_intervals]
        validate_intervals(self.seizure_intervals, self.n_samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def seizure_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_samples, dtype=bool)
        for start, end in self.seizure_intervals:
            mask[start:end] = True
        return mask


def validate_intervals(intervals, n_samples: int) -> None:
    prev_end = None
    for start, end in intervals:
        if start >= end:
            raise IntervalOrderError(f"interval {start},{end}: start must be < end")
        if start < 0 or end > n_samples:
            raise IntervalRangeError(f"interval {start},{end} outside [0, {n_samples})")
        if prev_end is not None and start < prev_end:
            raise IntervalOverlapError(f"interval {start},{end} overlaps or precedes the previous one")
        prev_end = end


def load_recording(data_path, annotation_path, sample_rate: float = 200.0,
                   source_id: str | None = None) -> LabeledRecording:
    rows = []
    n_channels = None
    with open(data_path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                if line_no == 1 and not rows:
                    continue
                raise RecordingFormatError(f"{data_path}:{line_no}: non-numeric field") from None
            if n_channels is None:
                n_channels = len(values) - 1
                if n_channels < 1:
                    raise RecordingFormatError(f"{data_path}:{line_no}: no channel columns")
            if len(values) - 1 != n_channels:
                raise RecordingFormatError(
                    f"{data_path}:{line_no}: expected {n_channels} channels, got {len(values) - 1}")
            if values[0] != len(rows):
                raise RecordingFormatError(
                    f"{data_path}:{line_no}: sample index {values[0]:g}, expected {len(rows)}")
            rows.append(values[1:])
    if not rows:
        raise RecordingFormatError(f"{data_path}: no samples")

    intervals = []
    with open(annotation_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                start, end = (int(p) for p in parts)
            except ValueError:
                raise RecordingFormatError(
                    f"{annotation_path}:{line_no}: expected 'start,end'") from None
            intervals.append((start, end))
    return LabeledRecording(np.array(rows), sample_rate, intervals,
                            source_id if source_id is not None else Path(data_path).stem)


def save_recording(rec: LabeledRecording, data_path, annotation_path) -> None:
    with open(data_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(rec.samples):
            writer.writerow([i] + [repr(float(v)) for v in row])
    with open(annotation_path, "w") as fh:
        for start, end in rec.seizure_intervals:
            fh.write(f"{start},{end}\n")


def _gaps(rec: LabeledRecording, include_edges: bool):
    """Non-seizure stretches as (start, end) pairs."""
    bounds = [0] + [x for iv in rec.seizure_intervals for x in iv] + [rec.n_samples]
    gaps = []
    for i in range(0, len(bounds), 2):
        start, end = bounds[i], bounds[i + 1]
        is_edge = i == 0 or i == len(bounds) - 2
        if end > start and (include_edges or not is_edge):
            gaps.append((start, end))
    return gaps


def shorten_gaps(rec: LabeledRecording, mean_keep: int, sd: float = 1.0, seed: int = 0,
                 include_edges: bool = True) -> LabeledRecording:
    """Cut the middle out of long non-seizure stretches.

    Each gap draws a target length L ~ round(Normal(mean_keep, sd)); a gap
    longer than L keeps its first ceil(L/2) and last floor(L/2) samples.
    Seizure samples are never touched.  With ``include_edges`` the stretches
    before the first and after the last seizure are treated as gaps too.
    """
    if mean_keep < 1:
        raise ValueError("mean_keep must be >= 1")
    rng = np.random.default_rng(seed)
    keep = np.ones(rec.n_samples, dtype=bool)
    for start, end in _gaps(rec, include_edges):
        target = max(1, int(round(rng.normal(mean_keep, sd))))
        if end - start > target:
            keep[start + math.ceil(target / 2):end - target // 2] = False
    new_index = np.cumsum(keep) - 1
    intervals = [(int(new_index[s]), int(new_index[e - 1]) + 1) for s, e in rec.seizure_intervals]
    return LabeledRecording(rec.samples[keep], rec.sample_rate, intervals, rec.source_id)


def standardize(rec: LabeledRecording, fit_range: tuple[int, int] | None = None):
    """Per-channel zero mean / unit variance using statistics of ``fit_range``.

    Returns (new recording, mean, std).
    """
    start, stop = fit_range if fit_range is not None else (0, rec.n_samples)
    if stop <= start:
        start, stop = 0, rec.n_samples
    ref = rec.samples[start:stop]
    mean = ref.mean(axis=0)
    std = ref.std(axis=0)
    std[std == 0] = 1.0
    return (LabeledRecording((rec.samples - mean) / std, rec.sample_rate,
                             list(rec.seizure_intervals), rec.source_id), mean, std)


# -- supervised series ------------------------------------------------------------


@dataclass
class SupervisedSeries:
    """``inputs[i]`` is the input at instant i, ``labels[i]`` the label of
    the newest sample in it; the prediction emitted at instant i is scored
    against ``labels[i + horizon]``."""

    inputs: np.ndarray
    labels: np.ndarray
    horizon: int
    sample_index: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def label_sequence(self) -> list[np.ndarray]:
        return [np.array([v]) for v in self.labels]

    def targets(self) -> np.ndarray:
        """Label paired with each instant's prediction (NaN past the end)."""
        out = np.full(len(self), np.nan)
        out[:len(self) - self.horizon] = self.labels[self.horizon:]
        return out


def make_supervised(rec: LabeledRecording, window_len: int = 1, horizon: int = 1,
                    channels=None) -> SupervisedSeries:
    """Sliding-window inputs with seizure labels in {-1, +1}.

    ``channels`` selects channel indices (default: all).  The input for the
    instant ending at sample k flattens samples k-window_len+1..k, time-major.
    """
    if window_len < 1 or horizon < 1:
        raise ValueError("window_len and horizon must be >= 1")
    if horizon + window_len > rec.n_samples:
        raise DataError(f"horizon {horizon} + window {window_len} exceeds {rec.n_samples} samples")
    samples = rec.samples if channels is None else rec.samples[:, list(np.atleast_1d(channels))]
    if window_len == 1:
        inputs = samples.copy()
    else:
        view = np.lib.stride_tricks.sliding_window_view(samples, window_len, axis=0)
        inputs = view.transpose(0, 2, 1).reshape(view.shape[0], -1)
    sample_index = np.arange(window_len - 1, rec.n_samples)
    labels = np.where(rec.seizure_mask()[sample_index], 1.0, -1.0)
    return SupervisedSeries(inputs, labels, horizon, sample_index)


def split_by_seizures(rec: LabeledRecording, n_train_seizures: int, margin: int = 0):
    """(train_range, test_range) as half-open (start, stop) sample pairs.

    Training ends ``margin`` samples after the end of seizure
    ``n_train_seizures``; the test range is the rest of the recording.
    """
    n = len(rec.seizure_intervals)
    if not 0 <= n_train_seizures <= n:
        raise DataError(f"asked for {n_train_seizures} training seizures, recording has {n}")
    if n_train_seizures == 0:
        return (0, 0), (0, rec.n_samples)
    end = min(rec.seizure_intervals[n_train_seizures - 1][1] + margin, rec.n_samples)
    return (0, end), (end, rec.n_samples)


def gen_synthetic_eeg(n_seizures: int = 5, gap_len: int = 14400, seizure_len: int = 800,
                      n_channels: int = 6, sample_rate: float = 200.0, seed: int = 0,
                      burst_gain: float = 4.0, burst_hz: float = 8.0,
                      gap_jitter: float = 0.1) -> LabeledRecording:
    """Background of independent low-pass noise per channel with rhythmic,
    channel-synchronous high-amplitude bursts standing in for seizures."""
    rng = np.random.default_rng(seed)
    lengths = []
    for _ in range(n_seizures + 1):
        lengths.append(max(1, int(gap_len * (1 + gap_jitter * rng.uniform(-1, 1)))))
    total = sum(lengths) + n_seizures * seizure_len
    white = rng.normal(size=(total, n_channels))
    background = np.empty_like(white)
    # AR(2) low-pass background, roughly unit variance
    a1, a2 = 1.6, -0.7
    state = np.zeros((2, n_channels))
    gain = 0.2
    for t in range(total):
        value = a1 * state[0] + a2 * state[1] + gain * white[t]
        background[t] = value
        state[1], state[0] = state[0], value
    samples = background / background.std(axis=0)

    intervals = []
    pos = lengths[0]
    t = np.arange(seizure_len) / sample_rate
    for i in range(n_seizures):
        phase = rng.uniform(0, 2 * np.pi)
        freq = burst_hz * (1 + 0.1 * rng.uniform(-1, 1))
        wave = np.sin(2 * np.pi * freq * t + phase) + 0.5 * np.sin(4 * np.pi * freq * t + phase)
        envelope = np.minimum(1.0, np.minimum(t, t[-1] - t) * sample_rate / 20.0 + 0.2)
        channel_gain = burst_gain * rng.uniform(0.7, 1.3, n_channels)
        samples[pos:pos + seizure_len] += (envelope * wave)[:, None] * channel_gain[None, :]
        intervals.append((pos, pos + seizure_len))
        pos += seizure_len + lengths[i + 1]
    return LabeledRecording(samples, sample_rate, intervals, f"synthetic-{seed}")
