"""Network topology, circular-buffered state storage and the forward pass.

Layer layout per instant (the "unit" vector of length ``n_units``)::

    [ outputs (N_O) | hidden layer 1 .. N_L (N_H each) | visible (N_V) ]

Hidden layers are numbered bottom-up: layer 1 is fed by the visible layer and
the output layer reads layer N_L.

Weights of one bank, flattened row-major, in this order::

    output   (N_O, 1 + N_H)            columns: bias, hidden N_L
    hidden 1 (N_H, 1 + N_V + N_H)      columns: bias, visible, own lag-1 output
    hidden l (N_H, 1 + N_H + N_H)      columns: bias, layer l-1, own lag-1 output
    visible  (N_V, 1 + N_I)            columns: bias, external inputs

In ``per_instant`` mode there are B banks of the hidden+visible part; bank b
holds the weights used at instant -b.  The output section is never banked.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

ACTIVATIONS = ("tanh", "logistic", "identity")
WEIGHT_MODES = ("shared", "per_instant")
STORAGE_MODES = ("circular", "copy")


def activate(kind: str, a):
    if kind == "tanh":
        return np.tanh(a)
    if kind == "logistic":
        return 1.0 / (1.0 + np.exp(-a))
    if kind == "identity":
        return np.array(a, dtype=float, copy=True)
    raise ValueError(f"unknown activation {kind!r}")


def activation_range(kind: str) -> tuple[float, float]:
    return {"tanh": (-1.0, 1.0), "logistic": (0.0, 1.0),
            "identity": (-np.inf, np.inf)}[kind]


@dataclass(frozen=True)
class NetworkConfig:
    n_inputs: int
    n_visible: int
    n_hidden_layers: int
    hidden_width: int
    n_outputs: int
    bptt_extent: int = 1
    activation: str = "tanh"
    output_activation: str | None = None
    weight_mode: str = "shared"

    def __post_init__(self):
        for name in ("n_inputs", "n_visible", "n_hidden_layers",
                     "hidden_width", "n_outputs", "bptt_extent"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {value!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_activation is None:
            object.__setattr__(self, "output_activation", self.activation)
        if self.output_activation not in ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")

    @property
    def n_units(self) -> int:
        return self.n_outputs + self.n_hidden_layers * self.hidden_width + self.n_visible

    @property
    def n_weights(self) -> int:
        """Scalar weights in one full (current) bank."""
        return weight_counts(self).current

    @property
    def n_banks(self) -> int:
        return self.bptt_extent if self.weight_mode == "per_instant" else 1

    # -- unit slices within one instant ------------------------------------

    def output_units(self) -> slice:
        return slice(0, self.n_outputs)

    def hidden_units(self, layer: int) -> slice:
        """Units of hidden layer ``layer`` (0-based, bottom-up)."""
        start = self.n_outputs + layer * self.hidden_width
        return slice(start, start + self.hidden_width)

    def visible_units(self) -> slice:
        start = self.n_outputs + self.n_hidden_layers * self.hidden_width
        return slice(start, start + self.n_visible)

    def as_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "n_visible": self.n_visible,
            "n_hidden_layers": self.n_hidden_layers,
            "hidden_width": self.hidden_width,
            "n_outputs": self.n_outputs,
            "bptt_extent": self.bptt_extent,
            "activation": self.activation,
            "output_activation": self.output_activation,
            "weight_mode": self.weight_mode,
        }


@dataclass(frozen=True)
class SectionCounts:
    output: int
    hidden: int
    visible: int
    past_banks: int

    @property
    def current(self) -> int:
        return self.output + self.hidden + self.visible

    @property
    def total(self) -> int:
        return self.current + self.past_banks


def weight_counts(config: NetworkConfig) -> SectionCounts:
    n_h, n_l = config.hidden_width, config.n_hidden_layers
    output = config.n_outputs * (1 + n_h)
    hidden = n_h * (1 + config.n_visible + n_h) + (n_l - 1) * n_h * (1 + 2 * n_h)
    visible = config.n_visible * (1 + config.n_inputs)
    past = (config.n_banks - 1) * (hidden + visible)
    return SectionCounts(output=output, hidden=hidden, visible=visible, past_banks=past)


@dataclass(frozen=True)
class Section:
    """One weight matrix inside a bank: name, shape and offset in the bank."""

    name: str
    rows: int
    cols: int
    offset: int

    @property
    def size(self) -> int:
        return self.rows * self.cols


def bank_sections(config: NetworkConfig) -> list[Section]:
    """Sections of a full bank in storage order (output, hidden 1..N_L, visible)."""
    n_h = config.hidden_width
    shapes = [("output", config.n_outputs, 1 + n_h)]
    for layer in range(config.n_hidden_layers):
        below = config.n_visible if layer == 0 else n_h
        shapes.append((f"h{layer + 1}", n_h, 1 + below + n_h))
    shapes.append(("visible", config.n_visible, 1 + config.n_inputs))
    sections, offset = [], 0
    for name, rows, cols in shapes:
        sections.append(Section(name, rows, cols, offset))
        offset += rows * cols
    return sections


class IndexMap:
    """Invertible map between joint-vector indices and named state elements.

    The joint vector holds unit outputs for lags 0..B (``(B+1) * n_units``
    entries, lag 0 first) followed by the weights: the full current bank, then
    the hidden+visible part of past banks 1..B-1 (``per_instant`` only).
    Indices are 0-based; index ``i`` here is element ``i + 1`` of the
    1-based layout.
    """

    def __init__(self, config: NetworkConfig):
        self.config = config
        self.sections = bank_sections(config)
        counts = weight_counts(config)
        self.n_output_weights = counts.output
        self.n_bank_weights = counts.current
        self.n_vh_weights = counts.hidden + counts.visible
        self.n_weights_total = counts.total
        self.weight_start = (config.bptt_extent + 1) * config.n_units
        self.size = self.weight_start + self.n_weights_total

    def output_index(self, lag: int, unit: int | np.ndarray):
        return lag * self.config.n_units + unit

    def bank_start(self, bank: int) -> int:
        """Joint index of the first weight of ``bank`` (its output section for
        bank 0, its first hidden section otherwise)."""
        if bank == 0:
            return self.weight_start
        return self.weight_start + self.n_bank_weights + (bank - 1) * self.n_vh_weights

    def section_start(self, bank: int, name: str) -> int:
        section = self.section(name)
        if bank == 0:
            return self.weight_start + section.offset
        if name == "output":
            raise KeyError("past banks carry no output section")
        return self.bank_start(bank) + section.offset - self.n_output_weights

    def section(self, name: str) -> Section:
        for section in self.sections:
            if section.name == name:
                return section
        raise KeyError(name)

    def decode(self, index: int) -> tuple:
        """Return ``("y", lag, unit)`` or ``("w", bank, section, row, col)``."""
        if not 0 <= index < self.size:
            raise IndexError(index)
        if index < self.weight_start:
            lag, unit = divmod(index, self.config.n_units)
            return ("y", lag, unit)
        rel = index - self.weight_start
        if rel < self.n_bank_weights:
            bank, offset = 0, rel
        else:
            bank_minus_1, off = divmod(rel - self.n_bank_weights, self.n_vh_weights)
            bank, offset = bank_minus_1 + 1, off + self.n_output_weights
        for section in self.sections:
            if section.offset <= offset < section.offset + section.size:
                row, col = divmod(offset - section.offset, section.cols)
                return ("w", bank, section.name, row, col)
        raise AssertionError("unreachable")

    def label(self, index: int) -> str:
        parts = self.decode(index)
        if parts[0] == "y":
            _, lag, unit = parts
            return f"y[-{lag}].{self._unit_name(unit)}"
        _, bank, name, row, col = parts
        return f"w[-{bank}].{name}[{row},{col}]"

    def _unit_name(self, unit: int) -> str:
        cfg = self.config
        if unit < cfg.n_outputs:
            return f"z{unit}"
        vis = cfg.visible_units()
        if unit >= vis.start:
            return f"v{unit - vis.start}"
        layer, j = divmod(unit - cfg.n_outputs, cfg.hidden_width)
        return f"h{layer + 1}.{j}"

    @cached_property
    def labels(self) -> list[str]:
        return [self.label(i) for i in range(self.size)]

    def read(self, state: "NetworkState", index: int) -> float:
        ref = self._locate(state, index)
        return float(ref[0][ref[1]])

    def write(self, state: "NetworkState", index: int, value: float) -> None:
        array, pos = self._locate(state, index)
        array[pos] = value
        if index >= self.weight_start:
            state.weight_version += 1

    def _locate(self, state, index):
        parts = self.decode(index)
        if parts[0] == "y":
            _, lag, unit = parts
            return state.outputs, (state.lag_slot(lag), unit)
        _, bank, name, row, col = parts
        section = self.section(name)
        pos = section.offset + row * section.cols + col
        if name == "output":
            return state.output_weights, pos
        return state.vh_banks, (state.bank_slot(bank), pos - self.n_output_weights)


class NetworkState:
    """Unit-output history, weight banks and retained inputs of one network.

    All histories are ring buffers of ``B + 1`` instants addressed by lag
    (0 = current).  With ``storage="copy"`` every advance physically shifts the
    buffers instead; the two storages are observationally identical and the
    copy variant exists as a test oracle.
    """

    def __init__(self, config: NetworkConfig, storage: str = "circular"):
        if storage not in STORAGE_MODES:
            raise ValueError(f"unknown storage {storage!r}")
        self.config = config
        self.storage = storage
        self.index_map = IndexMap(config)
        n_slots = config.bptt_extent + 1
        self.outputs = np.zeros((n_slots, config.n_units))
        self.preacts = np.zeros((n_slots, config.n_units))
        self.inputs = np.zeros((n_slots, config.n_inputs))
        self.output_weights = np.zeros(self.index_map.n_output_weights)
        self.vh_banks = np.zeros((config.n_banks, self.index_map.n_vh_weights))
        self.pointer = 0
        self.bank_pointer = 0
        self.steps = 0
        self.weight_version = 0
        self._build_views()

    def _build_views(self):
        sections = self.index_map.sections
        out = sections[0]
        self._output_matrix = self.output_weights.reshape(out.rows, out.cols)
        n_out = self.index_map.n_output_weights
        self._bank_matrices = []
        for slot in range(self.config.n_banks):
            mats = []
            for section in sections[1:]:
                start = section.offset - n_out
                mats.append(self.vh_banks[slot, start:start + section.size]
                            .reshape(section.rows, section.cols))
            self._bank_matrices.append(mats)

    # -- addressing ---------------------------------------------------------

    @property
    def depth(self) -> int:
        """Number of instants the retained window actually spans (<= B)."""
        return min(self.steps, self.config.bptt_extent)

    def lag_slot(self, lag: int) -> int:
        if self.storage == "copy":
            return lag
        return (self.pointer - lag) % (self.config.bptt_extent + 1)

    def bank_slot(self, bank: int) -> int:
        if self.storage == "copy":
            return bank
        return (self.bank_pointer - bank) % self.config.n_banks

    def bank_for_lag(self, lag: int) -> int:
        return lag if self.config.weight_mode == "per_instant" else 0

    def output_matrix(self) -> np.ndarray:
        return self._output_matrix

    def hidden_matrices(self, bank: int = 0) -> list[np.ndarray]:
        return self._bank_matrices[self.bank_slot(bank)][:-1]

    def visible_matrix(self, bank: int = 0) -> np.ndarray:
        return self._bank_matrices[self.bank_slot(bank)][-1]

    def outputs_at(self, lag: int) -> np.ndarray:
        return self.outputs[self.lag_slot(lag)]

    def preacts_at(self, lag: int) -> np.ndarray:
        return self.preacts[self.lag_slot(lag)]

    def input_at(self, lag: int) -> np.ndarray:
        return self.inputs[self.lag_slot(lag)]

    # -- weights as one vector (joint-vector weight order) -----------------

    def weight_vector(self) -> np.ndarray:
        parts = [self.output_weights]
        for bank in range(self.config.n_banks):
            parts.append(self.vh_banks[self.bank_slot(bank)])
        return np.concatenate(parts)

    def set_weight_vector(self, w: np.ndarray) -> None:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.index_map.n_weights_total,):
            raise ValueError(f"expected {self.index_map.n_weights_total} weights, got {w.shape}")
        n_out, n_vh = self.index_map.n_output_weights, self.index_map.n_vh_weights
        self.output_weights[:] = w[:n_out]
        for bank in range(self.config.n_banks):
            start = n_out + bank * n_vh
            self.vh_banks[self.bank_slot(bank)] = w[start:start + n_vh]
        self.weight_version += 1

    def add_to_weights(self, delta: np.ndarray) -> None:
        n_out, n_vh = self.index_map.n_output_weights, self.index_map.n_vh_weights
        self.output_weights += delta[:n_out]
        for bank in range(self.config.n_banks):
            start = n_out + bank * n_vh
            self.vh_banks[self.bank_slot(bank)] += delta[start:start + n_vh]
        self.weight_version += 1

    def copy(self) -> "NetworkState":
        other = NetworkState(self.config, self.storage)
        for name in ("outputs", "preacts", "inputs", "output_weights", "vh_banks"):
            getattr(other, name)[...] = getattr(self, name)
        other.pointer, other.bank_pointer = self.pointer, self.bank_pointer
        other.steps, other.weight_version = self.steps, self.weight_version
        return other


def init_network(config: NetworkConfig, seed: int = 0, init_halfwidth: float = 0.5,
                 storage: str = "circular") -> NetworkState:
    """Fresh state with zero history and weights uniform in [-h, +h]."""
    if init_halfwidth < 0:
        raise ValueError("init_halfwidth must be >= 0")
    state = NetworkState(config, storage)
    if init_halfwidth > 0:
        rng = np.random.default_rng(seed)
        w = rng.uniform(-init_halfwidth, init_halfwidth, state.index_map.n_weights_total)
        state.set_weight_vector(w)
    return state


def advance_instant(state: NetworkState) -> None:
    """Move to the next instant.

    Circular storage only moves pointers.  In per_instant mode the freed bank
    slot (the retired oldest bank) is seeded with the current weights so that
    the new instant starts from the latest values.
    """
    cfg = state.config
    if state.storage == "circular":
        state.pointer = (state.pointer + 1) % (cfg.bptt_extent + 1)
        if cfg.n_banks > 1:
            new = (state.bank_pointer + 1) % cfg.n_banks
            state.vh_banks[new] = state.vh_banks[state.bank_pointer]
            state.bank_pointer = new
    else:
        for name in ("outputs", "preacts", "inputs"):
            buf = getattr(state, name)
            buf[1:] = buf[:-1].copy()
        if cfg.n_banks > 1:
            state.vh_banks[1:] = state.vh_banks[:-1].copy()


def evaluate_instant(state: NetworkState, lag: int) -> np.ndarray:
    """(Re)compute all unit outputs at ``lag`` from its stored input, the
    outputs at ``lag + 1`` and the weights bank for that lag."""
    cfg = state.config
    slot = state.lag_slot(lag)
    y, a = state.outputs[slot], state.preacts[slot]
    prev = state.outputs[state.lag_slot(lag + 1)]
    bank = state.bank_for_lag(lag)
    act = cfg.activation

    wv = state.visible_matrix(bank)
    vis = cfg.visible_units()
    a[vis] = wv[:, 0] + wv[:, 1:] @ state.inputs[slot]
    y[vis] = activate(act, a[vis])

    below = y[vis]
    for layer, wh in enumerate(state.hidden_matrices(bank)):
        units = cfg.hidden_units(layer)
        k = below.shape[0]
        pre = wh[:, 0] + wh[:, 1:1 + k] @ below
        pre += wh[:, 1 + k:] @ prev[units]
        a[units] = pre
        y[units] = activate(act, pre)
        below = y[units]

    wz = state.output_matrix()
    out = cfg.output_units()
    a[out] = wz[:, 0] + wz[:, 1:] @ below
    y[out] = activate(cfg.output_activation, a[out])
    return y[out]


def forward_step(state: NetworkState, x) -> np.ndarray:
    """Advance one instant, record ``x`` and return the network outputs."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != state.config.n_inputs:
        raise ValueError(f"expected {state.config.n_inputs} inputs, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    advance_instant(state)
    state.inputs[state.lag_slot(0)] = x
    state.steps += 1
    return evaluate_instant(state, 0).copy()


def joint_vector(state: NetworkState) -> tuple[np.ndarray, IndexMap]:
    """Flatten outputs (lag 0..B) followed by all weights (bank 0..B-1)."""
    cfg = state.config
    outputs = np.concatenate([state.outputs_at(lag) for lag in range(cfg.bptt_extent + 1)])
    return np.concatenate([outputs, state.weight_vector()]), state.index_map
