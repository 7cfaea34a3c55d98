"""Plain-text model checkpoints.

Layout::

    DRNN 1
    n_inputs=1
    ...                  (every NetworkConfig field, one key=value per line)
    n_weights=7
    0.123...             (one weight per line, joint-vector order)

Floats are written with ``repr`` so load/save round-trips byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .netcore import NetworkConfig, NetworkState, init_network

HEADER = "DRNN 1"
_INT_FIELDS = ("n_inputs", "n_visible", "n_hidden_layers", "hidden_width",
               "n_outputs", "bptt_extent")


class CheckpointError(ValueError):
    pass


def dumps(state: NetworkState) -> str:
    lines = [HEADER]
    lines += [f"{key}={value}" for key, value in state.config.as_dict().items()]
    weights = state.weight_vector()
    lines.append(f"n_weights={weights.size}")
    lines += [repr(float(w)) for w in weights]
    return "\n".join(lines) + "\n"


def loads(text: str) -> NetworkState:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise CheckpointError("missing 'DRNN 1' header")
    fields: dict = {}
    i = 1
    while i < len(lines) and "=" in lines[i]:
        key, _, value = lines[i].partition("=")
        fields[key.strip()] = value.strip()
        i += 1
    try:
        n_weights = int(fields.pop("n_weights"))
        kwargs = {k: int(fields[k]) for k in _INT_FIELDS}
        for key in ("activation", "output_activation", "weight_mode"):
            kwargs[key] = fields[key]
        config = NetworkConfig(**kwargs)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint config: {exc}") from exc
    body = lines[i:]
    if len(body) != n_weights:
        raise CheckpointError(f"expected {n_weights} weights, found {len(body)}")
    try:
        weights = np.array([float(line) for line in body])
    except ValueError as exc:
        raise CheckpointError(f"bad weight line: {exc}") from exc
    state = init_network(config, init_halfwidth=0.0)
    state.set_weight_vector(weights)
    return state


def save(state: NetworkState, path) -> None:
    Path(path).write_text(dumps(state))


def load(path) -> NetworkState:
    return loads(Path(path).read_text())
