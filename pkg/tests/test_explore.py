import csv
import itertools

import numpy as np
import pytest

from drnn.explore import (
    BANK_POSITION,
    EXPLORE_CONFIG,
    GridSpec,
    TopologyError,
    WEIGHT_NAMES,
    default_spec,
    explore_error_surface,
    grid_size,
)
from drnn.netcore import NetworkConfig, forward_step, init_network

TARGET = 0.5 * np.sin(2 * np.pi * np.arange(200) / 32)


def scalar_mse(w, target, length):
    """Plain-Python teacher-forced run of the 7-weight network."""
    v_b, v_in, h_b, h_vis, h_rec, o_b, o_hid = w
    h, total = 0.0, 0.0
    for k in range(length):
        v = np.tanh(v_b + v_in * target[k])
        h = np.tanh(h_b + h_vis * v + h_rec * h)
        z = np.tanh(o_b + o_hid * h)
        total += (z - target[k + 1]) ** 2
    return total / length


def toy_spec(length=40):
    return GridSpec(axes=((-1.0, 1.0), (-0.5, 1.5), (0.0, 0.5), (-1.0, 1.0),
                          (0.25, -0.75), (-0.2, 0.3), (-1.5, 1.0)), eval_length=length)


def test_default_grid_has_two_to_the_eighteen_points():
    spec = default_spec()
    assert spec.shape == (2, 2, 4, 4, 4, 32, 32)
    assert grid_size(spec) == 2 ** 18


def test_grid_size_is_the_product_of_list_lengths():
    spec = GridSpec.from_groups(visible=[-1, 1], hidden=np.linspace(-2, 2, 8, endpoint=False),
                                output=np.linspace(-2, 2, 32, endpoint=False))
    assert grid_size(spec) == 2 ** 2 * 8 ** 3 * 32 ** 2
    singleton = GridSpec(axes=((0.0,),) * 7)
    assert grid_size(singleton) == 1


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(axes=((0.0,),) * 6 + ((),))
    with pytest.raises(ValueError):
        GridSpec(axes=((0.0,),) * 6 + ((2.0,),))
    with pytest.raises(ValueError):
        GridSpec(axes=((0.0,),) * 6)
    # the range is configurable
    GridSpec(axes=((0.0,),) * 6 + ((2.5,),), value_range=(-3.0, 3.0))


def test_toy_grid_matches_nested_loop_oracle():
    spec = toy_spec()
    tensor = explore_error_surface(spec, TARGET)
    for idx in itertools.product(*(range(n) for n in spec.shape)):
        w = [spec.axes[a][i] for a, i in enumerate(idx)]
        assert tensor.mse[idx] == scalar_mse(w, TARGET, spec.eval_length)


def test_singleton_grid_equals_the_network_forward_pass():
    rng = np.random.default_rng(4)
    w = rng.uniform(-2, 2, 7)
    spec = GridSpec(axes=tuple((v,) for v in w), eval_length=64)
    tensor = explore_error_surface(spec, TARGET)
    state = init_network(EXPLORE_CONFIG, init_halfwidth=0.0)
    bank = np.empty(7)
    bank[list(BANK_POSITION)] = w
    state.set_weight_vector(bank)
    errors = [(forward_step(state, [TARGET[k]])[0] - TARGET[k + 1]) ** 2 for k in range(64)]
    assert tensor.mse.reshape(-1)[0] == pytest.approx(np.mean(errors), rel=1e-14)


def test_projection_is_a_lower_bound():
    tensor = explore_error_surface(toy_spec(), TARGET)
    proj = tensor.projection
    for idx in itertools.product(*(range(n) for n in tensor.mse.shape)):
        assert proj[idx[0], idx[1], idx[3], idx[4]] <= tensor.mse[idx]
    for idx in itertools.product(*(range(n) for n in tensor.mse.shape[:5])):
        assert tensor.min_over_output[idx] == min(tensor.mse[idx].ravel())


def test_enumeration_order_and_workers_do_not_matter():
    spec = toy_spec(30)
    serial = explore_error_surface(spec, TARGET, chunk_size=7)
    n_chunks = -(-grid_size(spec) // 7)
    shuffled = explore_error_surface(spec, TARGET, chunk_size=7,
                                     order=np.random.default_rng(0).permutation(n_chunks))
    parallel = explore_error_surface(spec, TARGET, chunk_size=7, workers=2)
    np.testing.assert_array_equal(serial.mse, shuffled.mse)
    np.testing.assert_array_equal(serial.mse, parallel.mse)
    assert serial.visited == parallel.visited == grid_size(spec)


def test_topology_mismatch_is_rejected():
    with pytest.raises(TopologyError):
        explore_error_surface(toy_spec(), TARGET, config=NetworkConfig(1, 1, 2, 1, 1))


def test_short_target_is_rejected():
    with pytest.raises(ValueError):
        explore_error_surface(toy_spec(40), TARGET[:40])


def test_csv_exports(tmp_path):
    tensor = explore_error_surface(toy_spec(), TARGET)
    written = tensor.to_csv(tmp_path)
    names = sorted(p.name for p in written)
    assert "tensor.csv" in names and "output_slice.csv" in names
    assert sum(n.startswith("projection_v") for n in names) == 4
    rows = list(csv.reader(open(tmp_path / "tensor.csv")))
    assert rows[0] == list(WEIGHT_NAMES) + ["mse"]
    assert len(rows) == 1 + grid_size(toy_spec())
    assert float(rows[1][-1]) == tensor.mse.reshape(-1)[0]
    best = tensor.best_index
    slice_rows = list(csv.reader(open(tmp_path / "output_slice.csv")))
    assert len(slice_rows) == 1 + 4
    assert min(float(r[-1]) for r in slice_rows[1:]) == tensor.mse[best]
