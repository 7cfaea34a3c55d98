import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drnn.gradient import (
    StaleStateError,
    dump_csv,
    finite_difference_jacobian,
    local_jacobians,
    output_jacobian,
    replay_output,
    state_jacobian,
    weight_jacobian,
)
from drnn.netcore import NetworkConfig, forward_step, init_network, joint_vector


def warmed(cfg, seed=0, steps=6, halfwidth=1.0):
    state = init_network(cfg, seed=seed, init_halfwidth=halfwidth)
    rng = np.random.default_rng(seed + 100)
    for _ in range(steps):
        forward_step(state, rng.uniform(-1, 1, cfg.n_inputs))
    return state


def assert_close(actual, expected):
    np.testing.assert_allclose(actual, expected, rtol=1e-5, atol=1e-8)


CONFIGS = [
    NetworkConfig(1, 1, 1, 1, 1),
    NetworkConfig(1, 1, 1, 1, 1, bptt_extent=2, weight_mode="per_instant"),
    NetworkConfig(1, 1, 2, 1, 1),
    NetworkConfig(2, 3, 2, 2, 2, bptt_extent=3),
    NetworkConfig(2, 2, 3, 2, 1, bptt_extent=4, weight_mode="per_instant"),
    NetworkConfig(3, 2, 1, 4, 2, bptt_extent=2, activation="logistic"),
]


@pytest.mark.parametrize("cfg", CONFIGS)
def test_output_jacobian_matches_central_differences(cfg):
    state = warmed(cfg, seed=1)
    jac = output_jacobian(state)
    assert jac.H.shape == (cfg.n_outputs, state.index_map.size)
    assert_close(jac.H, finite_difference_jacobian(state, include_state=True))


@pytest.mark.parametrize("cfg", CONFIGS)
def test_weight_jacobian_is_the_weight_slice_of_h(cfg):
    state = warmed(cfg, seed=2)
    full = output_jacobian(state)
    np.testing.assert_allclose(weight_jacobian(state).J, full.H[:, state.index_map.weight_start:],
                               rtol=0, atol=1e-15)
    np.testing.assert_array_equal(full.J, full.H[:, state.index_map.weight_start:])


def test_jacobian_early_in_run_uses_available_instants():
    cfg = NetworkConfig(1, 2, 2, 2, 1, bptt_extent=4, weight_mode="per_instant")
    state = warmed(cfg, steps=2)
    J = weight_jacobian(state).J
    assert_close(J, finite_difference_jacobian(state))
    # banks older than the run have no influence yet
    imap = state.index_map
    assert np.all(J[:, imap.bank_start(2) - imap.weight_start:] == 0)


def test_state_columns_beyond_depth_are_zero():
    cfg = NetworkConfig(1, 1, 1, 2, 1, bptt_extent=2)
    state = warmed(cfg)
    H = output_jacobian(state).H
    imap = state.index_map
    # visible/output units at the boundary lag feed nothing
    for lag in (2,):
        assert H[0, imap.output_index(lag, 0)] == 0.0
        assert H[0, imap.output_index(lag, cfg.visible_units().start)] == 0.0


def _perturbed_next(prev, x, index, value):
    trial = prev.copy()
    trial.index_map.write(trial, index, value)
    forward_step(trial, x)
    return joint_vector(trial)[0]


@pytest.mark.parametrize("cfg", CONFIGS)
def test_state_jacobian_matches_previous_state_perturbation(cfg):
    state = warmed(cfg, seed=3)
    prev = state.copy()
    x = np.linspace(-0.5, 0.5, cfg.n_inputs)
    forward_step(state, x)
    F = state_jacobian(state).F
    imap = state.index_map
    step = 1e-6
    prev_vec = joint_vector(prev)[0]
    oracle = np.empty_like(F)
    for j in range(imap.size):
        plus = _perturbed_next(prev, x, j, prev_vec[j] + step)
        minus = _perturbed_next(prev, x, j, prev_vec[j] - step)
        oracle[:, j] = (plus - minus) / (2 * step)
    assert_close(F, oracle)


def test_state_jacobian_weight_block_is_identity_when_shared():
    cfg = NetworkConfig(1, 2, 1, 2, 1, bptt_extent=2)
    state = warmed(cfg)
    F = state_jacobian(state).F
    w0 = state.index_map.weight_start
    np.testing.assert_array_equal(F[w0:, w0:], np.eye(F.shape[0] - w0))


def test_derivatives_need_a_forward_step():
    state = init_network(NetworkConfig(1, 1, 1, 1, 1))
    for fn in (output_jacobian, weight_jacobian, state_jacobian):
        with pytest.raises(StaleStateError):
            fn(state)


def test_replay_reproduces_current_outputs():
    cfg = NetworkConfig(2, 2, 2, 3, 2, bptt_extent=3, weight_mode="per_instant")
    state = warmed(cfg, steps=9)
    np.testing.assert_allclose(replay_output(state), state.outputs_at(0)[cfg.output_units()],
                               rtol=0, atol=1e-14)


def test_jacobian_stamp_tracks_steps_and_weights():
    state = warmed(NetworkConfig(1, 1, 1, 1, 1))
    stamp = weight_jacobian(state).instant_stamp
    state.add_to_weights(np.zeros(7))
    assert weight_jacobian(state).instant_stamp != stamp


def test_local_jacobians_of_current_instant():
    cfg = NetworkConfig(1, 1, 2, 2, 1, bptt_extent=2)
    state = warmed(cfg)
    layers = local_jacobians(state)
    assert [lj.name for lj in layers] == ["visible", "h1", "h2", "output"]
    out = layers[-1]
    a = state.preacts_at(0)[0]
    h = state.outputs_at(0)[cfg.hidden_units(1)]
    fp = 1 - np.tanh(a) ** 2
    np.testing.assert_allclose(out.weights[0], fp * np.concatenate(([1.0], h)), rtol=1e-15)
    np.testing.assert_allclose(out.upstream[0], fp * state.output_matrix()[0, 1:], rtol=1e-15)
    assert layers[1].recurrent.shape == (2, 2)


def test_dump_csv_labels_rows_and_columns(tmp_path):
    cfg = NetworkConfig(1, 1, 1, 1, 1)
    state = warmed(cfg)
    jac = output_jacobian(state)
    path = tmp_path / "j.csv"
    dump_csv(jac, state, path, "J")
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["row", "col", "value"]
    assert len(rows) == 1 + 7
    assert rows[1][:2] == ["z0", "w[-0].output[0,0]"]
    with pytest.raises(ValueError):
        dump_csv(jac, state, path, "F")


@settings(max_examples=25, deadline=None)
@given(n_layers=st.integers(1, 3), width=st.sampled_from([1, 2, 4]),
       extent=st.sampled_from([1, 2, 4]), mode=st.sampled_from(["shared", "per_instant"]),
       seed=st.integers(0, 10_000))
def test_weight_jacobian_property(n_layers, width, extent, mode, seed):
    cfg = NetworkConfig(2, 2, n_layers, width, 1, bptt_extent=extent, weight_mode=mode)
    state = warmed(cfg, seed=seed, steps=extent + 2)
    assert_close(weight_jacobian(state).J, finite_difference_jacobian(state))
