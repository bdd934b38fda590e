import math

import numpy as np
import pytest

from dqedmd.dynamics import (LINEAR_TEST_MATRIX, PENDULUM, SYSTEMS, VAN_DER_POL,
                             SimConfig, TrajectorySet, build_snapshot_pairs,
                             get_system, linear_flow_model, rk4_step,
                             simulate_trajectories, vector_field)

DECAY = linear_flow_model([[-1.0]])


def test_vector_fields():
    np.testing.assert_array_equal(vector_field(PENDULUM, [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(vector_field(PENDULUM, [math.pi / 2, 0.0]), [0.0, -1.0])
    np.testing.assert_array_equal(vector_field(VAN_DER_POL, [1.0, 1.0]), [1.0, -1.0])
    np.testing.assert_array_equal(vector_field(VAN_DER_POL, [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize("model", [PENDULUM, VAN_DER_POL])
def test_origin_is_fixed(model):
    np.testing.assert_array_equal(rk4_step(model, [0.0, 0.0], 0.01), [0.0, 0.0])


def test_rk4_single_step_against_exponential():
    x1 = rk4_step(DECAY, np.array([1.0]), 0.1)[0]
    # the RK4 polynomial 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
    assert x1 == pytest.approx(0.9048375, abs=1e-15)
    assert abs(x1 - math.exp(-0.1)) < 1e-7


def _global_error(dt, horizon=1.0):
    x = np.array([1.0])
    for _ in range(round(horizon / dt)):
        x = rk4_step(DECAY, x, dt)
    return abs(x[0] - math.exp(-horizon))


def test_rk4_halving_step_gives_sixteenfold_reduction():
    ratio = _global_error(0.1) / _global_error(0.05)
    assert 15.0 < ratio < 17.0


def test_rk4_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        rk4_step(DECAY, [1.0], 0.0)


def test_public_system_list_hides_test_models():
    assert sorted(SYSTEMS) == ["pendulum", "vanderpol"]
    lin = get_system("linear")
    np.testing.assert_array_equal(lin.step_map(np.array([1.0, 1.0])),
                                  LINEAR_TEST_MATRIX @ [1.0, 1.0])
    with pytest.raises(ValueError):
        get_system("lorenz")


def test_simulate_protocol_shapes_and_boxes():
    cfg = SimConfig(dt=0.01, steps_per_trajectory=20, n_trajectories=7,
                    init_box=((-2, 2), (-2, 2)), seed=4)
    ts = simulate_trajectories(VAN_DER_POL, cfg)
    assert ts.states.shape == (7, 21, 2)
    assert np.all(np.abs(ts.states[:, 0]) <= 2)
    again = simulate_trajectories(VAN_DER_POL, cfg)
    np.testing.assert_array_equal(ts.states, again.states)
    other = simulate_trajectories(VAN_DER_POL, SimConfig(0.01, 20, 7, ((-2, 2), (-2, 2)), 5))
    assert not np.array_equal(ts.states, other.states)


def test_trajectory_prefix_is_stable_in_m():
    # each trajectory owns its stream: adding trajectories leaves earlier ones unchanged
    small = simulate_trajectories(PENDULUM, SimConfig(0.01, 10, 3, ((-1, 1), (-1, 1)), 2))
    big = simulate_trajectories(PENDULUM, SimConfig(0.01, 10, 6, ((-1, 1), (-1, 1)), 2))
    np.testing.assert_array_equal(small.states, big.states[:3])


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0), dict(steps_per_trajectory=0), dict(n_trajectories=0),
    dict(init_box=((1, -1), (0, 1))),
])
def test_sim_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_snapshot_pairs_single_pair():
    X, Xn = build_snapshot_pairs(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    np.testing.assert_array_equal(X, [[1.0], [2.0]])
    np.testing.assert_array_equal(Xn, [[3.0], [4.0]])


def test_snapshot_pairs_layout():
    states = np.arange(2 * 4 * 2, dtype=float).reshape(2, 4, 2)
    X, Xn = build_snapshot_pairs(TrajectorySet(states))
    assert X.shape == (2, 6) and Xn.shape == (2, 6)
    np.testing.assert_array_equal(X[:, 3], states[1, 0])
    np.testing.assert_array_equal(Xn[:, 2], states[0, 3])
    np.testing.assert_array_equal(Xn[:, 3], states[1, 1])


def test_snapshot_pairs_are_one_step_images():
    ts = simulate_trajectories(PENDULUM, SimConfig(0.01, 50, 4, ((-1, 1), (-1, 1)), 0))
    X, Xn = build_snapshot_pairs(ts)
    np.testing.assert_array_equal(rk4_step(PENDULUM, X, 0.01), Xn)


def test_snapshot_pairs_reject_short():
    with pytest.raises(ValueError):
        build_snapshot_pairs(np.zeros((1, 1, 2)))
