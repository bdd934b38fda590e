import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqedmd.dictionary import identity_dictionary, make_tps_dictionary
from dqedmd.dynamics import (LINEAR_TEST_MATRIX, PENDULUM, SimConfig,
                             build_snapshot_pairs, get_system,
                             simulate_trajectories)
from dqedmd.edmd import (EDMD, FitReport, KoopmanEstimate, fit_decoder,
                         fit_dq_edmd, fit_edmd, fit_least_squares,
                         koopman_modes, load_model,
                         mean_relative_prediction_error, predict,
                         relative_matrix_error, save_model)

A = LINEAR_TEST_MATRIX


@pytest.fixture(scope="module")
def linear_data():
    ts = simulate_trajectories(get_system("linear"),
                               SimConfig(1.0, 50, 5, ((-1, 1), (-1, 1)), 0))
    return ts


@pytest.fixture(scope="module")
def pendulum_data():
    ts = simulate_trajectories(PENDULUM, SimConfig(0.01, 300, 20, ((-1, 1), (-1, 1)), 0))
    return build_snapshot_pairs(ts)


def test_identity_action_when_phi_next_equals_phi():
    Phi = np.random.default_rng(0).normal(size=(4, 30))
    K, report = fit_least_squares(Phi, Phi)
    np.testing.assert_allclose(K, np.eye(4), atol=1e-12)
    assert report.gram_rank == 4
    assert report.residual < 1e-20


def test_identity_action_rank_deficient():
    rng = np.random.default_rng(1)
    Phi = rng.normal(size=(2, 30))
    Phi = np.vstack([Phi, Phi[0] + Phi[1]])  # rank 2
    K, report = fit_least_squares(Phi, Phi)
    assert report.gram_rank == 2
    np.testing.assert_allclose(K @ Phi, Phi, atol=1e-10)


def test_linear_generator_recovered(linear_data):
    X, Xn = build_snapshot_pairs(linear_data)
    K, _ = fit_least_squares(X, Xn)
    np.testing.assert_allclose(K, A, atol=1e-8)


def test_fit_is_locally_optimal(pendulum_data):
    X, Xn = pendulum_data
    d = make_tps_dictionary(2, 10, (-1, 1), seed=0)
    Phi, Phin = d.lift_snapshots(X), d.lift_snapshots(Xn)
    K, report = fit_least_squares(Phi, Phin)
    T = Phi.shape[1]
    rng = np.random.default_rng(3)
    scale = 1e-3 * np.linalg.norm(K)
    for _ in range(100):
        delta = rng.normal(size=K.shape)
        delta *= scale / np.linalg.norm(delta)
        r = np.sum((Phin - (K + delta) @ Phi) ** 2) / T
        assert r >= report.residual


def test_normal_equations(pendulum_data):
    X, Xn = pendulum_data
    d = make_tps_dictionary(2, 20, (-1, 1), seed=1)
    Phi, Phin = d.lift_snapshots(X), d.lift_snapshots(Xn)
    K, _ = fit_least_squares(Phi, Phin)
    rhs = Phin @ Phi.T
    assert np.linalg.norm(K @ Phi @ Phi.T - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        fit_least_squares(np.ones((2, 5)), np.ones((2, 4)))


def test_decoder_identity_and_zero():
    X = np.random.default_rng(0).normal(size=(2, 20))
    np.testing.assert_allclose(fit_decoder(X, X), np.eye(2), atol=1e-12)
    np.testing.assert_array_equal(fit_decoder(np.zeros((2, 20)), X), 0.0)


def test_decoder_reproduces_training_states(pendulum_data):
    X, _ = pendulum_data
    d = make_tps_dictionary(2, 10, (-1, 1), seed=2)
    Phi = d.lift_snapshots(X)
    C = fit_decoder(X, Phi)
    assert np.max(np.abs(C @ Phi - X)) < 1e-8


def test_identity_dictionary_is_dmd():
    rng = np.random.default_rng(5)
    X, Xn = rng.normal(size=(3, 40)), rng.normal(size=(3, 40))
    est = fit_edmd(X, Xn, identity_dictionary(3))
    # independent route: least squares on the transposed problem
    K_lstsq = np.linalg.lstsq(X.T, Xn.T, rcond=None)[0].T
    assert relative_matrix_error(K_lstsq, est.K) < 1e-10
    assert fit_edmd(X, Xn).dictionary.is_identity


def test_dq_with_passthrough_quantizer_matches_bitwise(pendulum_data):
    X, Xn = pendulum_data
    d = make_tps_dictionary(2, 10, (-1, 1), seed=2)
    a, b = fit_edmd(X, Xn, d), fit_dq_edmd(X.copy(), Xn.copy(), d)
    np.testing.assert_array_equal(a.K, b.K)
    np.testing.assert_array_equal(a.C, b.C)


def test_predict_constant_for_identity_operator():
    est = KoopmanEstimate(np.eye(2), np.eye(2), identity_dictionary(2),
                          FitReport(0.0, 2, 1.0, 0.0))
    out = predict(est, [0.4, -0.1], 5)
    np.testing.assert_array_equal(out, np.tile([0.4, -0.1], (5, 1)))


def test_predict_single_step_and_matrix_powers(linear_data):
    X, Xn = build_snapshot_pairs(linear_data)
    d = make_tps_dictionary(2, 3, (-1, 1), seed=0)
    est = fit_edmd(X, Xn, d)
    x0 = np.array([0.3, -0.7])
    z0 = d.lift(x0)
    np.testing.assert_allclose(predict(est, x0, 1)[0], est.C @ est.K @ z0)
    roll = predict(est, x0, 20)
    for t in range(1, 21):
        ref = est.C @ np.linalg.matrix_power(est.K, t) @ z0
        np.testing.assert_allclose(roll[t - 1], ref, rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        predict(est, x0, 0)


def test_predict_linear_model(linear_data):
    X, Xn = build_snapshot_pairs(linear_data)
    est = fit_edmd(X, Xn)
    x0 = np.array([0.8, -0.5])
    roll = predict(est, x0, 50)
    for t in range(1, 51):
        np.testing.assert_allclose(roll[t - 1], np.linalg.matrix_power(A, t) @ x0, atol=1e-6)


def _estimate(K, C=None):
    N = K.shape[0]
    return KoopmanEstimate(K, np.eye(N) if C is None else C, identity_dictionary(N),
                           FitReport(0.0, N, 1.0, 0.0))


def test_modes_diagonal():
    m = koopman_modes(_estimate(np.diag([0.5, 0.9])))
    np.testing.assert_allclose(m.eigenvalues, [0.9, 0.5])
    np.testing.assert_allclose(np.abs(m.modes), [[0, 1], [1, 0]])


def test_modes_triangular_and_residuals():
    est = _estimate(A.copy())
    m = koopman_modes(est)
    np.testing.assert_allclose(m.eigenvalues.real, [0.9, 0.8], atol=1e-14)
    for i in range(2):
        xi = m.eigenvectors[:, i]
        assert np.linalg.norm(A @ xi - m.eigenvalues[i] * xi) <= 1e-8 * np.linalg.norm(A)


def test_pendulum_dominant_eigenvalue_slightly_unstable():
    ts = simulate_trajectories(PENDULUM, SimConfig(0.01, 1000, 50, ((-1, 1), (-1, 1)), 0))
    est = fit_edmd(*build_snapshot_pairs(ts))
    lam = koopman_modes(est).eigenvalues
    # linearization at the origin: exp((0.005 +- i sqrt(1 - 0.005^2)) dt)
    lin_modulus = np.exp(0.005 * 0.01)
    assert np.abs(lam[0]) > 1
    assert abs(np.abs(lam[0]) - lin_modulus) < 1e-4
    assert abs(np.abs(np.angle(lam[0])) - 0.01) < 1.5e-3


def test_relative_matrix_error_examples():
    K = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert relative_matrix_error(K, K) == 0.0
    assert relative_matrix_error(K, 2 * K) == pytest.approx(1.0)
    assert relative_matrix_error(np.eye(2), np.eye(2) + np.diag([0.1, 0])) == pytest.approx(
        0.1 / np.sqrt(2))
    with pytest.raises(ValueError):
        relative_matrix_error(np.zeros((2, 2)), K)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_relative_error_orthogonal_invariance(seed):
    rng = np.random.default_rng(seed)
    K1, K2 = rng.normal(size=(2, 4, 4))
    Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    a = relative_matrix_error(K1, K2)
    b = relative_matrix_error(Q.T @ K1 @ Q, Q.T @ K2 @ Q)
    assert b == pytest.approx(a, rel=1e-12)


def test_mean_relative_prediction_error_examples():
    truth = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert mean_relative_prediction_error(truth, truth) == 0.0
    assert mean_relative_prediction_error(truth, np.zeros_like(truth)) == 1.0
    pred = np.array([[1.0, 0.1], [0.0, 1.0]])
    assert mean_relative_prediction_error(truth, pred) == pytest.approx(0.05)


def test_mean_relative_prediction_error_skips_zero_states():
    truth = np.array([[0.0, 0.0], [1.0, 0.0]])
    pred = np.array([[5.0, 5.0], [1.1, 0.0]])
    mean, skipped = mean_relative_prediction_error(truth, pred, return_skipped=True)
    assert skipped == 1 and mean == pytest.approx(0.1)
    with pytest.raises(ValueError):
        mean_relative_prediction_error(np.zeros((3, 2)), np.zeros((3, 2)))


def test_model_file_round_trip(tmp_path, pendulum_data):
    X, Xn = pendulum_data
    est = fit_edmd(X, Xn, make_tps_dictionary(2, 5, (-1, 1), seed=4),
                   meta={"quantizer": {"word_length": 8}})
    path = tmp_path / "model.json"
    save_model(est, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.K, est.K)
    np.testing.assert_array_equal(back.C, est.C)
    assert back.dictionary == est.dictionary
    assert back.fit == est.fit
    assert back.meta == {"quantizer": {"word_length": 8}}


def test_load_model_rejects_other_files(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_model(p)


def test_estimate_shape_validation():
    with pytest.raises(ValueError):
        KoopmanEstimate(np.eye(3), np.eye(2), identity_dictionary(2),
                        FitReport(0.0, 2, 1.0, 0.0))


def test_sklearn_estimator(linear_data):
    from sklearn.base import clone

    est = EDMD()
    assert est.get_params() == {"dictionary": None, "rcond_factor": 64.0}
    X, Xn = build_snapshot_pairs(linear_data)
    est.fit(X.T, Xn.T)
    np.testing.assert_allclose(est.koopman_matrix_, A, atol=1e-8)
    np.testing.assert_allclose(est.predict(X.T[:3]), Xn.T[:3], atol=1e-8)
    assert est.score(X.T, Xn.T) > -1e-8
    traj = EDMD().fit_trajectories(linear_data)
    np.testing.assert_array_equal(traj.koopman_matrix_, est.koopman_matrix_)
    fresh = clone(est)
    assert not hasattr(fresh, "estimate_")
    with pytest.raises(ValueError):
        est.fit(X.T, Xn.T[:-1])
