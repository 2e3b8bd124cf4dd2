import numpy as np
import pytest
from scipy import stats

from ppe_edge.tracker import (
    CHI2_95_4DOF,
    KalmanFilter,
    KalmanState,
    SingularInnovation,
    kalman_predict,
    kalman_update,
    mahalanobis,
)

NOISELESS = KalmanFilter(process_noise_scale=0.0, measurement_noise_scale=1e-12)


def state(mean, cov=None):
    return KalmanState(np.asarray(mean, float), np.eye(8) if cov is None else cov)


def scalar_cv_filter(zs, p0=100.0):
    """Position/velocity filter with zero process and measurement noise."""
    x = np.array([zs[0], 0.0])
    P = np.diag([0.0, p0])
    F = np.array([[1.0, 1.0], [0.0, 1.0]])
    for z in zs[1:]:
        x, P = F @ x, F @ P @ F.T
        S = P[0, 0]
        if S == 0.0:
            continue
        K = P[:, 0] / S
        x = x + K * (z - x[0])
        P = P - np.outer(K, P[0, :])
    return x


def test_predict_examples():
    s = kalman_predict(state([0, 0, 1, 10, 1, 0, 0, 0]))
    assert np.allclose(s.mean[:4], [1, 0, 1, 10])
    still = state([3, 4, 0.5, 20, 0, 0, 0, 0])
    assert np.array_equal(kalman_predict(still).mean, still.mean)


def test_predict_analytic_trajectory_without_process_noise():
    kf = KalmanFilter(process_noise_scale=0.0)
    s = state([0, 0, 1, 10, 2, -1, 0, 0])
    for _ in range(5):
        s = kf.predict(s)
    assert np.allclose(s.mean[:2], [10, -5], atol=1e-12)


def test_predict_covariance_is_FPFt_plus_Q():
    kf = KalmanFilter()
    rng = np.random.default_rng(3)
    A = rng.normal(size=(8, 8))
    s = state([1, 2, 0.5, 30, 0, 0, 0, 0], A @ A.T)
    F = kf.transition()
    expect = F @ s.covariance @ F.T + kf.process_noise(s)
    assert np.allclose(kf.predict(s).covariance, expect)


def test_update_zero_innovation_keeps_mean():
    kf = KalmanFilter()
    s = kf.predict(kf.initiate([10, 20, 0.8, 30]))
    u = kf.update(s, s.mean[:4])
    assert np.allclose(u.mean[:4], s.mean[:4])


def test_update_small_measurement_noise_limit():
    s = KalmanFilter().initiate([10, 20, 0.8, 30])
    z = [14, 18, 0.9, 33]
    u = NOISELESS.update(NOISELESS.predict(s), z)
    assert np.allclose(u.mean[:4], z, atol=1e-6)


def test_constant_velocity_converges_8d():
    s = NOISELESS.initiate([0, 5, 1, 10])
    for t in range(1, 11):
        s = NOISELESS.predict(s)
        s = NOISELESS.update(s, [3 * t, 5, 1, 10])
    assert abs(s.mean[4] - 3) < 1e-6
    assert abs(s.mean[0] - 30) < 1e-6


def test_constant_velocity_converges_scalar_oracle():
    x = scalar_cv_filter([3.0 * t for t in range(11)])
    assert abs(x[1] - 3.0) < 1e-6 and abs(x[0] - 30.0) < 1e-6


def test_update_rejects_bad_measurement():
    kf = KalmanFilter()
    s = kf.initiate([1, 1, 1, 10])
    with pytest.raises(ValueError):
        kf.update(s, [1, 1, 1, 0])
    with pytest.raises(ValueError):
        kf.update(s, [np.nan, 1, 1, 10])


def test_singular_innovation():
    kf = KalmanFilter(measurement_noise_scale=0.0)
    s = state([0, 0, 1, 10, 0, 0, 0, 0], np.zeros((8, 8)))
    with pytest.raises(SingularInnovation):
        kf.update(s, [1, 1, 1, 10])
    with pytest.raises(SingularInnovation):
        kf.mahalanobis(s, [1, 1, 1, 10])


def test_mahalanobis_examples():
    s = KalmanFilter().initiate([5, 5, 1, 20])
    assert mahalanobis(s, s.mean[:4]) == pytest.approx(0.0, abs=1e-12)
    ident = KalmanFilter(measurement_noise_scale=0.0)
    unit = state([0, 0, 0, 10, 0, 0, 0, 0], np.eye(8))
    assert mahalanobis(unit, [3, 4, 0, 10], ident) == pytest.approx(25.0)


def test_gate_constant_is_chi2_quantile():
    assert CHI2_95_4DOF == pytest.approx(stats.chi2.ppf(0.95, 4), abs=5e-5)


def test_gate_admits_95_percent_of_true_matches():
    kf = KalmanFilter()
    s = kf.predict(kf.initiate([50, 60, 0.8, 25]))
    pred, S = kf.project(s)
    rng = np.random.default_rng(9)
    z = rng.multivariate_normal(pred, S, size=20_000)
    frac = np.mean(kf.mahalanobis(s, z) <= CHI2_95_4DOF)
    assert abs(frac - 0.95) < 0.01


def test_covariance_psd_through_random_cycles():
    kf = KalmanFilter()
    rng = np.random.default_rng(11)
    s = kf.initiate([100, 100, 0.7, 30])
    for _ in range(1000):
        s = kf.predict(s, dt=int(rng.integers(1, 4)))
        if rng.random() < 0.8:
            z = s.mean[:4] + rng.normal(0, [3, 3, 0.05, 2])
            z[3] = max(z[3], 1.0)
            s = kf.update(s, z)
        P = s.covariance
        assert np.max(np.abs(P - P.T)) < 1e-9
        assert np.linalg.eigvalsh(P).min() >= -1e-8


def test_update_with_predicted_observation_never_increases_trace():
    kf = KalmanFilter()
    rng = np.random.default_rng(12)
    for _ in range(200):
        A = rng.normal(size=(8, 8))
        s = state(np.r_[rng.uniform(0, 100, 2), 0.8, rng.uniform(10, 50), rng.normal(size=4)], A @ A.T + np.eye(8))
        u = kalman_update(s, s.mean[:4], kf)
        assert np.trace(u.covariance) <= np.trace(s.covariance) + 1e-9


def test_state_arrays_are_read_only():
    s = KalmanFilter().initiate([1, 2, 1, 10])
    with pytest.raises(ValueError):
        s.mean[0] = 3.0
