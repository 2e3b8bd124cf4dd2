"""Constant-velocity Kalman filter in (cx, cy, aspect, height) box space.

Noise standard deviations scale with the box height, so a distant small head
and a close large one get comparable relative uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

NDIM = 4

# 0.95 quantile of chi-square with 4 degrees of freedom
CHI2_95_4DOF = 9.4877


class SingularInnovation(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray  # (8,)
    covariance: np.ndarray  # (8, 8)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2 * NDIM)
        cov = np.array(self.covariance, dtype=float).reshape(2 * NDIM, 2 * NDIM)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def observed(self) -> np.ndarray:
        return self.mean[:NDIM]


@dataclass(frozen=True)
class KalmanFilter:
    """``std_weight_*`` are the per-unit-height noise factors; the scales
    multiply process (Q) and measurement (R) noise and may be set to 0."""

    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    process_noise_scale: float = 1.0
    measurement_noise_scale: float = 1.0

    @staticmethod
    def transition(dt: float = 1.0) -> np.ndarray:
        F = np.eye(2 * NDIM)
        F[:NDIM, NDIM:] = dt * np.eye(NDIM)
        return F

    @staticmethod
    def projection() -> np.ndarray:
        return np.eye(NDIM, 2 * NDIM)

    def initiate(self, measurement: Sequence[float]) -> KalmanState:
        z = np.asarray(measurement, dtype=float)
        h = z[3]
        sp, sv = self.std_weight_position, self.std_weight_velocity
        std = [2 * sp * h, 2 * sp * h, 1e-2, 2 * sp * h, 10 * sv * h, 10 * sv * h, 1e-5, 10 * sv * h]
        return KalmanState(np.r_[z, np.zeros(NDIM)], np.diag(np.square(std)))

    def process_noise(self, state: KalmanState, dt: float = 1.0) -> np.ndarray:
        h = state.mean[3]
        sp, sv = self.std_weight_position, self.std_weight_velocity
        std = [sp * h, sp * h, 1e-2, sp * h, sv * h, sv * h, 1e-5, sv * h]
        return dt * self.process_noise_scale * np.diag(np.square(std))

    def measurement_noise(self, state: KalmanState) -> np.ndarray:
        h = state.mean[3]
        sp = self.std_weight_position
        std = [sp * h, sp * h, 1e-1, sp * h]
        return self.measurement_noise_scale * np.diag(np.square(std))

    def predict(self, state: KalmanState, dt: float = 1.0) -> KalmanState:
        F = self.transition(dt)
        P = F @ state.covariance @ F.T + self.process_noise(state, dt)
        return KalmanState(F @ state.mean, _symmetrize(P))

    def project(self, state: KalmanState):
        """Predicted observation and innovation covariance."""
        H = self.projection()
        S = H @ state.covariance @ H.T + self.measurement_noise(state)
        return H @ state.mean, _symmetrize(S)

    def update(self, state: KalmanState, measurement: Sequence[float]) -> KalmanState:
        z = np.asarray(measurement, dtype=float)
        if not np.all(np.isfinite(z)) or z[3] <= 0:
            raise ValueError(f"measurement must be finite with positive height: {z}")
        H = self.projection()
        predicted, S = self.project(state)
        chol = _cholesky(S)
        P = state.covariance
        # K = P H^T S^-1
        gain = scipy.linalg.cho_solve(chol, H @ P, check_finite=False).T
        mean = state.mean + gain @ (z - predicted)
        # Joseph form keeps P symmetric PSD under round-off
        IKH = np.eye(2 * NDIM) - gain @ H
        R = self.measurement_noise(state)
        P_new = IKH @ P @ IKH.T + gain @ R @ gain.T
        return KalmanState(mean, _symmetrize(P_new))

    def mahalanobis(self, state: KalmanState, measurements) -> np.ndarray:
        """Squared Mahalanobis distance of each measurement row from the prediction."""
        z = np.atleast_2d(np.asarray(measurements, dtype=float))
        predicted, S = self.project(state)
        chol = _cholesky(S)
        d = z - predicted
        y = scipy.linalg.solve_triangular(chol[0], d.T, lower=True, check_finite=False)
        return np.sum(y * y, axis=0)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _cholesky(S: np.ndarray):
    try:
        return scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("innovation covariance is not positive definite") from exc


DEFAULT_FILTER = KalmanFilter()


def kalman_predict(state: KalmanState, dt: float = 1.0, kf: Optional[KalmanFilter] = None) -> KalmanState:
    return (kf or DEFAULT_FILTER).predict(state, dt)


def kalman_update(state: KalmanState, measurement, kf: Optional[KalmanFilter] = None) -> KalmanState:
    return (kf or DEFAULT_FILTER).update(state, measurement)


def mahalanobis(state: KalmanState, measurement, kf: Optional[KalmanFilter] = None) -> float:
    return float((kf or DEFAULT_FILTER).mahalanobis(state, measurement)[0])
