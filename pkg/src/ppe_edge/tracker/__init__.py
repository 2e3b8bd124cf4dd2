from .assignment import Assignment, Infeasible, hungarian, min_cost_matching
from .kalman import (
    CHI2_95_4DOF,
    KalmanFilter,
    KalmanState,
    SingularInnovation,
    kalman_predict,
    kalman_update,
    mahalanobis,
)
from .tracker import NonMonotonicFrame, Track, Tracker, TrackerConfig, TrackStatus, associate

__all__ = [
    "Assignment",
    "CHI2_95_4DOF",
    "Infeasible",
    "KalmanFilter",
    "KalmanState",
    "NonMonotonicFrame",
    "SingularInnovation",
    "Track",
    "Tracker",
    "TrackerConfig",
    "TrackStatus",
    "associate",
    "hungarian",
    "kalman_predict",
    "kalman_update",
    "mahalanobis",
    "min_cost_matching",
]
