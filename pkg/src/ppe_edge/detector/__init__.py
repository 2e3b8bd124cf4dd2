"""Interchangeable detection backends: logged replay, scripted synthetic, remote service."""

from .base import (
    BackendUnavailable,
    Capability,
    DetectorBackend,
    DuplicateFrameIndex,
    ParseError,
    ReplayExhausted,
    SchemaError,
)
from .remote import HttpError, RemoteBackend, RemoteTimeout, parse_response, remote_detect
from .replay import ReplayBackend, load_replay, write_replay
from .synthetic import (
    ActorScript,
    GroundTruth,
    NoiseConfig,
    Scenario,
    ScenarioConfig,
    SyntheticBackend,
    TrueCrossing,
    generate_scenario,
    late_helmet_walker,
    lingering_walker,
    random_scenario,
    walker,
)
