from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import List, Optional

from ..core import Detection, Frame


class BackendUnavailable(RuntimeError):
    def __init__(self, message: str, cause: Optional[BaseException] = None):
        super().__init__(message)
        self.cause = cause


class ReplayExhausted(LookupError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateFrameIndex(ValueError):
    pass


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Capability:
    name: str
    supports_features: bool = False


class DetectorBackend(abc.ABC):
    capability: Capability

    @abc.abstractmethod
    def detect(self, frame: Frame) -> List[Detection]:
        """Detections for ``frame``, clipped to its bounds."""

    def close(self) -> None:
        pass


def clip_detections(dets, width: int, height: int) -> List[Detection]:
    out = []
    for d in dets:
        box = d.bbox.clip(width, height)
        out.append(d if box == d.bbox else Detection(box, d.confidence, d.cls, d.feature))
    return out
