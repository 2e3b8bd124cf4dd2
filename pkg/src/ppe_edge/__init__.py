"""Edge video-analytics pipeline counting helmeted people at site entrances.

Frames pass a cheap brightness/motion gate, go to a pluggable detector
(local replay or synthetic, or a remote service), are tracked, counted when
their footpoint crosses the entry or exit line, and alerts go out over MQTT.
"""

from .core import (
    BBox,
    CrossingDirection,
    Detection,
    DirectedLine,
    Frame,
    HeadClass,
    StatsReport,
    ZoneConfig,
    footpoint,
    iou,
    line_side,
)

__version__ = "0.1.0"
