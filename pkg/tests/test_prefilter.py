import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppe_edge.core import Frame
from ppe_edge.prefilter import (
    Decision,
    DimensionMismatch,
    Gate,
    PrefilterConfig,
    brightness_gate,
    filter_stream,
    motion_gate,
)


def frame(pixels, index=0):
    pixels = np.asarray(pixels, dtype=np.uint8)
    return Frame(index, index * 100, pixels.shape[1], pixels.shape[0], pixels)


def test_brightness_gate_examples():
    cfg = PrefilterConfig(brightness_threshold=10)
    assert brightness_gate(frame(np.zeros((4, 4))), cfg) is Decision.DISCARD
    assert brightness_gate(frame(np.full((4, 4), 128)), cfg) is Decision.PASS
    half = np.zeros((4, 4))
    half[:2] = 100
    assert brightness_gate(frame(half), PrefilterConfig(brightness_threshold=50)) is Decision.PASS


def test_motion_gate_examples():
    cfg = PrefilterConfig(pixel_diff_threshold=20, motion_area_fraction=0.005)
    base = np.full((10, 10), 30)
    assert motion_gate(frame(base), frame(base, 1), cfg) is Decision.DISCARD
    one = base.copy()
    one[3, 4] = 255  # 225 > 20: one changed pixel of 100 is 0.01 > 0.005
    assert motion_gate(frame(base), frame(one, 1), cfg) is Decision.PASS
    assert motion_gate(frame(base), frame(base + 5, 1), cfg) is Decision.DISCARD


def test_motion_gate_fraction_is_strict():
    base = np.zeros((10, 10))
    one = base.copy()
    one[0, 0] = 255
    cfg = PrefilterConfig(pixel_diff_threshold=20, motion_area_fraction=0.01)
    assert motion_gate(frame(base), frame(one, 1), cfg) is Decision.DISCARD


def test_motion_gate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        motion_gate(frame(np.zeros((4, 4))), frame(np.zeros((4, 5)), 1), PrefilterConfig())


def test_filter_stream_examples():
    out, m = filter_stream([], PrefilterConfig())
    assert list(out) == [] and m.examined == 0

    bright = [frame(np.full((8, 8), 100), i) for i in range(5)]
    out, m = filter_stream(bright, PrefilterConfig())
    assert [f.index for f in out] == [0]
    assert (m.examined, m.passed, m.discarded_motion, m.discarded_brightness) == (5, 1, 4, 0)

    out, m = filter_stream(bright, PrefilterConfig.disabled())
    assert [f.index for f in out] == [0, 1, 2, 3, 4]


def test_motion_reference_is_previous_examined_frame():
    # a slow drift of one pixel column per frame: each step differs from its
    # predecessor even though no frame differs much from the first passed one
    cfg = PrefilterConfig(brightness_threshold=0, pixel_diff_threshold=20, motion_area_fraction=0.05)
    frames = []
    for i in range(6):
        px = np.zeros((10, 10))
        px[:, i] = 200
        frames.append(frame(px, i))
    out, _ = filter_stream(frames, cfg)
    assert [f.index for f in out] == list(range(6))


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        PrefilterConfig(brightness_threshold=300)
    with pytest.raises(ValueError):
        PrefilterConfig(motion_area_fraction=1.5)
    cfg = PrefilterConfig(12, 30, 0.02, frozenset({Gate.MOTION}))
    assert PrefilterConfig.from_dict(cfg.to_dict()) == cfg


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    n=st.integers(0, 30),
    gates=st.sets(st.sampled_from([Gate.BRIGHTNESS, Gate.MOTION])),
)
def test_stream_is_ordered_subsequence_and_counts_partition(seed, n, gates):
    rng = np.random.default_rng(seed)
    frames = []
    for i in range(n):
        level = rng.integers(0, 60)
        px = np.full((6, 6), level)
        if rng.random() < 0.5:
            px[rng.integers(0, 6), rng.integers(0, 6)] = 255
        frames.append(frame(px, i))
    cfg = PrefilterConfig(brightness_threshold=20, enabled_gates=frozenset(gates))
    out, m = filter_stream(frames, cfg)
    kept = [f.index for f in out]
    assert kept == sorted(set(kept))
    assert set(kept) <= set(range(n))
    assert m.examined == n == m.passed + m.discarded_brightness + m.discarded_motion
    assert m.passed == len(kept)
    if not gates:
        assert kept == list(range(n))
