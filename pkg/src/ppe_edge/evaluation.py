"""Camera-versus-model comparison of hourly count series.

Differences are taken as camera minus model (e.g. 12 - 11 = 1 for the first
hour of the 22 November table), the standard deviation is Bessel-corrected,
and significance is the two-sided Student-t test of Pearson's r.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.special import betainc

from .core import StatsReport
from .counter import HourlyTable


class LengthMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class ZeroVariance(ValueError):
    pass


@dataclass(frozen=True)
class CountSeries:
    labels: Tuple[str, ...]
    values: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.labels) != len(self.values):
            raise LengthMismatch("labels and values differ in length")
        if any(v < 0 for v in self.values):
            raise ValueError("counts must be non-negative")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def _arrays(a, b) -> Tuple[np.ndarray, np.ndarray]:
    x = a.as_array() if isinstance(a, CountSeries) else np.asarray(a, dtype=float)
    y = b.as_array() if isinstance(b, CountSeries) else np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"series lengths differ: {x.size} vs {y.size}")
    return x, y


def differences(camera, model) -> np.ndarray:
    x, y = _arrays(camera, model)
    return x - y


def mean_diff(model, camera) -> float:
    """Mean of ``camera - model`` over paired buckets."""
    m, c = _arrays(model, camera)
    if m.size < 1:
        raise InsufficientData("need at least one pair")
    return float(np.mean(c - m))


def sample_std(diffs: Sequence[float]) -> float:
    d = np.asarray(diffs, dtype=float)
    if d.size < 2:
        raise InsufficientData("sample standard deviation needs n >= 2")
    return float(np.sqrt(np.sum((d - d.mean()) ** 2) / (d.size - 1)))


def pearson(a, b) -> float:
    x, y = _arrays(a, b)
    if x.size < 2:
        raise InsufficientData("correlation needs n >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("a constant series has no correlation")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_p_value(r: float, n: int) -> float:
    """Two-sided p for H0: rho = 0, from t = r sqrt((n-2)/(1-r^2)) with n-2 dof.

    Uses P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2). Returns 0 for |r| = 1.
    """
    if n < 3:
        raise InsufficientData("p-value needs n >= 3")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t2)))))


def compare(camera, model) -> StatsReport:
    """Statistics of one direction.

    ``pearson_r`` is None (degenerate) when either series is constant or the
    differences are: one series is then a shifted copy of the other and the
    correlation test carries no information.
    """
    diffs = differences(camera, model)
    n = diffs.size
    std = sample_std(diffs)
    try:
        if std == 0.0:
            raise ZeroVariance("the series differ by a constant")
        r = pearson(camera, model)
    except ZeroVariance:
        r = p = None
    else:
        p = pearson_p_value(r, n)
    return StatsReport(mean_diff(model, camera), std, r, p, n)


def compare_tables(camera: HourlyTable, model: HourlyTable) -> Tuple[StatsReport, StatsReport]:
    return compare(camera.ins, model.ins), compare(camera.outs, model.outs)


@dataclass(frozen=True)
class DayFixture:
    """One published day: camera and model series plus the printed difference rows."""

    name: str
    labels: Tuple[str, ...]
    rows: Dict[str, Tuple[int, ...]]
    totals: Dict[str, int]

    def series(self, key: str) -> CountSeries:
        return CountSeries(self.labels, self.rows[key])

    @property
    def camera(self) -> HourlyTable:
        return HourlyTable(self.rows["Dahua In"], self.rows["Dahua Out"])

    @property
    def model(self) -> HourlyTable:
        return HourlyTable(self.rows["AI&ML In"], self.rows["AI&ML Out"])

    @classmethod
    def parse(cls, text: str, name: str = "") -> "DayFixture":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        labels = tuple(header[1:-1])
        rows, totals = {}, {}
        for rec in reader:
            rows[rec[0]] = tuple(int(v) for v in rec[1:-1])
            totals[rec[0]] = int(rec[-1])
        return cls(name, labels, rows, totals)


def load_fixture(name_or_path: Union[str, Path]) -> DayFixture:
    """``"table1"``/``"table2"`` load the packaged fixtures; anything else is a path."""
    name = str(name_or_path)
    if name in ("table1", "table2"):
        text = resources.files("ppe_edge.data").joinpath(f"{name}.csv").read_text()
    else:
        text = Path(name).read_text()
        name = Path(name).stem
    return DayFixture.parse(text, name)


def report(fixture: DayFixture) -> Tuple[StatsReport, StatsReport]:
    """(In, Out) statistics of camera against model for one day."""
    return (
        compare(fixture.series("Dahua In"), fixture.series("AI&ML In")),
        compare(fixture.series("Dahua Out"), fixture.series("AI&ML Out")),
    )


def format_report(stats_in: StatsReport, stats_out: StatsReport) -> str:
    out = io.StringIO()
    for label, s in (("In", stats_in), ("Out", stats_out)):
        r = "undefined" if s.pearson_r is None else f"{s.pearson_r:.3f}"
        p = "undefined" if s.p_value is None else f"{s.p_value:.3g}"
        out.write(
            f"{label:<4} mean_diff={s.mean_diff:+.2f} sigma={s.sample_std:.2f} r={r} p={p} n={s.n}"
            + ("  [degenerate: zero-variance series]" if s.degenerate else "")
            + "\n"
        )
    return out.getvalue()


def fixture_names() -> List[str]:
    return ["table1", "table2"]
