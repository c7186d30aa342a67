"""Chart-ready numeric time series from normalized observations.

Only quantity-valued rows with an unambiguous moment in time participate.
Series are keyed by (subject, code system, code, component code); points are
sorted by epoch and duplicate timestamps resolve to the last row in table
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Optional

from .model import OBSERVATION, TimePoint, ValueKind
from .normalize import Dataset


@dataclass(frozen=True)
class SeriesKey:
    subject_ref: str
    code_system: str
    code: str
    component_code: Optional[str] = None

    def sort_key(self) -> tuple:
        return (self.subject_ref, self.code_system, self.code, self.component_code or "")


@dataclass(frozen=True)
class SeriesPoint:
    t: TimePoint
    v: Decimal
    unit: str


@dataclass
class SeriesSet:
    series: dict[SeriesKey, list[SeriesPoint]]
    labels: dict[SeriesKey, str]
    units: dict[SeriesKey, str]
    warnings: list[str]

    def label(self, key: SeriesKey) -> str:
        return self.labels.get(key) or key.code

    def to_json_dict(self) -> dict:
        out = []
        for key in sorted(self.series, key=SeriesKey.sort_key):
            points = self.series[key]
            out.append(
                {
                    "key": {
                        "subject_ref": key.subject_ref,
                        "code_system": key.code_system,
                        "code": key.code,
                        "component_code": key.component_code,
                    },
                    "label": self.label(key),
                    "unit": self.units.get(key, ""),
                    "points": [[p.t.epoch_millis_utc, float(p.v)] for p in points],
                }
            )
        return {"series": out, "warnings": self.warnings}


@dataclass(frozen=True)
class SeriesSummary:
    count: int
    min: Decimal
    max: Decimal
    mean: float
    first_t: TimePoint
    last_t: TimePoint

    @property
    def mean_text(self) -> str:
        return format_sig(self.mean, 4)


def format_sig(value: float, digits: int) -> str:
    """Format to a fixed number of significant digits, without exponent
    notation for the magnitudes tables actually hold."""
    if value == 0:
        return "0"
    text = f"{value:.{digits}g}"
    if "e" in text or "E" in text:
        text = f"{float(text):f}".rstrip("0").rstrip(".")
    return text


def extract_series(dataset: Dataset) -> SeriesSet:
    """Group quantity observations into per-key series sorted by time."""
    rows = dataset.table(OBSERVATION)
    collected: dict[SeriesKey, dict[int, SeriesPoint]] = {}
    labels: dict[SeriesKey, str] = {}
    units: dict[SeriesKey, str] = {}
    warnings: list[str] = []
    naive_flagged = False

    for row in rows:
        if row.value is None or row.value.kind is not ValueKind.QUANTITY:
            continue
        if row.effective is None or row.effective.epoch_millis_utc is None:
            continue
        key = SeriesKey(row.subject_ref, row.code_system, row.code, row.component_code)
        unit = row.unit
        if key not in units:
            units[key] = unit
            labels[key] = row.display or row.code
        elif unit != units[key]:
            warnings.append(
                f"UnitMismatch: {key.code}/{key.component_code or '-'} point with unit "
                f"{unit!r} excluded (series unit {units[key]!r})"
            )
            continue
        if not row.effective.has_timezone and not naive_flagged:
            warnings.append("NaiveTimestamp: timezone-less timestamps ordered as UTC")
            naive_flagged = True
        # dict insertion order resolves duplicates: last write wins
        collected.setdefault(key, {})[row.effective.epoch_millis_utc] = SeriesPoint(
            t=row.effective, v=row.value.quantity.value, unit=unit
        )

    series = {
        key: [points[t] for t in sorted(points)] for key, points in collected.items()
    }
    return SeriesSet(series=series, labels=labels, units=units, warnings=warnings)


def summarize(series_set: SeriesSet) -> dict[SeriesKey, SeriesSummary]:
    """Count/min/max/mean per series; mean in double precision."""
    out: dict[SeriesKey, SeriesSummary] = {}
    for key, points in series_set.series.items():
        if not points:
            continue
        values = [p.v for p in points]
        mean = sum(float(v) for v in values) / len(values)
        out[key] = SeriesSummary(
            count=len(points),
            min=min(values),
            max=max(values),
            mean=mean,
            first_t=points[0].t,
            last_t=points[-1].t,
        )
    return out
