"""Technological significance of objects within technology categories, and map export.

For an object ``o`` in category ``c``::

    significance = ln(number of objects in c) / (temporal rank of o in c)

Rank 1 is the earliest object. Objects with equal dates get distinct ranks,
ordered by object id.
"""
from __future__ import annotations

import csv
import enum
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import iter_jsonl
from .errors import InvalidRank, MalformedRecord, OutOfRange

log = logging.getLogger(__name__)


class Period(str, enum.Enum):
    NEOLITHIC = "Neolithic"
    BRONZE_IRON = "BronzeIron"
    CLASSICAL_ANTIQUITY = "ClassicalAntiquity"
    MIDDLE_AGES = "MiddleAges"
    RENAISSANCE = "Renaissance"


# (period, exclusive upper bound); the first period is open below.
DEFAULT_PERIODS = (
    (Period.NEOLITHIC, -3300),
    (Period.BRONZE_IRON, -800),
    (Period.CLASSICAL_ANTIQUITY, 500),
    (Period.MIDDLE_AGES, 1400),
    (Period.RENAISSANCE, 1700),
)

# Map colour keys, one per period.
PERIOD_COLORS = {
    Period.NEOLITHIC: "blue",
    Period.BRONZE_IRON: "purple",
    Period.CLASSICAL_ANTIQUITY: "pink",
    Period.MIDDLE_AGES: "red",
    Period.RENAISSANCE: "yellow",
}


@dataclass(frozen=True)
class ObjectRecord:
    object_id: str
    category: str
    date: int
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} out of range for {self.object_id!r}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} out of range for {self.object_id!r}")


@dataclass(frozen=True)
class SignificanceRecord:
    object_id: str
    category: str
    number_c: int
    rank: int
    significance: float
    period: Period
    latitude: float
    longitude: float
    opacity_weight: int = 1


def rank_within_category(objects: Iterable[ObjectRecord]) -> dict:
    """``{(category, object_id): (number_c, rank)}``, ranks from earliest date."""
    by_cat = defaultdict(list)
    for o in objects:
        by_cat[o.category].append(o)
    out = {}
    for cat in sorted(by_cat):
        members = sorted(by_cat[cat], key=lambda o: (o.date, o.object_id))
        n = len(members)
        for rank, o in enumerate(members, 1):
            out[(cat, o.object_id)] = (n, rank)
    return out


def significance(number_c: int, rank: int) -> float:
    if number_c < 1 or not 1 <= rank <= number_c:
        raise InvalidRank(f"need 1 <= rank <= number_c, got rank={rank}, number_c={number_c}")
    return math.log(number_c) / rank


def assign_period(date: int, periods: Sequence = DEFAULT_PERIODS) -> Period:
    """Bucket a year into half-open period intervals; raises OutOfRange past the last bound."""
    for period, upper in periods:
        if date < upper:
            return period
    raise OutOfRange(f"year {date} is not before {periods[-1][1]}")


def colocation_key(lat, lon):
    return (round(lat, 2), round(lon, 2))


def opacity(count: int) -> float:
    return min(1.0, 0.2 + 0.1 * math.log1p(count))


def compute_significance(objects: Sequence[ObjectRecord], periods: Sequence = DEFAULT_PERIODS):
    """Score every object; returns ``(records, out_of_range_objects)``.

    Ranks and category sizes use all objects, including those whose date
    falls outside the periods; those are only left off the map. ``opacity_weight``
    is the number of mapped records sharing the same rounded coordinates.
    """
    objects = list(objects)
    ranks = rank_within_category(objects)
    kept = []
    dropped = []
    for o in objects:
        try:
            period = assign_period(o.date, periods)
        except OutOfRange:
            dropped.append(o)
            continue
        n, r = ranks[(o.category, o.object_id)]
        kept.append((o, n, r, period))
    if dropped:
        log.warning("%d object(s) fall outside the configured periods and are excluded", len(dropped))
    counts = Counter(colocation_key(o.latitude, o.longitude) for o, *_ in kept)
    records = [
        SignificanceRecord(
            object_id=o.object_id,
            category=o.category,
            number_c=n,
            rank=r,
            significance=significance(n, r),
            period=period,
            latitude=o.latitude,
            longitude=o.longitude,
            opacity_weight=counts[colocation_key(o.latitude, o.longitude)],
        )
        for o, n, r, period in kept
    ]
    records.sort(key=lambda rec: (rec.category, rec.rank))
    return records, dropped


def _properties(rec: SignificanceRecord, weights):
    return {
        "object_id": rec.object_id,
        "category": rec.category,
        "rank": rec.rank,
        "number_c": rec.number_c,
        "significance": rec.significance,
        "period": rec.period.value,
        "color": PERIOD_COLORS[rec.period],
        "radius": rec.significance,
        "opacity": opacity(weights[colocation_key(rec.latitude, rec.longitude)]),
    }


CSV_COLUMNS = (
    "object_id", "category", "rank", "number_c", "significance", "period", "color", "radius", "opacity", "lat", "lon",
)


def export_map_data(records: Sequence[SignificanceRecord], path, format="geojson"):
    """Write one GeoJSON point feature or CSV row per record, ordered by (category, rank).

    Opacity is recomputed from co-location among ``records`` (coordinates
    rounded to two decimals).
    """
    fmt = str(format).lower()
    if fmt not in ("geojson", "csv"):
        raise ValueError(f"unknown map format {format!r}")
    records = sorted(records, key=lambda r: (r.category, r.rank, r.object_id))
    weights = Counter(colocation_key(r.latitude, r.longitude) for r in records)
    path = Path(path)
    if fmt == "geojson":
        features = [
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [r.longitude, r.latitude]},
                "properties": _properties(r, weights),
            }
            for r in records
        ]
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1, ensure_ascii=False)
            fh.write("\n")
        return path
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            row = _properties(r, weights)
            row["lat"] = r.latitude
            row["lon"] = r.longitude
            writer.writerow(row)
    return path


def objects_from_predictions(docs, predictions) -> list[ObjectRecord]:
    """One object record per (document, linked entity) with a date and location.

    Abstentions and documents lacking a date or coordinates are skipped.
    """
    out = []
    for doc, preds in zip(docs, predictions):
        if doc.object_date is None or doc.location is None:
            continue
        for eid in sorted({p.entity_id for p in preds if p.entity_id is not None}):
            out.append(ObjectRecord(doc.doc_id, eid, doc.object_date, doc.location[0], doc.location[1]))
    return out


def load_objects(path) -> list[ObjectRecord]:
    """Read object JSONL: ``{"object_id", "category", "date", "lat", "lon"}`` per line."""
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            out.append(
                ObjectRecord(
                    str(obj["object_id"]), str(obj["category"]), int(obj["date"]), float(obj["lat"]), float(obj["lon"])
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad object record ({exc})", path, lineno) from None
    return out
