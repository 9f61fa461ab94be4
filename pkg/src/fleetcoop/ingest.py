"""Trip-record ingestion: taxi-style CSV rows to scenario requests."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .scenario import ZONE_LABELS, Request, TransportNetwork
from .synth import haversine_km

REQUIRED = (
    "pickup_datetime",
    "dropoff_datetime",
    "pickup_lat",
    "pickup_lon",
    "dropoff_lat",
    "dropoff_lon",
    "trip_distance_km",
    "passenger_count",
)

DEFAULT_COLUMNS = {name: name for name in REQUIRED}


class MissingColumn(ValueError):
    pass


class UnreadableFile(OSError):
    pass


class NoNodesAvailable(ValueError):
    pass


class MissingZone(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def contains(self, lat: float, lon: float) -> bool:
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon


@dataclass(frozen=True)
class TripRecord:
    pickup_datetime: datetime
    dropoff_datetime: datetime
    pickup_lat: float
    pickup_lon: float
    dropoff_lat: float
    dropoff_lon: float
    trip_distance_km: float
    passenger_count: int
    row: int = 0  # 1-based data row in the source file


@dataclass
class RejectionReport:
    total_rows: int = 0
    accepted: int = 0
    reasons: Counter = field(default_factory=Counter)
    rows: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return sum(self.reasons.values())

    def reject(self, row: int, reason: str) -> None:
        self.reasons[reason] += 1
        self.rows.append((row, reason))

    def summary(self) -> str:
        lines = [f"rows={self.total_rows} accepted={self.accepted} rejected={self.rejected}"]
        lines += [f"{reason}={count}" for reason, count in sorted(self.reasons.items())]
        return "\n".join(lines)


def _parse_time(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def _parse_float(text: str) -> float:
    # float() accepts only a decimal point, never a locale separator
    val = float(text.strip())
    if not math.isfinite(val):
        raise ValueError("non-finite value")
    return val


def parse_trip_csv(path, bounding_box: BoundingBox, column_map: dict[str, str] | None = None,
                   distance_scale: float = 1.0) -> tuple[list[TripRecord], RejectionReport]:
    """Read trip rows, keeping those that satisfy the record invariants.

    ``column_map`` maps each required field to the CSV header that holds it.
    ``distance_scale`` converts the distance column to km (1.609344 for miles).
    Malformed rows are counted in the report, never raised.
    """
    cols = {**DEFAULT_COLUMNS, **(column_map or {})}
    try:
        fh = open(Path(path), newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"cannot read {path}: {exc}") from exc
    records: list[TripRecord] = []
    report = RejectionReport()
    with fh:
        try:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
        except UnicodeDecodeError as exc:
            raise UnreadableFile(f"{path} is not UTF-8: {exc}") from exc
        missing = [name for name in REQUIRED if cols[name] not in header]
        if missing:
            raise MissingColumn("missing columns: " + ", ".join(cols[m] for m in missing))
        try:
            for i, raw in enumerate(reader, start=1):
                report.total_rows += 1
                reason, rec = _row_to_record(raw, cols, bounding_box, distance_scale, i)
                if reason:
                    report.reject(i, reason)
                else:
                    records.append(rec)
        except UnicodeDecodeError as exc:
            raise UnreadableFile(f"{path} is not UTF-8: {exc}") from exc
    report.accepted = len(records)
    return records, report


def _row_to_record(raw: dict, cols: dict, box: BoundingBox, scale: float, row: int):
    if None in raw:  # more fields than header columns, e.g. a decimal comma
        return "MalformedRow", None
    try:
        values = {name: raw[cols[name]] for name in REQUIRED}
        if any(v is None for v in values.values()):
            return "MalformedRow", None
        pick = _parse_time(values["pickup_datetime"])
        drop = _parse_time(values["dropoff_datetime"])
        coords = [_parse_float(values[k]) for k in ("pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon")]
        dist = _parse_float(values["trip_distance_km"]) * scale
        pax_f = _parse_float(values["passenger_count"])
    except (ValueError, KeyError):
        return "MalformedRow", None
    if drop < pick:
        return "NonmonotoneTime", None
    if not (box.contains(coords[0], coords[1]) and box.contains(coords[2], coords[3])):
        return "OutOfBounds", None
    if pax_f < 1 or pax_f != int(pax_f):
        return "InvalidPassengerCount", None
    if dist < 0:
        return "NegativeDistance", None
    return None, TripRecord(pick, drop, *coords, dist, int(pax_f), row)


class SnappedRequests(list):
    """Requests in record order, plus counts of records that were dropped and why."""

    def __init__(self, requests=(), dropped: Counter | None = None):
        super().__init__(requests)
        self.dropped = dropped or Counter()

    @property
    def dropped_total(self) -> int:
        return sum(self.dropped.values())


def nearest_node(transport: TransportNetwork, lat: float, lon: float) -> int:
    best = None
    for n in sorted(transport.nodes, key=lambda n: n.id):
        if n.lat is None or n.lon is None:
            continue
        d = haversine_km(lat, lon, n.lat, n.lon)
        if best is None or d < best[0]:  # strict: the lower id wins ties
            best = (d, n.id)
    if best is None:
        raise NoNodesAvailable("transport network has no geolocated nodes")
    return best[1]


def snap_to_nodes(records: list[TripRecord], transport: TransportNetwork,
                  time_window: tuple[datetime, datetime], step_minutes: float) -> SnappedRequests:
    """Turn records inside ``[start, end)`` into requests on the nearest nodes.

    Pickup times are floored to whole steps after ``start``. Records outside the
    window, and records whose ends snap to the same node, are dropped and counted.
    """
    if not any(n.lat is not None and n.lon is not None for n in transport.nodes):
        raise NoNodesAvailable("transport network has no geolocated nodes")
    start, end = time_window
    out = SnappedRequests()
    for rec in records:
        if not start <= rec.pickup_datetime < end:
            out.dropped["OutsideWindow"] += 1
            continue
        o = nearest_node(transport, rec.pickup_lat, rec.pickup_lon)
        d = nearest_node(transport, rec.dropoff_lat, rec.dropoff_lon)
        if o == d:
            out.dropped["SameNode"] += 1
            continue
        minutes = (rec.pickup_datetime - start).total_seconds() / 60.0
        step = int(math.floor(minutes / step_minutes))
        out.append(Request(len(out) + 1, o, d, step, rec.passenger_count))
    return out


def zone_classification(transport: TransportNetwork) -> dict[int, str]:
    """Node id to zone label as written in the scenario file."""
    missing = [n.id for n in transport.nodes if n.zone is None]
    if missing:
        raise MissingZone(f"nodes without a zone label: {missing}")
    bad = [n.id for n in transport.nodes if n.zone not in ZONE_LABELS]
    if bad:
        raise MissingZone(f"nodes with an unknown zone label: {bad}")
    return {n.id: n.zone for n in sorted(transport.nodes, key=lambda n: n.id)}
