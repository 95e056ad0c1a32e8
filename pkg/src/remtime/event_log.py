"""Event/trace/log data model and the operations that feed the predictors.

An event is one executed activity inside a process instance (a "case"):
activity name, case id, timestamp, and an attribute payload. A trace is the
time-ordered event sequence of one case; an event log is a set of traces.

Everything here works in integer seconds. Timestamps are normalized to whole
seconds at construction so duration arithmetic is exact; conversion to days
happens only in reporting code.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

CATEGORICAL = "categorical"
NUMERIC = "numeric"
IGNORE = "ignore"

_ATTRIBUTE_KINDS = (CATEGORICAL, NUMERIC, IGNORE)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):  # py3.10 fromisoformat rejects the Z suffix
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"invalid ISO-8601 timestamp: {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


@dataclass(frozen=True)
class Event:
    """One executed activity: name, case id, timestamp, attribute payload.

    Attribute values are ``str`` for categorical attributes and ``float`` for
    numeric ones. Timestamps are truncated to whole seconds.
    """

    activity: str
    case_id: str
    timestamp: datetime
    attributes: Mapping[str, str | float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.activity:
            raise ValueError("event activity must be non-empty")
        if not self.case_id:
            raise ValueError("event case_id must be non-empty")
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        if ts.microsecond:
            ts = ts.replace(microsecond=0)
        object.__setattr__(self, "timestamp", ts)
        object.__setattr__(self, "attributes", dict(self.attributes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Event):
            return NotImplemented
        return (
            self.activity == other.activity
            and self.case_id == other.case_id
            and self.timestamp == other.timestamp
            and self.attributes == other.attributes
        )


@dataclass(frozen=True)
class Trace:
    """Ordered event sequence of one case; timestamps are non-decreasing."""

    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self) -> None:
        events = tuple(self.events)
        if not events:
            raise ValueError("a trace needs at least one event")
        for e in events:
            if e.case_id != self.case_id:
                raise ValueError(
                    f"event case_id {e.case_id!r} differs from trace {self.case_id!r}"
                )
        for prev, cur in zip(events, events[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValueError(f"timestamps decrease within case {self.case_id!r}")
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __getitem__(self, i: int) -> Event:
        return self.events[i]

    def head(self, k: int) -> "Trace":
        """First k events (1 <= k <= len)."""
        self._check_k(k)
        return Trace(self.case_id, self.events[:k])

    def tail(self, k: int) -> "Trace":
        """Last k events (1 <= k <= len)."""
        self._check_k(k)
        return Trace(self.case_id, self.events[len(self.events) - k :])

    def execution_time(self) -> int:
        """Elapsed seconds between the first and the last event."""
        delta = self.events[-1].timestamp - self.events[0].timestamp
        return int(delta.total_seconds())

    def remaining_time(self, k: int) -> int:
        """Seconds between event k and the end of the trace (0 for k = len)."""
        self._check_k(k)
        delta = self.events[-1].timestamp - self.events[k - 1].timestamp
        return int(delta.total_seconds())

    def start_time(self) -> datetime:
        return self.events[0].timestamp

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= len(self.events):
            raise ValueError(f"k={k} out of range for trace of length {len(self.events)}")


def head(t: Trace, k: int) -> Trace:
    return t.head(k)


def tail(t: Trace, k: int) -> Trace:
    return t.tail(k)


def execution_time(t: Trace) -> int:
    return t.execution_time()


def remaining_time(t: Trace, k: int) -> int:
    return t.remaining_time(k)


@dataclass(frozen=True)
class EventLog:
    """A set of traces with unique case ids plus the attribute declarations.

    ``attribute_kinds`` maps attribute name to "categorical" or "numeric" as
    declared at ingest (or by a generator); encoders rely on it.
    """

    traces: tuple[Trace, ...]
    attribute_kinds: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        traces = tuple(self.traces)
        seen: set[str] = set()
        for t in traces:
            if t.case_id in seen:
                raise ValueError(f"duplicate case id {t.case_id!r} in log")
            seen.add(t.case_id)
        for name, kind in self.attribute_kinds.items():
            if kind not in (CATEGORICAL, NUMERIC):
                raise ValueError(f"attribute {name!r} has unknown kind {kind!r}")
        object.__setattr__(self, "traces", traces)
        object.__setattr__(self, "attribute_kinds", dict(self.attribute_kinds))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __getitem__(self, case_id: str) -> Trace:
        for t in self.traces:
            if t.case_id == case_id:
                return t
        raise KeyError(case_id)

    def activities(self) -> list[str]:
        """Distinct activity names, sorted."""
        return sorted({e.activity for t in self.traces for e in t})

    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)


@dataclass(frozen=True)
class PrefixSample:
    """A training example: the first ``prefix_len`` events of a trace and the
    time that was still left when the prefix ended."""

    prefix: Trace
    target_remaining: int
    source_case: str
    prefix_len: int

    def __post_init__(self) -> None:
        if self.prefix_len != len(self.prefix):
            raise ValueError("prefix_len does not match prefix length")
        if self.target_remaining < 0:
            raise ValueError("target_remaining must be >= 0")


def generate_prefixes(log: EventLog) -> list[PrefixSample]:
    """One sample per prefix length k = 1..n-1 of every trace.

    Completed traces are never emitted as their own prefix (the k = n sample
    would have target zero). Traces of length 1 yield nothing; count them via
    :func:`count_single_event_traces` if you need to report them.
    """
    samples: list[PrefixSample] = []
    for t in log:
        n = len(t)
        for k in range(1, n):
            samples.append(
                PrefixSample(
                    prefix=t.head(k),
                    target_remaining=t.remaining_time(k),
                    source_case=t.case_id,
                    prefix_len=k,
                )
            )
    return samples


def count_single_event_traces(log: EventLog) -> int:
    """Traces too short to produce a prefix sample."""
    return sum(1 for t in log if len(t) == 1)


def chronological_split(
    log: EventLog,
    train_frac: float,
    val_frac_of_train: float,
    seed: int,
    order_by: str = "start_time",
) -> tuple[EventLog, EventLog, EventLog]:
    """Split a log into train/validation/test at whole-trace granularity.

    Traces are ordered by first-event timestamp (ties broken by case id); the
    first ceil(train_frac * N) form the train+validation pool, from which a
    seeded uniform sample of ``val_frac_of_train`` becomes the validation set.
    The remainder of the ordered list is the test set. ``order_by="ingest"``
    keeps the log's own trace order instead of sorting by start time.
    """
    if not 0.0 < train_frac < 1.0:
        raise ConfigError(f"train_frac must be in (0, 1), got {train_frac}")
    if not 0.0 <= val_frac_of_train < 1.0:
        raise ConfigError(f"val_frac_of_train must be in [0, 1), got {val_frac_of_train}")
    if order_by not in ("start_time", "ingest"):
        raise ConfigError(f"unknown order_by {order_by!r}")

    ordered = list(log.traces)
    if order_by == "start_time":
        ordered.sort(key=lambda t: (t.start_time(), t.case_id))

    n_pool = math.ceil(train_frac * len(ordered))
    pool, test = ordered[:n_pool], ordered[n_pool:]

    n_val = int(round(val_frac_of_train * len(pool)))
    n_val = min(n_val, max(len(pool) - 1, 0))
    rng = np.random.default_rng(seed)
    val_idx = set(rng.choice(len(pool), size=n_val, replace=False).tolist()) if n_val else set()
    train = [t for i, t in enumerate(pool) if i not in val_idx]
    val = [t for i, t in enumerate(pool) if i in val_idx]

    kinds = log.attribute_kinds
    return (
        EventLog(tuple(train), kinds),
        EventLog(tuple(val), kinds),
        EventLog(tuple(test), kinds),
    )


@dataclass(frozen=True)
class IngestConfig:
    """Column mapping and per-attribute kind declarations for CSV ingestion.

    Every CSV column that is not the case/activity/timestamp column must be
    declared categorical, numeric, or ignore.
    """

    case_col: str = "case_id"
    activity_col: str = "activity"
    timestamp_col: str = "timestamp"
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, kind in self.attributes.items():
            if kind not in _ATTRIBUTE_KINDS:
                raise ConfigError(
                    f"attribute {name!r}: kind must be one of {_ATTRIBUTE_KINDS}, got {kind!r}"
                )
        object.__setattr__(self, "attributes", dict(self.attributes))

    def attribute_kinds(self) -> dict[str, str]:
        """Declared kinds minus the ignored columns."""
        return {n: k for n, k in self.attributes.items() if k != IGNORE}

    @classmethod
    def from_json(cls, path: str | Path) -> "IngestConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read ingest config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"ingest config {path} must be a JSON object")
        try:
            return cls(
                case_col=doc.get("case", "case_id"),
                activity_col=doc.get("activity", "activity"),
                timestamp_col=doc.get("timestamp", "timestamp"),
                attributes=doc.get("attributes", {}),
            )
        except TypeError as exc:
            raise ConfigError(f"malformed ingest config {path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "case": self.case_col,
            "activity": self.activity_col,
            "timestamp": self.timestamp_col,
            "attributes": dict(self.attributes),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "IngestConfig":
        return cls(
            case_col=doc.get("case", "case_id"),
            activity_col=doc.get("activity", "activity"),
            timestamp_col=doc.get("timestamp", "timestamp"),
            attributes=doc.get("attributes", {}),
        )


@dataclass
class IngestReport:
    """What happened while reading a CSV: row counts and per-row rejections."""

    rows_read: int = 0
    rows_accepted: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rows_rejected(self) -> int:
        return len(self.rejections)

    def reject(self, line_no: int, reason: str) -> None:
        self.rejections.append((line_no, reason))


def parse_csv(path: str | Path, config: IngestConfig) -> tuple[EventLog, IngestReport]:
    """Read an event log from CSV (header row, UTF-8, RFC 4180 quoting).

    Events are grouped by case id and each trace is sorted by timestamp with a
    stable sort, so file order breaks ties. Rows with an unparseable timestamp
    or numeric cell are rejected and counted, never silently dropped. Traces
    are returned ordered by (first timestamp, case id), which makes the result
    invariant to row permutations up to timestamp ties.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"log file not found: {path}")

    report = IngestReport()
    by_case: dict[str, list[Event]] = {}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return EventLog((), config.attribute_kinds()), report
        header = list(reader.fieldnames)
        mandated = (config.case_col, config.activity_col, config.timestamp_col)
        missing = [c for c in mandated if c not in header]
        if missing:
            raise DataError(f"{path}: missing mandated column(s): {', '.join(missing)}")
        undeclared = [c for c in header if c not in mandated and c not in config.attributes]
        if undeclared:
            raise ConfigError(
                f"{path}: undeclared column(s) {', '.join(undeclared)}; "
                "declare each as categorical, numeric, or ignore"
            )

        for line_no, row in enumerate(reader, start=2):
            report.rows_read += 1
            case_id = (row.get(config.case_col) or "").strip()
            activity = (row.get(config.activity_col) or "").strip()
            ts_text = (row.get(config.timestamp_col) or "").strip()
            if not case_id:
                report.reject(line_no, "empty case id")
                continue
            if not activity:
                report.reject(line_no, "empty activity")
                continue
            try:
                ts = parse_timestamp(ts_text)
            except ValueError:
                report.reject(line_no, f"bad timestamp {ts_text!r}")
                continue

            attrs: dict[str, str | float] = {}
            bad_cell = None
            for name, kind in config.attributes.items():
                if kind == IGNORE:
                    continue
                cell = row.get(name)
                if cell is None or cell.strip() == "":
                    continue  # absent attribute: allowed, encodes to zeros
                if kind == NUMERIC:
                    try:
                        value = float(cell)
                    except ValueError:
                        bad_cell = f"bad numeric cell {name}={cell!r}"
                        break
                    if not math.isfinite(value):
                        bad_cell = f"non-finite numeric cell {name}={cell!r}"
                        break
                    attrs[name] = value
                else:
                    attrs[name] = cell
            if bad_cell:
                report.reject(line_no, bad_cell)
                continue

            by_case.setdefault(case_id, []).append(
                Event(activity=activity, case_id=case_id, timestamp=ts, attributes=attrs)
            )
            report.rows_accepted += 1

    traces = []
    for case_id, events in by_case.items():
        events.sort(key=lambda e: e.timestamp)  # stable: file order breaks ties
        traces.append(Trace(case_id, tuple(events)))
    traces.sort(key=lambda t: (t.start_time(), t.case_id))
    return EventLog(tuple(traces), config.attribute_kinds()), report


def write_csv(log: EventLog, path: str | Path, config: IngestConfig | None = None) -> None:
    """Write a log in the same CSV dialect :func:`parse_csv` consumes."""
    config = config or IngestConfig(attributes=dict(log.attribute_kinds))
    attr_names = [n for n, k in config.attributes.items() if k != IGNORE]
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([config.case_col, config.activity_col, config.timestamp_col, *attr_names])
        for trace in log:
            for e in trace:
                cells = [e.case_id, e.activity, e.timestamp.isoformat()]
                for name in attr_names:
                    value = e.attributes.get(name)
                    if value is None:
                        cells.append("")
                    elif isinstance(value, float):
                        cells.append(repr(value))
                    else:
                        cells.append(str(value))
                writer.writerow(cells)
