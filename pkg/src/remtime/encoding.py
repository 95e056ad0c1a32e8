"""Turn (partial) traces into the fixed-size matrices the network consumes.

Each event becomes one row: a one-hot activity block, engineered time
features, and an attribute vector in which numeric attributes contribute
their raw value and categorical attributes a hashed one-hot slot. Prefixes
shorter than ``t_max`` are pre-padded with zero rows so the most recent event
always sits in the last row.

The schema fixes everything the encoding depends on (vocabulary, slot
layout, hash seeds, normalization constants); it is fitted on training data
only and serialized into model artifacts so train- and predict-time
encodings match bit-exactly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DataError
from .event_log import CATEGORICAL, NUMERIC, EventLog, Event, PrefixSample, Trace, generate_prefixes

SCHEMA_VERSION = 1

SECONDS_PER_DAY = 86400.0


def hash_to_slot(value: str, seed: int, slots: int) -> int:
    """Map a categorical value into one of ``slots`` positions.

    blake2b keyed by the per-attribute seed, so the mapping is stable across
    runs, platforms, and Python hash randomization.
    """
    key = seed.to_bytes(8, "little", signed=False)
    digest = hashlib.blake2b(value.encode("utf-8"), digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little") % slots


@dataclass(frozen=True)
class AttributeSlot:
    """Layout of one attribute inside the attribute vector."""

    name: str
    kind: str
    slots: int
    hash_seed: int
    offset: int


@dataclass
class EncodingStats:
    """Counters for the lossy parts of encoding (reported, never fatal)."""

    unseen_activities: int = 0
    truncated_prefixes: int = 0
    rejected_samples: list[tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class AttributeSchema:
    """Everything a dataset's encoding depends on, fitted on training data.

    ``time_scale_seconds`` divides the since-start and since-previous
    features; ``target_scale_seconds`` divides prediction targets. Both
    default to the mean training-prefix remaining time.
    """

    activities: tuple[str, ...]
    attributes: tuple[AttributeSlot, ...]
    time_scale_seconds: float
    target_scale_seconds: float
    t_max: int
    weekday_onehot: bool = False
    normalize_times: bool = True

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        offset = 0
        for a in self.attributes:
            if a.offset != offset:
                raise ValueError(f"attribute {a.name!r} offset {a.offset} != expected {offset}")
            if a.slots < 1:
                raise ValueError(f"attribute {a.name!r} must have >= 1 slot")
            offset += a.slots
        object.__setattr__(self, "_activity_index", {a: i for i, a in enumerate(self.activities)})

    @property
    def n_activities(self) -> int:
        return len(self.activities)

    @property
    def n_time_features(self) -> int:
        return 3 + (7 if self.weekday_onehot else 1)

    @property
    def attribute_width(self) -> int:
        return sum(a.slots for a in self.attributes)

    @property
    def feature_width(self) -> int:
        return self.n_activities + self.n_time_features + self.attribute_width

    @property
    def attribute_offset(self) -> int:
        """Column where the attribute vector starts."""
        return self.n_activities + self.n_time_features

    def activity_position(self, activity: str) -> int | None:
        return self._activity_index.get(activity)  # type: ignore[attr-defined]

    def normalize_target(self, seconds: float) -> float:
        return seconds / self.target_scale_seconds

    def denormalize_target(self, value: float) -> float:
        return value * self.target_scale_seconds

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "activities": list(self.activities),
            "attributes": [
                {
                    "name": a.name,
                    "kind": a.kind,
                    "slots": a.slots,
                    "hash_seed": a.hash_seed,
                    "offset": a.offset,
                }
                for a in self.attributes
            ],
            "time_scale_seconds": self.time_scale_seconds,
            "target_scale_seconds": self.target_scale_seconds,
            "t_max": self.t_max,
            "weekday_onehot": self.weekday_onehot,
            "normalize_times": self.normalize_times,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AttributeSchema":
        version = doc.get("version")
        if version != SCHEMA_VERSION:
            raise DataError(f"unsupported schema version {version!r}")
        attrs = tuple(
            AttributeSlot(
                name=a["name"],
                kind=a["kind"],
                slots=int(a["slots"]),
                hash_seed=int(a["hash_seed"]),
                offset=int(a["offset"]),
            )
            for a in doc["attributes"]
        )
        return cls(
            activities=tuple(doc["activities"]),
            attributes=attrs,
            time_scale_seconds=float(doc["time_scale_seconds"]),
            target_scale_seconds=float(doc["target_scale_seconds"]),
            t_max=int(doc["t_max"]),
            weekday_onehot=bool(doc["weekday_onehot"]),
            normalize_times=bool(doc["normalize_times"]),
        )


def build_schema(
    train_log: EventLog,
    *,
    weekday_onehot: bool = False,
    normalize_times: bool = True,
    t_max: int | None = None,
) -> AttributeSchema:
    """Fit an :class:`AttributeSchema` on a training log.

    The activity vocabulary is the sorted set of training activities. Each
    categorical attribute gets one slot per distinct training value (at least
    one); numeric attributes get exactly one. Normalization constants come
    from the training prefixes only, so no information leaks from later data.
    """
    if len(train_log) == 0:
        raise DataError("cannot build a schema from an empty log")

    activities = tuple(train_log.activities())

    distinct: dict[str, set[str]] = {}
    for trace in train_log:
        for event in trace:
            for name, value in event.attributes.items():
                if train_log.attribute_kinds.get(name) == CATEGORICAL:
                    distinct.setdefault(name, set()).add(str(value))

    slots: list[AttributeSlot] = []
    offset = 0
    for i, (name, kind) in enumerate(train_log.attribute_kinds.items()):
        n = 1 if kind == NUMERIC else max(1, len(distinct.get(name, ())))
        slots.append(AttributeSlot(name=name, kind=kind, slots=n, hash_seed=i, offset=offset))
        offset += n

    targets = [s.target_remaining for s in generate_prefixes(train_log)]
    mean_target = float(np.mean(targets)) if targets else 0.0
    scale = mean_target if mean_target > 0 else 1.0

    if t_max is None:
        t_max = max(len(t) for t in train_log)

    return AttributeSchema(
        activities=activities,
        attributes=tuple(slots),
        time_scale_seconds=scale,
        target_scale_seconds=scale,
        t_max=t_max,
        weekday_onehot=weekday_onehot,
        normalize_times=normalize_times,
    )


def encode_attributes(event: Event, schema: AttributeSchema) -> np.ndarray:
    """Attribute vector: value at the attribute's offset for numeric, hashed
    one-hot for categorical, zeros for absent attributes."""
    a = np.zeros(schema.attribute_width)
    for slot in schema.attributes:
        value = event.attributes.get(slot.name)
        if value is None:
            continue
        if slot.kind == NUMERIC:
            value = float(value)
            if not math.isfinite(value):
                raise DataError(
                    f"non-finite value for numeric attribute {slot.name!r} "
                    f"in case {event.case_id!r}"
                )
            a[slot.offset] = value
        else:
            a[slot.offset + hash_to_slot(str(value), slot.hash_seed, slot.slots)] = 1.0
    return a


def _time_features(
    event: Event, prev_timestamp: datetime | None, trace_start: datetime, schema: AttributeSchema
) -> np.ndarray:
    ts = event.timestamp
    since_start = (ts - trace_start).total_seconds()
    since_prev = (ts - prev_timestamp).total_seconds() if prev_timestamp is not None else 0.0
    since_midnight = float(ts.hour * 3600 + ts.minute * 60 + ts.second)  # wall clock
    weekday = ts.weekday()  # Monday = 0

    if schema.normalize_times:
        since_start /= schema.time_scale_seconds
        since_prev /= schema.time_scale_seconds
        since_midnight /= SECONDS_PER_DAY

    if schema.weekday_onehot:
        wd = np.zeros(7)
        wd[weekday] = 1.0
        return np.concatenate(([since_start, since_prev, since_midnight], wd))
    wd_value = weekday / 7.0 if schema.normalize_times else float(weekday)
    return np.array([since_start, since_prev, since_midnight, wd_value])


def encode_event(
    event: Event,
    prev_timestamp: datetime | None,
    trace_start: datetime,
    schema: AttributeSchema,
    stats: EncodingStats | None = None,
) -> np.ndarray:
    """One feature row: [one-hot activity | time features | attribute vector].

    An activity outside the training vocabulary encodes as an all-zero one-hot
    block (counted in ``stats`` when given); prediction must not crash on
    live data.
    """
    onehot = np.zeros(schema.n_activities)
    pos = schema.activity_position(event.activity)
    if pos is None:
        if stats is not None:
            stats.unseen_activities += 1
    else:
        onehot[pos] = 1.0
    return np.concatenate(
        (onehot, _time_features(event, prev_timestamp, trace_start, schema), encode_attributes(event, schema))
    )


@dataclass(frozen=True)
class EncodedPrefix:
    """Padded matrix for one prefix: zero rows on top, events at the bottom."""

    matrix: np.ndarray  # (t_max, feature_width)
    valid_rows: int
    target: float | None = None  # normalized remaining time, if known

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise ValueError("EncodedPrefix.matrix must be 2-d")
        if not 0 < self.valid_rows <= self.matrix.shape[0]:
            raise ValueError("valid_rows out of range")


def encode_prefix(
    prefix: Trace,
    schema: AttributeSchema,
    t_max: int | None = None,
    target_seconds: float | None = None,
    stats: EncodingStats | None = None,
) -> EncodedPrefix:
    """Encode a prefix into a fixed (t_max, F) matrix.

    Prefixes longer than ``t_max`` keep only their most recent ``t_max``
    events (counted as truncations). Time features are still measured from
    the true prefix start.
    """
    t_max = schema.t_max if t_max is None else t_max
    if t_max < 1:
        raise ConfigError(f"t_max must be >= 1, got {t_max}")

    events = prefix.events
    if len(events) > t_max:
        events = events[len(events) - t_max :]
        if stats is not None:
            stats.truncated_prefixes += 1

    matrix = np.zeros((t_max, schema.feature_width))
    trace_start = prefix.start_time()
    row = t_max - len(events)
    prev: datetime | None = None
    for offset, event in enumerate(events):
        if offset == 0 and len(events) < len(prefix.events):
            # truncated: the kept window's first event still has a predecessor
            prev = prefix.events[len(prefix.events) - len(events) - 1].timestamp
        matrix[row + offset] = encode_event(event, prev, trace_start, schema, stats)
        prev = event.timestamp

    target = None if target_seconds is None else schema.normalize_target(float(target_seconds))
    return EncodedPrefix(matrix=matrix, valid_rows=len(events), target=target)


def encode_prefixes(
    prefixes: Sequence[Trace],
    schema: AttributeSchema,
    stats: EncodingStats | None = None,
) -> np.ndarray:
    """Stack prefix encodings into an (n, t_max, F) array."""
    out = np.zeros((len(prefixes), schema.t_max, schema.feature_width))
    for i, p in enumerate(prefixes):
        out[i] = encode_prefix(p, schema, stats=stats).matrix
    return out


def encode_samples(
    samples: Sequence[PrefixSample],
    schema: AttributeSchema,
    stats: EncodingStats | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Encode training samples into (X, y) with normalized targets.

    Samples whose attributes cannot be encoded (non-finite numerics) are
    dropped and recorded in ``stats`` rather than aborting the batch.
    """
    matrices: list[np.ndarray] = []
    targets: list[float] = []
    for s in samples:
        try:
            enc = encode_prefix(s.prefix, schema, target_seconds=s.target_remaining, stats=stats)
        except DataError as exc:
            if stats is not None:
                stats.rejected_samples.append((s.source_case, str(exc)))
            continue
        matrices.append(enc.matrix)
        targets.append(enc.target)  # type: ignore[arg-type]
    if not matrices:
        return (
            np.zeros((0, schema.t_max, schema.feature_width)),
            np.zeros(0),
        )
    return np.stack(matrices), np.array(targets)


def _infer_kinds(traces: Iterable[Trace]) -> dict[str, str]:
    kinds: dict[str, str] = {}
    for t in traces:
        for e in t:
            for name, value in e.attributes.items():
                kind = NUMERIC if isinstance(value, (int, float)) else CATEGORICAL
                if kinds.get(name, kind) != kind:
                    kinds[name] = CATEGORICAL  # mixed types: treat as labels
                else:
                    kinds[name] = kind
    return kinds


class PrefixEncoder(BaseEstimator, TransformerMixin):
    """Sklearn-style transformer wrapping schema fitting and prefix encoding.

    ``fit`` accepts an :class:`EventLog` (schema fitted exactly as
    :func:`build_schema` does) or a plain sequence of traces, in which case
    attribute kinds are inferred from value types and the target scale from
    ``y`` (remaining seconds) when provided.
    """

    def __init__(
        self,
        weekday_onehot: bool = False,
        normalize_times: bool = True,
        t_max: int | None = None,
    ):
        self.weekday_onehot = weekday_onehot
        self.normalize_times = normalize_times
        self.t_max = t_max

    def fit(self, X, y=None):
        if isinstance(X, EventLog):
            log = X
        else:
            traces = list(X)
            if not traces:
                raise DataError("cannot fit an encoder on zero traces")
            log = EventLog(tuple(traces), _infer_kinds(traces))
        self.schema_ = build_schema(
            log,
            weekday_onehot=self.weekday_onehot,
            normalize_times=self.normalize_times,
            t_max=self.t_max,
        )
        if not isinstance(X, EventLog) and y is not None and len(y) > 0:
            mean_target = float(np.mean(y))
            scale = mean_target if mean_target > 0 else 1.0
            self.schema_ = dataclasses.replace(
                self.schema_, time_scale_seconds=scale, target_scale_seconds=scale
            )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "schema_"):
            raise DataError("PrefixEncoder is not fitted")
        traces = list(X.traces) if isinstance(X, EventLog) else list(X)
        return encode_prefixes(traces, self.schema_)

    def transform_targets(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) / self.schema_.target_scale_seconds

    def inverse_transform_targets(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.schema_.target_scale_seconds
