"""Parsing, filtering, and serialization of user-item interaction logs.

The canonical on-disk form is a headerless CSV ``user_id,item_id,day[,rating]``
sorted by ``(day, user_id, item_id)``, with at most one row per (user, item)
pair: repeated interactions keep the earliest occurrence only. Raw inputs may
carry epoch-second or ISO-8601 timestamps; those are reduced to integer day
indices relative to the earliest event at parse time. Inputs already expressed
as day indices are taken as-is.

Filters are applied in a fixed order (rating threshold, then minimum user
activity, then self-link removal) and each is a single pass; re-running the
pipeline on its own output is not guaranteed to be a no-op because self-link
removal can drop a user's event count below the activity threshold.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import ContractError, EmptyLogError, ParseError

SECONDS_PER_DAY = 86400

DAY_GRANULARITIES = ("days", "epoch-seconds", "iso8601")

#: Column names understood by :class:`InputFormat`.
KNOWN_COLUMNS = ("user_id", "item_id", "timestamp", "rating")


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    """One user-item interaction on an integer day index."""

    user_id: int
    item_id: int
    day: int
    rating: int | None = None

    def __post_init__(self) -> None:
        if self.day < 0:
            raise ContractError(f"event day must be >= 0, got {self.day}")
        if self.rating is not None and not 1 <= self.rating <= 5:
            raise ContractError(f"rating must be in [1, 5], got {self.rating}")


@dataclass(frozen=True)
class InputFormat:
    """Column layout and timestamp granularity of a raw log file.

    ``columns`` names the meaning of each delimited field in order. The
    ``rating`` column, when listed last, may be absent from individual rows;
    every other named column is required on every row.
    """

    delimiter: str = ","
    has_header: bool = False
    day_granularity: str = "epoch-seconds"
    columns: tuple[str, ...] = ("user_id", "item_id", "timestamp", "rating")

    def __post_init__(self) -> None:
        if self.day_granularity not in DAY_GRANULARITIES:
            raise ContractError(
                f"day_granularity must be one of {DAY_GRANULARITIES}, "
                f"got {self.day_granularity!r}"
            )
        unknown = [c for c in self.columns if c not in KNOWN_COLUMNS]
        if unknown:
            raise ContractError(f"unknown column names: {unknown}")
        if len(set(self.columns)) != len(self.columns):
            raise ContractError(f"duplicate column names: {self.columns}")
        for required in ("user_id", "item_id", "timestamp"):
            if required not in self.columns:
                raise ContractError(f"column {required!r} missing from format")

    @property
    def min_fields(self) -> int:
        """Fields a row must have; a trailing rating column is optional."""
        if "rating" in self.columns and self.columns[-1] == "rating":
            return len(self.columns) - 1
        return len(self.columns)


@dataclass(frozen=True)
class InteractionLog:
    """Chronologically sorted, deduplicated sequence of interaction events."""

    events: tuple[InteractionEvent, ...]
    epoch_label: str = ""

    def __post_init__(self) -> None:
        prev_key = None
        seen: set[tuple[int, int]] = set()
        for e in self.events:
            key = (e.day, e.user_id, e.item_id)
            if prev_key is not None and key < prev_key:
                raise ContractError(f"events not sorted at {key}")
            prev_key = key
            pair = (e.user_id, e.item_id)
            if pair in seen:
                raise ContractError(f"duplicate (user, item) pair {pair}")
            seen.add(pair)

    @property
    def n_links(self) -> int:
        return len(self.events)

    @property
    def n_users(self) -> int:
        return len({e.user_id for e in self.events})

    @property
    def n_items(self) -> int:
        return len({e.item_id for e in self.events})

    @property
    def min_day(self) -> int:
        if not self.events:
            raise EmptyLogError("empty log has no day range")
        return self.events[0].day

    @property
    def max_day(self) -> int:
        if not self.events:
            raise EmptyLogError("empty log has no day range")
        return max(e.day for e in self.events)

    @property
    def has_ratings(self) -> bool:
        """True when every event carries a rating."""
        return bool(self.events) and all(e.rating is not None for e in self.events)


def make_log(events: Iterable[InteractionEvent], epoch_label: str = "") -> InteractionLog:
    """Sort events by (day, user, item) and keep the earliest per (user, item)."""
    ordered = sorted(events, key=lambda e: (e.day, e.user_id, e.item_id))
    seen: set[tuple[int, int]] = set()
    kept: list[InteractionEvent] = []
    for e in ordered:
        pair = (e.user_id, e.item_id)
        if pair in seen:
            continue
        seen.add(pair)
        kept.append(e)
    return InteractionLog(events=tuple(kept), epoch_label=epoch_label)


def _parse_int(field: str, line_no: int, what: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise ParseError(line_no, f"bad {what} {field!r}") from None


def _parse_rating(field: str, line_no: int) -> int | None:
    field = field.strip()
    if not field:
        return None
    try:
        value = float(field)
    except ValueError:
        raise ParseError(line_no, f"bad rating {field!r}") from None
    if value != int(value):
        raise ParseError(line_no, f"rating {field!r} is not an integer")
    rating = int(value)
    if not 1 <= rating <= 5:
        raise ParseError(line_no, f"rating {rating} outside [1, 5]")
    return rating


def _parse_timestamp(field: str, granularity: str, line_no: int) -> int:
    field = field.strip()
    if granularity == "iso8601":
        try:
            return date.fromisoformat(field).toordinal()
        except ValueError:
            pass
        try:
            return datetime.fromisoformat(field).date().toordinal()
        except ValueError:
            raise ParseError(line_no, f"bad ISO-8601 date {field!r}") from None
    value = _parse_int(field, line_no, "timestamp")
    if granularity == "days" and value < 0:
        raise ParseError(line_no, f"day index must be >= 0, got {value}")
    return value


def parse_events(
    source: Iterable[str] | IO[str],
    fmt: InputFormat | None = None,
    epoch_label: str = "",
) -> InteractionLog:
    """Parse a line-oriented character stream into a canonical log.

    Epoch-second and ISO-8601 timestamps are converted to day indices relative
    to the earliest event (earliest day becomes 0, whole days by floor
    division); day-granularity inputs are kept as given. Blank lines are
    skipped. Raises :class:`ParseError` naming the offending line, or
    :class:`EmptyLogError` when no events are found.
    """
    fmt = fmt or InputFormat()
    col_of = {name: i for i, name in enumerate(fmt.columns)}
    rating_idx = col_of.get("rating")

    rows: list[tuple[int, int, int, int | None]] = []
    for line_no, line in enumerate(source, start=1):
        if line_no == 1 and fmt.has_header:
            continue
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split(fmt.delimiter)
        if len(parts) < fmt.min_fields:
            raise ParseError(
                line_no,
                f"expected at least {fmt.min_fields} fields, got {len(parts)}",
            )
        user = _parse_int(parts[col_of["user_id"]].strip(), line_no, "user id")
        item = _parse_int(parts[col_of["item_id"]].strip(), line_no, "item id")
        ts = _parse_timestamp(parts[col_of["timestamp"]], fmt.day_granularity, line_no)
        rating = None
        if rating_idx is not None and rating_idx < len(parts):
            rating = _parse_rating(parts[rating_idx], line_no)
        rows.append((user, item, ts, rating))

    if not rows:
        raise EmptyLogError("no events in source")

    if fmt.day_granularity == "days":
        days = [ts for _, _, ts, _ in rows]
    else:
        origin = min(ts for _, _, ts, _ in rows)
        if fmt.day_granularity == "epoch-seconds":
            days = [(ts - origin) // SECONDS_PER_DAY for _, _, ts, _ in rows]
        else:
            days = [ts - origin for _, _, ts, _ in rows]

    events = [
        InteractionEvent(user_id=u, item_id=i, day=d, rating=r)
        for (u, i, _, r), d in zip(rows, days)
    ]
    return make_log(events, epoch_label=epoch_label)


def apply_rating_filter(log: InteractionLog, min_rating_exclusive: int | None) -> InteractionLog:
    """Keep events whose rating is strictly greater than the threshold.

    A ``None`` threshold disables the filter. With the filter enabled, every
    event must carry a rating.
    """
    if min_rating_exclusive is None:
        return log
    for e in log.events:
        if e.rating is None:
            raise ContractError(
                f"rating filter enabled but event ({e.user_id}, {e.item_id}) has no rating"
            )
    kept = tuple(e for e in log.events if e.rating > min_rating_exclusive)
    return replace(log, events=kept)


def apply_min_user_activity(log: InteractionLog, min_events: int) -> InteractionLog:
    """Drop all events of users with fewer than ``min_events`` events.

    Counts are taken on the given log and the filter is applied once; it is
    deliberately not iterated to a fixpoint.
    """
    if min_events < 0:
        raise ContractError(f"min_events must be >= 0, got {min_events}")
    if min_events == 0:
        return log
    counts = Counter(e.user_id for e in log.events)
    kept = tuple(e for e in log.events if counts[e.user_id] >= min_events)
    return replace(log, events=kept)


def remove_self_links(
    log: InteractionLog, ownership: Mapping[int, int] | None
) -> InteractionLog:
    """Drop events where the user interacted with an item they own.

    ``ownership`` maps item id to owning user id and must cover every item in
    the log; pass ``None`` to skip the operation.
    """
    if ownership is None:
        return log
    for e in log.events:
        if e.item_id not in ownership:
            raise ContractError(f"item {e.item_id} missing from ownership map")
    kept = tuple(e for e in log.events if ownership[e.item_id] != e.user_id)
    return replace(log, events=kept)


def sample_users(log: InteractionLog, n_users: int, seed: int) -> InteractionLog:
    """Keep the events of ``n_users`` users sampled uniformly without replacement.

    Returns the log unchanged when it has at most ``n_users`` distinct users.
    Deterministic for a given seed.
    """
    if n_users < 1:
        raise ContractError(f"n_users must be >= 1, got {n_users}")
    users = sorted({e.user_id for e in log.events})
    if len(users) <= n_users:
        return log
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(np.asarray(users, dtype=np.int64), size=n_users, replace=False).tolist())
    kept = tuple(e for e in log.events if e.user_id in chosen)
    return replace(log, events=kept)


def apply_filters(
    log: InteractionLog,
    *,
    min_rating_exclusive: int | None = None,
    min_user_events: int = 0,
    ownership: Mapping[int, int] | None = None,
    activity_count_before_rating_filter: bool = False,
) -> InteractionLog:
    """Run the preprocessing pipeline: rating, user activity, self-links.

    By default the activity count is taken after the rating filter. Set
    ``activity_count_before_rating_filter`` to count each user's events on the
    unfiltered log instead (the rating filter still applies to the events that
    remain).
    """
    if activity_count_before_rating_filter and min_user_events > 0:
        counts = Counter(e.user_id for e in log.events)
        log = apply_rating_filter(log, min_rating_exclusive)
        kept = tuple(e for e in log.events if counts[e.user_id] >= min_user_events)
        log = replace(log, events=kept)
    else:
        log = apply_rating_filter(log, min_rating_exclusive)
        log = apply_min_user_activity(log, min_user_events)
    return remove_self_links(log, ownership)


def write_canonical(log: InteractionLog, dest: IO[str] | str | Path) -> None:
    """Write the canonical headerless CSV form of a log.

    The rating column is included when any event carries one; events without
    a rating get an empty field.
    """
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_canonical(log, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    with_rating = any(e.rating is not None for e in log.events)
    for e in log.events:
        row: list[object] = [e.user_id, e.item_id, e.day]
        if with_rating:
            row.append("" if e.rating is None else e.rating)
        writer.writerow(row)


def read_canonical(source: IO[str] | str | Path, epoch_label: str = "") -> InteractionLog:
    """Read a canonical CSV written by :func:`write_canonical`."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_canonical(fh, epoch_label=epoch_label)
    lines = source.readlines()
    n_fields = None
    for line in lines:
        if line.strip():
            n_fields = len(line.rstrip("\r\n").split(","))
            break
    if n_fields is None:
        raise EmptyLogError("no events in source")
    columns: tuple[str, ...] = ("user_id", "item_id", "timestamp")
    if n_fields >= 4:
        columns = columns + ("rating",)
    fmt = InputFormat(day_granularity="days", columns=columns)
    return parse_events(iter(lines), fmt, epoch_label=epoch_label)


def summarize(log: InteractionLog) -> dict[str, object]:
    """Small JSON-friendly summary of a log."""
    summary: dict[str, object] = {
        "n_users": log.n_users,
        "n_items": log.n_items,
        "n_links": log.n_links,
    }
    if log.events:
        summary["min_day"] = log.min_day
        summary["max_day"] = log.max_day
    return summary


def log_from_string(text: str, fmt: InputFormat | None = None) -> InteractionLog:
    """Parse a log from an in-memory string; convenience for small inputs."""
    return parse_events(io.StringIO(text), fmt)
