"""Chat log parsing and stream-level statistics.

Two on-disk formats are accepted. JSONL is canonical, one object per line::

    {"ts": "2024-08-01T12:00:00Z", "user": "PikaFan", "text": "hi"}

CSV uses the header ``ts,user,text`` with RFC-4180 quoting.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

from .errors import ConfigurationError, EmptyDatasetError

log = logging.getLogger(__name__)

FORMATS = ("jsonl", "csv")

# Everything str.splitlines() treats as a boundary.
_LINE_BREAKS = re.compile("\r\n|[\n\r\x0b\x0c\x1c\x1d\x1e\x85\u2028\u2029]")

DEFAULT_BUCKETS: tuple[tuple[int, int | None], ...] = (
    (1, 10),
    (11, 20),
    (21, 50),
    (51, 100),
    (101, None),
)


@dataclass(frozen=True)
class ChatMessage:
    timestamp: datetime
    user_display: str
    text: str

    @property
    def user_key(self) -> str:
        return self.user_display.lower()

    def to_record(self) -> dict:
        return {"ts": format_timestamp(self.timestamp), "user": self.user_display, "text": self.text}


@dataclass
class ParsedLog:
    """Messages in file order plus the number of records that were skipped."""

    messages: list[ChatMessage]
    malformed: int = 0

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)


@dataclass(frozen=True)
class DatasetSummary:
    messages: int
    chatters: int
    length: timedelta


@dataclass(frozen=True)
class Bucket:
    label: str
    lo: int
    hi: int | None
    chatters: int

    def contains(self, count: int) -> bool:
        return count >= self.lo and (self.hi is None or count <= self.hi)


@dataclass(frozen=True)
class EngagementHistogram:
    buckets: tuple[Bucket, ...] = field(default_factory=tuple)

    @property
    def total(self) -> int:
        return sum(b.chatters for b in self.buckets)


def parse_timestamp(value: str) -> datetime:
    """Parse ISO-8601 into an aware UTC datetime truncated to milliseconds.

    Naive timestamps are taken to be UTC already.
    """
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=ts.microsecond // 1000 * 1000)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def normalize_text(text: str) -> str:
    return _LINE_BREAKS.sub(" ", text)


def _make_message(record: object) -> ChatMessage | None:
    if not isinstance(record, dict):
        return None
    ts, user, text = record.get("ts"), record.get("user"), record.get("text")
    if not (isinstance(ts, str) and isinstance(user, str) and isinstance(text, str)):
        return None
    user = user.strip()
    if not user:
        return None
    try:
        timestamp = parse_timestamp(ts)
    except ValueError:
        return None
    return ChatMessage(timestamp=timestamp, user_display=user, text=normalize_text(text))


def _jsonl_records(stream: io.TextIOBase) -> Iterable[object]:
    for line in stream:
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError:
            yield None


def _csv_records(stream: io.TextIOBase) -> Iterable[object]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or not {"ts", "user", "text"} <= set(reader.fieldnames):
        raise EmptyDatasetError(f"CSV header must contain ts,user,text (got {reader.fieldnames})")
    for row in reader:
        # DictReader pads short rows with None, which _make_message rejects
        yield row


def parse_chat_log(source: BinaryIO, fmt: str = "jsonl") -> ParsedLog:
    """Parse a binary stream of chat records.

    Malformed records are skipped and counted. Raises ``EmptyDatasetError``
    when nothing valid remains.
    """
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown log format {fmt!r}; expected one of {FORMATS}")
    text = io.TextIOWrapper(source, encoding="utf-8", newline="" if fmt == "csv" else None)
    records = _jsonl_records(text) if fmt == "jsonl" else _csv_records(text)
    messages: list[ChatMessage] = []
    malformed = 0
    for record in records:
        msg = _make_message(record)
        if msg is None:
            malformed += 1
        else:
            messages.append(msg)
    text.detach()
    if malformed:
        log.warning("skipped %d malformed record(s)", malformed)
    if not messages:
        raise EmptyDatasetError("no valid chat records found")
    return ParsedLog(messages, malformed)


def infer_format(path: str | Path) -> str:
    return "csv" if Path(path).suffix.lower() == ".csv" else "jsonl"


def read_chat_log(path: str | Path, fmt: str | None = None) -> ParsedLog:
    with open(path, "rb") as fh:
        return parse_chat_log(fh, fmt or infer_format(path))


def write_jsonl(messages: Iterable[ChatMessage], dest: io.TextIOBase) -> None:
    for msg in messages:
        dest.write(json.dumps(msg.to_record(), ensure_ascii=False) + "\n")


def dataset_summary(messages: Sequence[ChatMessage]) -> DatasetSummary:
    if not messages:
        raise EmptyDatasetError("cannot summarize an empty message list")
    stamps = [m.timestamp for m in messages]
    return DatasetSummary(
        messages=len(messages),
        chatters=len({m.user_key for m in messages}),
        length=max(stamps) - min(stamps),
    )


def _bucket_label(lo: int, hi: int | None) -> str:
    return f"{lo}+" if hi is None else f"{lo}-{hi}"


def validate_buckets(spec: Sequence[tuple[int, int | None]]) -> None:
    """Buckets must tile [1, inf) in order, without gaps or overlaps."""
    if not spec:
        raise ConfigurationError("bucket spec is empty")
    expected = 1
    for i, (lo, hi) in enumerate(spec):
        if lo != expected:
            raise ConfigurationError(f"bucket {i} starts at {lo}, expected {expected}")
        if hi is None:
            if i != len(spec) - 1:
                raise ConfigurationError("only the last bucket may be unbounded")
            return
        if hi < lo:
            raise ConfigurationError(f"bucket {i} has hi < lo")
        expected = hi + 1
    raise ConfigurationError("last bucket must be unbounded")


def parse_bucket_spec(text: str) -> tuple[tuple[int, int | None], ...]:
    """Parse ``"1-10,11-20,21+"`` into bucket bounds."""
    spec: list[tuple[int, int | None]] = []
    for part in text.split(","):
        part = part.strip()
        try:
            if part.endswith("+"):
                spec.append((int(part[:-1]), None))
            else:
                lo, hi = part.split("-")
                spec.append((int(lo), int(hi)))
        except ValueError:
            raise ConfigurationError(f"bad bucket {part!r}") from None
    validate_buckets(spec)
    return tuple(spec)


def engagement_histogram(
    messages: Iterable[ChatMessage],
    buckets: Sequence[tuple[int, int | None]] = DEFAULT_BUCKETS,
) -> EngagementHistogram:
    validate_buckets(buckets)
    per_user = Counter(m.user_key for m in messages)
    tally = [0] * len(buckets)
    for count in per_user.values():
        for i, (lo, hi) in enumerate(buckets):
            if count >= lo and (hi is None or count <= hi):
                tally[i] += 1
                break
    return EngagementHistogram(
        tuple(Bucket(_bucket_label(lo, hi), lo, hi, n) for (lo, hi), n in zip(buckets, tally))
    )


def exclude_users(messages: Iterable[ChatMessage], users: Iterable[str]) -> list[ChatMessage]:
    drop = {u.lower() for u in users}
    return [m for m in messages if m.user_key not in drop]
