"""Per-chatter documents: every message of a user, one per line."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, TextIO

from .errors import ConfigurationError, InputError
from .ingest import ChatMessage

DEFAULT_MIN_MESSAGES = 20


@dataclass(frozen=True)
class ChatterProfile:
    user_key: str
    user_display: str
    message_count: int
    document: str

    def messages(self) -> list[str]:
        return self.document.split("\n")


def build_profiles(messages: Iterable[ChatMessage]) -> list[ChatterProfile]:
    """Group messages by user key; output is sorted by key.

    The display name is the first spelling seen for that user.
    """
    texts: dict[str, list[str]] = {}
    display: dict[str, str] = {}
    for msg in messages:
        key = msg.user_key
        if key not in texts:
            texts[key] = []
            display[key] = msg.user_display
        texts[key].append(msg.text)
    return [
        ChatterProfile(key, display[key], len(texts[key]), "\n".join(texts[key]))
        for key in sorted(texts)
    ]


def filter_by_activity(
    profiles: Iterable[ChatterProfile], min_messages: int = DEFAULT_MIN_MESSAGES
) -> list[ChatterProfile]:
    if min_messages < 1:
        raise ConfigurationError("min_messages must be >= 1")
    return [p for p in profiles if p.message_count >= min_messages]


def write_profiles(profiles: Iterable[ChatterProfile], dest: TextIO) -> None:
    for p in profiles:
        record = {"user": p.user_display, "count": p.message_count, "document": p.document}
        dest.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_profiles(lines: Iterable[str]) -> list[ChatterProfile]:
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            user, count, doc = rec["user"], int(rec["count"]), rec["document"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad profile record on line {lineno}: {exc}") from None
        if doc.count("\n") != count - 1:
            raise InputError(f"profile {user!r}: count {count} disagrees with document lines")
        out.append(ChatterProfile(user.lower(), user, count, doc))
    return out

