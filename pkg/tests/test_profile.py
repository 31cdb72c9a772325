import io
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chatter_atlas.errors import ConfigurationError, InputError
from chatter_atlas.ingest import ChatMessage
from chatter_atlas.profile import ChatterProfile, build_profiles, filter_by_activity, read_profiles, write_profiles

T0 = datetime(2024, 8, 1, tzinfo=timezone.utc)


def msgs(*pairs):
    return [ChatMessage(T0, user, text) for user, text in pairs]


def test_messages_joined_by_line_feed():
    (p,) = build_profiles(msgs(("a", "hi"), ("a", "there")))
    assert p.document == "hi\nthere"
    assert p.message_count == 2


def test_single_message_document():
    (p,) = build_profiles(msgs(("a", "yo")))
    assert p.document == "yo" and p.message_count == 1


def test_interleaved_users_keep_stream_order():
    profiles = build_profiles(msgs(("b", "1"), ("a", "2"), ("b", "3")))
    assert [p.user_key for p in profiles] == ["a", "b"]
    assert profiles[1].document == "1\n3"


def test_case_variants_share_a_profile():
    (p,) = build_profiles(msgs(("Ash", "1"), ("ASH", "2")))
    assert p.user_display == "Ash" and p.message_count == 2


def test_empty_input():
    assert build_profiles([]) == []
    assert filter_by_activity([]) == []


def _profile(count):
    return ChatterProfile(f"u{count}", f"u{count}", count, "\n".join(["m"] * count))


def test_threshold_boundary():
    assert filter_by_activity([_profile(19)]) == []
    assert filter_by_activity([_profile(20)]) == [_profile(20)]


def test_threshold_hand_counted():
    kept = filter_by_activity([_profile(5), _profile(20), _profile(21)])
    assert [p.message_count for p in kept] == [20, 21]


def test_min_messages_must_be_positive():
    with pytest.raises(ConfigurationError):
        filter_by_activity([], 0)


def test_profiles_jsonl_round_trip():
    profiles = build_profiles(msgs(("Ash", "hi"), ("misty", "yo"), ("Ash", "there")))
    buf = io.StringIO()
    write_profiles(profiles, buf)
    assert '"count": 2' in buf.getvalue()
    assert read_profiles(buf.getvalue().splitlines()) == profiles


def test_read_profiles_rejects_inconsistent_count():
    with pytest.raises(InputError):
        read_profiles(['{"user": "a", "count": 3, "document": "x"}'])


stream = st.lists(st.tuples(st.sampled_from("abcdE"), st.text(alphabet="xyz ", max_size=5)), max_size=60)


@given(stream)
def test_profiles_reproduce_each_users_messages(pairs):
    messages = msgs(*pairs)
    profiles = build_profiles(messages)
    assert sum(p.message_count for p in profiles) == len(messages)
    for p in profiles:
        expected = [m.text for m in messages if m.user_key == p.user_key]
        assert p.document.count("\n") == p.message_count - 1
        assert p.messages() == expected


@given(stream, st.integers(1, 30), st.integers(1, 30))
def test_filter_idempotent_and_monotone(pairs, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    profiles = build_profiles(msgs(*pairs))
    once = filter_by_activity(profiles, lo)
    assert filter_by_activity(once, lo) == once
    assert all(p.message_count >= lo for p in once)
    assert set(filter_by_activity(profiles, hi)) <= set(once)
