"""Planted-partition chat corpora with known chatter groups."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .ingest import ChatMessage

ARCHETYPES: dict[str, tuple[str, ...]] = {
    "supportive": (
        "love", "this", "stream", "thank", "you", "so", "much", "great", "vibes", "wholesome",
        "best", "streamer", "ever", "happy", "here", "cozy", "evening", "keep", "going", "proud",
    ),
    "emotes": (
        "PartyKirby", "KEKW", "LUL", "PogChamp", "OMEGALUL", "monkaS", "Kappa", "D:", "xdd", "PepeHands",
        "Sadge", "POGGERS", "catJAM", "HYPERS", "Clap", "WAYTOODANK", "EZ", "LMAO", "huh", "o7",
    ),
    "strategy": (
        "route", "level", "evolve", "moveset", "nuzlocke", "gym", "leader", "speed", "attack", "defense",
        "tank", "switch", "potion", "berry", "item", "boss", "team", "party", "calc", "crit",
    ),
}

START = datetime(2024, 8, 1, 18, 0, tzinfo=timezone.utc)


def planted_corpus(
    seed: int = 0,
    users_per_archetype: int = 15,
    messages_per_user: int = 25,
    low_activity_users: int = 5,
    words_per_message: tuple[int, int] = (2, 6),
) -> tuple[list[ChatMessage], dict[str, str]]:
    """Messages in timestamp order plus the planted archetype of every user.

    Low-activity users get between 1 and 19 messages from a random archetype.
    """
    rng = np.random.default_rng(seed)
    names = list(ARCHETYPES)
    plan: list[tuple[str, str, int]] = []
    for arch in names:
        for j in range(users_per_archetype):
            plan.append((f"{arch}_fan{j:02d}", arch, messages_per_user))
    for j in range(low_activity_users):
        plan.append((f"Lurker{j:02d}", names[int(rng.integers(len(names)))], int(rng.integers(1, 20))))

    slots = [(user, arch) for user, arch, count in plan for _ in range(count)]
    order = rng.permutation(len(slots))
    messages = []
    for step, idx in enumerate(order):
        user, arch = slots[idx]
        vocab = ARCHETYPES[arch]
        n_words = int(rng.integers(words_per_message[0], words_per_message[1] + 1))
        text = " ".join(vocab[int(w)] for w in rng.integers(len(vocab), size=n_words))
        messages.append(ChatMessage(START + timedelta(seconds=7 * step), user, text))
    labels = {user.lower(): arch for user, arch, _ in plan}
    return messages, labels
