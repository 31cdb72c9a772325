"""Cluster evidence tables and markdown/JSON rendering."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from datetime import timedelta
from typing import Sequence

import numpy as np

from .cluster import Clustering
from .errors import ConfigurationError, InputError
from .ingest import Bucket, DatasetSummary, EngagementHistogram
from .profile import ChatterProfile
from .similarity import pairwise_cosine


@dataclass(frozen=True)
class ClusterReport:
    cluster_id: int
    name: str | None
    size: int
    exemplar_user: str
    sample_messages: tuple[str, ...]
    top_terms: tuple[tuple[str, float], ...]
    mean_intra_similarity: float


def _term_counts(profiles: Sequence[ChatterProfile]) -> Counter:
    counts: Counter = Counter()
    for p in profiles:
        counts.update(p.document.lower().split())
    return counts


def top_terms(
    members: Sequence[ChatterProfile],
    k: int,
    clusters: Sequence[Sequence[ChatterProfile]] | None = None,
) -> list[tuple[str, float]]:
    """Rank the cluster's terms by ``tf * (log((1 + N) / (1 + df)) + 1)``.

    ``tf`` counts occurrences across the member documents, ``N`` is the
    number of clusters in ``clusters`` (default: just this one) and ``df``
    the number of those clusters using the term.
    """
    if k <= 0 or not members:
        return []
    if clusters is None:
        clusters = [members]
    vocab = [set(_term_counts(cl)) for cl in clusters]
    n = len(vocab)
    scored = []
    for term, tf in _term_counts(members).items():
        df = sum(term in v for v in vocab)
        scored.append((term, tf * (math.log((1 + n) / (1 + df)) + 1.0)))
    scored.sort(key=lambda ts: (-ts[1], ts[0]))
    return scored[:k]


def mean_intra_similarity(vectors) -> float:
    x = np.asarray(vectors, dtype=np.float64)
    if len(x) < 2:
        return 1.0
    g = pairwise_cosine(x)
    return float(g[np.triu_indices(len(x), 1)].mean())


def cluster_report(
    c: Clustering,
    profiles: Sequence[ChatterProfile],
    vectors,
    k_terms: int = 8,
    k_samples: int = 5,
) -> list[ClusterReport]:
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(profiles) != c.n_points or len(vectors) != c.n_points:
        raise InputError(
            f"clustering covers {c.n_points} points but got {len(profiles)} profiles "
            f"and {len(vectors)} vectors"
        )
    groups = [[profiles[m] for m in cl.members] for cl in c.clusters]
    reports = []
    for cl, members in zip(c.clusters, groups):
        exemplar = profiles[cl.exemplar]
        reports.append(
            ClusterReport(
                cluster_id=cl.id,
                name=cl.name,
                size=cl.size,
                exemplar_user=exemplar.user_display,
                sample_messages=tuple(exemplar.messages()[:k_samples]),
                top_terms=tuple(top_terms(members, k_terms, groups)),
                mean_intra_similarity=mean_intra_similarity(vectors[cl.members]),
            )
        )
    return reports


def format_duration(length: timedelta) -> str:
    minutes = int(length.total_seconds() // 60)
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes}m" if hours else f"{minutes}m"


def _cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def _render_markdown(
    reports: Sequence[ClusterReport],
    summary: DatasetSummary,
    hist: EngagementHistogram,
    notes: Sequence[str],
) -> str:
    out = ["# Chatter clusters", "", "## Dataset", ""]
    out += ["| Messages | Chatters | Length |", "|---:|---:|---:|"]
    out.append(f"| {summary.messages} | {summary.chatters} | {format_duration(summary.length)} |")
    out += ["", "## Engagement", "", "| Messages sent | Chatters |", "|---|---:|"]
    out += [f"| {b.label} | {b.chatters} |" for b in hist.buckets]
    out += ["", "## Clusters", ""]
    out += ["| Cluster | Size | Exemplar | Cohesion | Top terms |", "|---|---:|---|---:|---|"]
    for r in reports:
        label = f"{r.cluster_id}: {r.name}" if r.name else str(r.cluster_id)
        terms = ", ".join(t for t, _ in r.top_terms)
        out.append(
            f"| {_cell(label)} | {r.size} | {_cell(r.exemplar_user)} "
            f"| {r.mean_intra_similarity:.3f} | {_cell(terms)} |"
        )
    for r in reports:
        title = f"Cluster {r.cluster_id}" + (f": {r.name}" if r.name else "")
        out += ["", f"### {title}", "", f"Sample messages from `{r.exemplar_user}`:", ""]
        out += [f"> {m}" if m else ">" for m in r.sample_messages] or ["> (none)"]
    if notes:
        out += ["", "## Notes", ""] + [f"- {n}" for n in notes]
    return "\n".join(out) + "\n"


def _report_to_dict(r: ClusterReport) -> dict:
    d = asdict(r)
    d["sample_messages"] = list(r.sample_messages)
    d["top_terms"] = [[t, s] for t, s in r.top_terms]
    return d


def render(
    reports: Sequence[ClusterReport],
    summary: DatasetSummary,
    hist: EngagementHistogram,
    fmt: str = "markdown",
    notes: Sequence[str] = (),
) -> str:
    if fmt == "markdown":
        return _render_markdown(reports, summary, hist, notes)
    if fmt != "json":
        raise ConfigurationError(f"unknown report format {fmt!r}")
    doc = {
        "summary": {
            "messages": summary.messages,
            "chatters": summary.chatters,
            "length_ms": summary.length // timedelta(milliseconds=1),
        },
        "histogram": [asdict(b) for b in hist.buckets],
        "clusters": [_report_to_dict(r) for r in reports],
        "notes": list(notes),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_report_json(text: str) -> tuple[list[ClusterReport], DatasetSummary, EngagementHistogram]:
    doc = json.loads(text)
    s = doc["summary"]
    summary = DatasetSummary(s["messages"], s["chatters"], timedelta(milliseconds=s["length_ms"]))
    hist = EngagementHistogram(tuple(Bucket(**b) for b in doc["histogram"]))
    reports = [
        ClusterReport(
            cluster_id=r["cluster_id"],
            name=r["name"],
            size=r["size"],
            exemplar_user=r["exemplar_user"],
            sample_messages=tuple(r["sample_messages"]),
            top_terms=tuple((t, float(sc)) for t, sc in r["top_terms"]),
            mean_intra_similarity=float(r["mean_intra_similarity"]),
        )
        for r in doc["clusters"]
    ]
    return reports, summary, hist
