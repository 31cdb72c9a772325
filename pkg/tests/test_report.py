import json
import math
from datetime import timedelta
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import report_fixture as fx
from chatter_atlas.cluster import Cluster, Clustering
from chatter_atlas.errors import ConfigurationError, InputError
from chatter_atlas.ingest import DatasetSummary
from chatter_atlas.profile import ChatterProfile
from chatter_atlas.report import (
    ClusterReport,
    cluster_report,
    format_duration,
    parse_report_json,
    render,
    top_terms,
)

GOLDEN = Path(__file__).parent / "golden"


def prof(doc, key="u"):
    return ChatterProfile(key, key, doc.count("\n") + 1, doc)


def fixture_reports():
    return cluster_report(fx.CLUSTERING, fx.PROFILES, fx.VECTORS, k_terms=3, k_samples=2)


def test_top_terms_hand_computed():
    a, b = [prof("kirby kirby party")], [prof("party time")]
    terms = top_terms(a, 5, [a, b])
    # kirby: tf 2, in 1 of 2 clusters; party: tf 1, in both
    assert terms[0] == ("kirby", pytest.approx(2 * (math.log(3 / 2) + 1)))
    assert terms[1] == ("party", pytest.approx(1.0))


def test_shared_vocabulary_ranks_by_tf():
    a, b = [prof("a a b")], [prof("a b b")]
    assert top_terms(a, 2, [a, b]) == [("a", 2.0), ("b", 1.0)]
    assert top_terms(b, 2, [a, b]) == [("b", 2.0), ("a", 1.0)]


def test_top_terms_k_zero_and_ties():
    assert top_terms([prof("x y")], 0) == []
    assert top_terms([prof("y x z")], 2) == [("x", 1.0), ("y", 1.0)]


def test_top_terms_lowercases():
    assert top_terms([prof("Kirby KIRBY kirby")], 1) == [("kirby", 3.0)]


def test_cluster_report_contract():
    reports = fixture_reports()
    assert [r.size for r in reports] == [2, 2]
    assert reports[0].exemplar_user == "Ash"
    assert reports[0].sample_messages == ("kirby kirby party", "PartyKirby")
    assert reports[0].mean_intra_similarity == pytest.approx(0.6)
    assert reports[1].mean_intra_similarity == pytest.approx(1.0, abs=1e-9)
    assert reports[0].name == "Kirby fans" and reports[1].name is None
    for r in reports:
        assert [s for _, s in r.top_terms] == sorted((s for _, s in r.top_terms), reverse=True)


def test_report_sizes_follow_clusters():
    sizes = [8, 7, 5, 11, 15]
    n = sum(sizes)
    clusters, assignments, start = [], [], 0
    for cid, size in enumerate(sizes):
        clusters.append(Cluster(cid, start, list(range(start, start + size))))
        assignments += [start] * size
        start += size
    c = Clustering(assignments, clusters, True, 1, 0.0)
    profiles = [prof(f"msg{i}", f"u{i}") for i in range(n)]
    vectors = np.random.default_rng(0).normal(size=(n, 4))
    reports = cluster_report(c, profiles, vectors)
    assert [r.size for r in reports] == sizes


def test_misaligned_inputs():
    with pytest.raises(InputError):
        cluster_report(fx.CLUSTERING, fx.PROFILES[:3], fx.VECTORS)


def test_singleton_cohesion_is_one():
    c = Clustering([0, 1], [Cluster(0, 0, [0]), Cluster(1, 1, [1])], True, 1, 0.0)
    reports = cluster_report(c, [prof("a", "a"), prof("b", "b")], np.eye(2))
    assert [r.mean_intra_similarity for r in reports] == [1.0, 1.0]


def test_duration_format():
    assert format_duration(timedelta(minutes=10)) == "10m"
    assert format_duration(timedelta(hours=4, minutes=31, seconds=59)) == "4h 31m"
    assert format_duration(timedelta(0)) == "0m"


def test_summary_row():
    md = render([], DatasetSummary(3, 2, timedelta(minutes=10)), fx.histogram())
    assert "| 3 | 2 | 10m |" in md.splitlines()


def test_markdown_golden():
    md = render(fixture_reports(), fx.summary(), fx.histogram(), "markdown")
    assert md == (GOLDEN / "report.md").read_text(encoding="utf-8")


def test_json_golden_and_round_trip():
    reports, summary, hist = fixture_reports(), fx.summary(), fx.histogram()
    text = render(reports, summary, hist, "json")
    assert text == (GOLDEN / "report.json").read_text(encoding="utf-8")
    assert set(json.loads(text)) >= {"summary", "histogram", "clusters"}
    assert parse_report_json(text) == (reports, summary, hist)


def test_unknown_format():
    with pytest.raises(ConfigurationError):
        render([], fx.summary(), fx.histogram(), "html")


def _cluster_rows(md):
    lines = md.splitlines()
    start = lines.index("| Cluster | Size | Exemplar | Cohesion | Top terms |") + 2
    rows = []
    for line in lines[start:]:
        if not line.startswith("|"):
            break
        rows.append(line)
    return rows


words = st.text(alphabet="ab|c", min_size=1, max_size=6)
report_st = st.builds(
    ClusterReport,
    cluster_id=st.integers(0, 99),
    name=st.none() | words,
    size=st.integers(1, 50),
    exemplar_user=words,
    sample_messages=st.lists(st.text(max_size=10), max_size=3).map(tuple),
    top_terms=st.lists(st.tuples(words, st.floats(0, 10)), max_size=3).map(tuple),
    mean_intra_similarity=st.floats(-1, 1),
)


@given(st.lists(report_st, max_size=12))
def test_markdown_row_count_and_json_round_trip(reports):
    summary = DatasetSummary(5, 2, timedelta(seconds=61.5))
    hist = fx.histogram()
    assert len(_cluster_rows(render(reports, summary, hist))) == len(reports)
    assert parse_report_json(render(reports, summary, hist, "json")) == (reports, summary, hist)


def test_notes_section():
    md = render([], fx.summary(), fx.histogram(), notes=["2 document(s) truncated"])
    assert md.endswith("## Notes\n\n- 2 document(s) truncated\n")
