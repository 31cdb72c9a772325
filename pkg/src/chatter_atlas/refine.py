"""Post-processing of clusterings: singleton pruning, analyst merge specs and
automatic merging by re-clustering cluster centroids."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .cluster import APParams, Cluster, Clustering, affinity_propagation
from .errors import ConfigurationError, InputError, MergeSpecError, NumericError
from .similarity import build_affinity_matrix, pairwise_cosine

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MergeGroup:
    name: str | None
    members: tuple[int, ...]


@dataclass(frozen=True)
class MergeSpec:
    groups: tuple[MergeGroup, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "MergeSpec":
        try:
            groups = tuple(
                MergeGroup(g.get("name"), tuple(int(m) for m in g["members"])) for g in d["groups"]
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MergeSpecError(f"malformed merge spec: {exc}") from None
        return cls(groups)

    @classmethod
    def load(cls, path) -> "MergeSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise MergeSpecError(f"merge spec is not valid JSON: {exc}") from None

    def validate(self, c: Clustering) -> None:
        known = {cl.id for cl in c.clusters}
        seen: set[int] = set()
        for g in self.groups:
            if not g.members:
                raise MergeSpecError(f"group {g.name!r} has no members")
            for cid in g.members:
                if cid not in known:
                    raise MergeSpecError(f"group {g.name!r} references unknown cluster id {cid}")
                if cid in seen:
                    raise MergeSpecError(f"cluster id {cid} appears in more than one group")
                seen.add(cid)


@dataclass(frozen=True)
class AutoMergeParams:
    """``preference`` is "cohesion", "median" or a number.

    "cohesion" uses the median within-cluster member similarity, so two
    clusters merge only when their centroids are closer than members of a
    typical cluster are to each other.
    """

    max_depth: int = 3
    ap: APParams = field(default_factory=APParams)
    preference: str | float = "cohesion"

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigurationError("max_depth must be >= 1")
        if isinstance(self.preference, str) and self.preference not in ("cohesion", "median"):
            raise ConfigurationError(f"unknown preference strategy {self.preference!r}")


def prune_singletons(c: Clustering) -> Clustering:
    keep = [cl for cl in c.clusters if cl.size >= 2]
    dropped = sorted(m for cl in c.clusters if cl.size < 2 for m in cl.members)
    if not keep:
        log.warning("every cluster is a singleton; pruning leaves nothing")
    assignments = list(c.assignments)
    for m in dropped:
        assignments[m] = -1
    clusters = [replace(cl, id=i, members=list(cl.members)) for i, cl in enumerate(keep)]
    lineage = list(c.lineage)
    if lineage:
        lineage.append([{"id": i, "from": [cl.id]} for i, cl in enumerate(keep)])
    return replace(
        c,
        assignments=assignments,
        clusters=clusters,
        removed=sorted(c.removed + dropped),
        lineage=lineage,
    )


def _merged_name(name: str | None, parts: list[Cluster]) -> str | None:
    if name is not None:
        return name
    names = {p.name for p in parts if p.name is not None}
    return names.pop() if len(names) == 1 else None


def _merge_groups(c: Clustering, groups: Sequence[tuple[str | None, Sequence[int]]]) -> Clustering:
    by_id = {cl.id: cl for cl in c.clusters}
    grouped = {cid for _, ids in groups for cid in ids}
    units = [(name, sorted(ids)) for name, ids in groups]
    units += [(None, [cl.id]) for cl in c.clusters if cl.id not in grouped]
    units.sort(key=lambda u: u[1][0])

    clusters: list[Cluster] = []
    rounds: list[dict] = []
    assignments = list(c.assignments)
    for new_id, (name, ids) in enumerate(units):
        parts = [by_id[i] for i in ids]
        # largest constituent wins, lowest id on ties
        lead = min(parts, key=lambda p: (-p.size, p.id))
        members = sorted(m for p in parts for m in p.members)
        for m in members:
            assignments[m] = lead.exemplar
        clusters.append(Cluster(new_id, lead.exemplar, members, _merged_name(name, parts)))
        rounds.append({"id": new_id, "from": list(ids)})
    return replace(c, assignments=assignments, clusters=clusters, lineage=c.lineage + [rounds])


def apply_merge_spec(c: Clustering, spec: MergeSpec) -> Clustering:
    spec.validate(c)
    if not spec.groups:
        return replace(c)
    return _merge_groups(c, [(g.name, g.members) for g in spec.groups])


def cluster_centroid(members: Sequence[int], vectors) -> np.ndarray:
    if len(members) == 0:
        raise InputError("centroid of an empty cluster")
    x = np.asarray(vectors, dtype=np.float64)[list(members)]
    mean = x.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm <= 1e-12 * float(np.linalg.norm(x, axis=1).max()):
        raise NumericError(f"centroid of members {list(members)[:5]}... has zero norm")
    return mean / norm


def cohesion_preference(c: Clustering, vectors) -> float | None:
    """Median pairwise member similarity over all multi-member clusters."""
    sims = []
    for cl in c.clusters:
        if cl.size < 2:
            continue
        g = pairwise_cosine(np.asarray(vectors)[cl.members])
        sims.append(g[~np.eye(cl.size, dtype=bool)])
    if not sims:
        return None
    return float(np.median(np.concatenate(sims)))


def auto_merge(c: Clustering, vectors, params: AutoMergeParams = AutoMergeParams()) -> Clustering:
    """Merge clusters by running affinity propagation on their centroids.

    Repeats for up to ``params.max_depth`` rounds, stopping early once a
    round leaves the cluster count unchanged. A non-converging round is
    discarded with a warning and the previous level is returned.
    """
    if len(c.clusters) < 2:
        raise InputError("auto_merge needs at least 2 clusters")
    current = c
    for depth in range(params.max_depth):
        if len(current.clusters) < 2:
            break
        centroids = np.stack([cluster_centroid(cl.members, vectors) for cl in current.clusters])
        if params.preference == "median":
            pref = None
        elif params.preference == "cohesion":
            pref = cohesion_preference(current, vectors)
        else:
            pref = float(params.preference)
        result = affinity_propagation(build_affinity_matrix(centroids, pref), params.ap)
        if not result.converged:
            log.warning("auto-merge round %d did not converge; keeping previous level", depth + 1)
            break
        if len(result.clusters) == len(current.clusters):
            break
        groups = [(None, [current.clusters[i].id for i in cl.members]) for cl in result.clusters]
        current = _merge_groups(current, groups)
    return current
