"""Affinity propagation by responsibility/availability message passing.

The solver is deterministic: instead of random jitter, similarities are
nudged down by a tiny amount that grows with the column index, so exactly
symmetric instances settle on the lowest-index exemplar. The nudge only
affects the message passing. Assignments and net similarity are computed
on the original matrix.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, InputError, NumericError
from .similarity import AffinityMatrix, check_affinity_matrix

log = logging.getLogger(__name__)

# Relative size of the lowest-index tie-break, scaled by max |s|.
TIE_BREAK = 1e-12
BRUTE_FORCE_MAX_N = 15


@dataclass(frozen=True)
class APParams:
    damping: float = 0.5
    max_iter: int = 200
    convergence_iter: int = 15
    tie_policy: str = "lowest_index"

    def __post_init__(self):
        if not 0.5 <= self.damping < 1.0:
            raise ConfigurationError(f"damping must lie in [0.5, 1), got {self.damping}")
        if self.max_iter < 1 or self.convergence_iter < 1:
            raise ConfigurationError("max_iter and convergence_iter must be >= 1")
        if self.convergence_iter > self.max_iter:
            raise ConfigurationError("convergence_iter cannot exceed max_iter")
        if self.tie_policy != "lowest_index":
            raise ConfigurationError(f"unsupported tie policy {self.tie_policy!r}")


@dataclass(frozen=True)
class APState:
    r: np.ndarray
    a: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "APState":
        return cls(np.zeros((n, n)), np.zeros((n, n)))


@dataclass
class Cluster:
    id: int
    exemplar: int
    members: list[int]
    name: str | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        d = {"id": self.id, "exemplar": self.exemplar, "members": list(self.members)}
        if self.name is not None:
            d["name"] = self.name
        return d


@dataclass
class Clustering:
    """Result of clustering ``n_points`` items.

    ``assignments[i]`` is the exemplar of point ``i``, or -1 once the point
    has been removed by refinement. ``lineage`` holds one list per merge
    round mapping each new cluster id to the ids it was formed from.
    """

    assignments: list[int]
    clusters: list[Cluster]
    converged: bool
    iterations: int
    net_similarity: float
    removed: list[int] = field(default_factory=list)
    lineage: list[list[dict]] = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return len(self.assignments)

    def sizes(self) -> list[int]:
        return [c.size for c in self.clusters]

    def labels(self) -> list[int]:
        """Cluster id per point (-1 for removed points)."""
        out = [-1] * self.n_points
        for c in self.clusters:
            for m in c.members:
                out[m] = c.id
        return out

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "net_similarity": self.net_similarity,
            "n_points": self.n_points,
            "clusters": [c.to_dict() for c in self.clusters],
            "removed": list(self.removed),
            "lineage": self.lineage,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Clustering":
        try:
            clusters = [
                Cluster(int(c["id"]), int(c["exemplar"]), [int(m) for m in c["members"]], c.get("name"))
                for c in d["clusters"]
            ]
            n = int(d.get("n_points", 1 + max((m for c in clusters for m in c.members), default=-1)))
            assignments = [-1] * n
            for c in clusters:
                for m in c.members:
                    assignments[m] = c.exemplar
            out = cls(
                assignments=assignments,
                clusters=clusters,
                converged=bool(d["converged"]),
                iterations=int(d["iterations"]),
                net_similarity=float(d["net_similarity"]),
                removed=[int(i) for i in d.get("removed", [])],
                lineage=d.get("lineage", []),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InputError(f"malformed clustering JSON: {exc}") from None
        validate_clustering(out)
        return out


def validate_clustering(c: Clustering) -> None:
    """Raise InputError unless clusters partition the non-removed points."""
    seen: set[int] = set()
    for cl in c.clusters:
        if not cl.members or cl.exemplar not in cl.members:
            raise InputError(f"cluster {cl.id}: exemplar {cl.exemplar} is not a member")
        if cl.members != sorted(set(cl.members)):
            raise InputError(f"cluster {cl.id}: members must be sorted and unique")
        if seen & set(cl.members):
            raise InputError(f"cluster {cl.id} overlaps another cluster")
        seen.update(cl.members)
        for m in cl.members:
            if c.assignments[m] != cl.exemplar:
                raise InputError(f"point {m} is not assigned to its cluster exemplar")
    if seen | set(c.removed) != set(range(c.n_points)) or seen & set(c.removed):
        raise InputError("clusters and removed points do not partition the point set")


def _check_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise NumericError(f"non-finite message at {tuple(int(i) for i in bad)}")


def update_responsibilities(s, state: APState, damping: float) -> APState:
    """r(i,k) <- s(i,k) - max_{k' != k} (a(i,k') + s(i,k')), damped."""
    s = np.asarray(s.values if isinstance(s, AffinityMatrix) else s, dtype=np.float64)
    n = len(s)
    rows = np.arange(n)
    total = state.a + s
    first = np.argmax(total, axis=1)
    best = total[rows, first]
    total[rows, first] = -np.inf
    second = total.max(axis=1)
    fresh = s - best[:, None]
    fresh[rows, first] = s[rows, first] - second
    r = damping * state.r + (1.0 - damping) * fresh
    _check_finite(r)
    return APState(r, state.a)


def update_availabilities(s, state: APState, damping: float) -> APState:
    """a(i,k) <- min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k))) off the
    diagonal, a(k,k) <- sum_{i' != k} max(0, r(i',k)); damped."""
    r = state.r
    n = len(r)
    idx = np.arange(n)
    pos = np.maximum(r, 0.0)
    pos[idx, idx] = r[idx, idx]
    fresh = pos.sum(axis=0)[None, :] - pos
    self_avail = fresh[idx, idx].copy()
    fresh = np.minimum(fresh, 0.0)
    fresh[idx, idx] = self_avail
    a = damping * state.a + (1.0 - damping) * fresh
    _check_finite(a)
    return APState(state.r, a)


def assign_to_exemplars(s: np.ndarray, exemplars) -> list[int]:
    """Each point joins its most similar exemplar (lowest index on ties)."""
    ex = np.asarray(sorted(exemplars), dtype=int)
    choice = ex[np.argmax(s[:, ex], axis=1)]
    choice[ex] = ex
    return [int(k) for k in choice]


def net_similarity(s, assignments) -> float:
    m = np.asarray(s.values if isinstance(s, AffinityMatrix) else s, dtype=np.float64)
    return float(sum(m[i, k] for i, k in enumerate(assignments) if k >= 0))


def clustering_from_assignments(
    s: np.ndarray, assignments: list[int], converged: bool, iterations: int
) -> Clustering:
    groups: dict[int, list[int]] = {}
    for i, k in enumerate(assignments):
        groups.setdefault(k, []).append(i)
    clusters = [Cluster(cid, k, groups[k]) for cid, k in enumerate(sorted(groups))]
    return Clustering(
        assignments=list(assignments),
        clusters=clusters,
        converged=converged,
        iterations=iterations,
        net_similarity=net_similarity(s, assignments),
    )


def _tie_broken(s: np.ndarray) -> np.ndarray:
    n = len(s)
    scale = float(np.abs(s).max()) or 1.0
    return s - (TIE_BREAK * scale / n) * np.arange(n)[None, :]


def affinity_propagation(s, params: APParams = APParams()) -> Clustering:
    """Cluster an affinity matrix; the diagonal holds the preferences.

    Converges once the exemplar set ``{k : r(k,k) + a(k,k) > 0}`` is
    non-empty and unchanged for ``params.convergence_iter`` iterations.
    Otherwise returns ``converged=False`` with every point on its own.
    """
    m = check_affinity_matrix(s)
    n = len(m)
    if n == 1:
        return clustering_from_assignments(m, [0], True, 0)

    work = _tie_broken(m)
    state = APState.zeros(n)
    diag = np.arange(n)
    previous: tuple[int, ...] = ()
    stable = 0
    for it in range(1, params.max_iter + 1):
        state = update_responsibilities(work, state, params.damping)
        state = update_availabilities(work, state, params.damping)
        exemplars = tuple(int(k) for k in np.flatnonzero(state.r[diag, diag] + state.a[diag, diag] > 0))
        if exemplars and exemplars == previous:
            stable += 1
        else:
            stable = 1 if exemplars else 0
        previous = exemplars
        if stable >= params.convergence_iter:
            return clustering_from_assignments(m, assign_to_exemplars(m, exemplars), True, it)

    log.warning("affinity propagation did not converge in %d iterations", params.max_iter)
    return clustering_from_assignments(m, list(range(n)), False, params.max_iter)


def brute_force_exemplars(s) -> Clustering:
    """Exhaustive search over exemplar sets for the best net similarity.

    Ties go to the lexicographically smallest exemplar tuple. Only for
    ``n <= 15``.
    """
    m = check_affinity_matrix(s)
    n = len(m)
    if n > BRUTE_FORCE_MAX_N:
        raise InputError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    tol = 1e-12 * max(1.0, float(np.abs(m).max())) * n
    best_value = -np.inf
    best_set: tuple[int, ...] | None = None
    best_assign: list[int] = []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            assign = assign_to_exemplars(m, subset)
            value = net_similarity(m, assign)
            if value > best_value + tol or (abs(value - best_value) <= tol and subset < best_set):
                best_value, best_set, best_assign = value, subset, assign
    return clustering_from_assignments(m, best_assign, True, 0)


def partition(c: Clustering) -> list[tuple[int, ...]]:
    """Canonical partition of the clustered points, for comparisons."""
    return sorted(tuple(cl.members) for cl in c.clusters)


def rescore(c: Clustering, s) -> Clustering:
    """Recompute net similarity for the current clusters and exemplars."""
    assignments = [-1] * c.n_points
    for cl in c.clusters:
        for mbr in cl.members:
            assignments[mbr] = cl.exemplar
    return replace(c, assignments=assignments, net_similarity=net_similarity(s, assignments))
