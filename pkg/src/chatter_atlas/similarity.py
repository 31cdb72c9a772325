"""Cosine similarity and affinity-matrix assembly."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class AffinityMatrix:
    """Dense ``n x n`` similarities with a shared preference on the diagonal."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def preference(self) -> float:
        return float(self.values[0, 0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        np.savetxt(buf, self.values, delimiter=",", fmt="%.17g")
        return buf.getvalue()


def as_matrix(s: AffinityMatrix | np.ndarray) -> np.ndarray:
    return s.values if isinstance(s, AffinityMatrix) else np.asarray(s, dtype=np.float64)


def check_affinity_matrix(s: AffinityMatrix | np.ndarray, tol: float = 1e-12) -> np.ndarray:
    m = as_matrix(s)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InputError(f"affinity matrix must be square and non-empty, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InputError("affinity matrix has non-finite entries")
    if np.abs(m - m.T).max() > tol:
        raise InputError("affinity matrix is not symmetric")
    return m


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise InputError("cosine similarity is undefined for a zero vector")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


def _unit_rows(vectors) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("need at least 2 vectors of uniform dimension")
    norms = np.linalg.norm(x, axis=1)
    if (norms == 0).any():
        raise InputError(f"zero-norm vector at index {int(np.flatnonzero(norms == 0)[0])}")
    return x / norms[:, None]


def pairwise_cosine(vectors) -> np.ndarray:
    """Symmetric cosine matrix; upper triangle computed, lower mirrored.

    The diagonal is left at 1.
    """
    x = _unit_rows(vectors)
    g = np.clip(x @ x.T, -1.0, 1.0)
    lower = np.tril_indices(len(x), -1)
    g[lower] = g.T[lower]
    np.fill_diagonal(g, 1.0)
    return g


def median_preference(vectors) -> float:
    g = pairwise_cosine(vectors)
    return float(np.median(g[~np.eye(len(g), dtype=bool)]))


def build_affinity_matrix(vectors, preference: float | None = None) -> AffinityMatrix:
    """Cosine affinities with ``preference`` on the diagonal (median if None)."""
    s = pairwise_cosine(vectors)
    if preference is None:
        preference = float(np.median(s[~np.eye(len(s), dtype=bool)]))
    if not math.isfinite(preference):
        raise InputError("preference must be finite")
    np.fill_diagonal(s, preference)
    return AffinityMatrix(s)
