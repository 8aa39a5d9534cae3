"""Point-to-space similarity metrics.

Four ways to score a query embedding against a class's core embedding
set: best single member (set), unnormalized centroid (center), projection
onto the principal affine subspace dotted with the centroid (subspace),
and the mean of the neighborhood around the query's best-matching member
(local center). Means are deliberately not re-normalized before the
inner product; a renormalized variant exists behind a config flag for
ablation only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSet
from .errors import EmptySpaceError, ZeroVectorError

METRIC_KINDS = ("set", "center", "subspace", "local_center")


@dataclass(frozen=True)
class MetricConfig:
    kind: str = "local_center"
    neighborhood_n: int = 20  # local_center only; clamped to the space size
    subspace_dims: int = 8  # subspace only; clamped to min(D, size - 1)
    renormalize_mean: bool = False

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"metric kind must be one of {METRIC_KINDS}, got {self.kind!r}")
        if self.neighborhood_n < 1:
            raise ValueError("neighborhood_n must be >= 1")
        if self.subspace_dims < 1:
            raise ValueError("subspace_dims must be >= 1")


class SpaceIndex:
    """Cached per-space structures shared by the metrics.

    Holds the member gram matrix, per-member neighborhood means, and
    principal bases. All caches are computed once and treated as
    immutable, so an index can be shared across threads.
    """

    def __init__(self, vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise EmptySpaceError("space must contain at least one embedding")
        self.vectors = vectors
        self._gram: np.ndarray | None = None
        self._neighbor_means: dict[int, np.ndarray] = {}
        self._principal: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            g = self.vectors @ self.vectors.T
            np.clip(g, -1.0, 1.0, out=g)
            g.setflags(write=False)
            self._gram = g
        return self._gram

    def neighbor_means(self, n: int) -> np.ndarray:
        """(size, dim) matrix whose row j is the mean of the n members
        most similar to member j (including j; ties toward lower index)."""
        n = min(max(int(n), 1), self.size)
        cached = self._neighbor_means.get(n)
        if cached is not None:
            return cached
        # stable argsort keeps ascending index order among equal similarities
        ranking = np.argsort(-self.gram, axis=1, kind="stable")[:, :n]
        means = self.vectors[ranking].mean(axis=1)
        means.setflags(write=False)
        self._neighbor_means[n] = means
        return means

    def principal(self, d: int) -> tuple[np.ndarray, np.ndarray] | None:
        """Centroid and top-d principal directions, or None when the
        centered set is numerically zero (all members identical)."""
        d = min(max(int(d), 1), self.dim, max(self.size - 1, 1))
        cached = self._principal.get(d)
        if cached is not None or d in self._principal:
            return cached
        mu = self.vectors.mean(axis=0)
        centered = self.vectors - mu
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        if svals.size == 0 or svals[0] <= 1e-12:
            self._principal[d] = None
            return None
        rank = int(np.sum(svals > svals[0] * 1e-12))
        basis = vt[: min(d, rank)]
        mu.setflags(write=False)
        basis.setflags(write=False)
        self._principal[d] = (mu, basis)
        return self._principal[d]

    def best_member(self, g: np.ndarray) -> int:
        """Index of the member with the highest similarity to g (ties: lowest index)."""
        return int(np.argmax(self.vectors @ g))

    def local_center_vector(self, g: np.ndarray, n: int) -> np.ndarray:
        """Mean of the neighborhood around the best-matching member of g."""
        return self.neighbor_means(n)[self.best_member(g)]


def _as_index(space) -> SpaceIndex:
    if isinstance(space, SpaceIndex):
        return space
    if isinstance(space, EmbeddingSet):
        if space.count < 1:
            raise EmptySpaceError("empty semantic space")
        return SpaceIndex(space.vectors)
    return SpaceIndex(np.asarray(space, dtype=np.float64))


def _finish_mean(g: np.ndarray, mean: np.ndarray, renormalize: bool) -> float:
    if renormalize:
        norm = float(np.linalg.norm(mean))
        if norm <= 1e-12:
            raise ZeroVectorError("mean vector has zero norm; cannot renormalize")
        mean = mean / norm
    return float(np.dot(g, mean))


def sim_point_to_set(g, space) -> float:
    """Similarity to the nearest member of the space."""
    index = _as_index(space)
    g = np.asarray(g, dtype=np.float64)
    return float(np.max(index.vectors @ g))


def sim_point_to_center(g, space, renormalize: bool = False) -> float:
    """Similarity to the (unnormalized) centroid of the space."""
    index = _as_index(space)
    g = np.asarray(g, dtype=np.float64)
    return _finish_mean(g, index.vectors.mean(axis=0), renormalize)


def sim_point_to_subspace(g, space, d: int) -> float:
    """Project g onto the principal affine subspace, then dot with the centroid.

    Falls back to the centroid similarity when the space is degenerate
    (fewer than two distinct members, hence zero covariance).
    """
    index = _as_index(space)
    g = np.asarray(g, dtype=np.float64)
    pca = index.principal(d)
    if pca is None:
        return sim_point_to_center(g, index)
    mu, basis = pca
    proj = mu + basis.T @ (basis @ (g - mu))
    return float(np.dot(proj, mu))


def sim_point_to_local_center(g, space, n: int, renormalize: bool = False) -> float:
    """Similarity to the mean of the n members nearest the best match of g."""
    index = _as_index(space)
    g = np.asarray(g, dtype=np.float64)
    return _finish_mean(g, index.local_center_vector(g, n), renormalize)


def space_similarity(g, space, config: MetricConfig) -> float:
    """Dispatch to the configured point-to-space metric."""
    index = _as_index(space)
    if config.kind == "set":
        return sim_point_to_set(g, index)
    if config.kind == "center":
        return sim_point_to_center(g, index, config.renormalize_mean)
    if config.kind == "subspace":
        return sim_point_to_subspace(g, index, config.subspace_dims)
    return sim_point_to_local_center(
        g, index, config.neighborhood_n, config.renormalize_mean
    )
