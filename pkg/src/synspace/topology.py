"""Similarity filtration of an embedding set and its connected-component structure.

The complex over a set of unit embeddings at threshold ``eps`` keeps the
edges whose cosine similarity is at least ``eps``; its connected
components are all that matters here, so only the 1-skeleton is ever
materialized. Sweeping ``eps`` downward from 1 and uniting components as
edges appear yields the component merge tree (a single-linkage dendrogram
in similarity units) and one bar per vertex: every vertex is born at
``eps = 1``, a bar dies at the similarity of the merge that absorbed its
component, and exactly one essential bar never dies.

Merge convention: the larger component survives a merge and keeps its
bar; on equal sizes the component with the lower root index survives.
Edges with equal similarity are processed in (i, j) lexicographic order,
so results are reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .embeddings import EmbeddingSet
from .errors import EmptySetError

INFINITE_DEATH = float("-inf")


@dataclass(frozen=True)
class SimilarityGraph:
    """Complete pairwise-similarity graph over n vertices.

    ``ii``, ``jj``, ``sims`` are parallel arrays holding every unordered
    pair exactly once with ii < jj; similarities are clamped to [-1, 1].
    """

    n: int
    ii: np.ndarray
    jj: np.ndarray
    sims: np.ndarray

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for i, j, s in zip(self.ii, self.jj, self.sims):
            yield int(i), int(j), float(s)

    def similarity(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        if i > j:
            i, j = j, i
        # Offset of pair (i, j) in the row-major upper triangle.
        pos = i * (2 * self.n - i - 1) // 2 + (j - i - 1)
        return float(self.sims[pos])


@dataclass(frozen=True)
class EdgeSubset:
    """Edges of a SimilarityGraph surviving a threshold."""

    n: int
    ii: np.ndarray
    jj: np.ndarray
    sims: np.ndarray

    def __len__(self) -> int:
        return int(self.ii.shape[0])

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for i, j, s in zip(self.ii, self.jj, self.sims):
            yield int(i), int(j), float(s)


@dataclass(frozen=True)
class PersistenceBar:
    birth: float
    death: float  # INFINITE_DEATH for the essential bar
    representative: int  # root of the component the bar tracked

    @property
    def lifespan(self) -> float:
        return self.birth - self.death


@dataclass(frozen=True)
class MergeEvent:
    epsilon: float
    root_kept: int
    root_absorbed: int


@dataclass(frozen=True)
class PersistenceRecord:
    n: int
    bars: tuple[PersistenceBar, ...]
    merges: tuple[MergeEvent, ...]

    def finite_bars(self) -> tuple[PersistenceBar, ...]:
        return tuple(b for b in self.bars if b.death != INFINITE_DEATH)


@dataclass(frozen=True)
class CoreComponent:
    """The filtered subset of an embedding set used as its semantic core."""

    member_indices: tuple[int, ...]
    epsilon_used: float | None
    mode: str  # "fixed-threshold" | "auto-persistence" | "unfiltered"


def build_similarity_graph(es: EmbeddingSet) -> SimilarityGraph:
    """All-pairs cosine similarities of a unit-normalized embedding set."""
    n = es.count
    if n < 1:
        raise EmptySetError("cannot build a similarity graph over an empty set")
    gram = es.vectors @ es.vectors.T
    np.clip(gram, -1.0, 1.0, out=gram)
    ii, jj = np.triu_indices(n, k=1)
    sims = gram[ii, jj]
    for arr in (ii, jj, sims):
        arr.setflags(write=False)
    return SimilarityGraph(n=n, ii=ii.astype(np.int32), jj=jj.astype(np.int32), sims=sims)


def vr_complex_at(graph: SimilarityGraph, epsilon: float) -> EdgeSubset:
    """Edges with similarity >= epsilon (the 1-skeleton at that scale)."""
    if not (-1.0 <= epsilon <= 1.0):
        raise ValueError(f"epsilon must lie in [-1, 1], got {epsilon}")
    keep = graph.sims >= epsilon
    return EdgeSubset(
        n=graph.n, ii=graph.ii[keep], jj=graph.jj[keep], sims=graph.sims[keep]
    )


def _find(parent: np.ndarray, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:  # path compression
        parent[x], x = root, parent[x]
    return root


def persistence_0d(graph: SimilarityGraph) -> PersistenceRecord:
    """Component birth/death bookkeeping over the downward similarity sweep.

    Edges are added in decreasing similarity; every edge joining two
    distinct components records a merge event and kills the smaller
    component's bar at that similarity. The surviving root absorbs the
    other component, so the merge list doubles as a single-linkage
    dendrogram with heights in similarity units.
    """
    n = graph.n
    if n < 1:
        raise EmptySetError("empty graph")
    order = np.lexsort((graph.jj, graph.ii, -graph.sims))
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    bars: list[PersistenceBar] = []
    merges: list[MergeEvent] = []
    for e in order:
        i = int(graph.ii[e])
        j = int(graph.jj[e])
        ri = _find(parent, i)
        rj = _find(parent, j)
        if ri == rj:
            continue
        if size[ri] > size[rj] or (size[ri] == size[rj] and ri < rj):
            kept, absorbed = ri, rj
        else:
            kept, absorbed = rj, ri
        s = float(graph.sims[e])
        bars.append(PersistenceBar(birth=1.0, death=s, representative=absorbed))
        merges.append(MergeEvent(epsilon=s, root_kept=kept, root_absorbed=absorbed))
        parent[absorbed] = kept
        size[kept] += size[absorbed]
    final_root = _find(parent, 0)
    bars.append(
        PersistenceBar(birth=1.0, death=INFINITE_DEATH, representative=final_root)
    )
    return PersistenceRecord(n=n, bars=tuple(bars), merges=tuple(merges))


def connected_components(edges: EdgeSubset) -> list[list[int]]:
    """Vertex components of an edge subset, each sorted, ordered by min index."""
    parent = np.arange(edges.n)
    size = np.ones(edges.n, dtype=np.int64)
    for e in range(len(edges)):
        ri = _find(parent, int(edges.ii[e]))
        rj = _find(parent, int(edges.jj[e]))
        if ri == rj:
            continue
        if size[ri] < size[rj]:
            ri, rj = rj, ri
        parent[rj] = ri
        size[ri] += size[rj]
    groups: dict[int, list[int]] = {}
    for v in range(edges.n):
        groups.setdefault(_find(parent, v), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def _mean_internal_similarity(graph: SimilarityGraph, members: list[int]) -> float:
    if len(members) < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            total += graph.similarity(members[a], members[b])
            pairs += 1
    return total / pairs


def _pick_largest(graph: SimilarityGraph, components: list[list[int]]) -> list[int]:
    # Size first, then mean internal similarity, then lowest min index.
    best = None
    best_key = None
    for comp in components:
        key = (len(comp), _mean_internal_similarity(graph, comp), -comp[0])
        if best_key is None or key > best_key:
            best, best_key = comp, key
    return best


def auto_epsilon(record: PersistenceRecord) -> float:
    """Threshold just above the deepest merge of the filtration.

    The finite bar with maximal lifespan dies at the minimum merge
    similarity; any threshold strictly inside the gap between that value
    and the next-higher merge similarity yields the same components, and
    the midpoint is numerically safest. When there is no higher merge the
    threshold is nudged up by 1e-6 instead.
    """
    if not record.merges:
        return 1.0
    values = sorted({m.epsilon for m in record.merges})
    lowest = values[0]
    if len(values) == 1:
        return lowest + 1e-6
    return (lowest + values[1]) / 2.0


def largest_component(
    es: EmbeddingSet,
    mode: str = "fixed-threshold",
    fixed_epsilon: float = 0.9,
) -> CoreComponent:
    """Extract the dominant connected component of the embedding set.

    ``fixed-threshold`` cuts the graph at ``fixed_epsilon``;
    ``auto-persistence`` derives the threshold from the deepest merge of
    the filtration. Ties on component size break toward higher mean
    internal similarity, then toward the lower minimum index.
    """
    if es.count < 1:
        raise EmptySetError("cannot extract a core from an empty set")
    graph = build_similarity_graph(es)
    if mode == "fixed-threshold":
        if not (0.0 <= fixed_epsilon <= 1.0):
            raise ValueError(f"fixed_epsilon must lie in [0, 1], got {fixed_epsilon}")
        epsilon = float(fixed_epsilon)
    elif mode == "auto-persistence":
        epsilon = min(auto_epsilon(persistence_0d(graph)), 1.0)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    comps = connected_components(vr_complex_at(graph, epsilon))
    members = _pick_largest(graph, comps)
    return CoreComponent(
        member_indices=tuple(members), epsilon_used=epsilon, mode=mode
    )


def full_component(es: EmbeddingSet) -> CoreComponent:
    """Unfiltered core covering every member (homology ablation path)."""
    if es.count < 1:
        raise EmptySetError("cannot build a core from an empty set")
    return CoreComponent(
        member_indices=tuple(range(es.count)), epsilon_used=None, mode="unfiltered"
    )


@dataclass(frozen=True)
class TopologyConfig:
    """How to derive each class's core from its full embedding set."""

    mode: str = "fixed-threshold"  # fixed-threshold | auto-persistence | unfiltered
    epsilon: float = 0.9

    def __post_init__(self):
        if self.mode not in ("fixed-threshold", "auto-persistence", "unfiltered"):
            raise ValueError(f"unknown topology mode {self.mode!r}")
        if self.mode == "fixed-threshold" and not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


def extract_core(es: EmbeddingSet, config: TopologyConfig) -> CoreComponent:
    if config.mode == "unfiltered":
        return full_component(es)
    return largest_component(es, mode=config.mode, fixed_epsilon=config.epsilon)


def dump_persistence(record: PersistenceRecord, directory) -> None:
    """Write bars and merges as plain text diagnostics."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bars.txt", "w", encoding="utf-8") as fh:
        for bar in record.bars:
            death = "-inf" if bar.death == INFINITE_DEATH else repr(bar.death)
            fh.write(f"{bar.birth!r} {death} {bar.representative}\n")
    with open(out / "merges.txt", "w", encoding="utf-8") as fh:
        for m in record.merges:
            fh.write(f"{m.epsilon!r} {m.root_kept} {m.root_absorbed}\n")
