"""Independent reference implementations used only by the tests.

Everything here is written from first principles (naive loops, explicit
matrices) so it shares no code path with the package under test.
"""

from __future__ import annotations

import numpy as np


def pairwise_sims(vectors: np.ndarray) -> dict[tuple[int, int], float]:
    n = vectors.shape[0]
    sims = {}
    for i in range(n):
        for j in range(i + 1, n):
            sims[(i, j)] = float(np.clip(np.dot(vectors[i], vectors[j]), -1.0, 1.0))
    return sims


def single_linkage_merges(sims: dict[tuple[int, int], float], n: int):
    """Brute-force agglomeration under maximum cross-cluster similarity.

    At every step the cross-cluster edge with the highest similarity is
    chosen (ties by lexicographic (i, j)), and the two clusters holding
    its endpoints merge. Returns [(similarity, members_a, members_b)]
    with members as frozensets, in merge order.
    """
    clusters: list[set[int]] = [{i} for i in range(n)]
    merges = []
    while len(clusters) > 1:
        best_edge = None
        best_key = None
        for (i, j), s in sims.items():
            ci = next(k for k, c in enumerate(clusters) if i in c)
            cj = next(k for k, c in enumerate(clusters) if j in c)
            if ci == cj:
                continue
            key = (-s, i, j)
            if best_key is None or key < best_key:
                best_key = key
                best_edge = (s, ci, cj)
        s, ci, cj = best_edge
        a, b = clusters[ci], clusters[cj]
        merges.append((s, frozenset(a), frozenset(b)))
        clusters = [c for k, c in enumerate(clusters) if k not in (ci, cj)]
        clusters.append(a | b)
    return merges


def bfs_components(n: int, edges) -> list[list[int]]:
    """Connected components via breadth-first search over an edge list."""
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    seen = [False] * n
    components = []
    for start in range(n):
        if seen[start]:
            continue
        queue = [start]
        seen[start] = True
        members = []
        while queue:
            v = queue.pop()
            members.append(v)
            for w in adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        components.append(sorted(members))
    return sorted(components, key=lambda c: c[0])


def replay_partition(n: int, merge_pairs, epsilon: float) -> list[list[int]]:
    """Partition from cutting a merge list at a threshold: apply every
    merge whose similarity is >= epsilon. Pure set bookkeeping."""
    clusters: list[set[int]] = [{i} for i in range(n)]
    for sim, a, b in merge_pairs:
        if sim < epsilon:
            continue
        ca = next(k for k, c in enumerate(clusters) if a in c)
        cb = next(k for k, c in enumerate(clusters) if b in c)
        if ca == cb:
            continue
        merged = clusters[ca] | clusters[cb]
        clusters = [c for k, c in enumerate(clusters) if k not in (ca, cb)]
        clusters.append(merged)
    return sorted((sorted(c) for c in clusters), key=lambda c: c[0])


def local_center_score(g: np.ndarray, members: np.ndarray, n: int) -> float:
    """Naive point-to-local-center: best member by dot product, then the
    mean of the n members most similar to it (stable ties)."""
    dots = [float(np.dot(g, f)) for f in members]
    star = int(np.argmax(dots))
    sims_to_star = [float(np.dot(members[star], f)) for f in members]
    order = sorted(range(len(members)), key=lambda i: (-sims_to_star[i], i))
    chosen = order[: min(n, len(members))]
    mean = sum(members[i] for i in chosen) / len(chosen)
    return float(np.dot(g, mean))


def covariance_trace(vectors: np.ndarray) -> float:
    """Trace of the explicit D x D covariance matrix (1/n normalization)."""
    n, d = vectors.shape
    mu = vectors.mean(axis=0)
    cov = np.zeros((d, d))
    for row in vectors:
        dev = row - mu
        cov += np.outer(dev, dev)
    cov /= n
    return float(np.trace(cov))
