"""Deterministic synthetic benchmark generator.

Builds a desk-scale zero-shot task with known structure: K well-separated
directional clusters (orthonormal class centers) with a few sub-clusters
each, per-class synonym embeddings tightly packed around the sub-centers,
and a planted fraction of outlier rows per class. Outliers sit midway
between their own class center and the next class's center, so they are
far from every clean member (excluded by a 0.9 similarity cut) yet close
enough to confusable queries to distort unfiltered scoring.

Everything is drawn from one seeded generator in a fixed order, so a
given parameter set always produces byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet, save_embeddings
from .errors import InvalidRateError
from .textgen import ClassLexicon, combine, save_lexicon_cache

SUB_SPREAD = 0.10  # sub-center offset from the class center
MEMBER_SPREAD = 0.08  # member offset from its sub-center
OUTLIER_SPREAD = 0.25
QUERY_SPREAD = 0.33
VIEW_SPREAD = 0.15
MIXED_QUERY_FRACTION = 0.30
MIX_PREDECESSOR_PROB = 0.5  # mixed queries lean toward the previous class half the time
MIX_GAMMA_RANGE = (0.7, 1.1)

SPACES_FILE = "spaces.json"
LEXICON_FILE = "lexicons.json"
QUERIES_FILE = "queries.s3em"
MANIFEST_FILE = "manifest.json"
EPISODES_DIR = "episodes"


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _orthonormal_centers(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    m = rng.standard_normal((dim, k))
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))
    return q.T.copy()


def _class_name(k: int) -> str:
    return f"class_{k:02d}"


def generate_benchmark(
    out_dir,
    seed: int,
    num_classes: int = 5,
    synonyms_per_class: int = 40,
    outlier_rate: float = 0.1,
    num_queries: int = 500,
    dim: int = 64,
    subclusters: int = 3,
    num_episodes: int = 40,
    views_per_episode: int = 16,
) -> dict:
    """Write a benchmark directory and return its manifest."""
    if not (0.0 <= outlier_rate < 1.0):
        raise InvalidRateError(f"outlier rate must lie in [0, 1), got {outlier_rate}")
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if dim < num_classes:
        raise ValueError("dim must be at least the class count for separated centers")
    if synonyms_per_class < 1 or num_queries < 1:
        raise ValueError("synonyms_per_class and num_queries must be positive")
    if subclusters < 1 or views_per_episode < 1 or num_episodes < 0:
        raise ValueError("invalid subclusters / episode parameters")

    out = Path(out_dir)
    (out / "embeddings").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    centers = _orthonormal_centers(rng, num_classes, dim)
    n_out = int(outlier_rate * synonyms_per_class)

    lexicons: dict[int, ClassLexicon] = {}
    class_files = []
    outlier_indices: dict[str, list[int]] = {}
    sub_centers: list[np.ndarray] = []
    for k in range(num_classes):
        name = _class_name(k)
        subs = np.stack(
            [
                _norm_row(centers[k] + SUB_SPREAD * _unit(rng, dim))
                for _ in range(subclusters)
            ]
        )
        sub_centers.append(subs)
        rows = np.empty((synonyms_per_class, dim))
        for i in range(synonyms_per_class):
            rows[i] = _norm_row(subs[i % subclusters] + MEMBER_SPREAD * _unit(rng, dim))
        if n_out > 0:
            # index 0 stays clean so the bare class name is always usable
            positions = sorted(
                int(p) for p in rng.choice(np.arange(1, synonyms_per_class), size=n_out, replace=False)
            )
            bridge = centers[k] + centers[(k + 1) % num_classes]
            for p in positions:
                rows[p] = _norm_row(bridge + OUTLIER_SPREAD * _unit(rng, dim))
        else:
            positions = []
        outlier_indices[str(k)] = positions

        synonyms = [name] + [f"{name} alias {i:02d}" for i in range(1, synonyms_per_class)]
        lexicon = ClassLexicon.build(name, "synthetic", synonyms, [])
        lexicons[k] = lexicon
        texts = combine(lexicon, class_id=k).texts
        file_rel = f"embeddings/class_{k:04d}.s3em"
        save_embeddings(EmbeddingSet(rows, texts), out / file_rel)
        class_files.append({"name": name, "embeddings": file_rel})

    save_lexicon_cache(lexicons, out / LEXICON_FILE)
    spaces_doc = {"dataset": "synthetic", "dim": dim, "classes": class_files}
    (out / SPACES_FILE).write_text(
        json.dumps(spaces_doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )

    def draw_query(label: int) -> np.ndarray:
        # a query aligns with one synonym sense, not the abstract class center
        sense = int(rng.integers(subclusters))
        vec = sub_centers[label][sense] + QUERY_SPREAD * _unit(rng, dim)
        if rng.uniform() < MIXED_QUERY_FRACTION:
            if rng.uniform() < MIX_PREDECESSOR_PROB:
                target = (label - 1) % num_classes
            else:
                others = [c for c in range(num_classes) if c != label]
                target = int(others[rng.integers(len(others))])
            gamma = rng.uniform(*MIX_GAMMA_RANGE)
            vec = vec + gamma * centers[target]
        return _norm_row(vec)

    query_rows = np.empty((num_queries, dim))
    query_labels = []
    for i in range(num_queries):
        label = i % num_classes
        query_rows[i] = draw_query(label)
        query_labels.append(str(label))
    save_embeddings(EmbeddingSet(query_rows, tuple(query_labels)), out / QUERIES_FILE)

    episode_records = []
    if num_episodes > 0:
        ep_dir = out / EPISODES_DIR
        ep_dir.mkdir(exist_ok=True)
        for e in range(num_episodes):
            label = e % num_classes
            base = draw_query(label)
            views = np.empty((views_per_episode, dim))
            views[0] = base
            for v in range(1, views_per_episode):
                views[v] = _norm_row(base + VIEW_SPREAD * _unit(rng, dim))
            labels = ("original",) + tuple(
                f"aug_{v:02d}" for v in range(1, views_per_episode)
            )
            file_rel = f"ep_{e:04d}.s3em"
            save_embeddings(EmbeddingSet(views, labels), ep_dir / file_rel)
            episode_records.append({"file": file_rel, "label": label})
        (ep_dir / MANIFEST_FILE).write_text(
            json.dumps({"episodes": episode_records}, sort_keys=True, separators=(",", ":"))
            + "\n",
            encoding="utf-8",
        )

    manifest = {
        "seed": seed,
        "num_classes": num_classes,
        "synonyms_per_class": synonyms_per_class,
        "outlier_rate": outlier_rate,
        "outliers_per_class": n_out,
        "num_queries": num_queries,
        "dim": dim,
        "subclusters": subclusters,
        "num_episodes": num_episodes,
        "views_per_episode": views_per_episode,
        "outlier_indices": outlier_indices,
        "spaces": SPACES_FILE,
        "lexicons": LEXICON_FILE,
        "queries": QUERIES_FILE,
        "episodes_dir": EPISODES_DIR if num_episodes > 0 else None,
    }
    (out / MANIFEST_FILE).write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    return manifest


def _norm_row(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)
