"""Zero-shot prediction over a class catalog and batch evaluation.

A catalog pairs every class with its full synonymous embedding set and
the filtered core actually used for scoring. Prediction is a plain
argmax over the per-class point-to-space similarities; raw similarity
scores are kept as-is (no softmax), so the argmax is invariant under any
positive affine rescaling of the score vector.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet, load_embeddings, save_embeddings
from .errors import (
    DimensionMismatchError,
    EmptyCoreError,
    EmptyQuerySetError,
    EmptySetError,
    FormatError,
    LabelOutOfRangeError,
    MissingEmbeddingsError,
)
from .metrics import MetricConfig, SpaceIndex, space_similarity
from .topology import CoreComponent, TopologyConfig, extract_core

CATALOG_FILE = "catalog.json"
CATALOG_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassSpec:
    """Input to catalog construction for one class."""

    name: str
    embeddings: EmbeddingSet | None
    texts: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    name: str
    texts: tuple[str, ...] | None
    space: EmbeddingSet  # full set, unit rows
    core: CoreComponent

    def __post_init__(self):
        if not self.core.member_indices:
            raise EmptyCoreError(self.name)
        if max(self.core.member_indices) >= self.space.count:
            raise DimensionMismatchError(
                f"class {self.name!r}: core index out of range"
            )

    @cached_property
    def core_space(self) -> EmbeddingSet:
        return self.space.subset(self.core.member_indices)

    @cached_property
    def index(self) -> SpaceIndex:
        return SpaceIndex(self.core_space.vectors)


@dataclass(frozen=True)
class ClassCatalog:
    classes: tuple[ClassEntry, ...]
    dim: int
    metric: MetricConfig
    topology: TopologyConfig
    input_hash: str | None = None

    def __post_init__(self):
        for k, entry in enumerate(self.classes):
            if entry.class_id != k:
                raise ValueError("class ids must be contiguous from 0")
            if entry.space.dim != self.dim:
                raise DimensionMismatchError(
                    f"class {entry.name!r} has dim {entry.space.dim}, catalog dim {self.dim}"
                )

    @property
    def num_classes(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class Prediction:
    class_id: int
    scores: np.ndarray  # one similarity per class


@dataclass(frozen=True)
class EvaluationResult:
    top1_accuracy: float
    confusion: np.ndarray  # (K, K) counts, rows = true class
    per_class_accuracy: tuple[float | None, ...]
    total: int

    def as_dict(self) -> dict:
        return {
            "top1_accuracy": self.top1_accuracy,
            "total": self.total,
            "per_class_accuracy": [
                None if a is None else a for a in self.per_class_accuracy
            ],
            "confusion": self.confusion.tolist(),
        }


def build_catalog(
    specs: list[ClassSpec],
    metric: MetricConfig,
    topology: TopologyConfig,
    input_hash: str | None = None,
) -> ClassCatalog:
    """Assemble a catalog: normalize each class set and extract its core."""
    if not specs:
        raise EmptySetError("catalog needs at least one class")
    entries = []
    dim = None
    for k, spec in enumerate(specs):
        if spec.embeddings is None or spec.embeddings.count == 0:
            raise MissingEmbeddingsError(spec.name)
        if spec.texts is not None and len(spec.texts) != spec.embeddings.count:
            raise DimensionMismatchError(
                f"class {spec.name!r}: {len(spec.texts)} texts for "
                f"{spec.embeddings.count} embeddings"
            )
        space = spec.embeddings.normalized()
        if dim is None:
            dim = space.dim
        elif space.dim != dim:
            raise DimensionMismatchError(
                f"class {spec.name!r} has dim {space.dim}, expected {dim}"
            )
        try:
            core = extract_core(space, topology)
        except EmptySetError as exc:
            raise EmptyCoreError(spec.name) from exc
        entries.append(
            ClassEntry(class_id=k, name=spec.name, texts=spec.texts, space=space, core=core)
        )
    return ClassCatalog(
        classes=tuple(entries),
        dim=dim,
        metric=metric,
        topology=topology,
        input_hash=input_hash,
    )


def predict(g, catalog: ClassCatalog) -> Prediction:
    """Argmax of per-class space similarities; ties go to the lowest id."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (catalog.dim,):
        raise DimensionMismatchError(
            f"query has shape {g.shape}, catalog dim is {catalog.dim}"
        )
    scores = np.array(
        [space_similarity(g, entry.index, catalog.metric) for entry in catalog.classes]
    )
    return Prediction(class_id=int(np.argmax(scores)), scores=scores)


def _parse_labels(queries: EmbeddingSet, num_classes: int) -> np.ndarray:
    if queries.labels is None:
        raise LabelOutOfRangeError("query set carries no labels")
    labels = np.empty(queries.count, dtype=np.int64)
    for i, lab in enumerate(queries.labels):
        try:
            labels[i] = int(lab)
        except ValueError as exc:
            raise LabelOutOfRangeError(f"label {lab!r} is not an integer") from exc
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelOutOfRangeError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def evaluate(queries: EmbeddingSet, catalog: ClassCatalog) -> EvaluationResult:
    """Top-1 accuracy, confusion counts, and per-class accuracy."""
    if queries.count == 0:
        raise EmptyQuerySetError("no queries to evaluate")
    labels = _parse_labels(queries, catalog.num_classes)
    normalized = queries.normalized()
    k = catalog.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    for row, true in zip(normalized.vectors, labels):
        pred = predict(row, catalog)
        confusion[true, pred.class_id] += 1
    total = int(confusion.sum())
    correct = int(np.trace(confusion))
    per_class = []
    for c in range(k):
        count = int(confusion[c].sum())
        per_class.append(None if count == 0 else confusion[c, c] / count)
    return EvaluationResult(
        top1_accuracy=correct / total,
        confusion=confusion,
        per_class_accuracy=tuple(per_class),
        total=total,
    )


def argmax_invariance_check(catalog: ClassCatalog, g, trials: int = 16) -> bool:
    """Verify the predicted class survives positive scale and shift of scores."""
    base = predict(g, catalog)
    rng = np.random.default_rng(0)
    for _ in range(trials):
        c = float(rng.uniform(1e-3, 1e3))
        b = float(rng.uniform(-10.0, 10.0))
        if int(np.argmax(c * base.scores + b)) != base.class_id:
            return False
    return True


# --- serialization ---------------------------------------------------------
#
# A catalog is a directory: catalog.json plus one s3em file per class with
# the full (normalized) embedding set. JSON is written with sorted keys and
# fixed separators so identical builds produce identical bytes.


def _space_filename(class_id: int) -> str:
    return f"spaces/class_{class_id:04d}.s3em"


def save_catalog(catalog: ClassCatalog, directory) -> None:
    out = Path(directory)
    (out / "spaces").mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": CATALOG_FORMAT_VERSION,
        "dim": catalog.dim,
        "metric": {
            "kind": catalog.metric.kind,
            "neighborhood_n": catalog.metric.neighborhood_n,
            "subspace_dims": catalog.metric.subspace_dims,
            "renormalize_mean": catalog.metric.renormalize_mean,
        },
        "topology": {
            "mode": catalog.topology.mode,
            "epsilon": catalog.topology.epsilon,
        },
        "input_hash": catalog.input_hash,
        "classes": [
            {
                "id": e.class_id,
                "name": e.name,
                "texts": list(e.texts) if e.texts is not None else None,
                "core_indices": list(e.core.member_indices),
                "core_mode": e.core.mode,
                "epsilon_used": e.core.epsilon_used,
                "space_file": _space_filename(e.class_id),
            }
            for e in catalog.classes
        ],
    }
    for entry in catalog.classes:
        save_embeddings(entry.space, out / _space_filename(entry.class_id))
    (out / CATALOG_FILE).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )


def load_catalog(directory) -> ClassCatalog:
    root = Path(directory)
    path = root / CATALOG_FILE
    if not path.is_file():
        raise FormatError(f"{path} does not exist")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format_version") != CATALOG_FORMAT_VERSION:
        raise FormatError(f"unsupported catalog version {doc.get('format_version')}")
    metric = MetricConfig(
        kind=doc["metric"]["kind"],
        neighborhood_n=doc["metric"]["neighborhood_n"],
        subspace_dims=doc["metric"]["subspace_dims"],
        renormalize_mean=doc["metric"]["renormalize_mean"],
    )
    topology = TopologyConfig(
        mode=doc["topology"]["mode"], epsilon=doc["topology"]["epsilon"]
    )
    entries = []
    for cls in doc["classes"]:
        space = load_embeddings(root / cls["space_file"])
        core = CoreComponent(
            member_indices=tuple(int(i) for i in cls["core_indices"]),
            epsilon_used=cls["epsilon_used"],
            mode=cls["core_mode"],
        )
        texts = tuple(cls["texts"]) if cls.get("texts") is not None else None
        entries.append(
            ClassEntry(
                class_id=int(cls["id"]),
                name=cls["name"],
                texts=texts,
                space=space,
                core=core,
            )
        )
    return ClassCatalog(
        classes=tuple(entries),
        dim=int(doc["dim"]),
        metric=metric,
        topology=topology,
        input_hash=doc.get("input_hash"),
    )


def hash_files(paths) -> str:
    """Stable content hash over a sequence of input files."""
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        h.update(p.name.encode("utf-8"))
        h.update(b"\x00")
        h.update(p.read_bytes())
        h.update(b"\x01")
    return h.hexdigest()
