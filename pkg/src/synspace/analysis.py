"""Embedding-population diagnostics: the compactness statistic.

Compactness of a set is 1 minus the trace of its covariance matrix
(1/n normalization), i.e. 1 - mean squared distance to the centroid.
Identical members give exactly 1; an antipodal unit pair gives exactly 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSet
from .errors import EmptySetError


@dataclass(frozen=True)
class CompactnessReport:
    per_group: tuple[tuple[str, float], ...]
    mean_compactness: float


def compactness(es: EmbeddingSet) -> float:
    """1 - Tr(covariance) of the set, covariance normalized by 1/n."""
    if es.count < 1:
        raise EmptySetError("compactness of an empty set is undefined")
    mu = es.vectors.mean(axis=0)
    trace = float(((es.vectors - mu) ** 2).sum() / es.count)
    return 1.0 - trace


def population_report(groups) -> CompactnessReport:
    """Per-group compactness for a list of (group_id, EmbeddingSet) pairs."""
    if not groups:
        raise EmptySetError("population has no groups")
    rows = tuple((str(gid), compactness(es)) for gid, es in groups)
    mean = sum(v for _, v in rows) / len(rows)
    return CompactnessReport(per_group=rows, mean_compactness=mean)


def compare_populations(groups_a, groups_b) -> tuple[CompactnessReport, CompactnessReport]:
    """Compactness reports for two populations (e.g. image vs text groups)."""
    return population_report(groups_a), population_report(groups_b)


def write_report_csv(path, reports: dict[str, CompactnessReport]) -> None:
    """Long-format CSV: population, group_id, compactness (plus mean rows)."""
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["population", "group_id", "compactness"])
        for name, report in reports.items():
            for gid, value in report.per_group:
                writer.writerow([name, gid, repr(value)])
        for name, report in reports.items():
            writer.writerow([name, "__mean__", repr(report.mean_compactness)])
