import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synspace.embeddings import EmbeddingSet


def unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((count, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_set(rng: np.random.Generator, count: int, dim: int) -> EmbeddingSet:
    return EmbeddingSet(unit_rows(rng, count, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
