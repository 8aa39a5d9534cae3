import numpy as np
import pytest

from conftest import random_set, unit_rows, unit_vector
from oracles import local_center_score
from synspace.embeddings import EmbeddingSet
from synspace.errors import EmptySpaceError
from synspace.metrics import (
    MetricConfig,
    SpaceIndex,
    sim_point_to_center,
    sim_point_to_local_center,
    sim_point_to_set,
    sim_point_to_subspace,
    space_similarity,
)

FIXTURE_SPACE = EmbeddingSet(np.array([[0.8, 0.6], [0.6, 0.8], [0.0, 1.0]]))
G_FIXTURE = np.array([1.0, 0.0])


class TestPointToSet:
    def test_member_query_scores_one(self, rng):
        es = random_set(rng, 5, 8)
        assert sim_point_to_set(es.vectors[2], es) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        space = EmbeddingSet(np.eye(3)[:2])
        assert sim_point_to_set(np.eye(3)[2], space) == 0.0

    def test_fixture_max(self):
        assert sim_point_to_set(G_FIXTURE, FIXTURE_SPACE) == pytest.approx(0.8, abs=1e-12)

    def test_upper_bounds_every_member(self, rng):
        es = random_set(rng, 12, 6)
        g = unit_vector(rng, 6)
        best = sim_point_to_set(g, es)
        for row in es.vectors:
            assert best >= float(np.dot(g, row)) - 1e-12

    def test_empty_space(self):
        with pytest.raises(EmptySpaceError):
            sim_point_to_set([1.0, 0.0], EmbeddingSet(np.zeros((0, 2))))


class TestPointToCenter:
    def test_singleton_equals_dot(self, rng):
        f = unit_vector(rng, 8)
        g = unit_vector(rng, 8)
        space = EmbeddingSet(f[None, :])
        assert sim_point_to_center(g, space) == pytest.approx(float(np.dot(g, f)), abs=1e-12)

    def test_antipodal_cancellation(self, rng):
        e1 = np.eye(4)[0]
        space = EmbeddingSet(np.stack([e1, -e1]))
        g = unit_vector(rng, 4)
        assert sim_point_to_center(g, space) == pytest.approx(0.0, abs=1e-15)

    def test_fixture_hand_value(self):
        # mean x-component (0.8 + 0.6 + 0.0) / 3
        expected = (0.8 + 0.6 + 0.0) / 3.0
        assert sim_point_to_center(G_FIXTURE, FIXTURE_SPACE) == pytest.approx(
            expected, abs=1e-12
        )

    def test_mean_not_renormalized(self, rng):
        es = random_set(rng, 6, 8)
        g = unit_vector(rng, 8)
        mean = es.vectors.mean(axis=0)
        assert sim_point_to_center(g, es) == pytest.approx(float(np.dot(g, mean)), abs=1e-12)
        renorm = sim_point_to_center(g, es, renormalize=True)
        assert renorm == pytest.approx(float(np.dot(g, mean / np.linalg.norm(mean))), abs=1e-12)


class TestPointToSubspace:
    def test_identical_points_fall_back_to_center(self, rng):
        f = unit_vector(rng, 6)
        space = EmbeddingSet(np.tile(f, (4, 1)))
        g = unit_vector(rng, 6)
        assert sim_point_to_subspace(g, space, 2) == pytest.approx(
            sim_point_to_center(g, space), abs=1e-12
        )

    def test_point_on_spanned_line(self, rng):
        # members on a line through mu; a query on that line projects to itself
        direction = unit_vector(rng, 5)
        base = unit_vector(rng, 5)
        offsets = np.array([-0.3, -0.1, 0.2, 0.4])
        space = EmbeddingSet(base[None, :] + offsets[:, None] * direction[None, :])
        mu = space.vectors.mean(axis=0)
        g = mu + 0.7 * direction
        got = sim_point_to_subspace(g, space, 1)
        assert got == pytest.approx(float(np.dot(g, mu)), abs=1e-10)

    def test_matches_eigendecomposition_oracle(self, rng):
        vectors = unit_rows(rng, 4, 3)
        space = EmbeddingSet(vectors)
        g = unit_vector(rng, 3)
        d = 2
        # oracle route: explicit covariance eigen-decomposition
        mu = vectors.mean(axis=0)
        centered = vectors - mu
        cov = centered.T @ centered / vectors.shape[0]
        eigvals, eigvecs = np.linalg.eigh(cov)
        basis = eigvecs[:, np.argsort(eigvals)[::-1][:d]]
        proj = mu + basis @ (basis.T @ (g - mu))
        expected = float(np.dot(proj, mu))
        assert sim_point_to_subspace(g, space, d) == pytest.approx(expected, abs=1e-10)

    def test_full_span_reduces_to_center(self, rng):
        # |S| - 1 >= D with a spanning set: projection becomes identity
        vectors = unit_rows(rng, 6, 3)
        space = EmbeddingSet(vectors)
        g = unit_vector(rng, 3)
        got = sim_point_to_subspace(g, space, 5)
        mu = vectors.mean(axis=0)
        assert got == pytest.approx(float(np.dot(g, mu)), abs=1e-10)


class TestPointToLocalCenter:
    def test_n1_equals_point_to_set(self, rng):
        es = random_set(rng, 10, 8)
        g = unit_vector(rng, 8)
        assert sim_point_to_local_center(g, es, 1) == pytest.approx(
            sim_point_to_set(g, es), abs=1e-9
        )

    def test_full_neighborhood_equals_center(self, rng):
        es = random_set(rng, 10, 8)
        g = unit_vector(rng, 8)
        assert sim_point_to_local_center(g, es, 10) == pytest.approx(
            sim_point_to_center(g, es), abs=1e-9
        )

    def test_oversized_n_clamped(self, rng):
        es = random_set(rng, 4, 8)
        g = unit_vector(rng, 8)
        assert sim_point_to_local_center(g, es, 50) == pytest.approx(
            sim_point_to_center(g, es), abs=1e-9
        )

    def test_matches_naive_oracle(self, rng):
        for _ in range(25):
            es = random_set(rng, 12, 6)
            g = unit_vector(rng, 6)
            n = int(rng.integers(1, 13))
            assert sim_point_to_local_center(g, es, n) == pytest.approx(
                local_center_score(g, es.vectors, n), abs=1e-12
            )

    def test_default_neighborhood_in_recommended_band(self):
        config = MetricConfig()
        assert config.neighborhood_n == 20
        assert 10 <= config.neighborhood_n <= 30


class TestDispatchAndInvariance:
    def test_dispatch_matches_functions(self, rng):
        es = random_set(rng, 8, 6)
        g = unit_vector(rng, 6)
        assert space_similarity(g, es, MetricConfig(kind="set")) == sim_point_to_set(g, es)
        assert space_similarity(g, es, MetricConfig(kind="center")) == sim_point_to_center(g, es)
        assert space_similarity(
            g, es, MetricConfig(kind="subspace", subspace_dims=3)
        ) == sim_point_to_subspace(g, es, 3)
        assert space_similarity(
            g, es, MetricConfig(kind="local_center", neighborhood_n=4)
        ) == sim_point_to_local_center(g, es, 4)

    def test_permutation_invariance(self, rng):
        es = random_set(rng, 9, 7)
        g = unit_vector(rng, 7)
        perm = rng.permutation(9)
        shuffled = EmbeddingSet(es.vectors[perm])
        for config in (
            MetricConfig(kind="set"),
            MetricConfig(kind="center"),
            MetricConfig(kind="subspace", subspace_dims=3),
            MetricConfig(kind="local_center", neighborhood_n=4),
        ):
            assert space_similarity(g, es, config) == pytest.approx(
                space_similarity(g, shuffled, config), abs=1e-9
            )

    def test_index_reuse_matches_fresh(self, rng):
        es = random_set(rng, 8, 5)
        index = SpaceIndex(es.vectors)
        g1, g2 = unit_vector(rng, 5), unit_vector(rng, 5)
        config = MetricConfig(kind="local_center", neighborhood_n=3)
        assert space_similarity(g1, index, config) == space_similarity(g1, es, config)
        assert space_similarity(g2, index, config) == space_similarity(g2, es, config)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            MetricConfig(kind="nearest")
        with pytest.raises(ValueError):
            MetricConfig(neighborhood_n=0)
