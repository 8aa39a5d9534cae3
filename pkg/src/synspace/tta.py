"""Test-time adaptation of class scores via per-class shift vectors.

For one test sample the classifier sees M views (the original embedding
first, then augmented variants). Each class k gets a learnable shift
vector v_k added uniformly to its core members, so the score of view g
becomes <g, c_k(g) + v_k>, where c_k(g) is the local-center mean of the
unshifted core. Selecting c_k in the unshifted space is exact, not an
approximation: a uniform shift adds the constant <g, v_k> to every
member similarity, so the best member and its neighborhood are the same
in both spaces.

One gradient step minimizes the entropy of the marginal softmax over the
most confident views, then the original view is re-scored against the
shifted spaces. Shifts are episode-local; nothing carries over between
samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassCatalog, Prediction
from .embeddings import EmbeddingSet
from .errors import DimensionMismatchError, NumericalOverflowError
from .metrics import MetricConfig

_PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class TtaConfig:
    temperature: float = 100.0  # CLIP-style logit scale
    selection_ratio: float = 0.1
    learning_rate: float = 5e-4

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not (0.0 < self.selection_ratio <= 1.0):
            raise ValueError("selection_ratio must lie in (0, 1]")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class TtaEpisode:
    """Mutable per-sample adaptation state (views[0] is the original image)."""

    views: EmbeddingSet
    temperature: float
    learning_rate: float
    selection_ratio: float
    shifts: np.ndarray = field(init=False)
    selected: tuple[int, ...] | None = None

    def __post_init__(self):
        self.shifts = np.zeros((0, 0))  # sized on first use against a catalog

    def ensure_shifts(self, num_classes: int, dim: int) -> None:
        if self.shifts.shape != (num_classes, dim):
            self.shifts = np.zeros((num_classes, dim))


@dataclass(frozen=True)
class EpisodeResult:
    prediction_before: Prediction
    prediction_after: Prediction
    shifts: np.ndarray
    selected: tuple[int, ...]
    entropy_trace: tuple[float, ...]  # marginal entropy before and after the step


def _effective_neighborhood(metric: MetricConfig, space_size: int) -> int:
    """Neighborhood size realizing the catalog metric as a local mean."""
    if metric.renormalize_mean:
        raise ValueError("adaptation requires unnormalized means")
    if metric.kind == "local_center":
        return min(metric.neighborhood_n, space_size)
    if metric.kind == "center":
        return space_size
    if metric.kind == "set":
        return 1
    raise ValueError(f"metric kind {metric.kind!r} has no mean form usable for adaptation")


def local_center_vectors(g: np.ndarray, catalog: ClassCatalog) -> np.ndarray:
    """(K, D) matrix of per-class local-center means for one view."""
    rows = [
        entry.index.local_center_vector(
            g, _effective_neighborhood(catalog.metric, entry.index.size)
        )
        for entry in catalog.classes
    ]
    return np.stack(rows)


def raw_shifted_scores(
    views: EmbeddingSet, catalog: ClassCatalog, shifts: np.ndarray
) -> np.ndarray:
    """(M, K) matrix of <g_i, c_k(g_i) + v_k> scores."""
    if views.dim != catalog.dim:
        raise DimensionMismatchError(
            f"views have dim {views.dim}, catalog dim is {catalog.dim}"
        )
    if shifts.shape != (catalog.num_classes, catalog.dim):
        raise DimensionMismatchError(
            f"shifts have shape {shifts.shape}, expected "
            f"({catalog.num_classes}, {catalog.dim})"
        )
    scores = np.empty((views.count, catalog.num_classes))
    for i, g in enumerate(views.vectors):
        centers = local_center_vectors(g, catalog)
        scores[i] = (centers + shifts) @ g
    return scores


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    if not np.isfinite(logits).all():
        raise NumericalOverflowError("non-finite logits in view scoring")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def view_scores(
    views: EmbeddingSet, catalog: ClassCatalog, shifts: np.ndarray, temperature: float
) -> np.ndarray:
    """(M, K) per-view class probabilities under the shifted spaces."""
    raw = raw_shifted_scores(views, catalog, shifts)
    return _softmax_rows(temperature * raw)


def row_entropies(rows: np.ndarray) -> np.ndarray:
    p = np.clip(rows, _PROB_FLOOR, 1.0)
    return -(rows * np.log(p)).sum(axis=1)


def select_confident(rows: np.ndarray, selection_ratio: float) -> tuple[int, ...]:
    """Indices of the lowest-entropy rows, at least one, ties to lower index."""
    m = rows.shape[0]
    if m < 1:
        raise DimensionMismatchError("need at least one view")
    keep = max(1, int(selection_ratio * m))
    order = np.argsort(row_entropies(rows), kind="stable")
    return tuple(int(i) for i in order[:keep])


def marginal_entropy(rows: np.ndarray, selected) -> float:
    marginal = rows[list(selected)].mean(axis=0)
    p = np.clip(marginal, _PROB_FLOOR, 1.0)
    return float(-(marginal * np.log(p)).sum())


def episode_loss(
    views: EmbeddingSet,
    catalog: ClassCatalog,
    shifts: np.ndarray,
    temperature: float,
    selected,
) -> float:
    """Marginal-entropy objective as a function of the shifts (for checks)."""
    rows = view_scores(views, catalog, shifts, temperature)
    return marginal_entropy(rows, selected)


def entropy_gradient(
    views: EmbeddingSet,
    catalog: ClassCatalog,
    shifts: np.ndarray,
    temperature: float,
    selected,
) -> np.ndarray:
    """Analytic d(marginal entropy)/d(shifts), shape (K, D).

    With z_ik = tau * (<g_i, c_ik> + <g_i, v_k>), p_i = softmax(z_i) and
    pbar the mean over selected views, dL/dz_ik = p_ik (a_k - w_i) / S
    where a = -(log pbar + 1), w_i = sum_j a_j p_ij and S the selection
    count; dz_ik/dv_k = tau * g_i. c_ik carries no gradient because it is
    computed in the unshifted space.
    """
    sel = list(selected)
    rows = view_scores(views, catalog, shifts, temperature)[sel]
    g_sel = views.vectors[sel]
    pbar = rows.mean(axis=0)
    a = -(np.log(np.clip(pbar, _PROB_FLOOR, 1.0)) + 1.0)
    w = rows @ a
    coef = rows * (a[None, :] - w[:, None])
    return (temperature / len(sel)) * coef.T @ g_sel


def adapt_step(episode: TtaEpisode, catalog: ClassCatalog) -> np.ndarray:
    """One gradient-descent step on the marginal entropy; returns new shifts."""
    episode.ensure_shifts(catalog.num_classes, catalog.dim)
    if not episode.selected:
        raise ValueError("no selected views; run select_confident first")
    grad = entropy_gradient(
        episode.views, catalog, episode.shifts, episode.temperature, episode.selected
    )
    return episode.shifts - episode.learning_rate * grad


def predict_adapted(episode: TtaEpisode, catalog: ClassCatalog) -> Prediction:
    """Score the original view against the shifted spaces."""
    episode.ensure_shifts(catalog.num_classes, catalog.dim)
    g = episode.views.vectors[0]
    centers = local_center_vectors(g, catalog)
    scores = np.array(
        [float(np.dot(g, centers[k] + episode.shifts[k])) for k in range(catalog.num_classes)]
    )
    return Prediction(class_id=int(np.argmax(scores)), scores=scores)


def run_episode(
    views: EmbeddingSet, catalog: ClassCatalog, config: TtaConfig
) -> EpisodeResult:
    """Full single-sample adaptation: select, one step, re-predict."""
    episode = TtaEpisode(
        views=views,
        temperature=config.temperature,
        learning_rate=config.learning_rate,
        selection_ratio=config.selection_ratio,
    )
    episode.ensure_shifts(catalog.num_classes, catalog.dim)
    before = predict_adapted(episode, catalog)
    rows = view_scores(views, catalog, episode.shifts, config.temperature)
    episode.selected = select_confident(rows, config.selection_ratio)
    entropy_before = marginal_entropy(rows, episode.selected)
    episode.shifts = adapt_step(episode, catalog)
    entropy_after = episode_loss(
        views, catalog, episode.shifts, config.temperature, episode.selected
    )
    after = predict_adapted(episode, catalog)
    return EpisodeResult(
        prediction_before=before,
        prediction_after=after,
        shifts=episode.shifts,
        selected=episode.selected,
        entropy_trace=(entropy_before, entropy_after),
    )
