"""Zero-shot classification over synonymous semantic spaces.

Each class is represented by a set of text embeddings built from LLM
synonym x descriptor combinations, filtered to its dominant connected
component under a cosine-similarity threshold, and scored against query
embeddings with point-to-space metrics. An optional test-time loop
adapts per-class shift vectors by marginal-entropy minimization.
"""

from .analysis import CompactnessReport, compactness, compare_populations
from .classifier import (
    ClassCatalog,
    ClassEntry,
    ClassSpec,
    EvaluationResult,
    Prediction,
    argmax_invariance_check,
    build_catalog,
    evaluate,
    load_catalog,
    predict,
    save_catalog,
)
from .embeddings import EmbeddingSet, cosine, load_embeddings, normalize, save_embeddings
from .metrics import (
    MetricConfig,
    SpaceIndex,
    sim_point_to_center,
    sim_point_to_local_center,
    sim_point_to_set,
    sim_point_to_subspace,
    space_similarity,
)
from .textgen import (
    ClassLexicon,
    LlmClient,
    SynonymousTexts,
    combine,
    load_lexicon_cache,
    render_descriptor_prompt,
    render_synonym_prompt,
)
from .topology import (
    CoreComponent,
    MergeEvent,
    PersistenceBar,
    PersistenceRecord,
    SimilarityGraph,
    TopologyConfig,
    build_similarity_graph,
    largest_component,
    persistence_0d,
    vr_complex_at,
)
from .tta import TtaConfig, TtaEpisode, adapt_step, predict_adapted, run_episode

__version__ = "0.1.0"
