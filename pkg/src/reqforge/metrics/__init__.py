"""Evaluation metrics: geometry over embeddings, text overlap, model match."""

from reqforge.metrics.geometry import (
    DimensionUnsupported,
    DiversityResult,
    EmptySet,
    TooFewItems,
    convex_hull_volume,
    diversity,
    mean_distance_to_centroid,
    pca_project,
)
from reqforge.metrics.modelscore import PRF, PRFResult, model_prf, prf_from_diff
from reqforge.metrics.textscores import bleu, semantic_similarity, tokens_of

__all__ = [
    "DimensionUnsupported",
    "DiversityResult",
    "EmptySet",
    "TooFewItems",
    "convex_hull_volume",
    "diversity",
    "mean_distance_to_centroid",
    "pca_project",
    "PRF",
    "PRFResult",
    "model_prf",
    "prf_from_diff",
    "bleu",
    "semantic_similarity",
    "tokens_of",
]
