"""Spatial spread of embedded requirement sets.

Two numbers describe how widely a set of items covers its space: the
convex hull measure of the set after projection to a few principal axes
(area for k=2, volume for k=3) and the mean distance of the full-dimension
unit vectors to their centroid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull


class GeometryError(Exception):
    pass


class EmptySet(GeometryError):
    pass


class DimensionUnsupported(GeometryError):
    pass


class TooFewItems(GeometryError):
    pass


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        raise EmptySet("no points given")
    if arr.ndim != 2:
        raise DimensionUnsupported(f"expected an n x k point array, got shape {arr.shape}")
    return arr


def convex_hull_volume(points, k: int | None = None) -> float:
    """Hull area (k=2) or volume (k=3); 0.0 when the set is degenerate.

    Fewer than k+1 affinely independent points span no k-measure, so the
    result is exactly 0.0 rather than an error.
    """
    arr = _as_points(points)
    dim = arr.shape[1]
    if k is None:
        k = dim
    if k not in (2, 3):
        raise DimensionUnsupported(f"hull measure defined for k in (2, 3), got {k}")
    if dim != k:
        raise DimensionUnsupported(f"points have dimension {dim}, expected {k}")
    centered = arr - arr.mean(axis=0)
    rank = np.linalg.matrix_rank(centered)
    if arr.shape[0] < k + 1 or rank < k:
        return 0.0
    hull = ConvexHull(arr)
    # qhull reports the 2-d measure in .volume as well (area); .area is perimeter
    return float(hull.volume)


def mean_distance_to_centroid(points) -> float:
    """Average Euclidean distance from each point to the centroid."""
    arr = _as_points(points)
    center = arr.mean(axis=0)
    return float(np.linalg.norm(arr - center, axis=1).mean())


def pca_project(points, k: int) -> np.ndarray:
    """Project centered points onto their top-k principal axes."""
    arr = _as_points(points)
    centered = arr - arr.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axes = vt[:k]
    if axes.shape[0] < k:
        # fewer singular directions than requested: pad with zero coordinates
        projected = centered @ axes.T
        pad = np.zeros((projected.shape[0], k - projected.shape[1]))
        return np.hstack([projected, pad])
    return centered @ axes.T


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return vectors / norms


@dataclass(frozen=True)
class DiversityResult:
    chv: float
    mdc: float
    projection_k: int
    item_count: int


def diversity(items: Sequence[str], embed_fn: Callable[[Sequence[str]], Sequence[Sequence[float]]]) -> DiversityResult:
    """Embed items, L2-normalize, project (k=3, or 2 for tiny sets), measure.

    The hull measure is taken in the projected space; the centroid distance
    uses the normalized full-dimension vectors.
    """
    if len(items) < 2:
        raise TooFewItems(f"diversity needs at least 2 items, got {len(items)}")
    vectors = np.asarray(embed_fn(list(items)), dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] != len(items):
        raise GeometryError("embedding backend returned a mismatched matrix")
    unit = _normalize_rows(vectors)
    k = 3 if len(items) >= 4 else 2
    projected = pca_project(unit, k)
    return DiversityResult(
        chv=convex_hull_volume(projected, k),
        mdc=mean_distance_to_centroid(unit),
        projection_k=k,
        item_count=len(items),
    )
