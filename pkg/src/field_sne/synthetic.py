"""Seeded synthetic datasets for experiments, benchmarks, and acceptance
runs where a real dataset is not available on disk."""

from __future__ import annotations

import numpy as np

from .dataio import DataMatrix


def gaussian_clusters(
    n: int,
    dim: int,
    n_clusters: int = 10,
    center_spread: float = 10.0,
    cluster_std: float = 1.0,
    seed: int = 0,
) -> tuple[DataMatrix, np.ndarray]:
    """Labeled mixture of spherical Gaussians in `dim` dimensions.

    Cluster sizes are as equal as possible; rows are shuffled so subsampled
    prefixes stay class-balanced.  Returns (data, labels).
    """
    if n < n_clusters:
        raise ValueError("need at least one point per cluster")
    rng = np.random.Generator(np.random.Philox(seed))
    centers = rng.normal(0.0, center_spread, size=(n_clusters, dim))
    labels = np.arange(n) % n_clusters
    values = centers[labels] + rng.normal(0.0, cluster_std, size=(n, dim))
    order = rng.permutation(n)
    return DataMatrix(values[order]), labels[order].astype(np.int64)


def mixture_embedding_2d(
    n: int,
    centers: np.ndarray,
    std: float = 1.5,
    seed: int = 0,
) -> np.ndarray:
    """2-D Gaussian-mixture point cloud, used as a frozen test embedding."""
    rng = np.random.Generator(np.random.Philox(seed))
    centers = np.asarray(centers, dtype=np.float64)
    which = rng.integers(0, centers.shape[0], size=n)
    return centers[which] + rng.normal(0.0, std, size=(n, 2))
