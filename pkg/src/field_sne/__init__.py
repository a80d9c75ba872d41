"""t-SNE with linear-time repulsive forces.

The quadratic point-to-point repulsion of t-SNE is replaced by a scalar
density field and a 2-D repulsive vector field accumulated on a grid over
the embedding, sampled back per point with bilinear interpolation.  An exact
quadratic oracle, quality metrics, and a CLI round out the package.
"""

from .affinities import (
    NeighborGraph,
    PerplexityConfig,
    SparseAffinities,
    build_affinities,
    calibrate_bandwidth,
    knn_exact,
    symmetrize,
)
from .dataio import DataMatrix, RunMetadata, load_dense_matrix, save_embedding, subsample
from .fields import (
    FieldGrid,
    GridGeometry,
    accumulate_fields_exact,
    accumulate_fields_splat,
    compute_grid_geometry,
    eval_fields_direct,
    kernel_eval,
    sample_fields,
)
from .metrics import compare_gradients, nn_preservation, scaling_benchmark
from .optimizer import (
    Embedding,
    OptimizerConfig,
    assemble_forces,
    field_gradient,
    initialize_embedding,
    run_optimization,
)
from .oracle import exact_gradient, exact_z, kl_divergence

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "Embedding",
    "FieldGrid",
    "GridGeometry",
    "NeighborGraph",
    "OptimizerConfig",
    "PerplexityConfig",
    "RunMetadata",
    "SparseAffinities",
    "accumulate_fields_exact",
    "accumulate_fields_splat",
    "assemble_forces",
    "build_affinities",
    "calibrate_bandwidth",
    "compare_gradients",
    "compute_grid_geometry",
    "eval_fields_direct",
    "exact_gradient",
    "exact_z",
    "field_gradient",
    "initialize_embedding",
    "kernel_eval",
    "kl_divergence",
    "knn_exact",
    "load_dense_matrix",
    "nn_preservation",
    "run_optimization",
    "sample_fields",
    "save_embedding",
    "scaling_benchmark",
    "subsample",
    "symmetrize",
]
