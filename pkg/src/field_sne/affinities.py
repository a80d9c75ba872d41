"""High-dimensional similarity distribution P.

Pipeline: exact brute-force kNN, per-point Gaussian bandwidth calibrated by
bisection to a target perplexity, symmetrization of the conditional rows into
a sparse joint distribution.  The normalization convention is that p_ij sums
to 1 over ordered pairs (i != j), so a symmetric pair contributes twice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dataio import DataFormatError, DataMatrix, read_sidecar, sidecar_path

log = logging.getLogger(__name__)

BETA_BRACKET = (1e-12, 1e12)
ENTROPY_TOL_BITS = 1e-5
MAX_BISECTION_STEPS = 200


class PerplexityUnreachableError(ValueError):
    """Target perplexity is not attainable for the given neighbor count."""


@dataclass(frozen=True)
class PerplexityConfig:
    perplexity: float = 30.0
    neighbor_multiple: int = 3
    entropy_tol: float = ENTROPY_TOL_BITS
    max_steps: int = MAX_BISECTION_STEPS

    @property
    def k(self) -> int:
        return self.neighbor_multiple * math.ceil(self.perplexity)


@dataclass(frozen=True)
class NeighborGraph:
    """k nearest neighbors per point; rows sorted ascending by (d^2, index)."""

    indices: np.ndarray
    sqdists: np.ndarray

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def validate(self) -> "NeighborGraph":
        n, k = self.indices.shape
        if k >= n:
            raise ValueError(f"k={k} must be < N={n}")
        if (self.indices == np.arange(n)[:, None]).any():
            raise ValueError("a point lists itself as neighbor")
        if (np.diff(self.sqdists, axis=1) < 0).any():
            raise ValueError("squared distances not sorted ascending")
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise ValueError("neighbor index out of range")
        return self


@dataclass(frozen=True)
class ConditionalRow:
    """Calibrated conditional distribution over one point's k neighbors."""

    beta: float
    probabilities: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class SparseAffinities:
    """Symmetric joint distribution P in compressed-row form."""

    offsets: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def total(self) -> float:
        return float(np.sum(self.values))

    def validate(self, tol: float = 1e-9) -> "SparseAffinities":
        n = self.n
        rows = np.repeat(np.arange(n), np.diff(self.offsets))
        if (rows == self.indices).any():
            raise ValueError("diagonal entry in P")
        if (self.values <= 0).any():
            raise ValueError("non-positive affinity value")
        if abs(self.total() - 1.0) > tol:
            raise ValueError(f"sum(P) = {self.total()!r}, expected 1 within {tol}")
        # exact symmetry: the transposed triple must be identical after sorting
        order_f = np.lexsort((self.indices, rows))
        order_t = np.lexsort((rows, self.indices))
        if not (
            np.array_equal(rows[order_f], self.indices[order_t])
            and np.array_equal(self.indices[order_f], rows[order_t])
            and np.array_equal(self.values[order_f], self.values[order_t])
        ):
            raise ValueError("P is not exactly symmetric")
        return self


def knn_exact(data: DataMatrix, k: int) -> NeighborGraph:
    """Exact brute-force kNN, O(N^2 D), ties broken by lower index."""
    n = data.rows
    if not 1 <= k < n:
        raise ValueError(f"k={k} out of range [1, {n - 1}]")
    values = np.ascontiguousarray(data.values, dtype=np.float64)
    idx, dst = _kernels.knn_brute_force(values, k)
    return NeighborGraph(idx, dst)


def calibrate_bandwidth(
    sqdists: np.ndarray,
    perplexity: float,
    tol: float = ENTROPY_TOL_BITS,
    max_steps: int = MAX_BISECTION_STEPS,
) -> ConditionalRow:
    """Bisection on beta so the row's entropy matches log2(perplexity)."""
    sqdists = np.asarray(sqdists, dtype=np.float64)
    k = sqdists.shape[0]
    if k < 2:
        raise ValueError("need at least 2 neighbors")
    if perplexity >= k:
        raise PerplexityUnreachableError(
            f"perplexity {perplexity} >= neighbor count {k}: target entropy unreachable"
        )
    betas, probs, degenerate = _kernels.calibrate_rows(
        sqdists[None, :], math.log2(perplexity), tol, max_steps, *BETA_BRACKET
    )
    return ConditionalRow(float(betas[0]), probs[0], bool(degenerate[0]))


def calibrate_all(
    graph: NeighborGraph, cfg: PerplexityConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Calibrate every row at once; returns (betas, probs (N,k), degenerate)."""
    if cfg.perplexity >= graph.k:
        raise PerplexityUnreachableError(
            f"perplexity {cfg.perplexity} >= k {graph.k}: target entropy unreachable"
        )
    betas, probs, degenerate = _kernels.calibrate_rows(
        graph.sqdists, math.log2(cfg.perplexity), cfg.entropy_tol, cfg.max_steps, *BETA_BRACKET
    )
    ndeg = int(degenerate.sum())
    if ndeg:
        log.warning("%d rows with all-zero neighbor distances: uniform fallback", ndeg)
    return betas, probs, degenerate


def symmetrize(rows: list[ConditionalRow] | np.ndarray, graph: NeighborGraph) -> SparseAffinities:
    """p_ij = (p_{i|j} + p_{j|i}) / 2N over the union sparsity pattern.

    A direction missing from the kNN graph contributes 0.  The result is
    exactly symmetric and sums to 1 over ordered pairs.
    """
    if isinstance(rows, np.ndarray):
        probs = rows
    else:
        probs = np.stack([r.probabilities for r in rows])
    n, k = probs.shape
    if (n, k) != graph.indices.shape:
        raise ValueError("conditional rows do not match the neighbor graph")

    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = graph.indices.ravel().astype(np.int64)
    val = probs.ravel()
    # stack (i,j) with (j,i): coalescing then sums p_{j|i} + p_{i|j}
    rows_all = np.concatenate([src, dst])
    cols_all = np.concatenate([dst, src])
    vals_all = np.concatenate([val, val])

    order = np.lexsort((cols_all, rows_all))
    rows_all, cols_all, vals_all = rows_all[order], cols_all[order], vals_all[order]
    new_group = np.empty(rows_all.shape[0], dtype=bool)
    new_group[0] = True
    new_group[1:] = (rows_all[1:] != rows_all[:-1]) | (cols_all[1:] != cols_all[:-1])
    starts = np.flatnonzero(new_group)
    # each group holds one or two entries (p_{j|i} and, if present, p_{i|j});
    # IEEE addition is commutative, so (i,j) and (j,i) coalesce to the exact
    # same value and the output is bit-symmetric
    summed = np.add.reduceat(vals_all, starts) / (2.0 * n)
    out_rows = rows_all[starts]
    out_cols = cols_all[starts]

    # conditional probabilities can underflow to 0; drop those entries (they
    # vanish in symmetric pairs) to keep every stored value positive
    keep = summed > 0.0
    if not keep.all():
        out_rows, out_cols, summed = out_rows[keep], out_cols[keep], summed[keep]

    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, out_rows + 1, 1)
    offsets = np.cumsum(offsets)
    return SparseAffinities(offsets, out_cols, summed)


def build_affinities(data: DataMatrix, cfg: PerplexityConfig) -> SparseAffinities:
    """kNN + calibration + symmetrization in one call."""
    if cfg.k >= data.rows:
        raise PerplexityUnreachableError(
            f"k = {cfg.k} (neighbor multiple x ceil(perplexity)) must be < N = {data.rows}"
        )
    graph = knn_exact(data, cfg.k)
    _, probs, _ = calibrate_all(graph, cfg)
    return symmetrize(probs, graph)


def save_affinities(p: SparseAffinities, path) -> None:
    """Raw-binary triple (offsets, indices as int64, values as float64) with a
    text sidecar recording the layout."""
    path = Path(path)
    with open(path, "wb") as fh:
        p.offsets.astype("<i8").tofile(fh)
        p.indices.astype("<i8").tofile(fh)
        p.values.astype("<f8").tofile(fh)
    hdr = [
        f"n={p.n}",
        f"nnz={p.nnz}",
        "sections=offsets:i8,indices:i8,values:f8",
        "endianness=little",
    ]
    sidecar_path(path).write_text("\n".join(hdr) + "\n")


def load_affinities(path) -> SparseAffinities:
    path = Path(path)
    hdr = read_sidecar(path)
    try:
        n, nnz = int(hdr["n"]), int(hdr["nnz"])
    except KeyError as exc:
        raise DataFormatError(f"{sidecar_path(path)}: missing field {exc}") from exc
    blob = path.read_bytes()
    expected = (n + 1) * 8 + nnz * 8 + nnz * 8
    if len(blob) != expected:
        raise DataFormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    off_end = (n + 1) * 8
    idx_end = off_end + nnz * 8
    offsets = np.frombuffer(blob[:off_end], dtype="<i8")
    indices = np.frombuffer(blob[off_end:idx_end], dtype="<i8")
    values = np.frombuffer(blob[idx_end:], dtype="<f8")
    return SparseAffinities(offsets, indices, values)
