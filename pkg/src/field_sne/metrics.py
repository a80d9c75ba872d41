"""Embedding quality and performance measurement.

Nearest-neighbor preservation follows the precision/recall protocol with a
fixed 30-point high-dimensional neighborhood: for k = 1..k_max the true
positives T are the low-dimensional k-neighbors that also appear in the
high-dimensional k_max-neighborhood, giving precision T/k and recall
T/k_max, averaged over points.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .affinities import PerplexityConfig, build_affinities, knn_exact
from .dataio import DataMatrix, subsample
from .optimizer import OptimizerConfig, run_optimization

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 30
DEFAULT_NORM_FLOOR = 1e-9


@dataclass(frozen=True)
class PrecisionRecallCurve:
    k_max: int
    precision: np.ndarray  # index k-1 holds the mean precision at k
    recall: np.ndarray

    def points(self) -> list[tuple[int, float, float]]:
        return [
            (k, float(self.precision[k - 1]), float(self.recall[k - 1]))
            for k in range(1, self.k_max + 1)
        ]

    def to_csv(self) -> str:
        lines = ["k,precision,recall"]
        for k, p, r in self.points():
            lines.append(f"{k},{p!r},{r!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GradientErrorStats:
    max_relative: float
    mean_relative: float
    norm_floor: float


@dataclass(frozen=True)
class ScalingReport:
    rows: list[tuple[int, float, float, str]]  # (N, per-iteration ms, total s, backend)

    def to_csv(self) -> str:
        lines = ["n,per_iteration_ms,total_s,backend"]
        for n, ms, total, backend in self.rows:
            lines.append(f"{n},{ms!r},{total!r},{backend}")
        return "\n".join(lines) + "\n"


def nn_preservation(
    data: DataMatrix,
    points: np.ndarray,
    k_max: int = DEFAULT_K_MAX,
    sweep_high: bool = False,
) -> PrecisionRecallCurve:
    """Averaged precision/recall of low-dim k-neighborhoods against the
    fixed high-dim k_max-neighborhood (ties broken by index in both spaces).

    sweep_high=True uses the alternative reading where the high-dimensional
    neighborhood also sweeps with k.
    """
    n = data.rows
    if points.shape[0] != n:
        raise ValueError(f"embedding has {points.shape[0]} points, data has {n}")
    if not 1 <= k_max < n:
        raise ValueError(f"k_max={k_max} out of range [1, {n - 1}]")
    high = knn_exact(data, k_max).indices
    low = knn_exact(DataMatrix(np.ascontiguousarray(points)), k_max).indices

    hits = np.zeros((n, k_max), dtype=np.int64)
    for i in range(n):
        hits[i] = np.isin(low[i], high[i], assume_unique=True)
    t_cum = np.cumsum(hits, axis=1).astype(np.float64)  # T_i(k) for k = 1..k_max

    ks = np.arange(1, k_max + 1, dtype=np.float64)
    if sweep_high:
        # T restricted to the first k high-dim neighbors as well
        t_sweep = np.zeros((n, k_max))
        for i in range(n):
            for k in range(1, k_max + 1):
                t_sweep[i, k - 1] = np.intersect1d(
                    low[i, :k], high[i, :k], assume_unique=True
                ).size
        precision = (t_sweep / ks).mean(axis=0)
        recall = (t_sweep / k_max).mean(axis=0)
    else:
        precision = (t_cum / ks).mean(axis=0)
        recall = (t_cum / k_max).mean(axis=0)
    return PrecisionRecallCurve(k_max, precision, recall)


def compare_gradients(
    reference: np.ndarray,
    candidate: np.ndarray,
    norm_floor: float = DEFAULT_NORM_FLOOR,
) -> GradientErrorStats:
    """Per-point relative L2 error |c_i - r_i| / max(|r_i|, floor)."""
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if reference.shape != candidate.shape:
        raise ValueError(f"shape mismatch {reference.shape} vs {candidate.shape}")
    err = np.linalg.norm(candidate - reference, axis=1)
    ref = np.maximum(np.linalg.norm(reference, axis=1), norm_floor)
    rel = err / ref
    return GradientErrorStats(float(rel.max()), float(rel.mean()), norm_floor)


def scaling_benchmark(
    data: DataMatrix,
    sizes: list[int],
    opt_cfg: OptimizerConfig,
    perp_cfg: PerplexityConfig,
    backends: list[str],
    repeats: int = 3,
    seed: int = 0,
) -> ScalingReport:
    """Median per-iteration gradient time for each (backend, size).

    Subsets are nested (the rows used for a smaller size are contained in
    every larger one) and share the seed, so timings are comparable.  Runs
    are sequential; the reported value is the median over `repeats` runs of
    the median per-iteration time within a run.
    """
    if any(s > data.rows for s in sizes):
        raise ValueError("benchmark size exceeds dataset rows")
    rows: list[tuple[int, float, float, str]] = []
    for backend in backends:
        for n in sorted(sizes):
            sub, _ = subsample(data, None, n, seed)
            p = build_affinities(sub, perp_cfg)
            cfg = replace(opt_cfg, backend=backend, seed=seed, kl_every=0)
            per_run: list[float] = []
            total = 0.0
            for _ in range(repeats):
                t0 = time.perf_counter()
                _, meta = run_optimization(p, cfg)
                total += time.perf_counter() - t0
                per_run.append(float(np.median([ms for _, _, ms in meta.stats])))
            rows.append((n, float(np.median(per_run)), total / repeats, backend))
            log.info(
                "bench backend=%s n=%d: %.3f ms/iteration", backend, n, rows[-1][1]
            )
    return ScalingReport(rows)
