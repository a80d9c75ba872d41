"""Exact quadratic-cost reference: Z, Q, the full gradient, and the KL
objective.  Everything here is plain NumPy so it shares no code with the
accelerated field kernels it is used to verify."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinities import SparseAffinities

DENSE_Q_LIMIT = 4096
CHUNK = 512
P_FLOOR_SCALE = 1e-12  # KL clamps p below P_FLOOR_SCALE / N


@dataclass(frozen=True)
class ExactQStats:
    z: float
    q: np.ndarray | None = None


def _check_points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"embedding must be (N, 2), got {points.shape}")
    return points


def exact_z(points: np.ndarray) -> float:
    """Z = sum over ordered pairs (k != l) of (1 + |y_k - y_l|^2)^-1."""
    points = _check_points(points)
    n = points.shape[0]
    if n < 2:
        raise ValueError("Z requires at least 2 points")
    total = 0.0
    sq = np.einsum("ij,ij->i", points, points)
    for lo in range(0, n, CHUNK):
        hi = min(lo + CHUNK, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * points[lo:hi] @ points.T
        np.maximum(d2, 0.0, out=d2)
        total += float(np.sum(1.0 / (1.0 + d2)))
    return total - n  # remove the N self terms, each exactly 1


def exact_q_dense(points: np.ndarray) -> ExactQStats:
    """Materialized q_ij for small N (diagonal forced to 0)."""
    points = _check_points(points)
    n = points.shape[0]
    if n > DENSE_Q_LIMIT:
        raise ValueError(f"dense Q limited to N <= {DENSE_Q_LIMIT}")
    diff = points[:, None, :] - points[None, :, :]
    w = 1.0 / (1.0 + np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(w, 0.0)
    z = float(w.sum())
    return ExactQStats(z=z, q=w / z)


def exact_gradient(p: SparseAffinities, points: np.ndarray) -> np.ndarray:
    """Gradient of the KL objective: 4 (attractive - repulsive), with the
    attractive sum over P's sparsity pattern and the repulsive sum over all
    pairs, normalized by the exact Z."""
    points = _check_points(points)
    n = points.shape[0]
    if p.n != n:
        raise ValueError(f"P is for {p.n} points, embedding has {n}")

    rows = np.repeat(np.arange(n), np.diff(p.offsets))
    d = points[rows] - points[p.indices]
    w = p.values / (1.0 + np.einsum("ij,ij->i", d, d))
    attr = np.empty((n, 2))
    attr[:, 0] = np.bincount(rows, weights=w * d[:, 0], minlength=n)
    attr[:, 1] = np.bincount(rows, weights=w * d[:, 1], minlength=n)

    z = exact_z(points)
    rep = np.empty((n, 2))
    for lo in range(0, n, CHUNK):
        hi = min(lo + CHUNK, n)
        diff = points[lo:hi, None, :] - points[None, :, :]
        w2 = (1.0 + np.einsum("ijk,ijk->ij", diff, diff)) ** -2
        # the j = i term has diff = 0 and contributes nothing
        rep[lo:hi] = np.einsum("ij,ijk->ik", w2, diff)
    rep /= z
    return 4.0 * (attr - rep)


def kl_divergence(p: SparseAffinities, points: np.ndarray) -> float:
    """KL(P || Q) over P's nonzeros; p values below the stability floor are
    clamped for the log only, never in P itself."""
    points = _check_points(points)
    n = points.shape[0]
    if n < 2:
        raise ValueError("KL requires at least 2 points")
    if p.n != n:
        raise ValueError(f"P is for {p.n} points, embedding has {n}")
    z = exact_z(points)
    rows = np.repeat(np.arange(n), np.diff(p.offsets))
    d = points[rows] - points[p.indices]
    d2 = np.einsum("ij,ij->i", d, d)
    pv = np.maximum(p.values, P_FLOOR_SCALE / n)
    # ln(p/q) with q = ((1+d2) Z)^-1
    return float(np.sum(pv * (np.log(pv) + np.log1p(d2) + np.log(z))))
