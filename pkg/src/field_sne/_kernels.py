"""Numba-compiled inner loops.

Every kernel is written so that each output element is owned by exactly one
prange iteration and accumulated in a fixed (index-ascending) order.  Results
are therefore bit-identical for any worker count; fastmath stays off so the
IEEE evaluation order is part of the contract.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def knn_brute_force(data, k):
    """Exact k smallest squared Euclidean distances per row, ties by lower index.

    Returns (indices (N,k) int64, sqdists (N,k) float64), each row sorted
    ascending by (distance, index).
    """
    n, d = data.shape
    idx = np.empty((n, k), dtype=np.int64)
    dst = np.empty((n, k), dtype=np.float64)
    for i in prange(n):
        nn_d = np.full(k, np.inf)
        nn_i = np.full(k, -1, dtype=np.int64)
        for j in range(n):
            if j == i:
                continue
            acc = 0.0
            for c in range(d):
                diff = data[i, c] - data[j, c]
                acc += diff * diff
            # lexicographic (distance, index) against current worst
            worst_d = nn_d[k - 1]
            if acc > worst_d or (acc == worst_d and j > nn_i[k - 1]):
                continue
            pos = k - 1
            while pos > 0 and (nn_d[pos - 1] > acc or (nn_d[pos - 1] == acc and nn_i[pos - 1] > j)):
                nn_d[pos] = nn_d[pos - 1]
                nn_i[pos] = nn_i[pos - 1]
                pos -= 1
            nn_d[pos] = acc
            nn_i[pos] = j
        idx[i] = nn_i
        dst[i] = nn_d
    return idx, dst


@njit(parallel=True, cache=True)
def calibrate_rows(sqdists, log2_mu, tol, max_steps, beta_lo, beta_hi):
    """Per-row bisection on the Gaussian precision beta = 1/(2 sigma^2).

    Matches the Shannon entropy (bits) of the conditional row to log2_mu.
    Rows whose distances are all zero get uniform probabilities and a flag.
    Returns (betas (N,), probs (N,k), degenerate (N,) bool).
    """
    n, k = sqdists.shape
    betas = np.empty(n)
    probs = np.empty((n, k))
    degenerate = np.zeros(n, dtype=np.bool_)
    inv_ln2 = 1.0 / np.log(2.0)
    for i in prange(n):
        if sqdists[i, k - 1] == 0.0:
            for j in range(k):
                probs[i, j] = 1.0 / k
            betas[i] = 1.0
            degenerate[i] = True
            continue
        dmin = sqdists[i, 0]
        lo = beta_lo
        hi = beta_hi
        beta = 1.0
        for _ in range(max_steps):
            beta = 0.5 * (lo + hi)
            wsum = 0.0
            dsum = 0.0
            for j in range(k):
                dj = sqdists[i, j] - dmin
                w = np.exp(-beta * dj)
                wsum += w
                dsum += w * dj
            h_bits = (np.log(wsum) + beta * dsum / wsum) * inv_ln2
            if abs(h_bits - log2_mu) <= tol:
                break
            if h_bits > log2_mu:
                lo = beta
            else:
                hi = beta
        wsum = 0.0
        for j in range(k):
            w = np.exp(-beta * (sqdists[i, j] - dmin))
            probs[i, j] = w
            wsum += w
        for j in range(k):
            probs[i, j] /= wsum
        betas[i] = beta
    return betas, probs, degenerate


@njit(parallel=True, cache=True)
def csr_attractive(points, offsets, cols, vals):
    """Attractive force per point: sum over stored neighbors of
    p_il * (1+|y_i-y_l|^2)^-1 * (y_i-y_l)."""
    n = points.shape[0]
    out = np.zeros((n, 2))
    for i in prange(n):
        xi = points[i, 0]
        yi = points[i, 1]
        ax = 0.0
        ay = 0.0
        for ptr in range(offsets[i], offsets[i + 1]):
            j = cols[ptr]
            dx = xi - points[j, 0]
            dy = yi - points[j, 1]
            w = vals[ptr] / (1.0 + dx * dx + dy * dy)
            ax += w * dx
            ay += w * dy
        out[i, 0] = ax
        out[i, 1] = ay
    return out


@njit(parallel=True, cache=True)
def direct_fields(points, positions):
    """Exact field summation at arbitrary positions: for each position p,
    s = sum_i (1+|y_i-p|^2)^-1 and v = sum_i (1+|y_i-p|^2)^-2 (y_i-p)."""
    n = points.shape[0]
    m = positions.shape[0]
    out = np.empty((m, 3))
    for q in prange(m):
        px = positions[q, 0]
        py = positions[q, 1]
        s = 0.0
        vx = 0.0
        vy = 0.0
        for j in range(n):
            dx = points[j, 0] - px
            dy = points[j, 1] - py
            w = 1.0 / (1.0 + dx * dx + dy * dy)
            s += w
            w2 = w * w
            vx += w2 * dx
            vy += w2 * dy
        out[q, 0] = s
        out[q, 1] = vx
        out[q, 2] = vy
    return out


@njit(parallel=True, cache=True)
def accumulate_exact(points, ox, oy, cell, width, height):
    """Per-pixel field accumulation with unbounded kernel support.

    Each pixel center sums the kernel over all points in index order; the
    arithmetic is kept identical to accumulate_splat so a full-support splat
    reproduces this grid bit for bit.
    """
    n = points.shape[0]
    grid = np.zeros((height, width, 3))
    for flat in prange(width * height):
        iy = flat // width
        ix = flat - iy * width
        px = ox + ix * cell
        py = oy + iy * cell
        s = 0.0
        vx = 0.0
        vy = 0.0
        for j in range(n):
            dx = points[j, 0] - px
            dy = points[j, 1] - py
            w = 1.0 / (1.0 + dx * dx + dy * dy)
            s += w
            w2 = w * w
            vx += w2 * dx
            vy += w2 * dy
        grid[iy, ix, 0] = s
        grid[iy, ix, 1] = vx
        grid[iy, ix, 2] = vy
    return grid


@njit(cache=True)
def accumulate_splat(points, ox, oy, cell, width, height, radius):
    """Truncated-kernel splatting: each point deposits onto pixels within
    `radius` (embedding units) of itself; contributions outside are dropped.

    Serial over points so pixel accumulation order matches accumulate_exact.
    """
    n = points.shape[0]
    grid = np.zeros((height, width, 3))
    r2 = radius * radius
    for j in range(n):
        x = points[j, 0]
        y = points[j, 1]
        ix_lo = int(np.ceil((x - radius - ox) / cell))
        ix_hi = int(np.floor((x + radius - ox) / cell))
        iy_lo = int(np.ceil((y - radius - oy) / cell))
        iy_hi = int(np.floor((y + radius - oy) / cell))
        if ix_lo < 0:
            ix_lo = 0
        if iy_lo < 0:
            iy_lo = 0
        if ix_hi > width - 1:
            ix_hi = width - 1
        if iy_hi > height - 1:
            iy_hi = height - 1
        for iy in range(iy_lo, iy_hi + 1):
            py = oy + iy * cell
            for ix in range(ix_lo, ix_hi + 1):
                px = ox + ix * cell
                dx = x - px
                dy = y - py
                d2 = dx * dx + dy * dy
                if d2 > r2:
                    continue
                w = 1.0 / (1.0 + dx * dx + dy * dy)
                w2 = w * w
                grid[iy, ix, 0] += w
                grid[iy, ix, 1] += w2 * dx
                grid[iy, ix, 2] += w2 * dy
    return grid
