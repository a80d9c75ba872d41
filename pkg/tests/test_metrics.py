import math

import numpy as np
import pytest

from field_sne.affinities import PerplexityConfig
from field_sne.dataio import DataMatrix
from field_sne.metrics import compare_gradients, nn_preservation, scaling_benchmark
from field_sne.optimizer import OptimizerConfig


# -------------------------------------------------------------- nn_preservation


def test_nnp_identity_embedding(rng):
    # 2-D data embedded by the identity: orderings match exactly
    pts = rng.normal(0, 5, (80, 2))
    curve = nn_preservation(DataMatrix(pts), pts, k_max=10)
    np.testing.assert_allclose(curve.precision, 1.0)
    np.testing.assert_allclose(curve.recall, np.arange(1, 11) / 10.0)


def test_nnp_zero_overlap():
    # high-dim: tight pairs (0,1), (2,3); embedding pairs (0,2), (1,3)
    data = DataMatrix(np.array([[0.0], [0.1], [100.0], [100.1]]))
    emb = np.array([[0.0, 0.0], [50.0, 0.0], [0.1, 0.0], [50.1, 0.0]])
    curve = nn_preservation(data, emb, k_max=1)
    assert curve.precision[0] == 0.0
    assert curve.recall[0] == 0.0


def test_nnp_matches_double_loop_oracle(rng):
    data = DataMatrix(rng.normal(0, 1, (300, 10)))
    emb = rng.normal(0, 1, (300, 2))
    k_max = 8
    curve = nn_preservation(data, emb, k_max=k_max)

    # independent double-loop implementation over full sorted neighbor lists
    n = data.rows
    prec = np.zeros(k_max)
    rec = np.zeros(k_max)
    for i in range(n):
        dh = ((data.values - data.values[i]) ** 2).sum(axis=1)
        dh[i] = np.inf
        high = set(np.lexsort((np.arange(n), dh))[:k_max].tolist())
        dl = ((emb - emb[i]) ** 2).sum(axis=1)
        dl[i] = np.inf
        low = np.lexsort((np.arange(n), dl))[:k_max]
        for k in range(1, k_max + 1):
            t = len(high.intersection(low[:k].tolist()))
            prec[k - 1] += t / k
            rec[k - 1] += t / k_max
    prec /= n
    rec /= n
    np.testing.assert_array_equal(curve.precision, prec)
    np.testing.assert_array_equal(curve.recall, rec)


def test_nnp_precision_equals_recall_at_kmax(rng):
    data = DataMatrix(rng.normal(0, 1, (60, 5)))
    emb = rng.normal(0, 1, (60, 2))
    curve = nn_preservation(data, emb, k_max=12)
    assert curve.precision[-1] == curve.recall[-1]


def test_nnp_recall_nondecreasing(rng):
    data = DataMatrix(rng.normal(0, 1, (70, 4)))
    emb = rng.normal(0, 1, (70, 2))
    curve = nn_preservation(data, emb, k_max=15)
    assert (np.diff(curve.recall) >= -1e-15).all()
    assert ((curve.precision >= 0) & (curve.precision <= 1)).all()


def test_nnp_rigid_motion_invariant(rng):
    data = DataMatrix(rng.normal(0, 1, (50, 6)))
    emb = rng.normal(0, 1, (50, 2))
    theta = 2.1
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    base = nn_preservation(data, emb, k_max=9)
    moved = nn_preservation(data, emb @ rot.T + np.array([5.0, -2.0]), k_max=9)
    np.testing.assert_allclose(base.precision, moved.precision, atol=1e-15)
    np.testing.assert_allclose(base.recall, moved.recall, atol=1e-15)


def test_nnp_sweep_high_flag(rng):
    data = DataMatrix(rng.normal(0, 1, (40, 3)))
    emb = rng.normal(0, 1, (40, 2))
    fixed = nn_preservation(data, emb, k_max=6)
    swept = nn_preservation(data, emb, k_max=6, sweep_high=True)
    # both agree at k = k_max where the neighborhoods coincide
    assert swept.precision[-1] == fixed.precision[-1]
    assert (swept.precision <= fixed.precision + 1e-15).all()


def test_nnp_curve_csv_round_trip(rng):
    data = DataMatrix(rng.normal(0, 1, (30, 3)))
    curve = nn_preservation(data, rng.normal(0, 1, (30, 2)), k_max=5)
    lines = curve.to_csv().strip().splitlines()
    assert lines[0] == "k,precision,recall"
    assert len(lines) == 6
    k, p, r = lines[1].split(",")
    assert int(k) == 1 and float(p) == curve.precision[0] and float(r) == curve.recall[0]


def test_nnp_kmax_out_of_range(rng):
    data = DataMatrix(rng.normal(0, 1, (10, 2)))
    with pytest.raises(ValueError):
        nn_preservation(data, rng.normal(0, 1, (10, 2)), k_max=10)


# ------------------------------------------------------------ compare_gradients


def test_compare_identical():
    g = np.ones((5, 2))
    stats = compare_gradients(g, g)
    assert stats.max_relative == 0.0 and stats.mean_relative == 0.0


def test_compare_doubled(rng):
    ref = rng.normal(0, 1, (40, 2))
    stats = compare_gradients(ref, 2.0 * ref)
    np.testing.assert_allclose(stats.max_relative, 1.0, rtol=1e-12)
    np.testing.assert_allclose(stats.mean_relative, 1.0, rtol=1e-12)


def test_compare_zero_reference_uses_floor():
    cand = np.array([[3e-9, 4e-9]])
    stats = compare_gradients(np.zeros((1, 2)), cand, norm_floor=1e-9)
    assert stats.max_relative == pytest.approx(5.0)


def test_compare_shape_mismatch():
    with pytest.raises(ValueError):
        compare_gradients(np.zeros((3, 2)), np.zeros((4, 2)))


# ----------------------------------------------------------- scaling_benchmark


def test_benchmark_empty_sizes(blob_data):
    data, _ = blob_data
    report = scaling_benchmark(
        data, [], OptimizerConfig(iterations=2), PerplexityConfig(perplexity=4.0), ["exact"]
    )
    assert report.rows == []


def test_benchmark_smoke(blob_data):
    data, _ = blob_data
    cfg = OptimizerConfig(iterations=3, learning_rate=5.0, exaggeration=1.0)
    report = scaling_benchmark(
        data,
        [60, 120],
        cfg,
        PerplexityConfig(perplexity=5.0),
        ["exact", "direct-oracle"],
        repeats=1,
        seed=1,
    )
    assert len(report.rows) == 4
    for backend in ("exact", "direct-oracle"):
        ns = [n for n, _, _, b in report.rows if b == backend]
        assert ns == sorted(ns)
    csv = report.to_csv()
    assert csv.splitlines()[0] == "n,per_iteration_ms,total_s,backend"
    assert len(csv.strip().splitlines()) == 5


def test_benchmark_size_too_large(blob_data):
    data, _ = blob_data
    with pytest.raises(ValueError):
        scaling_benchmark(
            data,
            [data.rows + 1],
            OptimizerConfig(iterations=1),
            PerplexityConfig(perplexity=4.0),
            ["exact"],
        )
