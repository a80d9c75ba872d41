"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The quality criteria (6, 7)
use a seeded synthetic 10-cluster dataset standing in for an MNIST subset;
point FIELD_SNE_MNIST_CSV (and optionally FIELD_SNE_MNIST_LABELS) at a
pre-converted MNIST matrix to run them on the real data instead.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from field_sne import fields, oracle
from field_sne.affinities import (
    PerplexityConfig,
    SparseAffinities,
    calibrate_all,
    knn_exact,
    symmetrize,
)
from field_sne.dataio import DataMatrix, load_dense_matrix, load_labels, subsample
from field_sne.fields import (
    accumulate_fields_exact,
    accumulate_fields_splat,
    compute_grid_geometry,
    eval_fields_direct,
    kernel_eval,
    sample_fields,
)
from field_sne.metrics import compare_gradients, nn_preservation, scaling_benchmark
from field_sne.optimizer import (
    OptimizerConfig,
    field_gradient,
    normalization_term,
    run_optimization,
)
from field_sne.synthetic import gaussian_clusters, mixture_embedding_2d

QUALITY_N = 5000
QUALITY_SEED = 12


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"[acceptance] criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    """Compile every JIT kernel on tiny inputs so the timed criteria measure
    the algorithms, not LLVM."""
    pts = np.random.default_rng(0).normal(0, 1, (8, 2))
    data = DataMatrix(np.random.default_rng(1).normal(0, 1, (10, 3)))
    graph = knn_exact(data, 3)
    _, probs, _ = calibrate_all(graph, PerplexityConfig(perplexity=2.0))
    p = symmetrize(probs, graph)
    from dataclasses import replace

    cfg = OptimizerConfig(iterations=1, learning_rate=1.0, exaggeration=1.0, seed=0)
    for backend in ("exact", "splat", "direct-oracle"):
        run_optimization(p, replace(cfg, backend=backend))
    eval_fields_direct(pts, pts)
    oracle.exact_z(pts)


@pytest.fixture(scope="module")
def quality_dataset():
    """N=5000, perplexity 30: data, labels, P, and the calibration artifacts."""
    mnist = os.environ.get("FIELD_SNE_MNIST_CSV")
    if mnist:
        data = load_dense_matrix(mnist, format="csv")
        labels_path = os.environ.get("FIELD_SNE_MNIST_LABELS")
        labels = load_labels(labels_path) if labels_path else None
        data, labels = subsample(data, labels, QUALITY_N, seed=QUALITY_SEED)
    else:
        data, labels = gaussian_clusters(
            QUALITY_N, 64, n_clusters=10, center_spread=6.0, cluster_std=1.0, seed=2024
        )
    cfg = PerplexityConfig(perplexity=30.0)
    graph = knn_exact(data, cfg.k)
    _, probs, _ = calibrate_all(graph, cfg)
    p = symmetrize(probs, graph)
    return data, labels, cfg, graph, probs, p


@pytest.fixture(scope="module")
def quality_runs(quality_dataset):
    """The two 1000-iteration runs (field grid and exact oracle), same seed
    and hyperparameters."""
    _, _, _, _, _, p = quality_dataset
    out = {}
    for backend in ("exact", "direct-oracle"):
        cfg = OptimizerConfig(
            iterations=1000, backend=backend, rho=0.5, seed=QUALITY_SEED, kl_every=100
        )
        emb, meta = run_optimization(p, cfg)
        kls = {it: kl for it, kl, _ in meta.stats if kl is not None}
        out[backend] = {
            "points": emb.points,
            "initial_kl": float(meta.config["initial_kl"]),
            "kl_100": kls[100],
            "kl_final": kls[1000],
        }
    return out


@pytest.fixture(scope="module")
def grid_convergence():
    """Criterion 3 instance: fixed N=2000 Gaussian-mixture embedding, exact
    P, and the mean relative gradient error per rho."""
    n = 2000
    data, _ = gaussian_clusters(n, 32, n_clusters=10, seed=33)
    cfg = PerplexityConfig(perplexity=20.0)
    graph = knn_exact(data, cfg.k)
    _, probs, _ = calibrate_all(graph, cfg)
    p = symmetrize(probs, graph)
    angles = 2.0 * np.pi * np.arange(5) / 5
    centers = 6.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    embedding = mixture_embedding_2d(n, centers, std=1.5, seed=101)
    reference = oracle.exact_gradient(p, embedding)
    errors = {}
    for rho in (2.0, 1.0, 0.5, 0.25):
        candidate = field_gradient(embedding, p, OptimizerConfig(backend="exact", rho=rho))
        errors[rho] = compare_gradients(reference, candidate).mean_relative
    return p, embedding, errors


def test_criterion_01_normalization_equivalence():
    worst = 0.0
    t0 = time.perf_counter()
    for seed in range(20):
        pts = np.random.default_rng(seed).normal(0.0, 10.0, (1000, 2))
        z_hat = normalization_term(eval_fields_direct(pts, pts).s)
        z = oracle.exact_z(pts)
        worst = max(worst, abs(z_hat - z) / z)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    report(1, "normalization equivalence", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-10
    assert elapsed < 10.0


def test_criterion_02_gradient_equivalence_direct():
    worst = 0.0
    t0 = time.perf_counter()
    for seed in range(5):
        data, _ = gaussian_clusters(500, 12, n_clusters=5, seed=seed)
        cfg = PerplexityConfig(perplexity=15.0)
        graph = knn_exact(data, cfg.k)
        _, probs, _ = calibrate_all(graph, cfg)
        p = symmetrize(probs, graph)
        pts = np.random.default_rng(1000 + seed).normal(0.0, 8.0, (500, 2))
        candidate = field_gradient(pts, p, OptimizerConfig(backend="direct-oracle"))
        reference = oracle.exact_gradient(p, pts)
        worst = max(worst, compare_gradients(reference, candidate).max_relative)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 30.0
    report(2, "gradient equivalence (direct oracle)", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-9
    assert elapsed < 30.0


def test_criterion_03_grid_convergence(grid_convergence):
    _, _, errors = grid_convergence
    sweep = [errors[rho] for rho in (2.0, 1.0, 0.5, 0.25)]
    monotone = all(a > b for a, b in zip(sweep, sweep[1:]))
    ok = monotone and errors[0.5] <= 0.05
    report(
        3,
        "grid convergence",
        ok,
        "mean rel err " + " > ".join(f"{e:.4f}" for e in sweep) + f"; rho=0.5 <= 5%",
    )
    assert monotone
    assert errors[0.5] <= 0.05


def test_criterion_04_splat_fidelity(grid_convergence):
    p, embedding, errors = grid_convergence
    geometry = compute_grid_geometry(fields.bounds_of(embedding), 0.5, padding=1.0)
    exact_grid = accumulate_fields_exact(embedding, geometry)
    full = accumulate_fields_splat(embedding, geometry, support_radius=geometry.diagonal)
    grid_diff = float(np.abs(full.channels - exact_grid.channels).max())

    grad_exact = field_gradient(embedding, p, OptimizerConfig(backend="exact", rho=0.5))
    grad_splat = field_gradient(
        embedding, p, OptimizerConfig(backend="splat", rho=0.5, support_radius_px=32.0)
    )
    splat_err = compare_gradients(grad_exact, grad_splat).mean_relative
    bound = 2.0 * errors[0.5]
    ok = grid_diff <= 1e-12 and splat_err <= bound
    report(
        4,
        "splat fidelity",
        ok,
        f"full-support diff {grid_diff:.1e}; 32px err {splat_err:.4f} <= {bound:.4f}",
    )
    assert grid_diff <= 1e-12
    assert splat_err <= bound


def test_criterion_05_oracle_gradient_finite_differences():
    data, _ = gaussian_clusters(50, 6, n_clusters=3, seed=9)
    cfg = PerplexityConfig(perplexity=8.0)
    graph = knn_exact(data, cfg.k)
    _, probs, _ = calibrate_all(graph, cfg)
    p = symmetrize(probs, graph)
    pts = np.random.default_rng(50).normal(0.0, 3.0, (50, 2))
    grad = oracle.exact_gradient(p, pts)
    h = 1e-5
    worst = 0.0
    for i in range(50):
        for c in range(2):
            plus = pts.copy()
            minus = pts.copy()
            plus[i, c] += h
            minus[i, c] -= h
            fd = (oracle.kl_divergence(p, plus) - oracle.kl_divergence(p, minus)) / (2 * h)
            worst = max(worst, abs(grad[i, c] - fd))
    ok = worst <= 1e-5
    report(5, "oracle gradient vs finite differences", ok, f"max component err {worst:.2e}")
    assert worst <= 1e-5


def test_criterion_06_optimization_quality(quality_runs):
    field = quality_runs["exact"]
    exact = quality_runs["direct-oracle"]
    decreased = field["kl_final"] < field["kl_100"] and field["kl_final"] < field["initial_kl"]
    gap = abs(field["kl_final"] - exact["kl_final"]) / exact["kl_final"]
    ok = decreased and gap <= 0.05
    report(
        6,
        "optimization quality",
        ok,
        f"kl {field['initial_kl']:.3f} -> {field['kl_100']:.3f} -> {field['kl_final']:.3f}; "
        f"field-vs-oracle gap {gap:.4f}",
    )
    assert decreased
    assert gap <= 0.05


def test_criterion_07_neighborhood_preservation(quality_dataset, quality_runs):
    data, _, _, _, _, _ = quality_dataset
    curve_field = nn_preservation(data, quality_runs["exact"]["points"], k_max=30)
    curve_exact = nn_preservation(data, quality_runs["direct-oracle"]["points"], k_max=30)
    delta = float(np.abs(curve_field.precision - curve_exact.precision).max())
    ok = delta <= 0.05
    report(7, "neighborhood preservation", ok, f"max pointwise precision delta {delta:.4f}")
    assert delta <= 0.05


def test_criterion_08_linear_scaling():
    data, _ = gaussian_clusters(40000, 16, n_clusters=10, seed=77)
    perp = PerplexityConfig(perplexity=10.0)
    cfg = OptimizerConfig(iterations=40, learning_rate=50.0, exaggeration=1.0, seed=5)
    grid = scaling_benchmark(
        data, [10000, 20000, 40000], cfg, perp, ["exact"], repeats=3, seed=5
    )
    quad = scaling_benchmark(data, [1000, 2000], cfg, perp, ["direct-oracle"], repeats=3, seed=5)
    g = {n: ms for n, ms, _, _ in grid.rows}
    o = {n: ms for n, ms, _, _ in quad.rows}
    grid_ratios = (g[20000] / g[10000], g[40000] / g[20000])
    oracle_ratio = o[2000] / o[1000]
    ok = all(r <= 2.6 for r in grid_ratios) and oracle_ratio >= 3.4
    report(
        8,
        "linear scaling",
        ok,
        f"grid x{grid_ratios[0]:.2f}, x{grid_ratios[1]:.2f} per doubling (<= 2.6); "
        f"oracle x{oracle_ratio:.2f} (>= 3.4)",
    )
    assert grid_ratios[0] <= 2.6 and grid_ratios[1] <= 2.6
    assert oracle_ratio >= 3.4


def test_criterion_09_structural_invariants(quality_dataset):
    _, _, cfg, graph, probs, p = quality_dataset
    failures = []

    try:
        p.validate(tol=1e-9)
    except ValueError as exc:
        failures.append(f"P validation: {exc}")

    # perplexity calibration within 1e-5 bits for every row
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0, probs * np.log2(probs), 0.0)
    entropy = -plogp.sum(axis=1)
    worst_bits = float(np.abs(entropy - np.log2(cfg.perplexity)).max())
    if worst_bits > 1e-5:
        failures.append(f"calibration off by {worst_bits:.2e} bits")

    # N=2 zero-gradient stationarity
    pair = SparseAffinities(
        offsets=np.array([0, 1, 2], dtype=np.int64),
        indices=np.array([1, 0], dtype=np.int64),
        values=np.array([0.5, 0.5]),
    )
    for seed in range(5):
        pts = np.random.default_rng(seed).normal(0.0, 5.0, (2, 2))
        grad = field_gradient(pts, pair, OptimizerConfig(backend="direct-oracle"))
        if np.abs(grad).max() > 1e-14:
            failures.append(f"N=2 gradient {np.abs(grad).max():.2e} at seed {seed}")

    # kernel antisymmetry on 1000 random displacements
    disp = np.random.default_rng(3).normal(0.0, 20.0, (1000, 2))
    for d in disp:
        s1, v1 = kernel_eval(d)
        s2, v2 = kernel_eval(-d)
        if s1 != s2 or (v1 != -v2).any():
            failures.append(f"kernel asymmetry at {d}")
            break

    # bilinear sampling exactness at pixel centers
    pts = np.random.default_rng(4).normal(0.0, 5.0, (200, 2))
    geometry = compute_grid_geometry(fields.bounds_of(pts), 0.5, padding=1.0)
    grid = accumulate_fields_exact(pts, geometry)
    xs, ys = geometry.pixel_centers()
    centers = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    got = sample_fields(grid, centers)
    if not np.array_equal(got.s, grid.channels[..., 0].ravel()):
        failures.append("bilinear sampling not exact at pixel centers")
    if not np.array_equal(got.v, grid.channels[..., 1:].reshape(-1, 2)):
        failures.append("bilinear vector sampling not exact at pixel centers")

    ok = not failures
    report(9, "structural invariants", ok, "; ".join(failures) or "all invariants hold")
    assert not failures


def test_criterion_10_determinism(tmp_path):
    data, labels = gaussian_clusters(120, 16, n_clusters=4, seed=3)
    from field_sne.dataio import save_dense_matrix, save_labels

    save_dense_matrix(data, tmp_path / "data.csv", format="csv")
    save_labels(labels, tmp_path / "labels.txt")

    def run(tag: str) -> tuple[bytes, bytes]:
        out = tmp_path / f"emb_{tag}.csv"
        svg = tmp_path / f"plot_{tag}.svg"
        base = [sys.executable, "-m", "field_sne"]
        subprocess.run(
            base
            + [
                "embed",
                "--input", str(tmp_path / "data.csv"),
                "--perplexity", "8",
                "--iterations", "30",
                "--learning-rate", "8",
                "--exaggeration", "1",
                "--seed", "41",
                "--threads", "2",
                "--labels", str(tmp_path / "labels.txt"),
                "--output", str(out),
            ],
            check=True,
            capture_output=True,
        )
        subprocess.run(
            base + ["plot", "--embedding", str(out), "--output", str(svg)],
            check=True,
            capture_output=True,
        )
        return out.read_bytes(), svg.read_bytes()

    csv_a, svg_a = run("a")
    csv_b, svg_b = run("b")
    ok = csv_a == csv_b and svg_a == svg_b
    report(10, "determinism", ok, f"csv {len(csv_a)}B, svg {len(svg_a)}B byte-identical")
    assert csv_a == csv_b
    assert svg_a == svg_b
