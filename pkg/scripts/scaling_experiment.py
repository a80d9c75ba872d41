#!/usr/bin/env python3
"""Per-iteration gradient time vs dataset size for each backend.

Reproduces the linear-vs-quadratic scaling comparison on synthetic clusters:
the grid backend's per-iteration cost grows linearly with N while the
direct-oracle backend grows quadratically.

    python scripts/scaling_experiment.py --sizes 1000,2000,4000,8000 --out scaling.csv
"""

import argparse
from pathlib import Path

from field_sne.affinities import PerplexityConfig
from field_sne.metrics import scaling_benchmark
from field_sne.optimizer import OptimizerConfig
from field_sne.synthetic import gaussian_clusters


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,2000,4000")
    ap.add_argument("--backends", default="exact,direct-oracle")
    ap.add_argument("--iterations", type=int, default=40)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--perplexity", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True, help="report CSV path")
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    data, _ = gaussian_clusters(max(sizes), args.dim, n_clusters=10, seed=args.seed)
    cfg = OptimizerConfig(
        iterations=args.iterations, learning_rate=50.0, exaggeration=1.0, seed=args.seed
    )
    report = scaling_benchmark(
        data,
        sizes,
        cfg,
        PerplexityConfig(perplexity=args.perplexity),
        args.backends.split(","),
        repeats=args.repeats,
        seed=args.seed,
    )
    Path(args.out).write_text(report.to_csv())
    print(report.to_csv(), end="")

    for backend in args.backends.split(","):
        rows = [(n, ms) for n, ms, _, b in report.rows if b == backend]
        for (n1, t1), (n2, t2) in zip(rows, rows[1:]):
            print(f"{backend}: {n1} -> {n2}: x{t2 / t1:.2f} per-iteration time")


if __name__ == "__main__":
    main()
