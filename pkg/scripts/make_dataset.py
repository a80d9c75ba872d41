#!/usr/bin/env python3
"""Generate a seeded synthetic cluster dataset on disk.

Writes <out>.csv (or .bin with sidecar), <out>.labels.txt, ready for the
field-sne CLI:

    python scripts/make_dataset.py --n 5000 --dim 64 --clusters 10 --out data/blobs
    field-sne affinities --input data/blobs.csv --perplexity 30 --output data/p.bin
"""

import argparse
from pathlib import Path

from field_sne.dataio import save_dense_matrix, save_labels
from field_sne.synthetic import gaussian_clusters


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--clusters", type=int, default=10)
    ap.add_argument("--center-spread", type=float, default=6.0)
    ap.add_argument("--cluster-std", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--format", choices=["csv", "raw-binary"], default="csv")
    ap.add_argument("--out", required=True, help="output path stem")
    args = ap.parse_args()

    data, labels = gaussian_clusters(
        args.n,
        args.dim,
        n_clusters=args.clusters,
        center_spread=args.center_spread,
        cluster_std=args.cluster_std,
        seed=args.seed,
    )
    stem = Path(args.out)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data_path = stem.with_suffix(".csv" if args.format == "csv" else ".bin")
    save_dense_matrix(data, data_path, format=args.format)
    labels_path = Path(str(stem) + ".labels.txt")
    save_labels(labels, labels_path)
    print(f"{args.n} x {args.dim} ({args.clusters} clusters) -> {data_path}, {labels_path}")


if __name__ == "__main__":
    main()
