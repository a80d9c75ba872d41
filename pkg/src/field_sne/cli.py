"""Command-line frontend.

Subcommands: affinities, embed, evaluate, compare, plot, bench.  Options
resolve as defaults <- config file (--config, "key = value" lines) <- flags,
and every run echoes its fully resolved configuration into the metadata
written next to the embedding.

Exit codes: 0 success, 1 usage/config error, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import dataio, fields, metrics, oracle, svgplot
from .affinities import (
    PerplexityConfig,
    build_affinities,
    load_affinities,
    save_affinities,
)
from .dataio import DataFormatError
from .optimizer import DivergenceError, OptimizerConfig, assemble_forces, run_optimization

log = logging.getLogger(__name__)

THREADS_ENV = "FIELD_SNE_THREADS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

# flag name -> (config dataclass, field, type)
_OPT_FLAGS = {
    "iterations": ("opt", "iterations", int),
    "learning_rate": ("opt", "learning_rate", float),
    "momentum": ("opt", "momentum", float),
    "final_momentum": ("opt", "final_momentum", float),
    "momentum_switch": ("opt", "momentum_switch", int),
    "exaggeration": ("opt", "exaggeration", float),
    "exaggeration_end": ("opt", "exaggeration_end", int),
    "rho": ("opt", "rho", float),
    "backend": ("opt", "backend", str),
    "support_radius": ("opt", "support_radius_px", float),
    "seed": ("opt", "seed", int),
    "perplexity": ("perp", "perplexity", float),
    "knn_multiple": ("perp", "neighbor_multiple", int),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(self._usage_exit(message))

    def _usage_exit(self, message) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return EXIT_USAGE


def _read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such config file: {path}")
    out: dict[str, str] = {}
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{ln}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _resolve_configs(args) -> tuple[OptimizerConfig, PerplexityConfig]:
    """defaults <- config file <- explicit flags."""
    opt_kwargs: dict = {}
    perp_kwargs: dict = {}
    file_values = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, (which, fname, ftype) in _OPT_FLAGS.items():
        target = opt_kwargs if which == "opt" else perp_kwargs
        if flag in file_values:
            target[fname] = ftype(file_values[flag])
        value = getattr(args, flag, None)
        if value is not None:
            target[fname] = value
    return OptimizerConfig(**opt_kwargs), PerplexityConfig(**perp_kwargs)


def _apply_threads(args) -> None:
    value = getattr(args, "threads", None)
    if value is None:
        env = os.environ.get(THREADS_ENV)
        value = int(env) if env else None
    if value is None:
        return
    import numba

    capped = max(1, min(int(value), numba.config.NUMBA_NUM_THREADS))
    if capped != value:
        log.warning("thread count %s capped to %d", value, capped)
    numba.set_num_threads(capped)


def _load_matrix(path, fmt: str) -> dataio.DataMatrix:
    return dataio.load_dense_matrix(path, format=fmt)


def _metadata_path(output) -> str:
    return str(output) + ".meta"


def cmd_affinities(args) -> int:
    _, perp = _resolve_configs(args)
    data = _load_matrix(args.input, args.format)
    p = build_affinities(data, perp)
    p.validate()
    save_affinities(p, args.output)
    print(
        f"affinities: n={p.n} nnz={p.nnz} sum={p.total():.12f} "
        f"perplexity={perp.perplexity} k={perp.k} -> {args.output}"
    )
    return EXIT_OK


def cmd_embed(args) -> int:
    opt, perp = _resolve_configs(args)
    if args.affinities:
        p = load_affinities(args.affinities)
    elif args.input:
        data = _load_matrix(args.input, args.format)
        p = build_affinities(data, perp)
    else:
        raise ValueError("embed needs --affinities or --input")

    snapshot_every = args.snapshot_every or 0
    prefix = str(Path(args.output).with_suffix("")) + ".iter" if snapshot_every else None
    emb, meta = run_optimization(
        p, opt, snapshot_every=snapshot_every, snapshot_prefix=prefix
    )
    labels = dataio.load_labels(args.labels) if args.labels else None
    dataio.save_embedding(emb.points, labels, args.output)
    meta.config["output"] = str(args.output)
    dataio.save_run_metadata(meta, _metadata_path(args.output))
    print(f"embed: n={emb.n} iterations={opt.iterations} backend={opt.backend} -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = _load_matrix(args.data, args.format)
    points, _ = dataio.load_embedding(args.embedding)
    p = load_affinities(args.affinities)
    kl = oracle.kl_divergence(p, points)
    curve = metrics.nn_preservation(data, points, k_max=args.kmax)
    out = Path(args.output)
    out.write_text(f"# kl = {kl!r}\n" + curve.to_csv())
    print(f"kl = {kl!r}")
    print(f"nnp curve (k=1..{args.kmax}) -> {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    opt, _ = _resolve_configs(args)
    p = load_affinities(args.affinities)
    points, _ = dataio.load_embedding(args.embedding)
    forces = assemble_forces(points, p, opt)
    candidate = 4.0 * (forces.attractive - forces.repulsive)
    reference = oracle.exact_gradient(p, points)
    z = oracle.exact_z(points)
    stats = metrics.compare_gradients(reference, candidate)
    z_err = abs(forces.z_hat - z) / z
    print(f"backend = {opt.backend} rho = {opt.rho}")
    print(f"gradient relative L2 error: max = {stats.max_relative:.3e} mean = {stats.mean_relative:.3e}")
    print(f"z_hat = {forces.z_hat!r} z = {z!r} relative error = {z_err:.3e}")
    return EXIT_OK


def _read_curve_csv(path) -> list[tuple[int, float, float]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("k,"):
            continue
        k, p, r = line.split(",")
        rows.append((int(k), float(p), float(r)))
    return rows


def cmd_plot(args) -> int:
    if args.curve:
        rows = _read_curve_csv(args.curve)
        with open(args.output, "w", newline="\n") as fh:
            fh.write(svgplot.precision_recall_svg(rows))
        print(f"plot: precision/recall polyline ({len(rows)} points) -> {args.output}")
        return EXIT_OK
    if not args.embedding:
        raise ValueError("plot needs --embedding or --curve")
    points, embedded_labels = dataio.load_embedding(args.embedding)
    labels = dataio.load_labels(args.labels) if args.labels else embedded_labels
    svgplot.save_scatter_svg(points, labels, args.output)
    print(f"plot: {points.shape[0]} points -> {args.output}")
    if args.field_grid:
        grid = fields.load_field_grid(args.field_grid)
        stem = str(Path(args.output).with_suffix(""))
        for channel, name in enumerate(("s", "vx", "vy")):
            out = f"{stem}.{name}.ppm"
            fields.render_field_channel(grid, channel, out)
            print(f"field channel {name} -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    opt, perp = _resolve_configs(args)
    data = _load_matrix(args.input, args.format)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    backends = [b for b in args.backends.split(",") if b]
    report = metrics.scaling_benchmark(
        data, sizes, opt, perp, backends, repeats=args.repeats, seed=opt.seed
    )
    Path(args.output).write_text(report.to_csv())
    print(report.to_csv(), end="")
    print(f"bench -> {args.output}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    available = {
        "input": dict(flags=["--input"], help="input data matrix (CSV or raw-binary)"),
        "format": dict(
            flags=["--format"],
            choices=["csv", "raw-binary"],
            default="csv",
            help="matrix file format",
        ),
        "config": dict(flags=["--config"], help="config file with 'key = value' lines"),
        "threads": dict(flags=["--threads"], type=int, help="cap worker threads"),
        "perplexity": dict(flags=["--perplexity"], type=float, help="target perplexity"),
        "knn_multiple": dict(
            flags=["--knn-multiple"], type=int, help="k = multiple * ceil(perplexity)"
        ),
        "iterations": dict(flags=["--iterations"], type=int),
        "learning_rate": dict(flags=["--learning-rate"], type=float),
        "momentum": dict(flags=["--momentum"], type=float),
        "final_momentum": dict(flags=["--final-momentum"], type=float),
        "momentum_switch": dict(flags=["--momentum-switch"], type=int),
        "exaggeration": dict(flags=["--exaggeration"], type=float),
        "exaggeration_end": dict(flags=["--exaggeration-end"], type=int),
        "rho": dict(flags=["--rho"], type=float, help="grid cell size in embedding units"),
        "backend": dict(
            flags=["--backend"], choices=["exact", "splat", "direct-oracle"]
        ),
        "support_radius": dict(
            flags=["--support-radius"], type=float, help="splat support radius in pixels"
        ),
        "seed": dict(flags=["--seed"], type=int),
        "snapshot_every": dict(
            flags=["--snapshot-every"], type=int, help="write embedding CSV every M iterations"
        ),
    }
    for name in names:
        kwargs = dict(available[name])
        flags = kwargs.pop("flags")
        parser.add_argument(*flags, **kwargs)


def build_parser() -> _Parser:
    parser = _Parser(prog="field-sne", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_aff = sub.add_parser("affinities", help="build and cache the joint distribution P")
    _add_common(p_aff, "input", "format", "perplexity", "knn_multiple", "config", "threads")
    p_aff.add_argument("--output", required=True, help="output path for the cached P")
    p_aff.set_defaults(func=cmd_affinities)

    p_embed = sub.add_parser("embed", help="run the optimization and write the embedding")
    _add_common(
        p_embed,
        "input",
        "format",
        "perplexity",
        "knn_multiple",
        "iterations",
        "learning_rate",
        "momentum",
        "final_momentum",
        "momentum_switch",
        "exaggeration",
        "exaggeration_end",
        "rho",
        "backend",
        "support_radius",
        "seed",
        "snapshot_every",
        "config",
        "threads",
    )
    p_embed.add_argument("--affinities", help="cached P file (skips --input)")
    p_embed.add_argument("--labels", help="label file to append to the embedding CSV")
    p_embed.add_argument("--output", required=True, help="embedding CSV path")
    p_embed.set_defaults(func=cmd_embed)

    p_eval = sub.add_parser("evaluate", help="KL divergence and NNP curve for an embedding")
    _add_common(p_eval, "format", "config", "threads")
    p_eval.add_argument("--data", required=True, help="high-dimensional data matrix")
    p_eval.add_argument("--embedding", required=True)
    p_eval.add_argument("--affinities", required=True)
    p_eval.add_argument("--kmax", type=int, default=metrics.DEFAULT_K_MAX)
    p_eval.add_argument("--output", required=True, help="NNP curve CSV path")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser("compare", help="field gradient vs exact oracle gradient")
    _add_common(p_cmp, "rho", "backend", "support_radius", "config", "threads")
    p_cmp.add_argument("--affinities", required=True)
    p_cmp.add_argument("--embedding", required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_plot = sub.add_parser("plot", help="deterministic SVG scatterplot or curve")
    p_plot.add_argument("--embedding", help="embedding CSV to scatter")
    p_plot.add_argument("--labels", help="label file for categorical colors")
    p_plot.add_argument("--field-grid", help="dumped field grid to render as PPM images")
    p_plot.add_argument("--curve", help="NNP curve CSV to render as a polyline instead")
    p_plot.add_argument("--output", required=True, help="SVG path")
    p_plot.set_defaults(func=cmd_plot)

    p_bench = sub.add_parser("bench", help="scaling benchmark over subset sizes")
    _add_common(
        p_bench,
        "input",
        "format",
        "perplexity",
        "knn_multiple",
        "iterations",
        "learning_rate",
        "momentum",
        "final_momentum",
        "momentum_switch",
        "exaggeration",
        "exaggeration_end",
        "rho",
        "support_radius",
        "seed",
        "config",
        "threads",
    )
    p_bench.add_argument("--sizes", required=True, help="comma-separated subset sizes")
    p_bench.add_argument(
        "--backends", default="exact,direct-oracle", help="comma-separated backend list"
    )
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--output", required=True, help="report CSV path")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_threads(args)
        return args.func(args)
    except DivergenceError as exc:
        print(f"field-sne: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataFormatError as exc:
        print(f"field-sne: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"field-sne: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"field-sne: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
