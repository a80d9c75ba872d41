"""File formats: dense matrices (CSV / raw f32), embeddings, run metadata.

Raw binary is little-endian float32, row-major, described by a text sidecar
header (same basename, ``.hdr`` extension).  CSV numbers are written with
round-trip-exact decimal representations so metrics computed on reloaded
files match the in-memory values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RAW_DTYPE = np.dtype("<f4")


class DataFormatError(ValueError):
    """A file failed structural or numeric validation."""


@dataclass(frozen=True)
class DataMatrix:
    """Dense N x D matrix of finite reals, row-major."""

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def validate(self) -> "DataMatrix":
        if self.values.ndim != 2:
            raise DataFormatError(f"expected 2-d matrix, got ndim={self.values.ndim}")
        bad = np.argwhere(~np.isfinite(self.values))
        if bad.size:
            r, c = bad[0]
            raise DataFormatError(f"non-finite value at (row {r}, col {c})")
        return self


@dataclass
class RunMetadata:
    """Seed, resolved configuration, and per-iteration (iter, KL, ms) stats."""

    seed: int
    config: dict[str, str] = field(default_factory=dict)
    stats: list[tuple[int, float | None, float]] = field(default_factory=list)

    def validate(self) -> "RunMetadata":
        its = [s[0] for s in self.stats]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise DataFormatError("stats iterations must be strictly increasing")
        return self


def _fmt(x: float) -> str:
    """Shortest decimal that round-trips to the same float64."""
    return repr(float(x))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".hdr")


def write_sidecar(path, rows: int, cols: int) -> None:
    lines = [
        f"rows={rows}",
        f"cols={cols}",
        "dtype=f32",
        "layout=row-major",
        "endianness=little",
    ]
    sidecar_path(path).write_text("\n".join(lines) + "\n")


def read_sidecar(path) -> dict[str, str]:
    hdr = sidecar_path(path)
    if not hdr.exists():
        raise DataFormatError(f"missing sidecar header {hdr}")
    out: dict[str, str] = {}
    for line in hdr.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def save_dense_matrix(matrix: DataMatrix, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        np.savetxt(path, matrix.values, fmt="%.17g", delimiter=",")
    elif format == "raw-binary":
        matrix.values.astype(RAW_DTYPE).tofile(path)
        write_sidecar(path, matrix.rows, matrix.cols)
    else:
        raise DataFormatError(f"unknown format {format!r}")


def load_dense_matrix(path, format: str = "csv") -> DataMatrix:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    if format == "csv":
        try:
            values = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise DataFormatError(f"{path}: {exc}") from exc
    elif format == "raw-binary":
        hdr = read_sidecar(path)
        try:
            rows, cols = int(hdr["rows"]), int(hdr["cols"])
        except KeyError as exc:
            raise DataFormatError(f"{sidecar_path(path)}: missing field {exc}") from exc
        if hdr.get("dtype", "f32") != "f32" or hdr.get("endianness", "little") != "little":
            raise DataFormatError(f"{sidecar_path(path)}: unsupported dtype/endianness")
        raw = np.fromfile(path, dtype=RAW_DTYPE)
        if raw.size != rows * cols:
            raise DataFormatError(
                f"{path}: header declares {rows}x{cols}={rows * cols} values, file has {raw.size}"
            )
        values = raw.astype(np.float64).reshape(rows, cols)
    else:
        raise DataFormatError(f"unknown format {format!r}")
    return DataMatrix(values).validate()


def save_embedding(points: np.ndarray, labels: np.ndarray | None, path) -> None:
    """CSV 'x,y[,label]' with round-trip-exact coordinates."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DataFormatError(f"embedding must be (N, 2), got {points.shape}")
    lines = []
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != points.shape[0]:
            raise DataFormatError(
                f"labels length {labels.shape[0]} != point count {points.shape[0]}"
            )
        lines.append("x,y,label")
        for (x, y), lab in zip(points, labels):
            lines.append(f"{_fmt(x)},{_fmt(y)},{int(lab)}")
    else:
        lines.append("x,y")
        for x, y in points:
            lines.append(f"{_fmt(x)},{_fmt(y)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_embedding(path) -> tuple[np.ndarray, np.ndarray | None]:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    text = path.read_text().splitlines()
    if not text:
        raise DataFormatError(f"{path}: empty file")
    header = text[0].strip()
    if header not in ("x,y", "x,y,label"):
        raise DataFormatError(f"{path}: unexpected header {header!r}")
    with_labels = header == "x,y,label"
    pts = []
    labs = []
    for ln, line in enumerate(text[1:], start=2):
        parts = line.split(",")
        if len(parts) != (3 if with_labels else 2):
            raise DataFormatError(f"{path}:{ln}: expected {header!r} fields")
        try:
            pts.append((float(parts[0]), float(parts[1])))
            if with_labels:
                labs.append(int(parts[2]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{ln}: {exc}") from exc
    points = np.array(pts, dtype=np.float64).reshape(-1, 2)
    if not np.isfinite(points).all():
        bad = np.argwhere(~np.isfinite(points))[0]
        raise DataFormatError(f"{path}: non-finite coordinate at row {bad[0]}")
    return points, (np.array(labs, dtype=np.int64) if with_labels else None)


def save_labels(labels: np.ndarray, path) -> None:
    Path(path).write_text("\n".join(str(int(v)) for v in labels) + "\n")


def load_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}")
    try:
        return np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def subsample(
    data: DataMatrix,
    labels: np.ndarray | None,
    n: int,
    seed: int,
) -> tuple[DataMatrix, np.ndarray | None]:
    """n rows without replacement, Philox-seeded so the draw is stable across
    platforms.  Prefixes of the same seed's permutation are nested: the rows
    chosen for n1 < n2 are a subset of those chosen for n2."""
    if not 1 <= n <= data.rows:
        raise ValueError(f"n={n} out of range [1, {data.rows}]")
    if labels is not None and labels.shape[0] != data.rows:
        raise ValueError("labels length does not match matrix rows")
    rng = np.random.Generator(np.random.Philox(seed))
    picked = np.sort(rng.permutation(data.rows)[:n])
    sub = DataMatrix(data.values[picked].copy())
    return sub, (labels[picked].copy() if labels is not None else None)


def save_run_metadata(meta: RunMetadata, path) -> None:
    meta.validate()
    lines = [f"seed = {meta.seed}"]
    for key in sorted(meta.config):
        lines.append(f"{key} = {meta.config[key]}")
    lines.append("[stats]")
    lines.append("iteration,kl,elapsed_ms")
    for it, kl, ms in meta.stats:
        kl_s = "" if kl is None else _fmt(kl)
        lines.append(f"{it},{kl_s},{_fmt(ms)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_run_metadata(path) -> RunMetadata:
    lines = Path(path).read_text().splitlines()
    meta = RunMetadata(seed=0)
    in_stats = False
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line == "[stats]":
            in_stats = True
            continue
        if in_stats:
            if line == "iteration,kl,elapsed_ms":
                continue
            it_s, kl_s, ms_s = line.split(",")
            meta.stats.append((int(it_s), float(kl_s) if kl_s else None, float(ms_s)))
        else:
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "seed":
                meta.seed = int(value)
            else:
                meta.config[key] = value
    return meta.validate()
