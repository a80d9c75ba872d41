"""Scalar density field S and repulsive vector field V on a 2-D grid.

The fields are sums of per-point kernels evaluated at displacement
d = point - location:

    s(d) = (1 + |d|^2)^-1        v(d) = (1 + |d|^2)^-2 d

Two grid backends fill a W x H x 3 texture (S, Vx, Vy): exact per-pixel
accumulation with unbounded support, and truncated-kernel splatting.  A
grid-free direct evaluator provides the reference values, and bilinear
sampling reads the grid back at arbitrary positions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dataio import DataFormatError, read_sidecar, sidecar_path

log = logging.getLogger(__name__)

MIN_GRID_SIZE = 8
DEFAULT_RHO = 0.5
DEFAULT_SUPPORT_PX = 32.0


def kernel_eval(d) -> tuple[float, np.ndarray]:
    """Closed-form field kernels at displacement d."""
    d = np.asarray(d, dtype=np.float64)
    w = 1.0 / (1.0 + d[0] * d[0] + d[1] * d[1])
    return float(w), w * w * d


@dataclass(frozen=True)
class GridGeometry:
    """Pixel-center lattice in embedding space; cell size equals rho."""

    origin: tuple[float, float]
    cell: float
    width: int
    height: int

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, oy, ox + (self.width - 1) * self.cell, oy + (self.height - 1) * self.cell)

    @property
    def diagonal(self) -> float:
        w = (self.width - 1) * self.cell
        h = (self.height - 1) * self.cell
        return math.hypot(w, h)

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ox, oy = self.origin
        xs = ox + self.cell * np.arange(self.width)
        ys = oy + self.cell * np.arange(self.height)
        return xs, ys


@dataclass(frozen=True)
class FieldGrid:
    geometry: GridGeometry
    channels: np.ndarray  # (height, width, 3): S, Vx, Vy


@dataclass(frozen=True)
class FieldSamples:
    """Field values read at a batch of positions."""

    s: np.ndarray
    v: np.ndarray
    clamped: np.ndarray  # True where a position fell outside the grid


def bounds_of(points: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(points[:, 0].min()),
        float(points[:, 1].min()),
        float(points[:, 0].max()),
        float(points[:, 1].max()),
    )


def compute_grid_geometry(
    bounds: tuple[float, float, float, float],
    rho: float = DEFAULT_RHO,
    padding: float = 0.0,
) -> GridGeometry:
    """Grid covering the padded bounding box at cell size rho.

    Width/height are clamped to MIN_GRID_SIZE; a degenerate (or tiny) box
    yields the minimum grid centered on the box.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    xmin, ymin, xmax, ymax = bounds
    xmin -= padding
    ymin -= padding
    xmax += padding
    ymax += padding

    def axis(lo: float, hi: float) -> tuple[float, int]:
        count = int(math.ceil((hi - lo) / rho)) + 1
        if count < MIN_GRID_SIZE:
            count = MIN_GRID_SIZE
            center = 0.5 * (lo + hi)
            return center - 0.5 * (count - 1) * rho, count
        return lo, count

    ox, width = axis(xmin, xmax)
    oy, height = axis(ymin, ymax)
    return GridGeometry((ox, oy), rho, width, height)


def accumulate_fields_exact(points: np.ndarray, geometry: GridGeometry) -> FieldGrid:
    """Every pixel sums the kernel over all points (unbounded support)."""
    channels = _kernels.accumulate_exact(
        np.ascontiguousarray(points, dtype=np.float64),
        geometry.origin[0],
        geometry.origin[1],
        geometry.cell,
        geometry.width,
        geometry.height,
    )
    return FieldGrid(geometry, channels)


def accumulate_fields_splat(
    points: np.ndarray, geometry: GridGeometry, support_radius: float
) -> FieldGrid:
    """Each point deposits onto pixels within support_radius (embedding
    units); contributions beyond the radius are truncated, not rescaled."""
    if support_radius <= 0:
        raise ValueError("support radius must be positive")
    channels = _kernels.accumulate_splat(
        np.ascontiguousarray(points, dtype=np.float64),
        geometry.origin[0],
        geometry.origin[1],
        geometry.cell,
        geometry.width,
        geometry.height,
        support_radius,
    )
    return FieldGrid(geometry, channels)


def sample_fields(grid: FieldGrid, positions: np.ndarray) -> FieldSamples:
    """Bilinear interpolation of all three channels at each position.

    Positions outside the lattice of pixel centers are clamped to the border
    and flagged; with the optimizer's padding that indicates a geometry bug.
    """
    geom = grid.geometry
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    u = (positions[:, 0] - geom.origin[0]) / geom.cell
    v = (positions[:, 1] - geom.origin[1]) / geom.cell
    clamped = (u < 0) | (u > geom.width - 1) | (v < 0) | (v > geom.height - 1)
    if clamped.any():
        log.warning("%d sample positions outside the grid were clamped", int(clamped.sum()))
        u = np.clip(u, 0.0, geom.width - 1)
        v = np.clip(v, 0.0, geom.height - 1)

    ix0 = np.minimum(u.astype(np.int64), geom.width - 2)
    iy0 = np.minimum(v.astype(np.int64), geom.height - 2)
    fx = (u - ix0)[:, None]
    fy = (v - iy0)[:, None]

    c = grid.channels
    c00 = c[iy0, ix0]
    c10 = c[iy0, ix0 + 1]
    c01 = c[iy0 + 1, ix0]
    c11 = c[iy0 + 1, ix0 + 1]
    top = c00 * (1.0 - fx) + c10 * fx
    bot = c01 * (1.0 - fx) + c11 * fx
    out = top * (1.0 - fy) + bot * fy
    return FieldSamples(out[:, 0], out[:, 1:], clamped)


def eval_fields_direct(points: np.ndarray, positions: np.ndarray) -> FieldSamples:
    """Exact O(N) per-position summation, no grid."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    out = _kernels.direct_fields(points, np.ascontiguousarray(positions))
    return FieldSamples(out[:, 0], out[:, 1:], np.zeros(positions.shape[0], dtype=bool))


def save_field_grid(grid: FieldGrid, path) -> None:
    """Raw f32 dump of the three channels with geometry in the sidecar."""
    path = Path(path)
    grid.channels.astype("<f4").tofile(path)
    geom = grid.geometry
    hdr = [
        f"width={geom.width}",
        f"height={geom.height}",
        "channels=3",
        f"origin_x={geom.origin[0]!r}",
        f"origin_y={geom.origin[1]!r}",
        f"cell={geom.cell!r}",
        "dtype=f32",
        "layout=row-major",
        "endianness=little",
    ]
    sidecar_path(path).write_text("\n".join(hdr) + "\n")


def load_field_grid(path) -> FieldGrid:
    path = Path(path)
    hdr = read_sidecar(path)
    try:
        width, height = int(hdr["width"]), int(hdr["height"])
        geom = GridGeometry(
            (float(hdr["origin_x"]), float(hdr["origin_y"])), float(hdr["cell"]), width, height
        )
    except KeyError as exc:
        raise DataFormatError(f"{sidecar_path(path)}: missing field {exc}") from exc
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != width * height * 3:
        raise DataFormatError(f"{path}: expected {width * height * 3} values, found {raw.size}")
    return FieldGrid(geom, raw.astype(np.float64).reshape(height, width, 3))


def render_field_channel(grid: FieldGrid, channel: int, path) -> None:
    """Debug rendering of one channel to a binary PPM image.

    The S channel maps to grayscale, the V channels to a blue-white-red
    diverging ramp centered at zero.  Row 0 of the image is the grid's top
    (largest y) so the file matches the usual screen orientation.
    """
    data = grid.channels[::-1, :, channel]
    h, w = data.shape
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    if channel == 0:
        top = float(data.max())
        t = data / top if top > 0 else np.zeros_like(data)
        gray = np.round(255 * t).astype(np.uint8)
        rgb[..., 0] = rgb[..., 1] = rgb[..., 2] = gray
    else:
        scale = float(np.abs(data).max())
        t = data / scale if scale > 0 else np.zeros_like(data)
        pos = np.clip(t, 0.0, 1.0)
        neg = np.clip(-t, 0.0, 1.0)
        rgb[..., 0] = np.round(255 * (1.0 - neg)).astype(np.uint8)
        rgb[..., 1] = np.round(255 * (1.0 - np.maximum(pos, neg))).astype(np.uint8)
        rgb[..., 2] = np.round(255 * (1.0 - pos)).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
