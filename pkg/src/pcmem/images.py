"""Grayscale image grids and binary PGM (P5) export.

Each tile is rescaled independently (min -> 0, max -> 255; constant tiles
map to 0) so individual digits and weight columns stay legible, and tiles
are separated by 2-pixel gray gutters.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

SEPARATOR = 2
GUTTER_VALUE = 128


def rescale_tile(tile: np.ndarray) -> np.ndarray:
    """Linear per-tile rescale to uint8; constant tiles become 0."""
    lo, hi = float(tile.min()), float(tile.max())
    if hi == lo:
        return np.zeros(tile.shape, dtype=np.uint8)
    return np.rint((tile - lo) / (hi - lo) * 255.0).astype(np.uint8)


def image_grid(images: np.ndarray, n_cols: int, side: int = 28) -> np.ndarray:
    """Tile (n, side*side) or (n, side, side) images row-major into one raster."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images.reshape(-1, side, side)
    n = images.shape[0]
    n_rows = -(-n // n_cols)
    h = n_rows * side + (n_rows - 1) * SEPARATOR
    w = n_cols * side + (n_cols - 1) * SEPARATOR
    grid = np.full((h, w), GUTTER_VALUE, dtype=np.uint8)
    for k in range(n):
        r, c = divmod(k, n_cols)
        r0 = r * (side + SEPARATOR)
        c0 = c * (side + SEPARATOR)
        grid[r0 : r0 + side, c0 : c0 + side] = rescale_tile(images[k])
    return grid


def write_pgm(path: str | Path, raster: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255), atomically."""
    if raster.ndim != 2 or raster.dtype != np.uint8:
        raise ValueError("raster must be a 2-D uint8 array")
    h, w = raster.shape
    payload = f"P5\n{w} {h}\n255\n".encode("ascii") + raster.tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary P5 PGM written by write_pgm."""
    raw = Path(path).read_bytes()
    # header is exactly "P5\n{w} {h}\n255\n"; locate the third newline so
    # payload bytes that happen to be whitespace are not swallowed
    third = -1
    for _ in range(3):
        third = raw.index(b"\n", third + 1)
    magic, size, maxval = raw[:third].split(b"\n")
    if magic != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = (int(v) for v in size.split())
    if int(maxval) != 255:
        raise ValueError("only maxval 255 supported")
    pixels = raw[third + 1 :]
    if len(pixels) != w * h:
        raise ValueError("truncated PGM payload")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)
