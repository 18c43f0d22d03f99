"""Input normalization applied before dimensionality reduction.

Images and their paired attribution grids go through the same bilinear
resize to a square working resolution so their spatial grids stay
aligned. Contrast enhancement is CLAHE on the luminance channel followed
by a per-channel min-max stretch; attribution grids are scaled by their
max absolute value instead (no equalization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NBINS = 256

_LUM_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class PreprocessConfig:
    target_side: int = 224
    clahe_tiles: int = 8
    clahe_clip: float = 2.0
    downsample_side: int = 32

    def __post_init__(self) -> None:
        if self.target_side < 32:
            raise ValueError(f"target_side must be >= 32, got {self.target_side}")
        if self.clahe_tiles < 1:
            raise ValueError(f"clahe_tiles must be >= 1, got {self.clahe_tiles}")
        if self.clahe_clip < 1.0:
            raise ValueError(f"clahe_clip must be >= 1.0, got {self.clahe_clip}")
        if self.downsample_side < 4:
            raise ValueError(f"downsample_side must be >= 4, got {self.downsample_side}")


def resize_bilinear(grid: np.ndarray, side: int) -> np.ndarray:
    """Resize a (H, W) or (H, W, C) grid to side x side.

    Half-pixel-center sampling with edge clamping; every output value is a
    convex combination of inputs, so the value range is never expanded.
    Resizing to the source's own square size reproduces it exactly.
    """
    a = np.asarray(grid, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D grid, got shape {a.shape}")
    h, w = a.shape[:2]
    if h == 0 or w == 0 or side < 1:
        raise ValueError(f"zero-size resize: {(h, w)} -> {side}")

    ys = (np.arange(side) + 0.5) * (h / side) - 0.5
    xs = (np.arange(side) + 0.5) * (w / side) - 0.5
    y0f, x0f = np.floor(ys), np.floor(xs)
    fy, fx = ys - y0f, xs - x0f
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)

    if a.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = a[np.ix_(y0, x0)] * (1 - fx) + a[np.ix_(y0, x1)] * fx
    bot = a[np.ix_(y1, x0)] * (1 - fx) + a[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def _tile_lut(bins: np.ndarray, n: int, clip: float) -> np.ndarray | None:
    """Equalization lookup over 256 bins for one tile, or None if the tile
    has no dynamic range (single occupied bin -> identity)."""
    hist = np.bincount(bins, minlength=_NBINS).astype(np.float64)
    occupied = np.flatnonzero(hist)
    if occupied.size <= 1:
        return None
    limit = max(clip * n / _NBINS, 1.0)
    excess = np.clip(hist - limit, 0.0, None).sum()
    clipped = np.minimum(hist, limit) + excess / _NBINS
    cdf = np.cumsum(clipped)
    cdf_lo = cdf[occupied[0]]
    denom = cdf[-1] - cdf_lo
    if denom <= 0:
        return None
    return np.clip((cdf - cdf_lo) / denom, 0.0, 1.0)


def _axis_blend(coords: np.ndarray, centers: np.ndarray):
    """Per-coordinate neighbor tile pair and interpolation weight, clamped
    to the first/last tile centers."""
    idx = np.searchsorted(centers, coords, side="right") - 1
    lo = np.clip(idx, 0, centers.size - 1)
    hi = np.clip(idx + 1, 0, centers.size - 1)
    span = centers[hi] - centers[lo]
    frac = np.where(span > 0, (coords - centers[lo]) / np.where(span > 0, span, 1.0), 0.0)
    return lo, hi, np.clip(frac, 0.0, 1.0)


def _equalize_plane(plane: np.ndarray, tiles: int, clip: float) -> np.ndarray:
    h, w = plane.shape
    ty, tx = min(tiles, h), min(tiles, w)
    y_edges = [round(i * h / ty) for i in range(ty + 1)]
    x_edges = [round(j * w / tx) for j in range(tx + 1)]
    bins = np.minimum((plane * _NBINS).astype(np.int64), _NBINS - 1)

    luts = np.zeros((ty, tx, _NBINS))
    degenerate = np.zeros((ty, tx), dtype=bool)
    for i in range(ty):
        for j in range(tx):
            tile = bins[y_edges[i]:y_edges[i + 1], x_edges[j]:x_edges[j + 1]]
            lut = _tile_lut(tile.ravel(), tile.size, clip)
            if lut is None:
                degenerate[i, j] = True
            else:
                luts[i, j] = lut

    cy = np.array([(y_edges[i] + y_edges[i + 1] - 1) / 2 for i in range(ty)])
    cx = np.array([(x_edges[j] + x_edges[j + 1] - 1) / 2 for j in range(tx)])
    i0, i1, wy = _axis_blend(np.arange(h, dtype=np.float64), cy)
    j0, j1, wx = _axis_blend(np.arange(w, dtype=np.float64), cx)
    wy = wy[:, None]
    wx = wx[None, :]

    def corner(ti: np.ndarray, tj: np.ndarray) -> np.ndarray:
        ti, tj = ti[:, None], tj[None, :]
        # a tile with no dynamic range contributes the pixel's own value
        return np.where(degenerate[ti, tj], plane, luts[ti, tj, bins])

    return (
        (1 - wy) * (1 - wx) * corner(i0, j0)
        + (1 - wy) * wx * corner(i0, j1)
        + wy * (1 - wx) * corner(i1, j0)
        + wy * wx * corner(i1, j1)
    )


def clahe(pixels: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization on luminance only.

    Chroma ratios are preserved by rescaling each channel with the
    luminance gain; output is clamped to [0, 1]. Constant images pass
    through unchanged.
    """
    px = np.asarray(pixels, dtype=np.float64)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) pixels, got {px.shape}")
    lum = px @ _LUM_WEIGHTS
    if np.all(lum == lum.flat[0]):
        return px.copy()
    eq = _equalize_plane(lum, cfg.clahe_tiles, cfg.clahe_clip)
    zero = lum <= 0
    gain = np.ones_like(lum)
    gain[~zero] = eq[~zero] / lum[~zero]
    out = px * gain[:, :, None]
    out[zero] = eq[zero, None]
    return np.clip(out, 0.0, 1.0)


def min_max_stretch(pixels: np.ndarray) -> np.ndarray:
    """Per-channel stretch to [0, 1]; constant channels pass through."""
    px = np.asarray(pixels, dtype=np.float64).copy()
    for c in range(px.shape[2]):
        lo, hi = px[:, :, c].min(), px[:, :, c].max()
        if hi > lo:
            px[:, :, c] = (px[:, :, c] - lo) / (hi - lo)
    return px


def normalize_attribution(grid: np.ndarray) -> np.ndarray:
    """Scale a relevance grid by its max absolute value into [-1, 1].

    All-zero grids are returned unchanged; normalize(c*G) == normalize(G)
    for any c > 0.
    """
    g = np.asarray(grid, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("attribution grid contains non-finite values")
    peak = np.abs(g).max() if g.size else 0.0
    if peak == 0.0:
        return g.copy()
    return g / peak


def flatten_downsized(grid: np.ndarray, side: int) -> np.ndarray:
    """Resize to side x side then flatten row-major.

    Attribution grids stay single-channel (length side^2); images are
    flattened per channel (length 3*side^2).
    """
    r = resize_bilinear(grid, side)
    if r.ndim == 2:
        return r.ravel()
    return np.concatenate([r[:, :, c].ravel() for c in range(r.shape[2])])


def preprocess_image(pixels: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Working-resolution image: resize, equalize, then min-max stretch."""
    return min_max_stretch(clahe(resize_bilinear(pixels, cfg.target_side), cfg))


def preprocess_attribution(grid: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Working-resolution attribution: same resize as the image, then
    max-abs normalization (no equalization for relevance grids)."""
    return normalize_attribution(resize_bilinear(grid, cfg.target_side))
