"""Seeded synthesis of candidate bias artifacts: black frames, ruler
marks, red circles.

Frames are deterministic (same size and position everywhere). Rulers and
circles vary per sample via a counter-based Philox generator keyed by
(seed, sample_id), so output is a pure function of (image, spec,
sample_id) across platforms.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

BIAS_KINDS = ("black_frame", "ruler", "red_circle", "none")
FRAME_SHAPES = ("rect", "round")


@dataclass(frozen=True)
class BiasSpec:
    """Parameterized, seeded artifact-insertion recipe."""

    kind: str = "black_frame"
    seed: int = 0
    frame_thickness_frac: float = 0.08
    frame_shape: str = "rect"
    ruler_scale_range: tuple[float, float] = (0.8, 1.2)
    circle_radius_frac_range: tuple[float, float] = (0.03, 0.08)

    def __post_init__(self) -> None:
        if self.kind not in BIAS_KINDS:
            raise ValueError(f"unknown bias kind {self.kind!r}")
        if self.frame_shape not in FRAME_SHAPES:
            raise ValueError(f"unknown frame shape {self.frame_shape!r}")
        if not 0.0 < self.frame_thickness_frac < 0.5:
            raise ValueError("frame_thickness_frac must lie in (0, 0.5)")
        lo, hi = self.circle_radius_frac_range
        if not (0.0 < lo <= hi < 0.5):
            raise ValueError("circle_radius_frac_range must be ordered within (0, 0.5)")
        lo, hi = self.ruler_scale_range
        if not (0.0 < lo <= hi):
            raise ValueError("ruler_scale_range must be ordered and positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": int(self.seed),
            "frame_thickness_frac": self.frame_thickness_frac,
            "frame_shape": self.frame_shape,
            "ruler_scale_range": list(self.ruler_scale_range),
            "circle_radius_frac_range": list(self.circle_radius_frac_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BiasSpec":
        return cls(
            kind=d.get("kind", "black_frame"),
            seed=int(d.get("seed", 0)),
            frame_thickness_frac=float(d.get("frame_thickness_frac", 0.08)),
            frame_shape=d.get("frame_shape", "rect"),
            ruler_scale_range=tuple(d.get("ruler_scale_range", (0.8, 1.2))),
            circle_radius_frac_range=tuple(d.get("circle_radius_frac_range", (0.03, 0.08))),
        )


def keyed_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, sample_id)."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    id_word = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, id_word]))


def _validate_image(image: np.ndarray) -> np.ndarray:
    px = np.asarray(image, dtype=np.float64)
    if px.ndim != 3 or px.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {px.shape}")
    return px


def insert_black_frame(image: np.ndarray, spec: BiasSpec) -> np.ndarray:
    """Paint a black border frame; no randomness, interior bit-identical.

    rect: a ring of width ceil(frac * min(W, H)). round: everything outside
    the centered ellipse inscribed in the frame's interior rectangle.
    """
    px = _validate_image(image).copy()
    h, w = px.shape[:2]
    t = math.ceil(spec.frame_thickness_frac * min(w, h))
    if 2 * t >= min(w, h):
        raise ValueError(f"frame thickness {t} leaves no interior on a {w}x{h} image")
    if spec.frame_shape == "rect":
        px[:t, :] = 0.0
        px[h - t:, :] = 0.0
        px[:, :t] = 0.0
        px[:, w - t:] = 0.0
    else:
        ax, ay = w / 2.0 - t, h / 2.0 - t
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        yy, xx = np.mgrid[0:h, 0:w]
        outside = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 > 1.0
        px[outside] = 0.0
    return px


def _paint_segments(px: np.ndarray, segments: list[tuple[float, float, float, float]],
                    half_width: float, color: tuple[float, float, float]) -> None:
    h, w = px.shape[:2]
    for x0, y0, x1, y1 in segments:
        lo_x = max(int(math.floor(min(x0, x1) - half_width - 1)), 0)
        hi_x = min(int(math.ceil(max(x0, x1) + half_width + 1)), w - 1)
        lo_y = max(int(math.floor(min(y0, y1) - half_width - 1)), 0)
        hi_y = min(int(math.ceil(max(y0, y1) + half_width + 1)), h - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        yy, xx = np.mgrid[lo_y:hi_y + 1, lo_x:hi_x + 1]
        dx, dy = x1 - x0, y1 - y0
        seg_sq = dx * dx + dy * dy
        if seg_sq == 0:
            t = np.zeros_like(xx, dtype=np.float64)
        else:
            t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / seg_sq, 0.0, 1.0)
        dist = np.hypot(xx - (x0 + t * dx), yy - (y0 + t * dy))
        mask = dist <= half_width
        px[lo_y:hi_y + 1, lo_x:hi_x + 1][mask] = color


def insert_ruler(image: np.ndarray, spec: BiasSpec, sample_id: str) -> np.ndarray:
    """Place a procedural ruler sprite: a black segment with perpendicular
    tick marks, randomly scaled, rotated and positioned per sample."""
    px = _validate_image(image).copy()
    h, w = px.shape[:2]
    rng = keyed_rng(spec.seed, sample_id)
    scale = rng.uniform(*spec.ruler_scale_range)
    angle = math.radians(rng.uniform(0.0, 180.0))
    cx = rng.uniform(0.1 * w, 0.9 * w)
    cy = rng.uniform(0.1 * h, 0.9 * h)

    length = 0.5 * w * scale
    ux, uy = math.cos(angle), math.sin(angle)
    nx, ny = -uy, ux
    x0, y0 = cx - ux * length / 2, cy - uy * length / 2
    segments = [(x0, y0, cx + ux * length / 2, cy + uy * length / 2)]
    tick_step, tick_len = 0.03 * w, 0.02 * h
    s = 0.0
    while s <= length:
        bx, by = x0 + ux * s, y0 + uy * s
        segments.append((bx, by, bx + nx * tick_len, by + ny * tick_len))
        s += tick_step
    _paint_segments(px, segments, half_width=max(1.0, w / 128.0) / 2.0, color=(0.0, 0.0, 0.0))
    return px


def insert_red_circle(image: np.ndarray, spec: BiasSpec, sample_id: str) -> np.ndarray:
    """Draw one pure-red outline circle at a random position and radius,
    clipped at the image borders."""
    px = _validate_image(image).copy()
    h, w = px.shape[:2]
    rng = keyed_rng(spec.seed, sample_id)
    radius = rng.uniform(*spec.circle_radius_frac_range) * min(w, h)
    cx = rng.uniform(0.0, w)
    cy = rng.uniform(0.0, h)
    half_width = max(1.0, w / 128.0) / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    ring = np.abs(np.hypot(xx - cx, yy - cy) - radius) <= half_width
    px[ring] = (1.0, 0.0, 0.0)
    return px


def apply_bias(image: np.ndarray, spec: BiasSpec, sample_id: str = "") -> np.ndarray:
    """Dispatch on the spec kind; kind 'none' returns the image unmodified."""
    if spec.kind == "none":
        return _validate_image(image).copy()
    if spec.kind == "black_frame":
        return insert_black_frame(image, spec)
    if spec.kind == "ruler":
        return insert_ruler(image, spec, sample_id)
    if spec.kind == "red_circle":
        return insert_red_circle(image, spec, sample_id)
    raise ValueError(f"unknown bias kind {spec.kind!r}")
