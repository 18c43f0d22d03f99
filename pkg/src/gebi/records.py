"""Core records: RGB images, signed attribution grids, dataset manifests.

Images travel as float arrays in [0, 1]; attribution grids as signed
float32. Attribution grids are persisted in the GATR binary format
(magic ``GATR``, version byte, uint32-LE height and width, float32-LE
payload, row-major) because relevance is signed and full-precision.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

LABELS = ("benign", "malignant", "unlabeled")

GATR_MAGIC = b"GATR"
GATR_VERSION = 1
_GATR_HEADER = struct.Struct("<4sBII")


class ManifestError(ValueError):
    """Raised for unreadable or malformed manifest files."""


class GatrError(ValueError):
    """Raised for malformed GATR attribution files."""


@dataclass(frozen=True)
class ImageRecord:
    """An RGB image with pixels in [0, 1] and an optional class label."""

    id: str
    pixels: np.ndarray  # (H, W, 3) float64 in [0, 1]
    label: str = "unlabeled"

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("image id must be non-empty")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got {px.shape}")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("channel values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class AttributionRecord:
    """Signed per-pixel relevance grid paired with an image."""

    image_id: str
    grid: np.ndarray  # (H, W) float32, finite

    def __post_init__(self) -> None:
        if self.grid.ndim != 2:
            raise ValueError(f"grid must be 2-D, got {self.grid.shape}")
        if not np.all(np.isfinite(self.grid)):
            raise ValueError("attribution grid contains non-finite values")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: Path
    attribution_path: Path | None
    label: str


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered dataset listing; entry i of the CSV is entry i here."""

    root_dir: Path
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def entry(self, sample_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == sample_id:
                return e
        raise KeyError(sample_id)

    def has_attributions(self) -> bool:
        return all(e.attribution_path is not None for e in self.entries)


MANIFEST_HEADER = ["id", "image", "attribution", "label"]


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a dataset manifest CSV (header ``id,image,attribution,label``).

    Paths are resolved against the manifest's directory. The ``attribution``
    column may be empty for input-only pipeline modes.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    root = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty file, expected header row") from None
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ManifestError(
                f"{path}: bad header {header!r}, expected {','.join(MANIFEST_HEADER)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ManifestError(f"{path}: row {row_no}: expected 4 fields, got {len(row)}")
            sample_id, image, attribution, label = (c.strip() for c in row)
            if not sample_id:
                raise ManifestError(f"{path}: row {row_no}: empty id")
            if sample_id in seen:
                raise ManifestError(f"{path}: row {row_no}: duplicate id {sample_id!r}")
            if label not in LABELS:
                raise ManifestError(
                    f"{path}: row {row_no}: unknown label {label!r}, "
                    f"expected one of {', '.join(LABELS)}"
                )
            image_path = root / image
            if not image_path.is_file():
                raise ManifestError(f"{path}: row {row_no}: image not readable: {image_path}")
            attr_path: Path | None = None
            if attribution:
                attr_path = root / attribution
                if not attr_path.is_file():
                    raise ManifestError(
                        f"{path}: row {row_no}: attribution not readable: {attr_path}"
                    )
            seen.add(sample_id)
            entries.append(ManifestEntry(sample_id, image_path, attr_path, label))
    return DatasetManifest(root_dir=root, entries=tuple(entries))


def write_attribution_grid(path: str | Path, grid: np.ndarray) -> None:
    """Write a finite 2-D grid as a GATR file; inverted exactly by the reader."""
    arr = np.ascontiguousarray(grid, dtype="<f4")
    if arr.ndim != 2:
        raise GatrError(f"grid must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GatrError("refusing to write non-finite attribution values")
    h, w = arr.shape
    header = _GATR_HEADER.pack(GATR_MAGIC, GATR_VERSION, h, w)
    Path(path).write_bytes(header + arr.tobytes(order="C"))


def read_attribution_grid(path: str | Path) -> np.ndarray:
    """Read a GATR file back into an (H, W) float32 grid, exactly as stored."""
    data = Path(path).read_bytes()
    if len(data) < _GATR_HEADER.size:
        raise GatrError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, h, w = _GATR_HEADER.unpack_from(data)
    if magic != GATR_MAGIC:
        raise GatrError(f"{path}: bad magic {magic!r}")
    if version != GATR_VERSION:
        raise GatrError(f"{path}: unsupported version {version}")
    expected = _GATR_HEADER.size + h * w * 4
    if len(data) != expected:
        raise GatrError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    grid = np.frombuffer(data, dtype="<f4", offset=_GATR_HEADER.size).reshape(h, w)
    if not np.all(np.isfinite(grid)):
        raise GatrError(f"{path}: grid contains non-finite values")
    return grid.copy()


def load_image(path: str | Path, sample_id: str | None = None, label: str = "unlabeled") -> ImageRecord:
    """Decode an 8-bit RGB/RGBA PNG into an ImageRecord (alpha dropped, /255)."""
    path = Path(path)
    with Image.open(path) as im:
        if im.mode not in ("RGB", "RGBA", "L"):
            im = im.convert("RGBA")
        if im.mode != "RGB":
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageRecord(id=sample_id or path.stem, pixels=arr, label=label)


def save_image(pixels: np.ndarray, path: str | Path) -> None:
    """Encode [0, 1] pixels to an 8-bit RGB PNG (lossless for 8-bit-derived values)."""
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"pixels must be (H, W, 3), got {arr.shape}")
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(Path(path), format="PNG")
