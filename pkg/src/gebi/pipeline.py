"""Pipeline orchestration: sample selection, per-modality reduction,
feature concatenation, clustering, 3-D visualization embedding, and run
persistence.

Modes: spray_attr / spray_input flatten downsized grids (the baseline);
isomap_attr / isomap_input embed one modality nonlinearly; gebi embeds
both and clusters their concatenation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import (
    ClusterAssignment,
    EigengapResult,
    eigengap_analysis,
    elbow_select_k,
    spectral_clustering,
)
from .manifold import isomap
from .preprocess import (
    PreprocessConfig,
    flatten_downsized,
    preprocess_attribution,
    preprocess_image,
)
from .records import DatasetManifest, ManifestEntry, load_image, load_manifest, read_attribution_grid

log = logging.getLogger(__name__)

MODES = ("spray_attr", "spray_input", "isomap_attr", "isomap_input", "gebi")
AUTO_K = ("elbow", "eigengap")
AUTO_K_MIN = 2
AUTO_K_MAX = 8


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class RunConfig:
    """One pipeline execution; the seed makes reruns bit-identical."""

    dataset: str
    class_filter: str = "benign"
    mode: str = "gebi"
    d_img: int = 10
    d_attr: int = 20
    k_neighbors: int = 5
    n_clusters: int | str = 4
    seed: int = 0
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    standardize_blocks: bool = True

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if isinstance(self.n_clusters, str) and self.n_clusters not in AUTO_K:
            raise ValueError(f"n_clusters must be an int or one of {AUTO_K}")
        if self.d_img < 1 or self.d_attr < 1 or self.k_neighbors < 1:
            raise ValueError("d_img, d_attr and k_neighbors must be >= 1")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "class_filter": self.class_filter,
            "mode": self.mode,
            "d_img": self.d_img,
            "d_attr": self.d_attr,
            "k_neighbors": self.k_neighbors,
            "n_clusters": self.n_clusters,
            "seed": self.seed,
            "preprocess": {
                "target_side": self.preprocess.target_side,
                "clahe_tiles": self.preprocess.clahe_tiles,
                "clahe_clip": self.preprocess.clahe_clip,
                "downsample_side": self.preprocess.downsample_side,
            },
            "standardize_blocks": self.standardize_blocks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        pp = d.get("preprocess", {})
        n_clusters = d.get("n_clusters", 4)
        if not isinstance(n_clusters, str):
            n_clusters = int(n_clusters)
        return cls(
            dataset=d["dataset"],
            class_filter=d.get("class_filter", "benign"),
            mode=d.get("mode", "gebi"),
            d_img=int(d.get("d_img", 10)),
            d_attr=int(d.get("d_attr", 20)),
            k_neighbors=int(d.get("k_neighbors", 5)),
            n_clusters=n_clusters,
            seed=int(d.get("seed", 0)),
            preprocess=PreprocessConfig(
                target_side=int(pp.get("target_side", 224)),
                clahe_tiles=int(pp.get("clahe_tiles", 8)),
                clahe_clip=float(pp.get("clahe_clip", 2.0)),
                downsample_side=int(pp.get("downsample_side", 32)),
            ),
            standardize_blocks=bool(d.get("standardize_blocks", True)),
        )

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:8]


@dataclass(frozen=True)
class FeatureBlock:
    """A feature matrix whose rows are keyed by sample id."""

    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, d)

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise ValueError("matrix rows must match id count")

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class PreparedSample:
    id: str
    label: str
    image: np.ndarray              # (S, S, 3) preprocessed
    attribution: np.ndarray | None  # (S, S) preprocessed, or None


@dataclass(frozen=True)
class RunResult:
    run_id: str
    config: RunConfig
    assignment: ClusterAssignment
    viz3d: np.ndarray  # (n, 3)
    sample_ids: tuple[str, ...]
    per_cluster_members: list[list[str]]
    eigen_info: EigengapResult | None = None

    def to_dict(self) -> dict:
        d = {
            "run_id": self.run_id,
            "config": self.config.to_dict(),
            **self.assignment.to_dict(),
            "members": self.per_cluster_members,
            "ids": list(self.sample_ids),
            "viz3d": [[float(v) for v in row] for row in self.viz3d],
        }
        if self.eigen_info is not None:
            d["eigen_info"] = {
                "eigenvalues": [float(v) for v in self.eigen_info.eigenvalues],
                "suggested_k": self.eigen_info.suggested_k,
            }
        return d


def select_samples(manifest: DatasetManifest, class_filter: str) -> list[ManifestEntry]:
    """Entries of one class, in manifest order. The explicit "all" override
    keeps every sample, which only makes sense when hunting artifacts that
    could sit in every class (backdoor-style contamination)."""
    if class_filter == "all":
        log.warning(
            "class_filter='all' selected; mixing classes is only meaningful "
            "for backdoor-style artifacts present in every class"
        )
        entries = list(manifest.entries)
    else:
        entries = [e for e in manifest.entries if e.label == class_filter]
    if not entries:
        raise ValueError(f"no samples match class_filter {class_filter!r}")
    return entries


def prepare_samples(entries: list[ManifestEntry], cfg: PreprocessConfig) -> list[PreparedSample]:
    """Load and preprocess images and any attributions present."""
    out = []
    for e in entries:
        record = load_image(e.image_path, sample_id=e.id, label=e.label)
        image = preprocess_image(record.pixels, cfg)
        attribution = None
        if e.attribution_path is not None:
            attribution = preprocess_attribution(read_attribution_grid(e.attribution_path), cfg)
        out.append(PreparedSample(id=e.id, label=e.label, image=image, attribution=attribution))
    return out


def _require_attributions(samples: list[PreparedSample]) -> None:
    missing = [s.id for s in samples if s.attribution is None]
    if missing:
        raise ValueError(f"mode needs attribution maps; missing for {missing[:5]}")


def reduce_features(samples: list[PreparedSample], cfg: RunConfig) -> dict[str, FeatureBlock]:
    """Per-modality feature matrices for the configured mode.

    spray_* modes flatten downsized grids; isomap_*/gebi modes embed the
    full working-resolution grids with Isomap (d_img / d_attr dims).
    """
    ids = tuple(s.id for s in samples)
    side = cfg.preprocess.downsample_side
    blocks: dict[str, FeatureBlock] = {}

    if cfg.mode in ("spray_attr", "isomap_attr", "gebi"):
        _require_attributions(samples)
    if cfg.mode == "spray_attr":
        mat = np.stack([flatten_downsized(s.attribution, side) for s in samples])
        blocks["attribution"] = FeatureBlock(ids, mat)
    elif cfg.mode == "spray_input":
        mat = np.stack([flatten_downsized(s.image, side) for s in samples])
        blocks["image"] = FeatureBlock(ids, mat)
    else:
        if cfg.mode in ("isomap_input", "gebi"):
            flat = np.stack([s.image.ravel() for s in samples])
            emb = isomap(flat, cfg.k_neighbors, cfg.d_img)
            blocks["image"] = FeatureBlock(ids, emb.coords)
        if cfg.mode in ("isomap_attr", "gebi"):
            flat = np.stack([s.attribution.ravel() for s in samples])
            emb = isomap(flat, cfg.k_neighbors, cfg.d_attr)
            blocks["attribution"] = FeatureBlock(ids, emb.coords)
    return blocks


def standardize_columns(matrix: np.ndarray) -> np.ndarray:
    """Z-score each column; zero-variance columns are only centered."""
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    return (matrix - mean) / np.where(std > 0, std, 1.0)


def concat_features(img_block: FeatureBlock, attr_block: FeatureBlock) -> FeatureBlock:
    """Row-wise concatenation aligned by sample id; image features first."""
    if img_block.width == 0:
        return attr_block
    if attr_block.width == 0:
        return img_block
    if len(img_block.ids) != len(attr_block.ids):
        raise ValueError(
            f"row mismatch: {len(img_block.ids)} image rows vs {len(attr_block.ids)} attribution rows"
        )
    if img_block.ids != attr_block.ids:
        raise ValueError("sample id misalignment between image and attribution features")
    return FeatureBlock(img_block.ids, np.hstack([img_block.matrix, attr_block.matrix]))


def clustering_vectors(blocks: dict[str, FeatureBlock], cfg: RunConfig) -> FeatureBlock:
    """The vectors Step 5 clusters: a single modality, or for gebi the
    (optionally per-block standardized) concatenation."""
    if cfg.mode == "gebi":
        img, attr = blocks["image"], blocks["attribution"]
        if cfg.standardize_blocks:
            img = FeatureBlock(img.ids, standardize_columns(img.matrix))
            attr = FeatureBlock(attr.ids, standardize_columns(attr.matrix))
        return concat_features(img, attr)
    (block,) = blocks.values()
    return block


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc


def execute_run(cfg: RunConfig, runs_dir: str | Path = "runs") -> RunResult:
    """Run selection, preprocessing, reduction, clustering and the 3-D
    visualization embedding, then persist everything under a run directory."""
    manifest = _stage("load_manifest", load_manifest, cfg.dataset)
    entries = _stage("select_samples", select_samples, manifest, cfg.class_filter)
    samples = _stage("preprocess", prepare_samples, entries, cfg.preprocess)
    blocks = _stage("reduce_features", reduce_features, samples, cfg)
    vectors = _stage("concat_features", clustering_vectors, blocks, cfg)

    def cluster_stage() -> tuple[ClusterAssignment, EigengapResult | None, dict | None]:
        n = vectors.matrix.shape[0]
        eigen_info = None
        selection = None
        k = cfg.n_clusters
        if k == "elbow":
            elbow = elbow_select_k(vectors.matrix, AUTO_K_MIN, min(AUTO_K_MAX, n - 1), cfg.seed)
            k = elbow.selected_k
            selection = {
                "method": "elbow",
                "ks": elbow.ks,
                "inertias": elbow.inertias,
                "selected_k": elbow.selected_k,
                "knee_strength": elbow.knee_strength,
            }
        elif k == "eigengap":
            eigen_info = eigengap_analysis(vectors.matrix, None, min(AUTO_K_MAX, n - 1))
            k = eigen_info.suggested_k
            selection = {
                "method": "eigengap",
                "eigenvalues": [float(v) for v in eigen_info.eigenvalues],
                "selected_k": eigen_info.suggested_k,
            }
        assignment = spectral_clustering(vectors.matrix, int(k), gamma=None, seed=cfg.seed)
        return assignment, eigen_info, selection

    assignment, eigen_info, selection = _stage("cluster", cluster_stage)
    viz = _stage("viz3d", isomap, vectors.matrix, cfg.k_neighbors, 3)

    members = [[vectors.ids[i] for i in idxs] for idxs in assignment.members()]
    run_id = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime()) + "-" + cfg.digest()
    result = RunResult(
        run_id=run_id,
        config=cfg,
        assignment=assignment,
        viz3d=viz.coords,
        sample_ids=vectors.ids,
        per_cluster_members=members,
        eigen_info=eigen_info,
    )
    _stage("persist", persist_run, result, runs_dir, selection)
    return result


def _write_atomic(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def viz3d_csv(result: RunResult) -> str:
    lines = ["id,x,y,z,cluster"]
    for i, sid in enumerate(result.sample_ids):
        x, y, z = (repr(float(v)) for v in result.viz3d[i])
        lines.append(f"{sid},{x},{y},{z},{int(result.assignment.labels[i])}")
    return "\n".join(lines) + "\n"


def persist_run(result: RunResult, runs_dir: str | Path, selection: dict | None = None) -> Path:
    """Write config.json, clusters.json (atomically), viz3d.csv and log.txt."""
    run_dir = Path(runs_dir) / result.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(
        json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if result.eigen_info is not None:
        (run_dir / "eigen.json").write_text(
            json.dumps(
                {
                    "eigenvalues": [float(v) for v in result.eigen_info.eigenvalues],
                    "suggested_k": result.eigen_info.suggested_k,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    if selection is not None:
        (run_dir / "selection.json").write_text(
            json.dumps(selection, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    (run_dir / "viz3d.csv").write_text(viz3d_csv(result), encoding="utf-8")
    clusters = result.assignment.to_dict()
    clusters["members"] = result.per_cluster_members
    _write_atomic(run_dir / "clusters.json", json.dumps(clusters, indent=2, sort_keys=True) + "\n")
    with (run_dir / "log.txt").open("a", encoding="utf-8") as fh:
        fh.write(
            f"{time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())} "
            f"run {result.run_id} mode={result.config.mode} n={len(result.sample_ids)} "
            f"k={result.assignment.n_clusters}\n"
        )
    return run_dir


def load_run(run_dir: str | Path) -> RunResult:
    """Reload a persisted run; equal to the RunResult that wrote it."""
    run_dir = Path(run_dir)
    cfg = RunConfig.from_dict(json.loads((run_dir / "config.json").read_text(encoding="utf-8")))
    clusters = json.loads((run_dir / "clusters.json").read_text(encoding="utf-8"))
    ids: list[str] = []
    rows: list[list[float]] = []
    for line in (run_dir / "viz3d.csv").read_text(encoding="utf-8").splitlines()[1:]:
        sid, x, y, z, _ = line.split(",")
        ids.append(sid)
        rows.append([float(x), float(y), float(z)])
    eigen_info = None
    eigen_path = run_dir / "eigen.json"
    if eigen_path.exists():
        e = json.loads(eigen_path.read_text(encoding="utf-8"))
        eigen_info = EigengapResult(
            eigenvalues=np.array(e["eigenvalues"]), suggested_k=int(e["suggested_k"])
        )
    assignment = ClusterAssignment(
        labels=np.array(clusters["labels"], dtype=np.int64),
        n_clusters=int(clusters["n_clusters"]),
        inertia=float(clusters["inertia"]),
    )
    return RunResult(
        run_id=run_dir.name,
        config=cfg,
        assignment=assignment,
        viz3d=np.array(rows),
        sample_ids=tuple(ids),
        per_cluster_members=clusters["members"],
        eigen_info=eigen_info,
    )
