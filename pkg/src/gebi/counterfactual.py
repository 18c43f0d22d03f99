"""Counterfactual bias testing: score images before and after artifact
insertion and aggregate the prediction deltas per class.

The builtin toy predictor is a closed-form logistic score over border and
center darkness, dark borders pushing toward "malignant". It exists as a
deterministic oracle for exercising the harness, not as a lesion model;
real models plug in over HTTP (PNG body in, JSON score out).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import requests
from PIL import Image

from .biasgen import BiasSpec, apply_bias
from .records import DatasetManifest, load_image

DEFAULT_TOY_WEIGHTS = (6.0, 2.0, -4.0)  # (w_border, w_center, bias)
REMOTE_RETRIES = 2

_LUM = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class PredictorRef:
    """A score source: the builtin toy model or a remote HTTP endpoint."""

    kind: str = "builtin_toy"
    endpoint: str | None = None
    timeout: float = 10.0
    weights: tuple[float, float, float] = DEFAULT_TOY_WEIGHTS

    def __post_init__(self) -> None:
        if self.kind not in ("builtin_toy", "remote"):
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        if (self.kind == "remote") != (self.endpoint is not None):
            raise ValueError("endpoint must be present exactly when kind is remote")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "timeout": self.timeout,
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredictorRef":
        return cls(
            kind=d.get("kind", "builtin_toy"),
            endpoint=d.get("endpoint"),
            timeout=float(d.get("timeout", 10.0)),
            weights=tuple(d.get("weights", DEFAULT_TOY_WEIGHTS)),
        )


@dataclass(frozen=True)
class PredictionDelta:
    """Before/after scores for one sample, in percentage points."""

    sample_id: str
    label: str
    p_before: float
    p_after: float
    delta_pp: float
    flipped_to_malignant: bool
    flipped_to_benign: bool


@dataclass(frozen=True)
class ClassStats:
    n: int
    mean_signed_pp: float
    mean_abs_pp: float
    max_abs_pp: float
    flips_to_malignant: int
    flips_to_benign: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean_signed_pp": self.mean_signed_pp,
            "mean_abs_pp": self.mean_abs_pp,
            "max_abs_pp": self.max_abs_pp,
            "flips_to_malignant": self.flips_to_malignant,
            "flips_to_benign": self.flips_to_benign,
        }


@dataclass(frozen=True)
class CounterfactualReport:
    """Per-class delta aggregates for one bias recipe."""

    per_class: dict[str, ClassStats]
    threshold: float
    bias_spec: BiasSpec = field(default_factory=BiasSpec)

    def to_dict(self) -> dict:
        return {
            "per_class": {k: v.to_dict() for k, v in self.per_class.items()},
            "threshold": self.threshold,
            "bias_spec": self.bias_spec.to_dict(),
        }


class PredictorError(RuntimeError):
    """Raised when a predictor cannot produce a valid score."""


def encode_png(pixels: np.ndarray) -> bytes:
    data = np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(data, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _toy_score(pixels: np.ndarray, weights: tuple[float, float, float]) -> float:
    px = np.asarray(pixels, dtype=np.float64)
    h, w = px.shape[:2]
    lum = px @ _LUM
    ring_w = max(1, int(0.1 * min(w, h)))
    yy, xx = np.mgrid[0:h, 0:w]
    border_dist = np.minimum.reduce([yy, xx, h - 1 - yy, w - 1 - xx])
    ring = border_dist < ring_w
    b = 1.0 - float(lum[ring].mean())
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    disk = np.hypot(xx - cx, yy - cy) <= 0.3 * min(w, h)
    m = 1.0 - float(lum[disk].mean())
    w_b, w_c, bias = weights
    return 1.0 / (1.0 + math.exp(-(w_b * b + w_c * m + bias)))


def _remote_score(pixels: np.ndarray, p: PredictorRef) -> float:
    body = encode_png(pixels)
    last_exc: Exception | None = None
    for _ in range(1 + REMOTE_RETRIES):
        try:
            resp = requests.post(
                p.endpoint,
                data=body,
                headers={"Content-Type": "image/png"},
                timeout=p.timeout,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_exc = exc
            continue
        if resp.status_code != 200:
            raise PredictorError(f"predictor returned HTTP {resp.status_code}")
        try:
            score = float(resp.json()["score"])
        except (ValueError, KeyError, TypeError) as exc:
            raise PredictorError(f"malformed predictor response: {exc}") from exc
        if not 0.0 <= score <= 1.0:
            raise PredictorError(f"predictor score {score} outside [0, 1]")
        return score
    raise PredictorError(f"predictor unreachable after {1 + REMOTE_RETRIES} attempts: {last_exc}")


def predict(p: PredictorRef, pixels: np.ndarray) -> float:
    """Score an image in [0, 1]; higher means more malignant-looking."""
    if p.kind == "builtin_toy":
        return _toy_score(pixels, p.weights)
    return _remote_score(pixels, p)


def make_delta(sample_id: str, label: str, p_before: float, p_after: float,
               threshold: float) -> PredictionDelta:
    return PredictionDelta(
        sample_id=sample_id,
        label=label,
        p_before=p_before,
        p_after=p_after,
        delta_pp=100.0 * (p_after - p_before),
        flipped_to_malignant=p_before < threshold <= p_after,
        flipped_to_benign=p_after < threshold <= p_before,
    )


def summarize(deltas: list[PredictionDelta], threshold: float,
              bias_spec: BiasSpec | None = None) -> CounterfactualReport:
    """Fold deltas into per-class aggregates (id-sorted, so the result is
    independent of completion order). Unlabeled samples are excluded."""
    if not deltas:
        raise ValueError("cannot summarize an empty delta list")
    per_class: dict[str, ClassStats] = {}
    ordered = sorted(deltas, key=lambda d: d.sample_id)
    for cls in ("malignant", "benign"):
        group = [d for d in ordered if d.label == cls]
        pps = np.array([d.delta_pp for d in group])
        per_class[cls] = ClassStats(
            n=len(group),
            mean_signed_pp=float(pps.mean()) if group else 0.0,
            mean_abs_pp=float(np.abs(pps).mean()) if group else 0.0,
            max_abs_pp=float(np.abs(pps).max()) if group else 0.0,
            flips_to_malignant=sum(d.flipped_to_malignant for d in group),
            flips_to_benign=sum(d.flipped_to_benign for d in group),
        )
    return CounterfactualReport(
        per_class=per_class, threshold=threshold, bias_spec=bias_spec or BiasSpec(kind="none")
    )


def run_experiment(
    manifest: DatasetManifest,
    spec: BiasSpec,
    predictor: PredictorRef,
    threshold: float = 0.5,
) -> tuple[list[PredictionDelta], CounterfactualReport]:
    """Score every sample before and after bias insertion.

    Unlabeled samples are evaluated but excluded from class aggregates.
    Any predictor failure aborts the experiment; partial averages mislead.
    """
    deltas: list[PredictionDelta] = []
    for entry in manifest.entries:
        record = load_image(entry.image_path, sample_id=entry.id, label=entry.label)
        p_before = predict(predictor, record.pixels)
        p_after = predict(predictor, apply_bias(record.pixels, spec, entry.id))
        deltas.append(make_delta(entry.id, entry.label, p_before, p_after, threshold))
    return deltas, summarize(deltas, threshold, spec)
