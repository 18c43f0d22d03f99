"""HTTP service exposing datasets, pipeline runs and counterfactual
experiments; jobs execute on worker threads off the request path.

Persistence is the filesystem: run and experiment directories under the
data root, ids derived from content digests. A restart re-scans those
directories; in-flight jobs are abandoned.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from .biasgen import BiasSpec
from .counterfactual import PredictorRef, run_experiment
from .pipeline import RunConfig, StageError, execute_run, load_run
from .records import DatasetManifest, load_manifest, read_attribution_grid
from .report import attribution_heatmap, deltas_csv

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, message: str, stage: str = "request"):
        super().__init__(message)
        self.status = status
        self.message = message
        self.stage = stage


@dataclass
class Job:
    id: str
    kind: str  # run | experiment
    state: str = "queued"  # queued -> running -> done | failed
    error: str | None = None
    error_stage: str | None = None
    result_ref: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "state": self.state,
            "error": self.error,
            "error_stage": self.error_stage,
            "result_ref": self.result_ref,
        }


class JobQueue:
    """In-memory FIFO executed by daemon worker threads; one worker owns a
    job for its whole lifetime, so state only moves forward."""

    def __init__(self, workers: int = 1):
        self._queue: queue.Queue = queue.Queue()
        self._jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._counter = 0
        for i in range(max(1, workers)):
            threading.Thread(target=self._worker, name=f"gebi-worker-{i}", daemon=True).start()

    def submit(self, kind: str, fn) -> Job:
        with self._lock:
            self._counter += 1
            job_id = f"{kind}-{self._counter:06d}"
            job = Job(id=job_id, kind=kind)
            self._jobs[job_id] = job
        self._queue.put((job, fn))
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def _worker(self) -> None:
        while True:
            job, fn = self._queue.get()
            job.state = "running"
            try:
                job.result_ref = fn()
                job.state = "done"
            except StageError as exc:
                job.error, job.error_stage, job.state = str(exc), exc.stage, "failed"
            except Exception as exc:  # noqa: BLE001 - job boundary
                job.error, job.error_stage, job.state = str(exc), "internal", "failed"
                log.exception("job %s failed", job.id)
            finally:
                self._queue.task_done()


def _heatmap_png(grid: np.ndarray) -> bytes:
    from .counterfactual import encode_png

    return encode_png(attribution_heatmap(grid))


def _digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def create_app(data_root: str | Path, workers: int = 1, ui_dir: str | Path | None = None) -> FastAPI:
    data_root = Path(data_root)
    runs_dir = data_root / "runs"
    experiments_dir = data_root / "experiments"
    runs_dir.mkdir(parents=True, exist_ok=True)
    experiments_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="gebi", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    jobs = JobQueue(workers=workers)
    datasets: dict[str, tuple[Path, DatasetManifest]] = {}

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"error": exc.message, "stage": exc.stage})

    def resolve_result_dir(base: Path, ref: str) -> Path:
        candidate = base / ref
        if candidate.is_dir():
            return candidate
        job = jobs.get(ref)
        if job is not None:
            if job.state == "failed":
                raise ApiError(409, job.error or "job failed", job.error_stage or "job")
            if job.state != "done" or job.result_ref is None:
                raise ApiError(409, f"job {ref} is {job.state}", "job")
            return base / job.result_ref
        raise ApiError(404, f"unknown id {ref!r}", "lookup")

    def get_dataset(dataset_id: str) -> tuple[Path, DatasetManifest]:
        if dataset_id not in datasets:
            raise ApiError(404, f"unknown dataset {dataset_id!r}", "lookup")
        return datasets[dataset_id]

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok"}

    @app.post("/datasets")
    async def register_dataset(body: dict) -> dict:
        manifest_path = Path(body.get("root", ".")) / body["manifest"] if "root" in body else Path(body["manifest"])
        try:
            manifest = load_manifest(manifest_path)
        except Exception as exc:
            raise ApiError(400, str(exc), "load_manifest") from exc
        dataset_id = _digest({"manifest": str(manifest_path.resolve())})
        datasets[dataset_id] = (manifest_path, manifest)
        return {"id": dataset_id, "n_entries": len(manifest)}

    @app.get("/datasets/{dataset_id}")
    async def dataset_info(dataset_id: str) -> dict:
        manifest_path, manifest = get_dataset(dataset_id)
        return {
            "id": dataset_id,
            "manifest": str(manifest_path),
            "entries": [
                {"id": e.id, "label": e.label, "has_attribution": e.attribution_path is not None}
                for e in manifest.entries
            ],
        }

    @app.post("/runs", status_code=202)
    async def submit_run(body: dict) -> dict:
        try:
            cfg = RunConfig.from_dict(body)
        except Exception as exc:
            raise ApiError(400, str(exc), "config") from exc
        job = jobs.submit("run", lambda: execute_run(cfg, runs_dir).run_id)
        return job.to_dict()

    @app.get("/jobs/{job_id}")
    async def job_status(job_id: str) -> dict:
        job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"unknown job {job_id!r}", "lookup")
        return job.to_dict()

    @app.get("/runs/{ref}")
    async def run_result(ref: str) -> dict:
        run_dir = resolve_result_dir(runs_dir, ref)
        try:
            return load_run(run_dir).to_dict()
        except FileNotFoundError as exc:
            raise ApiError(404, f"run {ref!r} not found", "lookup") from exc

    @app.get("/runs/{ref}/viz3d")
    async def run_viz3d(ref: str) -> PlainTextResponse:
        run_dir = resolve_result_dir(runs_dir, ref)
        path = run_dir / "viz3d.csv"
        if not path.is_file():
            raise ApiError(404, f"run {ref!r} has no viz3d.csv", "lookup")
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="text/csv")

    @app.get("/images/{dataset_id}/{sample_id}")
    async def image_png(dataset_id: str, sample_id: str) -> Response:
        _, manifest = get_dataset(dataset_id)
        try:
            entry = manifest.entry(sample_id)
        except KeyError as exc:
            raise ApiError(404, f"unknown sample {sample_id!r}", "lookup") from exc
        return Response(entry.image_path.read_bytes(), media_type="image/png")

    @app.get("/attributions/{dataset_id}/{sample_id}")
    async def attribution_png(dataset_id: str, sample_id: str, format: str = "png") -> Response:
        _, manifest = get_dataset(dataset_id)
        try:
            entry = manifest.entry(sample_id)
        except KeyError as exc:
            raise ApiError(404, f"unknown sample {sample_id!r}", "lookup") from exc
        if entry.attribution_path is None:
            raise ApiError(404, f"sample {sample_id!r} has no attribution", "lookup")
        if format == "gatr":
            return Response(entry.attribution_path.read_bytes(), media_type="application/octet-stream")
        grid = read_attribution_grid(entry.attribution_path)
        return Response(_heatmap_png(grid), media_type="image/png")

    @app.post("/experiments", status_code=202)
    async def submit_experiment(body: dict) -> dict:
        try:
            manifest_path = Path(body["manifest"])
            spec = BiasSpec.from_dict(body.get("bias", {}))
            predictor = PredictorRef.from_dict(body.get("predictor", {}))
            threshold = float(body.get("threshold", 0.5))
        except Exception as exc:
            raise ApiError(400, str(exc), "config") from exc
        exp_id = _digest(
            {
                "manifest": str(manifest_path.resolve()),
                "bias": spec.to_dict(),
                "predictor": predictor.to_dict(),
                "threshold": threshold,
            }
        )

        def work() -> str:
            try:
                manifest = load_manifest(manifest_path)
            except Exception as exc:
                raise StageError("load_manifest", str(exc)) from exc
            try:
                deltas, report = run_experiment(manifest, spec, predictor, threshold)
            except Exception as exc:
                raise StageError("experiment", str(exc)) from exc
            exp_dir = experiments_dir / exp_id
            exp_dir.mkdir(parents=True, exist_ok=True)
            (exp_dir / "deltas.csv").write_text(deltas_csv(deltas), encoding="utf-8")
            tmp = exp_dir / "report.json.tmp"
            tmp.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
            os.replace(tmp, exp_dir / "report.json")
            return exp_id

        job = jobs.submit("experiment", work)
        return job.to_dict()

    @app.get("/experiments/{ref}/report")
    async def experiment_report(ref: str) -> dict:
        exp_dir = resolve_result_dir(experiments_dir, ref)
        path = exp_dir / "report.json"
        if not path.is_file():
            raise ApiError(404, f"experiment {ref!r} has no report", "lookup")
        return json.loads(path.read_text(encoding="utf-8"))

    @app.get("/experiments/{ref}/deltas")
    async def experiment_deltas(ref: str) -> PlainTextResponse:
        exp_dir = resolve_result_dir(experiments_dir, ref)
        path = exp_dir / "deltas.csv"
        if not path.is_file():
            raise ApiError(404, f"experiment {ref!r} has no deltas", "lookup")
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="text/csv")

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
