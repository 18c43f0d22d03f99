"""Command-line interface: run the pipeline, batch-insert bias artifacts,
evaluate counterfactual experiments, render reports, serve the API."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .biasgen import BIAS_KINDS, BiasSpec, apply_bias
from .counterfactual import PredictorRef, run_experiment
from .pipeline import RunConfig, StageError, execute_run, load_run
from .records import load_image, load_manifest, save_image
from . import report as rpt


@click.group()
def main() -> None:
    """Dataset bias auditing: cluster images with their attribution maps,
    then confirm artifact hypotheses by counterfactual insertion."""


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _bias_spec_from_options(kind: str, seed: int, frame_frac: float, frame_shape: str) -> BiasSpec:
    return BiasSpec(kind=kind, seed=seed, frame_thickness_frac=frame_frac, frame_shape=frame_shape)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--runs-dir", default="runs", show_default=True, type=click.Path(file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render the 3-D scatter (and selection curve) into the run directory.")
def run(config_path: str, runs_dir: str, figures: bool) -> None:
    """Execute a pipeline run from a JSON config file."""
    try:
        cfg = RunConfig.from_dict(json.loads(Path(config_path).read_text(encoding="utf-8")))
    except (ValueError, KeyError) as exc:
        _fail(f"[config] {exc}")
    try:
        result = execute_run(cfg, runs_dir)
    except StageError as exc:
        _fail(str(exc))
    run_dir = Path(runs_dir) / result.run_id
    if figures:
        rpt.run_report_figures(run_dir, result)
    click.echo(rpt.render_run_summary(result), nl=False)
    click.echo(f"run directory: {run_dir}")


@main.command("insert-bias")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bias", "kind", required=True, type=click.Choice(BIAS_KINDS))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--frame-frac", default=0.08, show_default=True, type=float)
@click.option("--frame-shape", default="rect", show_default=True, type=click.Choice(["rect", "round"]))
def insert_bias(manifest_path: str, kind: str, seed: int, out_dir: str,
                frame_frac: float, frame_shape: str) -> None:
    """Write artifact-modified copies of every manifest image."""
    try:
        manifest = load_manifest(manifest_path)
        spec = _bias_spec_from_options(kind, seed, frame_frac, frame_shape)
    except ValueError as exc:
        _fail(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for entry in manifest.entries:
        record = load_image(entry.image_path, sample_id=entry.id, label=entry.label)
        modified = apply_bias(record.pixels, spec, entry.id)
        target = out / f"{entry.image_path.stem}_biased.png"
        save_image(modified, target)
        click.echo(f"{entry.id} -> {target}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--bias", "kind", required=True, type=click.Choice(BIAS_KINDS))
@click.option("--predictor", default="builtin", show_default=True,
              type=click.Choice(["builtin", "remote"]))
@click.option("--endpoint", default=None, help="Remote predictor URL (required with --predictor remote).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threshold", default=0.5, show_default=True, type=float)
@click.option("--frame-frac", default=0.08, show_default=True, type=float)
@click.option("--frame-shape", default="rect", show_default=True, type=click.Choice(["rect", "round"]))
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Also write report.json, deltas.csv and the delta histogram here.")
def evaluate(manifest_path: str, kind: str, predictor: str, endpoint: str | None, seed: int,
             threshold: float, frame_frac: float, frame_shape: str, out_dir: str | None) -> None:
    """Run a counterfactual experiment; print the report JSON and table."""
    try:
        manifest = load_manifest(manifest_path)
        spec = _bias_spec_from_options(kind, seed, frame_frac, frame_shape)
        pred = (
            PredictorRef()
            if predictor == "builtin"
            else PredictorRef(kind="remote", endpoint=endpoint)
        )
    except ValueError as exc:
        _fail(str(exc))
    try:
        deltas, result = run_experiment(manifest, spec, pred, threshold)
    except Exception as exc:
        _fail(f"[experiment] {exc}")
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    click.echo(rpt.render_experiment_table(result), nl=False)
    click.echo(rpt.render_flip_summary(result), nl=False)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out / "deltas.csv").write_text(rpt.deltas_csv(deltas), encoding="utf-8")
        rpt.delta_histogram_figure(deltas, out / "deltas_hist.png")
        click.echo(f"experiment directory: {out}")


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True)
def report(directory: str, figures: bool) -> None:
    """Render the report for a run or experiment directory.

    Figures are written into the directory next to the delimited output.
    """
    d = Path(directory)
    if (d / "clusters.json").is_file():
        result = load_run(d)
        if figures:
            rpt.run_report_figures(d, result)
        click.echo(rpt.render_run_summary(result), nl=False)
    elif (d / "report.json").is_file():
        from .counterfactual import ClassStats, CounterfactualReport

        raw = json.loads((d / "report.json").read_text(encoding="utf-8"))
        result = CounterfactualReport(
            per_class={k: ClassStats(**v) for k, v in raw["per_class"].items()},
            threshold=raw["threshold"],
            bias_spec=BiasSpec.from_dict(raw["bias_spec"]),
        )
        if figures and (d / "deltas.csv").is_file():
            deltas = _deltas_from_csv(d / "deltas.csv")
            rpt.delta_histogram_figure(deltas, d / "deltas_hist.png")
        click.echo(rpt.render_experiment_table(result), nl=False)
        click.echo(rpt.render_flip_summary(result), nl=False)
    else:
        _fail(f"{d} contains neither clusters.json nor report.json")


def _deltas_from_csv(path: Path):
    from .counterfactual import PredictionDelta

    deltas = []
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        sid, label, before, after, pp, flip = line.split(",")
        deltas.append(
            PredictionDelta(
                sample_id=sid,
                label=label,
                p_before=float(before),
                p_after=float(after),
                delta_pp=float(pp),
                flipped_to_malignant=flip == "to_malignant",
                flipped_to_benign=flip == "to_benign",
            )
        )
    return deltas


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-root", default=".", show_default=True, type=click.Path(file_okay=False))
@click.option("--workers", default=1, show_default=True, type=int, help="Job worker threads.")
@click.option("--ui", "ui_dir", default=None, type=click.Path(file_okay=False),
              help="Static directory to serve at / (e.g. frontend/dist).")
def serve(port: int, host: str, data_root: str, workers: int, ui_dir: str | None) -> None:
    """Serve the HTTP API (and optionally the explorer UI)."""
    import uvicorn

    from .service import create_app

    app = create_app(data_root, workers=workers, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
