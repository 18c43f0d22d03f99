/** DOM glue for the explorer: wires the API client, scatter projection,
 * grid paging and experiment flow to the page. All statistics shown come
 * verbatim from API responses. */

import { ApiClient, ApiError, BiasSpecPayload, ExperimentReport, Job, RunResult } from "./api.js";
import { parseDeltasCsv, DeltaRow } from "./csv.js";
import { overlayLayers, OverlayMode, pageCount, pageSlice } from "./grid.js";
import { BIN_COUNT, BIN_WIDTH, HIST_MIN, histogram } from "./hist.js";
import { reportRows, sortByDelta } from "./reporttable.js";
import { buildLegend, clusterColor, nearestPoint, project, ProjectedPoint } from "./scatter.js";
import { encodeHash, parseHash, ViewState } from "./state.js";

const state = new ViewState();
let api = new ApiClient(defaultBase());
let datasetId: string | null = null;
let yaw = 0.6;
let pitch = 0.4;
let projected: ProjectedPoint[] = [];

function defaultBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) return fromQuery;
  return window.location.origin.startsWith("http") ? window.location.origin : "http://127.0.0.1:8000";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const node = el<HTMLDivElement>("status");
  node.textContent = text;
  node.className = isError ? "status error" : "status";
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `[${err.stage}] ${err.message}`;
  return String(err);
}

// ---------------------------------------------------------------- scatter

function drawScatter(): void {
  const run = state.activeRun;
  const canvas = el<HTMLCanvasElement>("scatter");
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!run) return;
  projected = project(run.viz3d, yaw, pitch, canvas.width, canvas.height);
  const order = [...projected].sort((a, b) => a.depth - b.depth);
  for (const p of order) {
    const cluster = run.labels[p.index];
    const selected = state.selectedCluster === null || state.selectedCluster === cluster;
    ctx.globalAlpha = selected ? 0.95 : 0.18;
    ctx.fillStyle = clusterColor(cluster);
    ctx.beginPath();
    ctx.arc(p.x, p.y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.globalAlpha = 1.0;
}

function renderLegend(): void {
  const run = state.activeRun;
  const box = el<HTMLDivElement>("legend");
  box.innerHTML = "";
  if (!run) return;
  for (const entry of buildLegend(run.n_clusters, run.labels)) {
    const item = document.createElement("button");
    item.className =
      "legend-entry" + (state.selectedCluster === entry.cluster ? " active" : "");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = entry.color;
    item.appendChild(swatch);
    item.appendChild(
      document.createTextNode(`cluster ${entry.cluster} (${entry.count})`),
    );
    item.addEventListener("click", () => {
      state.selectCluster(state.selectedCluster === entry.cluster ? null : entry.cluster);
      syncHash();
      renderAll();
    });
    box.appendChild(item);
  }
}

function attachScatterEvents(): void {
  const canvas = el<HTMLCanvasElement>("scatter");
  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    last = [e.offsetX, e.offsetY];
  });
  window.addEventListener("mouseup", () => (dragging = false));
  canvas.addEventListener("mousemove", (e) => {
    if (dragging) {
      yaw += (e.offsetX - last[0]) * 0.01;
      pitch += (e.offsetY - last[1]) * 0.01;
      last = [e.offsetX, e.offsetY];
      drawScatter();
      return;
    }
    const hit = nearestPoint(projected, e.offsetX, e.offsetY);
    const tip = el<HTMLDivElement>("tooltip");
    if (hit === null || !state.activeRun) {
      tip.style.display = "none";
      return;
    }
    const sampleId = state.activeRun.ids[hit];
    tip.style.display = "block";
    tip.style.left = `${e.offsetX + 18}px`;
    tip.style.top = `${e.offsetY + 12}px`;
    tip.innerHTML = "";
    const caption = document.createElement("div");
    caption.textContent = `${sampleId} · cluster ${state.activeRun.labels[hit]}`;
    tip.appendChild(caption);
    if (datasetId) {
      const img = document.createElement("img");
      img.src = api.imageUrl(datasetId, sampleId);
      img.width = 96;
      tip.appendChild(img);
    }
  });
  canvas.addEventListener("click", (e) => {
    const hit = nearestPoint(projected, e.offsetX, e.offsetY);
    if (hit !== null && state.activeRun) {
      state.selectCluster(state.activeRun.labels[hit]);
      syncHash();
      renderAll();
    }
  });
}

// ------------------------------------------------------------------- grid

function renderGrid(): void {
  const run = state.activeRun;
  const box = el<HTMLDivElement>("grid");
  const pager = el<HTMLDivElement>("pager");
  box.innerHTML = "";
  pager.innerHTML = "";
  if (!run || state.selectedCluster === null) {
    box.textContent = run ? "select a cluster to inspect its members" : "";
    return;
  }
  const members = run.members[state.selectedCluster] ?? [];
  if (members.length === 0) {
    box.textContent = `cluster ${state.selectedCluster} is empty`;
    return;
  }
  const pages = pageCount(members.length);
  state.page = Math.min(state.page, pages - 1);
  for (const sampleId of pageSlice(members, state.page)) {
    const cell = document.createElement("figure");
    cell.className = "thumb";
    if (datasetId) {
      const stack = document.createElement("div");
      stack.className = "stack";
      for (const layer of overlayLayers(api, datasetId, sampleId, state.overlayMode)) {
        const img = document.createElement("img");
        img.src = layer.url;
        img.style.opacity = String(layer.alpha);
        stack.appendChild(img);
      }
      cell.appendChild(stack);
    }
    const caption = document.createElement("figcaption");
    caption.textContent = sampleId;
    cell.appendChild(caption);
    box.appendChild(cell);
  }
  const label = document.createElement("span");
  label.textContent = `page ${state.page + 1}/${pages} · ${members.length} members`;
  const prev = document.createElement("button");
  prev.textContent = "prev";
  prev.disabled = state.page === 0;
  prev.addEventListener("click", () => {
    state.page -= 1;
    renderGrid();
  });
  const next = document.createElement("button");
  next.textContent = "next";
  next.disabled = state.page >= pages - 1;
  next.addEventListener("click", () => {
    state.page += 1;
    renderGrid();
  });
  pager.append(prev, label, next);
}

// ------------------------------------------------------------ experiments

function specFromForm(): BiasSpecPayload {
  const kind = el<HTMLSelectElement>("bias-kind").value as BiasSpecPayload["kind"];
  const spec: BiasSpecPayload = {
    kind,
    seed: Number(el<HTMLInputElement>("bias-seed").value || "0"),
  };
  if (kind === "black_frame") {
    spec.frame_thickness_frac = Number(el<HTMLInputElement>("frame-frac").value || "0.08");
    spec.frame_shape = el<HTMLSelectElement>("frame-shape").value as "rect" | "round";
  }
  return spec;
}

function drawHistogram(deltas: DeltaRow[]): void {
  const canvas = el<HTMLCanvasElement>("hist");
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const bins = histogram(deltas.map((d) => d.delta_pp));
  const peak = Math.max(...bins, 1);
  const barW = canvas.width / BIN_COUNT;
  ctx.fillStyle = "#4e79a7";
  bins.forEach((count, i) => {
    const h = (count / peak) * (canvas.height - 18);
    ctx.fillRect(i * barW + 1, canvas.height - 14 - h, barW - 2, h);
  });
  ctx.fillStyle = "#444";
  ctx.font = "10px sans-serif";
  ctx.fillText(`${HIST_MIN}`, 2, canvas.height - 2);
  ctx.fillText("0", canvas.width / 2 - 3, canvas.height - 2);
  ctx.fillText("+100", canvas.width - 28, canvas.height - 2);
  ctx.fillText(`${BIN_WIDTH} pp bins`, canvas.width / 2 - 26, 10);
}

function renderReport(report: ExperimentReport, deltas: DeltaRow[]): void {
  const box = el<HTMLDivElement>("report");
  box.innerHTML = "";
  const table = document.createElement("table");
  table.innerHTML =
    "<tr><th>Type</th><th>n</th><th>Average |Δ| (pp)</th><th>Max |Δ| (pp)</th>" +
    "<th>Flips → malignant</th><th>Flips → benign</th></tr>";
  for (const r of reportRows(report)) {
    const row = document.createElement("tr");
    row.innerHTML =
      `<td>${r.type}</td><td>${r.n}</td><td>${r.meanAbsPp}</td><td>${r.maxAbsPp}</td>` +
      `<td class="flips-mal">${r.flipsToMalignant}</td>` +
      `<td class="flips-ben">${r.flipsToBenign}</td>`;
    table.appendChild(row);
  }
  box.appendChild(table);
  drawHistogram(deltas);
  renderSampleTable(deltas);
}

let sampleSortDesc = true;

function renderSampleTable(deltas: DeltaRow[]): void {
  const box = el<HTMLDivElement>("samples");
  box.innerHTML = "";
  const table = document.createElement("table");
  const head = document.createElement("tr");
  head.innerHTML =
    "<th>sample</th><th>label</th><th>before</th><th>after</th>" +
    `<th class="sortable">Δ pp ${sampleSortDesc ? "▼" : "▲"}</th><th>flip</th><th>pair</th>`;
  head.querySelector(".sortable")!.addEventListener("click", () => {
    sampleSortDesc = !sampleSortDesc;
    renderSampleTable(deltas);
  });
  table.appendChild(head);
  for (const d of sortByDelta(deltas, sampleSortDesc).slice(0, 50)) {
    const tr = document.createElement("tr");
    tr.innerHTML =
      `<td>${d.id}</td><td>${d.label}</td><td>${d.p_before.toFixed(3)}</td>` +
      `<td>${d.p_after.toFixed(3)}</td><td>${d.delta_pp.toFixed(1)}</td><td>${d.flip}</td>`;
    const pair = document.createElement("td");
    if (datasetId) {
      const before = document.createElement("img");
      before.src = api.imageUrl(datasetId, d.id);
      before.width = 40;
      pair.appendChild(before);
    }
    tr.appendChild(pair);
    table.appendChild(tr);
  }
  box.appendChild(table);
}

function renderHistory(): void {
  const list = el<HTMLUListElement>("history");
  list.innerHTML = "";
  for (const record of state.history) {
    const ben = record.report.per_class.benign;
    const mal = record.report.per_class.malignant;
    const item = document.createElement("li");
    item.textContent =
      `${record.spec.kind} (seed ${record.spec.seed}) · ` +
      `ben |Δ| ${ben.mean_abs_pp.toFixed(2)}pp, ${ben.flips_to_malignant}↑ · ` +
      `mal |Δ| ${mal.mean_abs_pp.toFixed(2)}pp, ${mal.flips_to_benign}↓`;
    list.appendChild(item);
  }
}

async function launchExperiment(): Promise<void> {
  const run = state.activeRun;
  if (!run) {
    setStatus("load a run before launching an experiment", true);
    return;
  }
  const spec = specFromForm();
  const manifest = String(run.config["dataset"]);
  try {
    setStatus("submitting experiment...");
    const job = await api.submitExperiment({
      manifest,
      bias: spec,
      predictor: { kind: "builtin_toy" },
      threshold: 0.5,
    });
    setStatus(`experiment ${job.id}: running...`);
    const done = await api.pollJob(job.id);
    const report = await api.getReport(done.result_ref ?? job.id);
    const deltas = parseDeltasCsv(await api.getDeltasCsv(done.result_ref ?? job.id));
    state.recordExperiment({ spec, report, jobId: job.id });
    renderReport(report, deltas);
    renderHistory();
    setStatus(`experiment ${job.id}: done`);
  } catch (err) {
    setStatus(describeError(err), true);
  }
}

// ------------------------------------------------------------- run loading

async function ensureDataset(run: RunResult): Promise<void> {
  try {
    const reg = await api.registerDataset(String(run.config["dataset"]));
    datasetId = reg.id;
  } catch {
    datasetId = null; // thumbnails unavailable (e.g. manifest moved)
  }
}

async function loadRun(ref: string): Promise<void> {
  try {
    setStatus(`loading ${ref}...`);
    let target = ref;
    try {
      const job: Job = await api.getJob(ref);
      if (job.state !== "done") {
        setStatus(`job ${ref}: ${job.state}...`);
        const done = await api.pollJob(ref);
        target = done.result_ref ?? ref;
      } else {
        target = job.result_ref ?? ref;
      }
    } catch {
      // not a job id; treat as run id
    }
    const run = await api.getRun(target);
    state.setRun(run);
    const fromHash = parseHash(window.location.hash);
    if (fromHash && fromHash.runId === ref && fromHash.cluster !== null
        && fromHash.cluster < run.n_clusters) {
      state.selectCluster(fromHash.cluster);
    }
    await ensureDataset(run);
    syncHash();
    renderAll();
    setStatus(`run ${run.run_id}: ${run.ids.length} samples, ${run.n_clusters} clusters`);
  } catch (err) {
    setStatus(describeError(err), true);
  }
}

function syncHash(): void {
  if (state.activeRun) {
    history.replaceState(null, "", encodeHash(state.activeRun.run_id, state.selectedCluster));
  }
}

function renderAll(): void {
  drawScatter();
  renderLegend();
  renderGrid();
}

function init(): void {
  el<HTMLInputElement>("api-base").value = api.base;
  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    api = new ApiClient(el<HTMLInputElement>("api-base").value);
  });
  el<HTMLButtonElement>("load-run").addEventListener("click", () => {
    void loadRun(el<HTMLInputElement>("run-id").value.trim());
  });
  el<HTMLButtonElement>("launch").addEventListener("click", () => void launchExperiment());
  for (const mode of ["image", "attribution", "blend"] as OverlayMode[]) {
    el<HTMLInputElement>(`overlay-${mode}`).addEventListener("change", () => {
      state.overlayMode = mode;
      renderGrid();
    });
  }
  el<HTMLSelectElement>("bias-kind").addEventListener("change", () => {
    const isFrame = el<HTMLSelectElement>("bias-kind").value === "black_frame";
    el<HTMLDivElement>("frame-options").style.display = isFrame ? "block" : "none";
  });
  attachScatterEvents();
  const initial = parseHash(window.location.hash);
  if (initial) {
    el<HTMLInputElement>("run-id").value = initial.runId;
    void loadRun(initial.runId);
  }
}

init();
