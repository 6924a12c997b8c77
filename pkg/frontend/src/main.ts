import { ApiError, SessionApi } from "./api.js";
import { buildScene, paintScene, Viewport } from "./render.js";
import { parseParamInput, SessionView } from "./state.js";
import type { Frame, MapDoc } from "./types.js";

const TUNABLE_FIELDS = [
  "particle_count", "group_link_distance", "convergence_weight_fraction",
  "resample_ess_fraction", "sigma_range_w", "sigma_bearing_w",
  "sigma_width_w", "sigma_heading_w", "sigma_forward_per_meter",
  "sigma_forward_floor", "sigma_dtheta_per_rad", "sigma_dtheta_floor",
];

const api = new SessionApi("");
const view = new SessionView();
let mapDoc: MapDoc | null = null;
let playing = false;

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const viewport = new Viewport(canvas.width, canvas.height);
const statusEl = document.getElementById("status")!;
const metricsEl = document.getElementById("metrics")!;
const historyCanvas = document.getElementById("history") as HTMLCanvasElement;
const historyCtx = historyCanvas.getContext("2d")!;
const logSelect = document.getElementById("log-select") as HTMLSelectElement;
const modeSelect = document.getElementById("mode-select") as HTMLSelectElement;
const paramsForm = document.getElementById("params")!;

function setStatus(text: string, isError = false): void {
  statusEl.textContent = text;
  statusEl.className = isError ? "error" : "";
}

function redraw(): void {
  paintScene(ctx, buildScene(mapDoc, view.frame, viewport), canvas.width,
             canvas.height);
  drawHistory();
  const f = view.frame;
  if (f) {
    metricsEl.textContent =
      `t=${f.t.toFixed(1)} s  step ${view.stepIndex}/${view.nSteps}` +
      `  error ${f.metrics.final_error.toFixed(2)} m` +
      `  traveled ${f.metrics.distance_traveled.toFixed(2)} m` +
      `  groups ${f.group_count}` + (f.converged ? "  CONVERGED" : "");
  }
}

function drawHistory(): void {
  const w = historyCanvas.width;
  const h = historyCanvas.height;
  historyCtx.clearRect(0, 0, w, h);
  historyCtx.fillStyle = "#fafafa";
  historyCtx.fillRect(0, 0, w, h);
  const hist = view.history;
  if (hist.length < 2) return;
  const maxErr = Math.max(1e-6, ...hist.map((p) => p.final_error));
  const maxGroups = Math.max(1, ...hist.map((p) => p.group_count));
  const x = (i: number) => (i / (hist.length - 1)) * (w - 10) + 5;
  historyCtx.strokeStyle = "#d6551f";
  historyCtx.beginPath();
  hist.forEach((p, i) => {
    const y = h - 5 - (p.final_error / maxErr) * (h - 10);
    i === 0 ? historyCtx.moveTo(x(i), y) : historyCtx.lineTo(x(i), y);
  });
  historyCtx.stroke();
  historyCtx.strokeStyle = "#1f6fd6";
  historyCtx.beginPath();
  hist.forEach((p, i) => {
    const y = h - 5 - (p.group_count / maxGroups) * (h - 10);
    i === 0 ? historyCtx.moveTo(x(i), y) : historyCtx.lineTo(x(i), y);
  });
  historyCtx.stroke();
}

function renderParamsForm(): void {
  paramsForm.innerHTML = "";
  for (const name of TUNABLE_FIELDS) {
    const value = view.paramValue(name);
    if (value === undefined) continue;
    const row = document.createElement("label");
    row.className = "param-row";
    const span = document.createElement("span");
    span.textContent = name;
    const input = document.createElement("input");
    input.value = String(value);
    input.disabled = view.isLocked(name);
    input.addEventListener("change", () => void submitParam(name, input));
    row.append(span, input);
    paramsForm.append(row);
  }
}

async function submitParam(name: string, input: HTMLInputElement): Promise<void> {
  let value: number;
  try {
    value = parseParamInput(name, input.value);
  } catch (err) {
    setStatus(String(err), true);
    input.value = String(view.paramValue(name));
    return;
  }
  view.beginEdit(name);
  input.disabled = true;
  try {
    const ack = await api.patchParams(view.sessionId, { [name]: value });
    view.acknowledge(ack.params);
    setStatus(`${name} = ${ack.params[name]}`);
  } catch (err) {
    view.rejectEdit(name);
    setStatus(err instanceof ApiError ? `rejected: ${err.message}` : String(err),
              true);
  }
  renderParamsForm();
}

async function attachSession(): Promise<void> {
  playing = false;
  const log = logSelect.value;
  const sessionId = await api.createSession({
    log,
    mode: modeSelect.value,
    seed: Number((document.getElementById("seed") as HTMLInputElement).value) || 0,
    particle_cap: 2000,
  });
  view.attach(await api.getState(sessionId));
  renderParamsForm();
  redraw();
  setStatus(`session ${sessionId} on ${log}`);
}

async function stepN(n: number): Promise<void> {
  if (!view.sessionId) return;
  await api.step(view.sessionId, n, (frame: Frame) => {
    view.applyFrame(frame);
    redraw();
  }, 2000);
  if (view.exhausted) {
    playing = false;
    setStatus("log exhausted");
  }
}

async function playLoop(): Promise<void> {
  while (playing && !view.exhausted) {
    await stepN(5);
  }
}

async function reset(init: "area" | "cluster", side?: number): Promise<void> {
  if (!view.sessionId) return;
  playing = false;
  const body: Record<string, unknown> = { init };
  if (side !== undefined) body.side = side;
  view.resetTo(await api.reset(view.sessionId, body));
  redraw();
  setStatus(`reset (${init}${side ? ` ${side} m` : ""})`);
}

function wireControls(): void {
  document.getElementById("attach")!.addEventListener("click", () => {
    attachSession().catch((e) => setStatus(String(e), true));
  });
  document.getElementById("step1")!.addEventListener("click", () => void stepN(1));
  document.getElementById("step25")!.addEventListener("click", () => void stepN(25));
  document.getElementById("play")!.addEventListener("click", () => {
    if (!playing) {
      playing = true;
      void playLoop();
    }
  });
  document.getElementById("pause")!.addEventListener("click", () => {
    playing = false;
  });
  document.getElementById("reset-large")!.addEventListener(
    "click", () => void reset("area", 30));
  document.getElementById("reset-small")!.addEventListener(
    "click", () => void reset("area", 10));
  document.getElementById("reset-cluster")!.addEventListener(
    "click", () => void reset("cluster"));

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.offsetX;
    lastY = e.offsetY;
  });
  canvas.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    viewport.pan(e.offsetX - lastX, e.offsetY - lastY);
    lastX = e.offsetX;
    lastY = e.offsetY;
    redraw();
  });
  canvas.addEventListener("mouseup", () => (dragging = false));
  canvas.addEventListener("mouseleave", () => (dragging = false));
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    viewport.zoom(e.deltaY < 0 ? 1.15 : 1 / 1.15, e.offsetX, e.offsetY);
    redraw();
  });
}

async function boot(): Promise<void> {
  wireControls();
  try {
    mapDoc = (await api.fetchMap()) as MapDoc;
    viewport.fit(mapDoc);
  } catch (err) {
    setStatus(`map unavailable: ${String(err)}`, true);
  }
  const { logs } = await api.listLogs();
  for (const log of logs) {
    const option = document.createElement("option");
    option.value = log.name;
    option.textContent = `${log.name} (${log.kind}, ${log.duration.toFixed(0)} s)`;
    logSelect.append(option);
  }
  redraw();
  setStatus(`${logs.length} logs available; attach a session to begin`);
}

void boot();
