/** Browser studio wiring: drawing surface, style gallery, generation panel,
 * history. Pure DOM, no framework; all model work happens server-side. */

import { ApiError, StudioClient } from "./api.js";
import {
  CanvasState,
  Stroke,
  clampBrush,
  createCanvasState,
  exportCanvas,
  isAllWhite,
} from "./raster.js";

const SERVER_URL = (window as any).FONTSTYLER_SERVER ?? "http://127.0.0.1:8000";
const EXPORT_SIZE = (window as any).FONTSTYLER_IMAGE_SIZE ?? 64;
const HISTORY_LIMIT = 8;

interface HistoryItem {
  content: string;
  output: string;
  style: string;
  useRag: boolean;
  reference?: string;
  stamp: string;
}

interface LastRequest {
  content: string;
  style: string;
  useRag: boolean;
}

const client = new StudioClient(SERVER_URL);
const state: CanvasState = createCanvasState(EXPORT_SIZE);
let brushWidth = 2;
let uploadedContent: string | null = null;
let uploadedStyle: string | null = null;
let inflight: AbortController | null = null;
let lastRequest: LastRequest | null = null;
const history: HistoryItem[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function redraw(): void {
  const canvas = el<HTMLCanvasElement>("draw");
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#111111";
  ctx.lineCap = "round";
  ctx.lineJoin = "round";
  const scale = state.surfaceSize / state.exportSize;
  for (const stroke of state.strokes) {
    ctx.lineWidth = clampBrush(stroke.width) * scale;
    ctx.beginPath();
    const pts = stroke.points;
    if (pts.length === 1) {
      ctx.arc(pts[0].x, pts[0].y, ctx.lineWidth / 2, 0, Math.PI * 2);
      ctx.fillStyle = "#111111";
      ctx.fill();
      continue;
    }
    ctx.moveTo(pts[0].x, pts[0].y);
    for (const p of pts.slice(1)) ctx.lineTo(p.x, p.y);
    ctx.stroke();
  }
}

function surfacePoint(canvas: HTMLCanvasElement, ev: PointerEvent) {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * state.surfaceSize,
    y: ((ev.clientY - rect.top) / rect.height) * state.surfaceSize,
  };
}

function setError(message: string | null): void {
  const box = el<HTMLDivElement>("error");
  box.textContent = message ?? "";
  box.style.display = message ? "block" : "none";
  el<HTMLButtonElement>("retry").style.display = message && lastRequest ? "inline-block" : "none";
}

function setStatus(message: string): void {
  el<HTMLSpanElement>("status").textContent = message;
}

function currentContent(): string {
  if (uploadedContent) return uploadedContent;
  return exportCanvas(state).base64;
}

function renderHistory(): void {
  const panel = el<HTMLDivElement>("history");
  panel.innerHTML = "";
  for (const item of history) {
    const card = document.createElement("div");
    card.className = "card";
    const meta = item.useRag ? `${item.style} · RAG ref ${item.reference ?? "?"}` : item.style;
    card.innerHTML = `
      <div class="pair">
        <img src="data:image/png;base64,${item.content}" alt="input" />
        <span>→</span>
        <img src="data:image/png;base64,${item.output}" alt="output" />
      </div>
      <div class="meta">${meta} · ${item.stamp}</div>`;
    panel.appendChild(card);
  }
}

async function runGeneration(req: LastRequest): Promise<void> {
  inflight?.abort(); // cancel-and-replace: at most one request in flight
  const controller = new AbortController();
  inflight = controller;
  lastRequest = req;
  setError(null);
  setStatus("generating…");
  try {
    const result = await client.generate(
      { content: req.content, style: req.style, useRag: req.useRag },
      controller.signal
    );
    if (controller.signal.aborted) return;
    el<HTMLImageElement>("result-input").src = `data:image/png;base64,${req.content}`;
    el<HTMLImageElement>("result-output").src = `data:image/png;base64,${result.imageBase64}`;
    el<HTMLDivElement>("provenance").textContent = result.referenceCharcode
      ? `reference character: ${result.referenceCharcode}`
      : "reference: provided image";
    history.unshift({
      content: req.content,
      output: result.imageBase64,
      style: req.style,
      useRag: req.useRag,
      reference: result.referenceCharcode,
      stamp: new Date().toLocaleTimeString(),
    });
    history.splice(HISTORY_LIMIT);
    renderHistory();
    setStatus("done");
  } catch (err) {
    if (controller.signal.aborted) return;
    if (err instanceof ApiError) {
      setError(`server error ${err.status}: ${err.message}`);
    } else {
      setError(`request failed: ${(err as Error).message}`);
    }
    setStatus("error");
  } finally {
    if (inflight === controller) inflight = null;
  }
}

function onGenerate(): void {
  const useRag = el<HTMLInputElement>("use-rag").checked;
  const styleSelect = el<HTMLSelectElement>("style-select");
  const style = uploadedStyle && !useRag && styleSelect.value === "__uploaded__"
    ? uploadedStyle
    : styleSelect.value;
  if (!style || style === "__uploaded__") {
    setError("pick a style or upload a style image");
    return;
  }
  const exported = exportCanvas(state);
  if (!uploadedContent && isAllWhite(exported)) {
    setError("canvas is empty: draw something or upload a glyph");
    return;
  }
  void runGeneration({ content: currentContent(), style, useRag });
}

async function loadStyles(): Promise<void> {
  try {
    const styles = await client.styles();
    const select = el<HTMLSelectElement>("style-select");
    select.innerHTML = "";
    for (const s of styles) {
      const opt = document.createElement("option");
      opt.value = s;
      opt.textContent = s;
      select.appendChild(opt);
    }
    if (uploadedStyle) {
      const opt = document.createElement("option");
      opt.value = "__uploaded__";
      opt.textContent = "(uploaded style image)";
      select.appendChild(opt);
    }
    setStatus(`connected · ${styles.length} styles`);
  } catch (err) {
    setError(`cannot reach server at ${SERVER_URL}: ${(err as Error).message}`);
  }
}

function readFileBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}

export function boot(): void {
  const canvas = el<HTMLCanvasElement>("draw");
  canvas.width = state.surfaceSize;
  canvas.height = state.surfaceSize;
  let active: Stroke | null = null;

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    active = { points: [surfacePoint(canvas, ev)], width: brushWidth };
    state.strokes.push(active);
    uploadedContent = null;
    redraw();
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!active) return;
    active.points.push(surfacePoint(canvas, ev));
    redraw();
  });
  const finish = () => {
    active = null;
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointercancel", finish);

  el<HTMLInputElement>("brush").addEventListener("input", (ev) => {
    brushWidth = clampBrush(Number((ev.target as HTMLInputElement).value));
  });
  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    state.strokes.length = 0;
    uploadedContent = null;
    redraw();
  });
  el<HTMLButtonElement>("generate").addEventListener("click", onGenerate);
  el<HTMLButtonElement>("retry").addEventListener("click", () => {
    if (lastRequest) void runGeneration(lastRequest);
  });
  el<HTMLInputElement>("upload-content").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) {
      uploadedContent = await readFileBase64(file);
      setStatus(`content: ${file.name}`);
    }
  });
  el<HTMLInputElement>("upload-style").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) {
      uploadedStyle = await readFileBase64(file);
      await loadStyles();
      el<HTMLSelectElement>("style-select").value = "__uploaded__";
    }
  });

  redraw();
  void loadStyles();
}

if (typeof document !== "undefined" && document.getElementById("draw")) {
  boot();
}
