/** Viewer panels: rendered view, open-vocabulary query, scene edits.
 *
 * All DOM content is recomputed from `state` by `sync()`, so the display is
 * a pure function of the latest server responses: re-running sync() never
 * changes what is shown.
 */
import type { EditRequest, QueryResponse, SplatClient } from "./api.js";
import { decodeRle } from "./rle.js";
import { bytesToDataUrl, composeOverlay, hexToRgb, relevancyPercent } from "./overlay.js";

export interface AppState {
  frame: number;
  numFrames: number;
  prompt: string;
  threshold: number;
  result: QueryResponse | null;
  selectedLabel: string | null;
  busy: "idle" | "querying" | "editing";
  error: string | null;
}

export interface AppHandle {
  state: AppState;
  refresh(): Promise<void>;
  runQuery(): Promise<void>;
  applyEdit(request: EditRequest): Promise<void>;
  lastRender(): Uint8Array | null;
  overlayBuffer(): Uint8ClampedArray | null;
  sync(): void;
}

const PANEL_HTML = `
<section id="view-panel">
  <h2>View</h2>
  <div class="stage">
    <img id="render-img" alt="rendered frame">
    <canvas id="overlay-canvas"></canvas>
  </div>
  <label>frame
    <input id="frame-scrubber" type="range" min="0" max="0" step="1" value="0">
    <span id="frame-label">0</span>
  </label>
</section>
<section id="query-panel">
  <h2>Query</h2>
  <form id="query-form">
    <input id="prompt-input" type="text" placeholder="e.g. coffee" autocomplete="off">
    <button id="query-btn" type="submit">query</button>
  </form>
  <label>threshold
    <input id="threshold-slider" type="range" min="0" max="1" step="0.05" value="0.5">
    <span id="threshold-value">0.50</span>
  </label>
  <ul id="ranked-list"></ul>
</section>
<section id="edit-panel">
  <h2>Edit</h2>
  <label>color <input id="recolor-color" type="color" value="#19e633"></label>
  <button id="recolor-btn" type="button">recolor</button>
  <button id="delete-btn" type="button">delete</button>
  <label>offset
    <input id="offset-x" type="number" step="0.1" value="0.3">
    <input id="offset-y" type="number" step="0.1" value="0">
    <input id="offset-z" type="number" step="0.1" value="0">
  </label>
  <button id="translate-btn" type="button">translate</button>
  <div id="status-line"></div>
</section>
`;

function drawOverlay(
  canvas: HTMLCanvasElement,
  width: number,
  height: number,
  buffer: Uint8ClampedArray | null,
): void {
  canvas.width = width;
  canvas.height = height;
  (canvas as any).__overlayBuffer = buffer; // inspectable where 2d canvas is unavailable
  if (typeof ImageData === "undefined") return; // no 2d pipeline (e.g. bare jsdom)
  let ctx: CanvasRenderingContext2D | null = null;
  try {
    ctx = canvas.getContext("2d");
  } catch {
    ctx = null;
  }
  if (!ctx) return;
  ctx.clearRect(0, 0, width, height);
  if (buffer) {
    ctx.putImageData(new ImageData(buffer as Uint8ClampedArray<ArrayBuffer>, width, height), 0, 0);
  }
}

export function mountApp(root: HTMLElement, client: SplatClient): AppHandle {
  root.innerHTML = PANEL_HTML;
  const el = <T extends HTMLElement>(id: string): T =>
    root.querySelector(`#${id}`) as T;

  const renderImg = el<HTMLImageElement>("render-img");
  const overlayCanvas = el<HTMLCanvasElement>("overlay-canvas");
  const scrubber = el<HTMLInputElement>("frame-scrubber");
  const frameLabel = el<HTMLSpanElement>("frame-label");
  const form = el<HTMLFormElement>("query-form");
  const promptInput = el<HTMLInputElement>("prompt-input");
  const queryBtn = el<HTMLButtonElement>("query-btn");
  const slider = el<HTMLInputElement>("threshold-slider");
  const thresholdValue = el<HTMLSpanElement>("threshold-value");
  const rankedList = el<HTMLUListElement>("ranked-list");
  const colorInput = el<HTMLInputElement>("recolor-color");
  const statusLine = el<HTMLDivElement>("status-line");
  const editButtons = [
    el<HTMLButtonElement>("recolor-btn"),
    el<HTMLButtonElement>("delete-btn"),
    el<HTMLButtonElement>("translate-btn"),
  ];

  const state: AppState = {
    frame: 0,
    numFrames: 1,
    prompt: "",
    threshold: 0.5,
    result: null,
    selectedLabel: null,
    busy: "idle",
    error: null,
  };
  let lastRender: Uint8Array | null = null;
  let overlay: Uint8ClampedArray | null = null;

  function selectedHit() {
    if (!state.result || state.selectedLabel === null) return null;
    return state.result.ranked.find((hit) => hit.label === state.selectedLabel) ?? null;
  }

  function sync(): void {
    scrubber.max = String(Math.max(0, state.numFrames - 1));
    scrubber.value = String(state.frame);
    frameLabel.textContent = `${state.frame} / ${state.numFrames - 1}`;
    slider.value = String(state.threshold);
    thresholdValue.textContent = state.threshold.toFixed(2);

    rankedList.innerHTML = "";
    for (const hit of state.result?.ranked ?? []) {
      const item = document.createElement("li");
      item.className = "ranked-item" + (hit.label === state.selectedLabel ? " selected" : "");
      item.dataset.label = hit.label;
      const text = document.createElement("span");
      text.className = "label-text";
      text.textContent = hit.label;
      const bar = document.createElement("div");
      bar.className = "relevancy-bar";
      bar.style.width = `${relevancyPercent(hit.relevancy)}%`;
      const value = document.createElement("span");
      value.className = "relevancy-value";
      value.textContent = hit.relevancy.toFixed(3);
      item.append(text, bar, value);
      item.addEventListener("click", () => {
        state.selectedLabel = hit.label;
        sync();
      });
      rankedList.appendChild(item);
    }

    const hit = selectedHit();
    if (hit) {
      const [height, width] = hit.mask.size;
      overlay = composeOverlay(width, height, decodeRle(hit.mask));
      drawOverlay(overlayCanvas, width, height, overlay);
    } else {
      overlay = null;
      drawOverlay(overlayCanvas, overlayCanvas.width || 1, overlayCanvas.height || 1, null);
    }

    const editsLocked = state.busy !== "idle" || !state.selectedLabel;
    for (const button of editButtons) button.disabled = editsLocked;
    queryBtn.disabled = state.busy !== "idle";
    statusLine.textContent = state.error ?? (state.busy === "idle" ? "" : state.busy);
  }

  async function refresh(): Promise<void> {
    lastRender = await client.renderFrame(state.frame);
    renderImg.src = bytesToDataUrl(lastRender);
  }

  async function runQuery(): Promise<void> {
    if (state.busy !== "idle" || !state.prompt) return;
    state.busy = "querying";
    state.error = null;
    sync();
    try {
      const result = await client.query(state.prompt, state.threshold, state.frame);
      state.result = result;
      const stillThere = result.ranked.some((hit) => hit.label === state.selectedLabel);
      state.selectedLabel = stillThere ? state.selectedLabel : result.ranked[0]?.label ?? null;
    } catch (error) {
      state.error = String(error);
      state.result = null;
      state.selectedLabel = null;
    } finally {
      state.busy = "idle";
      sync();
    }
  }

  async function applyEdit(request: EditRequest): Promise<void> {
    if (state.busy !== "idle") return;
    state.busy = "editing";
    state.error = null;
    sync();
    try {
      await client.edit(request);
      await refresh();
    } catch (error) {
      state.error = String(error);
    } finally {
      state.busy = "idle";
      sync();
    }
    if (state.result) await runQuery(); // masks change with the scene
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    state.prompt = promptInput.value.trim();
    void runQuery();
  });
  slider.addEventListener("input", () => {
    state.threshold = Number(slider.value);
    sync();
    if (state.prompt) void runQuery(); // live re-query at the new threshold
  });
  scrubber.addEventListener("input", () => {
    state.frame = Number(scrubber.value);
    sync();
    void refresh().then(() => (state.prompt && state.result ? runQuery() : undefined));
  });
  el<HTMLButtonElement>("recolor-btn").addEventListener("click", () => {
    if (!state.selectedLabel) return;
    void applyEdit({
      op: "recolor",
      label: state.selectedLabel,
      params: { rgb: hexToRgb(colorInput.value) },
    });
  });
  el<HTMLButtonElement>("delete-btn").addEventListener("click", () => {
    if (!state.selectedLabel) return;
    void applyEdit({ op: "delete", label: state.selectedLabel });
  });
  el<HTMLButtonElement>("translate-btn").addEventListener("click", () => {
    if (!state.selectedLabel) return;
    const offset: [number, number, number] = [
      Number(el<HTMLInputElement>("offset-x").value),
      Number(el<HTMLInputElement>("offset-y").value),
      Number(el<HTMLInputElement>("offset-z").value),
    ];
    void applyEdit({ op: "translate", label: state.selectedLabel, params: { offset } });
  });

  void client
    .summary()
    .then((summary) => {
      state.numFrames = summary.num_frames;
      sync();
      return refresh();
    })
    .catch((error) => {
      state.error = String(error);
      sync();
    });
  sync();

  return {
    state,
    refresh,
    runQuery,
    applyEdit,
    lastRender: () => lastRender,
    overlayBuffer: () => overlay,
    sync,
  };
}
