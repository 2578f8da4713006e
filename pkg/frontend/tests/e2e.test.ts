/** End-to-end: the viewer UI driving a live scene service.
 *
 * globalSetup spawned `semsplat serve` on a temp copy of the viewer fixture
 * scene with the golden dataset's cameras and the offline query lookup. These
 * tests mount the real app in jsdom and let it talk to that server over HTTP.
 * The recolor test runs last because it mutates the served scene.
 */
import { Buffer } from "node:buffer";
import { existsSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { PNG } from "pngjs";
import { beforeAll, describe, expect, it } from "vitest";
import { SplatClient } from "../src/api.js";
import { mountApp, type AppHandle } from "../src/app.js";
import { decodeRle, maskArea } from "../src/rle.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const STATE_FILE = join(HERE, ".e2e-server.json");

function serverUrl(): string {
  if (!existsSync(STATE_FILE)) {
    throw new Error("missing tests/.e2e-server.json — globalSetup did not run");
  }
  const state = JSON.parse(readFileSync(STATE_FILE, "utf8"));
  if (!state.url) throw new Error(state.error ?? "e2e server failed to start");
  return state.url;
}

async function waitFor(cond: () => boolean, what: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

function mountViewer(client: SplatClient): AppHandle {
  document.body.innerHTML = '<div id="app"></div>';
  return mountApp(document.getElementById("app") as HTMLElement, client);
}

async function submitPrompt(handle: AppHandle, prompt: string): Promise<void> {
  (document.querySelector("#prompt-input") as HTMLInputElement).value = prompt;
  (document.querySelector("#query-form") as HTMLFormElement).dispatchEvent(
    new Event("submit", { bubbles: true, cancelable: true }),
  );
  await waitFor(
    () => handle.state.busy === "idle" && (handle.state.result !== null || handle.state.error !== null),
    `query "${prompt}"`,
  );
  if (handle.state.error) throw new Error(handle.state.error);
}

describe("viewer against a live scene service", () => {
  let client: SplatClient;

  beforeAll(() => {
    client = new SplatClient(serverUrl());
  });

  it("loads the scene summary and displays a rendered frame", async () => {
    const summary = await client.summary();
    expect(summary.dictionary).toContain("coffee machine");
    expect(summary.num_frames).toBe(10);

    const handle = mountViewer(client);
    await waitFor(() => handle.state.numFrames === 10, "summary load");
    await waitFor(() => handle.lastRender() !== null, "first render");
    const img = document.querySelector("#render-img") as HTMLImageElement;
    expect(img.src.startsWith("data:image/png;base64,")).toBe(true);
  });

  it('querying "coffee" displays the "coffee machine" label with its overlay', async () => {
    const handle = mountViewer(client);
    await waitFor(() => handle.state.numFrames === 10, "summary load");
    await submitPrompt(handle, "coffee");

    const firstLabel = document.querySelector("li.ranked-item .label-text");
    expect(firstLabel?.textContent).toBe("coffee machine");
    const hit = handle.state.result!.ranked[0];
    expect(hit.label).toBe("coffee machine");
    expect(hit.relevancy).toBeGreaterThan(0.5);

    const mask = decodeRle(hit.mask);
    expect(maskArea(mask)).toBeGreaterThan(100);
    const overlay = handle.overlayBuffer();
    expect(overlay).not.toBeNull();
    let mismatched = 0;
    for (let i = 0; i < mask.length; i++) {
      const alpha = overlay![i * 4 + 3];
      if ((mask[i] && alpha === 0) || (!mask[i] && alpha !== 0)) mismatched++;
    }
    expect(mismatched).toBe(0);
    const canvas = document.querySelector("#overlay-canvas") as HTMLCanvasElement;
    expect(canvas.width).toBe(hit.mask.size[1]);
    expect(canvas.height).toBe(hit.mask.size[0]);
  });

  it("threshold 1.0 yields an empty ranked list", async () => {
    const handle = mountViewer(client);
    await waitFor(() => handle.state.numFrames === 10, "summary load");
    await submitPrompt(handle, "coffee");
    expect(document.querySelectorAll("li.ranked-item").length).toBeGreaterThan(0);

    const slider = document.querySelector("#threshold-slider") as HTMLInputElement;
    slider.value = "1";
    slider.dispatchEvent(new Event("input", { bubbles: true }));
    await waitFor(
      () => handle.state.busy === "idle" && handle.state.result?.threshold_used === 1,
      "re-query at threshold 1.0",
    );
    expect(document.querySelectorAll("li.ranked-item").length).toBe(0);
    expect(handle.overlayBuffer()).toBeNull();
  });

  // Runs last: it mutates the served scene.
  it("a recolor edit changes pixels only inside the queried mask", async () => {
    const before = await client.renderFrame(0);
    const reference = await client.query("coffee", 0.5, 0);
    const mask = decodeRle(reference.ranked[0].mask);

    const handle = mountViewer(client);
    await waitFor(() => handle.state.numFrames === 10, "summary load");
    await submitPrompt(handle, "coffee");
    expect(handle.state.selectedLabel).toBe("coffee machine");

    const img = document.querySelector("#render-img") as HTMLImageElement;
    const srcBefore = img.src;
    (document.querySelector("#recolor-color") as HTMLInputElement).value = "#19e633";
    (document.querySelector("#recolor-btn") as HTMLButtonElement).click();
    expect(handle.state.busy).toBe("editing");
    await waitFor(
      () => handle.state.busy === "idle" && img.src !== srcBefore && handle.state.error === null,
      "recolor edit + render refresh",
    );

    const after = await client.renderFrame(0);
    const a = PNG.sync.read(Buffer.from(before));
    const b = PNG.sync.read(Buffer.from(after));
    expect([a.height * a.width, b.height * b.width]).toEqual([mask.length, mask.length]);
    let changed = 0;
    let escaped = 0;
    for (let i = 0; i < mask.length; i++) {
      const diff = Math.max(
        Math.abs(a.data[i * 4] - b.data[i * 4]),
        Math.abs(a.data[i * 4 + 1] - b.data[i * 4 + 1]),
        Math.abs(a.data[i * 4 + 2] - b.data[i * 4 + 2]),
      );
      if (diff >= 2) {
        changed++;
        if (!mask[i]) escaped++;
      }
    }
    expect(changed).toBeGreaterThan(100);
    expect(escaped).toBe(0);
  });
});
