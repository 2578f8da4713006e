/** Pure pixel helpers for the mask overlay and relevancy bars. */

export const OVERLAY_RGBA: [number, number, number, number] = [255, 64, 64, 110];

/** RGBA buffer with the overlay color on masked pixels, transparent elsewhere. */
export function composeOverlay(
  width: number,
  height: number,
  mask: Uint8Array,
  rgba: [number, number, number, number] = OVERLAY_RGBA,
): Uint8ClampedArray {
  if (mask.length !== width * height) {
    throw new Error(`mask length ${mask.length} != ${width}x${height}`);
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      out.set(rgba, i * 4);
    }
  }
  return out;
}

/** Width of a relevancy bar in percent; relevancy lives in [0, 1]. */
export function relevancyPercent(relevancy: number): number {
  return Math.round(Math.min(1, Math.max(0, relevancy)) * 100);
}

/** "#rrggbb" -> [r, g, b] in [0, 1] for the edit API. */
export function hexToRgb(hex: string): [number, number, number] {
  const m = /^#([0-9a-fA-F]{6})$/.exec(hex);
  if (!m) throw new Error(`not a #rrggbb color: ${hex}`);
  const v = parseInt(m[1], 16);
  return [((v >> 16) & 255) / 255, ((v >> 8) & 255) / 255, (v & 255) / 255];
}

/** PNG bytes -> data: URL, usable as an <img> src without object URLs. */
export function bytesToDataUrl(bytes: Uint8Array): string {
  let binary = "";
  for (let i = 0; i < bytes.length; i += 0x8000) {
    binary += String.fromCharCode(...bytes.subarray(i, i + 0x8000));
  }
  const nodeBuffer = (globalThis as any).Buffer;
  const b64 =
    typeof btoa === "function"
      ? btoa(binary)
      : nodeBuffer.from(binary, "binary").toString("base64");
  return `data:image/png;base64,${b64}`;
}
