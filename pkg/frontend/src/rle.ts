/** Run-length encoded binary mask as served by the query endpoint. */
export interface RleMask {
  /** [height, width] */
  size: [number, number];
  /** Alternating run lengths over the row-major mask, zeros first. */
  counts: number[];
}

/** Decode to a flat row-major Uint8Array of 0/1, length height * width. */
export function decodeRle(rle: RleMask): Uint8Array {
  const [height, width] = rle.size;
  const total = height * width;
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of rle.counts) {
    if (run < 0 || !Number.isInteger(run)) {
      throw new Error(`invalid run length ${run}`);
    }
    if (pos + run > total) {
      throw new Error(`RLE overruns mask: ${pos + run} > ${total}`);
    }
    if (value === 1) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    value ^= 1;
  }
  if (pos !== total) {
    throw new Error(`RLE covers ${pos} of ${total} pixels`);
  }
  return out;
}

/** Number of set pixels in a decoded mask. */
export function maskArea(mask: Uint8Array): number {
  let area = 0;
  for (const v of mask) area += v;
  return area;
}
