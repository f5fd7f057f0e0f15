/**
 * The stream transforms offered by the plugin entry point.
 *
 * Every mode maps one complete BPR1 stream to one complete BPR1 stream
 * held fully in memory, so malformed input fails before a single
 * output byte exists.
 */

import { Frame, decodeBytes, encodeBytes } from "./bpr1";
import * as rawimage from "./rawimage";

/** Echo the input stream unchanged once it validates. */
export function identity(input: Buffer): Buffer {
  decodeBytes(input);
  return input;
}

/** Rotate every frame payload clockwise; names and order carry over. */
export function rotate90(input: Buffer): Buffer {
  const out: Frame[] = [];
  for (const frame of decodeBytes(input)) {
    let image: rawimage.RawImage;
    try {
      image = rawimage.parse(frame.payload);
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      throw new Error(`frame "${frame.name}": ${reason}`);
    }
    out.push({
      name: frame.name,
      payload: rawimage.encode(rawimage.rotate90cw(image)),
    });
  }
  return encodeBytes(out);
}

/** Tally frames by name prefix: the text before the first '/'. */
export function count(input: Buffer): Buffer {
  const tally = new Map<string, number>();
  for (const frame of decodeBytes(input)) {
    const slash = frame.name.indexOf("/");
    const prefix = slash < 0 ? frame.name : frame.name.slice(0, slash);
    tally.set(prefix, (tally.get(prefix) ?? 0) + 1);
  }
  const entries = [...tally.entries()].sort((a, b) => compareUtf8(a[0], b[0]));
  return encodeBytes(
    entries.map(([name, n]) => ({
      name,
      payload: Buffer.from(String(n), "utf-8"),
    })),
  );
}

// sort by code point, not UTF-16 code unit, to match byte order
function compareUtf8(a: string, b: string): number {
  return Buffer.compare(Buffer.from(a, "utf-8"), Buffer.from(b, "utf-8"));
}

export const MODES: Record<string, (input: Buffer) => Buffer> = {
  identity,
  rotate90,
  count,
};
