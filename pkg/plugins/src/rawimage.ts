/**
 * Grayscale raster payloads used by image-processing user logic.
 *
 * Layout (integers little-endian):
 *
 *     width  u32
 *     height u32
 *     pixels width*height bytes, row-major, one byte per pixel
 */

export const HEADER_BYTES = 8;

export interface RawImage {
  width: number;
  height: number;
  pixels: Buffer;
}

export function at(image: RawImage, row: number, col: number): number {
  return image.pixels[row * image.width + col];
}

export function encode(image: RawImage): Buffer {
  if (image.pixels.length !== image.width * image.height) {
    throw new Error(
      `pixel buffer holds ${image.pixels.length} bytes, ` +
        `expected ${image.width * image.height}`,
    );
  }
  const out = Buffer.alloc(HEADER_BYTES + image.pixels.length);
  out.writeUInt32LE(image.width, 0);
  out.writeUInt32LE(image.height, 4);
  image.pixels.copy(out, HEADER_BYTES);
  return out;
}

export function parse(data: Buffer): RawImage {
  if (data.length < HEADER_BYTES) {
    throw new Error("image shorter than its dimension header");
  }
  const width = data.readUInt32LE(0);
  const height = data.readUInt32LE(4);
  const expected = HEADER_BYTES + width * height;
  if (data.length !== expected) {
    throw new Error(`image holds ${data.length} bytes, expected ${expected}`);
  }
  return { width, height, pixels: data.subarray(HEADER_BYTES) };
}

/** Rotate clockwise: out[r][c] = in[h-1-c][r], result is h x w. */
export function rotate90cw(image: RawImage): RawImage {
  const { width: w, height: h, pixels: src } = image;
  const out = Buffer.alloc(w * h);
  for (let r = 0; r < w; r++) {
    const base = r * h;
    for (let c = 0; c < h; c++) {
      out[base + c] = src[(h - 1 - c) * w + r];
    }
  }
  return { width: h, height: w, pixels: out };
}
