/**
 * BPR1 frame streams: the named-blob format piped through user logic.
 *
 * Layout (integers little-endian):
 *
 *     magic     'BPR1' (42 50 52 31)                      4 bytes
 *     frame*    name_len u32, name (UTF-8), payload_len u64, payload
 *     sentinel  name_len = FF FF FF FF                    4 bytes
 *
 * name_len 0xFFFFFFFF is reserved as the end-of-stream sentinel, so a
 * frame name is limited to 0xFFFFFFFE bytes. An empty stream is exactly
 * 8 bytes: magic followed by the sentinel.
 */

export const FRAME_MAGIC = Buffer.from([0x42, 0x50, 0x52, 0x31]);
export const SENTINEL = 0xffffffff;
export const MAX_NAME_BYTES = 0xfffffffe;

export interface Frame {
  name: string;
  payload: Buffer;
}

export class FrameDecodeError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(message);
    this.name = "FrameDecodeError";
    this.offset = offset;
  }
}

// names must round-trip exactly, so reject invalid UTF-8 up front
const utf8Strict = new TextDecoder("utf-8", { fatal: true });

function need(data: Buffer, offset: number, n: number): void {
  if (offset + n > data.length) {
    throw new FrameDecodeError(
      `frame stream truncated at byte ${data.length}`,
      data.length,
    );
  }
}

/** Decode exactly one stream; trailing bytes are an error. */
export function decodeBytes(data: Buffer): Frame[] {
  const [frames, consumed] = decodePrefix(data);
  if (consumed !== data.length) {
    throw new FrameDecodeError(
      `${data.length - consumed} trailing bytes after frame stream`,
      consumed,
    );
  }
  return frames;
}

/**
 * Decode one stream from the front of `data`.
 *
 * Returns the frames and the bytes consumed, so concatenated streams
 * can be decoded back to back. Payloads are views into `data`.
 */
export function decodePrefix(data: Buffer): [Frame[], number] {
  need(data, 0, 4);
  if (!data.subarray(0, 4).equals(FRAME_MAGIC)) {
    throw new FrameDecodeError("frame stream has bad magic", 0);
  }
  const frames: Frame[] = [];
  let offset = 4;
  for (;;) {
    need(data, offset, 4);
    const nameLen = data.readUInt32LE(offset);
    offset += 4;
    if (nameLen === SENTINEL) {
      return [frames, offset];
    }
    const frameOffset = offset - 4;
    need(data, offset, nameLen);
    const rawName = data.subarray(offset, offset + nameLen);
    offset += nameLen;
    need(data, offset, 8);
    const payloadLen = data.readBigUInt64LE(offset);
    offset += 8;
    if (payloadLen > BigInt(data.length - offset)) {
      throw new FrameDecodeError(
        `frame stream truncated at byte ${data.length}`,
        data.length,
      );
    }
    const payload = data.subarray(offset, offset + Number(payloadLen));
    offset += payload.length;
    let name: string;
    try {
      name = utf8Strict.decode(rawName);
    } catch {
      throw new FrameDecodeError(
        `frame name at byte ${frameOffset} is not UTF-8`,
        frameOffset,
      );
    }
    frames.push({ name, payload });
  }
}

/** Validate a frame name and return its UTF-8 encoding. */
export function checkName(name: string): Buffer {
  const raw = Buffer.from(name, "utf-8");
  if (raw.length > MAX_NAME_BYTES) {
    throw new Error(`frame name of ${raw.length} bytes exceeds ${MAX_NAME_BYTES}`);
  }
  return raw;
}

/** Encode a complete stream to one buffer. */
export function encodeBytes(frames: Iterable<Frame>): Buffer {
  const parts: Buffer[] = [FRAME_MAGIC];
  for (const frame of frames) {
    const name = checkName(frame.name);
    const head = Buffer.alloc(4);
    head.writeUInt32LE(name.length, 0);
    const len = Buffer.alloc(8);
    len.writeBigUInt64LE(BigInt(frame.payload.length), 0);
    parts.push(head, name, len, frame.payload);
  }
  const tail = Buffer.alloc(4);
  tail.writeUInt32LE(SENTINEL, 0);
  parts.push(tail);
  return Buffer.concat(parts);
}
