"""Pure-Python byte kernels for record blocks and frame streams.

This is the reference implementation; bagpipe.codec._native mirrors it
bit-for-bit (same outputs, same error messages). All integers are
little-endian and fixed-width.

Record encoding:
    topic_len  u16
    topic      topic_len bytes
    timestamp  u64
    payload_len u32
    payload    payload_len bytes

Frame stream encoding:
    magic      4 bytes 'BPR1'
    per frame: name_len u32, name, payload_len u64, payload
    sentinel   name_len = 0xFFFFFFFF
"""

import struct

BACKEND = "pure"

FRAME_MAGIC = b"BPR1"
SENTINEL = 0xFFFFFFFF

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_TS_PLEN = struct.Struct("<QI")


def encode_record(topic: bytes, timestamp: int, payload: bytes) -> bytes:
    return b"".join(
        (_U16.pack(len(topic)), topic, _TS_PLEN.pack(timestamp, len(payload)), payload)
    )


def encode_record_block(records) -> bytes:
    parts = []
    for topic, timestamp, payload in records:
        parts.append(_U16.pack(len(topic)))
        parts.append(topic)
        parts.append(_TS_PLEN.pack(timestamp, len(payload)))
        parts.append(payload)
    return b"".join(parts)


def parse_record_block(block, record_count: int):
    """Parse exactly record_count records filling the block exactly.

    Returns [(topic_bytes, timestamp, payload_bytes)]. Raises ValueError on
    any structural mismatch; the caller adds chunk context.
    """
    block = bytes(block)
    n = len(block)
    pos = 0
    out = []
    for i in range(record_count):
        if pos + 2 > n:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        (topic_len,) = _U16.unpack_from(block, pos)
        pos += 2
        if topic_len == 0:
            raise ValueError(f"record {i} has empty topic at block byte {pos - 2}")
        if pos + topic_len + 12 > n:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        topic = block[pos : pos + topic_len]
        pos += topic_len
        timestamp, payload_len = _TS_PLEN.unpack_from(block, pos)
        pos += 12
        if payload_len > n - pos:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        payload = block[pos : pos + payload_len]
        pos += payload_len
        out.append((topic, timestamp, payload))
    if pos != n:
        raise ValueError(f"{n - pos} stray bytes after {record_count} records")
    return out


def encode_frame_stream(frames) -> bytes:
    parts = [FRAME_MAGIC]
    for name, payload in frames:
        parts.append(_U32.pack(len(name)))
        parts.append(name)
        parts.append(_U64.pack(len(payload)))
        parts.append(payload)
    parts.append(_U32.pack(SENTINEL))
    return b"".join(parts)


def decode_frame_stream(data):
    """Decode one frame stream from the head of data.

    Returns ([(name_bytes, payload_bytes)], bytes_consumed); consumption
    stops just past the sentinel, so concatenated streams can be peeled
    off one at a time. Raises ValueError on bad magic or truncation.
    """
    data = bytes(data)
    n = len(data)
    if n < 4:
        if FRAME_MAGIC.startswith(data):
            raise ValueError(f"frame stream truncated at byte {n}")
        raise ValueError("frame stream has bad magic")
    if data[:4] != FRAME_MAGIC:
        raise ValueError("frame stream has bad magic")
    pos = 4
    frames = []
    while True:
        if pos + 4 > n:
            raise ValueError(f"frame stream truncated at byte {n}")
        (name_len,) = _U32.unpack_from(data, pos)
        pos += 4
        if name_len == SENTINEL:
            return frames, pos
        if name_len > n - pos:
            raise ValueError(f"frame stream truncated at byte {n}")
        name = data[pos : pos + name_len]
        pos += name_len
        if pos + 8 > n:
            raise ValueError(f"frame stream truncated at byte {n}")
        (payload_len,) = _U64.unpack_from(data, pos)
        pos += 8
        if payload_len > n - pos:
            raise ValueError(f"frame stream truncated at byte {n}")
        payload = data[pos : pos + payload_len]
        pos += payload_len
        frames.append((name, payload))
