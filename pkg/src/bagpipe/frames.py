"""BPR1 frame streams: the named-blob format piped through user logic.

Layout (integers little-endian):

    magic     'BPR1' (42 50 52 31)                      4 bytes
    frame*    name_len u32, name (UTF-8), payload_len u64, payload
    sentinel  name_len = FF FF FF FF                    4 bytes

`name_len` 0xFFFFFFFF is reserved as the end-of-stream sentinel, so a
frame name is limited to 0xFFFFFFFE bytes. An empty stream is exactly
8 bytes: magic followed by the sentinel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

from bagpipe import codec
from bagpipe.errors import FrameDecodeError

FRAME_MAGIC = codec.FRAME_MAGIC
SENTINEL = codec.SENTINEL
MAX_NAME_BYTES = 0xFFFFFFFE
MAX_FRAME_PAYLOAD = 0xFFFFFFFFFFFFFFFF

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True, slots=True)
class Frame:
    """One named binary blob."""

    name: str
    payload: bytes


def check_frame(frame: Frame) -> bytes:
    """Validate a frame and return its encoded name."""
    raw = frame.name.encode("utf-8")
    if len(raw) > MAX_NAME_BYTES:
        raise ValueError(f"frame name of {len(raw)} bytes exceeds {MAX_NAME_BYTES}")
    if len(frame.payload) > MAX_FRAME_PAYLOAD:
        raise ValueError("frame payload exceeds u64 length field")
    return raw


def encode_bytes(frames: Iterable[Frame]) -> bytes:
    """Encode a complete stream to one bytes object."""
    pairs = []
    for frame in frames:
        pairs.append((check_frame(frame), frame.payload))
    return codec.encode_frame_stream(pairs)


def decode_bytes(data: bytes) -> list[Frame]:
    """Decode exactly one stream; trailing bytes are an error."""
    try:
        raw, consumed = codec.decode_frame_stream(data)
    except ValueError as exc:
        raise FrameDecodeError(str(exc)) from exc
    if consumed != len(data):
        raise FrameDecodeError(
            f"{len(data) - consumed} trailing bytes after frame stream", offset=consumed
        )
    return [_to_frame(name, payload, offset) for name, payload, offset in _with_offsets(raw)]


def _with_offsets(raw: list[tuple[bytes, bytes]]):
    offset = len(FRAME_MAGIC)
    for name, payload in raw:
        yield name, payload, offset
        offset += 4 + len(name) + 8 + len(payload)


def _to_frame(name: bytes, payload: bytes, offset: int) -> Frame:
    try:
        decoded = name.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FrameDecodeError(
            f"frame name at byte {offset} is not UTF-8", offset=offset
        ) from exc
    return Frame(decoded, payload)


def encode_stream(frames: Iterable[Frame], sink: BinaryIO) -> int:
    """Write a stream incrementally; returns the frame count."""
    sink.write(FRAME_MAGIC)
    count = 0
    for frame in frames:
        name = check_frame(frame)
        sink.write(_U32.pack(len(name)))
        sink.write(name)
        sink.write(_U64.pack(len(frame.payload)))
        sink.write(frame.payload)
        count += 1
    sink.write(_U32.pack(SENTINEL))
    return count


def _read_exact(source: BinaryIO, n: int, offset: int) -> bytes:
    chunks = []
    got = 0
    while got < n:
        piece = source.read(n - got)
        if not piece:
            raise FrameDecodeError(
                f"frame stream truncated at byte {offset + got}", offset=offset + got
            )
        chunks.append(piece)
        got += len(piece)
    return chunks[0] if len(chunks) == 1 else b"".join(chunks)


def decode_stream(source: BinaryIO) -> Iterator[Frame]:
    """Yield frames from a stream, stopping at the sentinel.

    Reads exactly one stream's bytes from `source`, so streams may be
    concatenated and decoded back to back.
    """
    magic = _read_exact(source, 4, 0)
    if magic != FRAME_MAGIC:
        raise FrameDecodeError("frame stream has bad magic", offset=0)
    offset = 4
    while True:
        (name_len,) = _U32.unpack(_read_exact(source, 4, offset))
        offset += 4
        if name_len == SENTINEL:
            return
        name = _read_exact(source, name_len, offset)
        frame_offset = offset - 4
        offset += name_len
        (payload_len,) = _U64.unpack(_read_exact(source, 8, offset))
        offset += 8
        payload = _read_exact(source, payload_len, offset)
        offset += payload_len
        yield _to_frame(name, payload, frame_offset)
