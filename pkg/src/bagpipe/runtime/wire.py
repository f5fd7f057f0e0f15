"""DSW1 driver/worker wire protocol.

Message layout (integers little-endian):

    magic    'DSW1' (44 53 57 31)    4 bytes
    msg_type u8                      1=REGISTER 2=REGISTER_ACK 3=TASK
                                     4=RESULT 5=HEARTBEAT 6=SHUTDOWN
    body_len u32
    body     one BPR1 frame stream; frames are named message fields

Transport is any reliable byte stream (TCP). Partial reads are
reassembled here; an unknown msg_type or bad magic is a protocol error.
"""

from __future__ import annotations

import socket
import struct
from enum import IntEnum

from bagpipe import frames as framing
from bagpipe.errors import FrameDecodeError, ProtocolError
from bagpipe.frames import Frame

WIRE_MAGIC = b"DSW1"

_HEAD = struct.Struct("<4sBI")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class MsgType(IntEnum):
    REGISTER = 1
    REGISTER_ACK = 2
    TASK = 3
    RESULT = 4
    HEARTBEAT = 5
    SHUTDOWN = 6


def u32(value: int) -> bytes:
    return _U32.pack(value)


def u64(value: int) -> bytes:
    return _U64.pack(value)


def read_u32(field: bytes) -> int:
    if len(field) != 4:
        raise ProtocolError(f"expected a 4-byte integer field, got {len(field)} bytes")
    return _U32.unpack(field)[0]


def read_u64(field: bytes) -> int:
    if len(field) != 8:
        raise ProtocolError(f"expected an 8-byte integer field, got {len(field)} bytes")
    return _U64.unpack(field)[0]


def encode_message(msg_type: MsgType, fields: dict[str, bytes]) -> bytes:
    body = framing.encode_bytes([Frame(name, value) for name, value in fields.items()])
    return _HEAD.pack(WIRE_MAGIC, int(msg_type), len(body)) + body


def send_message(sock: socket.socket, msg_type: MsgType, fields: dict[str, bytes]) -> None:
    sock.sendall(encode_message(msg_type, fields))


def _recv_exact(sock: socket.socket, n: int, allow_eof: bool) -> bytes | None:
    parts = []
    got = 0
    while got < n:
        piece = sock.recv(n - got)
        if not piece:
            if allow_eof and got == 0:
                return None
            raise ProtocolError(f"connection closed mid-message ({got} of {n} bytes)")
        parts.append(piece)
        got += len(piece)
    return b"".join(parts)


def recv_message(sock: socket.socket) -> tuple[MsgType, dict[str, bytes]] | None:
    """One message, or None on a clean close at a message boundary."""
    head = _recv_exact(sock, _HEAD.size, allow_eof=True)
    if head is None:
        return None
    magic, raw_type, body_len = _HEAD.unpack(head)
    if magic != WIRE_MAGIC:
        raise ProtocolError("bad message magic")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise ProtocolError(f"unknown message type {raw_type}") from None
    body = _recv_exact(sock, body_len, allow_eof=False) if body_len else b""
    try:
        decoded = framing.decode_bytes(body)
    except FrameDecodeError as exc:
        raise ProtocolError(f"message body is not a frame stream: {exc}") from exc
    return msg_type, {frame.name: frame.payload for frame in decoded}
