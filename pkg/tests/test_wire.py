"""Wire protocol tests over real socket pairs."""

import socket
import struct

import pytest
from hypothesis import given, settings, strategies as st

from bagpipe.errors import ProtocolError
from bagpipe.runtime import wire
from bagpipe.runtime.wire import MsgType


def sock_pair():
    return socket.socketpair()


def test_message_roundtrip():
    a, b = sock_pair()
    with a, b:
        fields = {"worker_id": b"w1", "slots": wire.u32(4)}
        wire.send_message(a, MsgType.REGISTER, fields)
        got = wire.recv_message(b)
        assert got == (MsgType.REGISTER, fields)


@given(
    msg_type=st.sampled_from(list(MsgType)),
    fields=st.dictionaries(st.text(max_size=8), st.binary(max_size=32), max_size=5),
)
@settings(max_examples=25, deadline=None)
def test_roundtrip_random_fields(msg_type, fields):
    a, b = sock_pair()
    with a, b:
        wire.send_message(a, msg_type, fields)
        assert wire.recv_message(b) == (msg_type, fields)


def test_encode_golden_header():
    data = wire.encode_message(MsgType.HEARTBEAT, {})
    # magic, type byte, body length, then an empty frame stream body
    assert data[:4] == b"DSW1"
    assert data[4] == 5
    assert struct.unpack_from("<I", data, 5)[0] == 8
    assert data[9:] == b"BPR1\xff\xff\xff\xff"


def test_clean_eof_returns_none():
    a, b = sock_pair()
    with b:
        a.close()
        assert wire.recv_message(b) is None


def test_eof_after_full_message_then_none():
    a, b = sock_pair()
    with b:
        wire.send_message(a, MsgType.SHUTDOWN, {})
        a.close()
        assert wire.recv_message(b) == (MsgType.SHUTDOWN, {})
        assert wire.recv_message(b) is None


def test_partial_header_is_protocol_error():
    a, b = sock_pair()
    with b:
        a.sendall(b"DSW1\x05")  # header cut short
        a.close()
        with pytest.raises(ProtocolError, match="closed mid-message"):
            wire.recv_message(b)


def test_partial_body_is_protocol_error():
    a, b = sock_pair()
    with b:
        data = wire.encode_message(MsgType.HEARTBEAT, {})
        a.sendall(data[:-3])
        a.close()
        with pytest.raises(ProtocolError, match="closed mid-message"):
            wire.recv_message(b)


def test_bad_magic_is_protocol_error():
    a, b = sock_pair()
    with a, b:
        a.sendall(b"XXXX" + b"\x05" + struct.pack("<I", 0) + b"extra")
        with pytest.raises(ProtocolError, match="bad message magic"):
            wire.recv_message(b)


def test_unknown_type_is_protocol_error():
    a, b = sock_pair()
    with a, b:
        a.sendall(b"DSW1" + b"\x63" + struct.pack("<I", 8) + b"BPR1\xff\xff\xff\xff")
        with pytest.raises(ProtocolError, match="unknown message type 99"):
            wire.recv_message(b)


def test_non_stream_body_is_protocol_error():
    a, b = sock_pair()
    with a, b:
        a.sendall(b"DSW1" + b"\x05" + struct.pack("<I", 4) + b"JUNK")
        with pytest.raises(ProtocolError, match="not a frame stream"):
            wire.recv_message(b)


def test_u32_u64_roundtrip():
    assert wire.read_u32(wire.u32(0)) == 0
    assert wire.read_u32(wire.u32(2**32 - 1)) == 2**32 - 1
    assert wire.read_u64(wire.u64(2**64 - 1)) == 2**64 - 1


def test_integer_field_length_checked():
    with pytest.raises(ProtocolError, match="expected a 4-byte integer field"):
        wire.read_u32(b"\x01\x02")
    with pytest.raises(ProtocolError):
        wire.read_u64(b"\x01" * 7)


def test_pipelined_messages_keep_boundaries():
    a, b = sock_pair()
    with a, b:
        for i in range(5):
            wire.send_message(a, MsgType.HEARTBEAT, {"seq": wire.u32(i)})
        for i in range(5):
            msg_type, fields = wire.recv_message(b)
            assert msg_type == MsgType.HEARTBEAT
            assert wire.read_u32(fields["seq"]) == i
