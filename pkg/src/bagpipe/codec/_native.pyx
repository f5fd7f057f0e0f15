# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled byte kernels. Mirrors bagpipe.codec.pure bit-for-bit."""

from cpython.bytes cimport PyBytes_FromStringAndSize
from libc.string cimport memcpy
from libc.stdint cimport uint8_t, uint16_t, uint32_t, uint64_t

BACKEND = "native"

FRAME_MAGIC = b"BPR1"
SENTINEL = 0xFFFFFFFF

cdef uint32_t _SENTINEL = 0xFFFFFFFFu


cdef inline uint16_t rd_u16(const uint8_t *p):
    return p[0] | (<uint16_t>p[1] << 8)


cdef inline uint32_t rd_u32(const uint8_t *p):
    return (
        <uint32_t>p[0]
        | (<uint32_t>p[1] << 8)
        | (<uint32_t>p[2] << 16)
        | (<uint32_t>p[3] << 24)
    )


cdef inline uint64_t rd_u64(const uint8_t *p):
    return <uint64_t>rd_u32(p) | (<uint64_t>rd_u32(p + 4) << 32)


cdef inline void wr_u16(uint8_t *p, uint16_t v):
    p[0] = v & 0xFF
    p[1] = (v >> 8) & 0xFF


cdef inline void wr_u32(uint8_t *p, uint32_t v):
    p[0] = v & 0xFF
    p[1] = (v >> 8) & 0xFF
    p[2] = (v >> 16) & 0xFF
    p[3] = (v >> 24) & 0xFF


cdef inline void wr_u64(uint8_t *p, uint64_t v):
    wr_u32(p, <uint32_t>(v & 0xFFFFFFFFu))
    wr_u32(p + 4, <uint32_t>(v >> 32))


def encode_record(bytes topic, timestamp, bytes payload):
    cdef Py_ssize_t tlen = len(topic)
    cdef Py_ssize_t plen = len(payload)
    cdef uint64_t ts = timestamp
    cdef bytes out = PyBytes_FromStringAndSize(NULL, 2 + tlen + 12 + plen)
    cdef uint8_t *dst = <uint8_t *><char *>out
    wr_u16(dst, <uint16_t>tlen)
    if tlen:
        memcpy(dst + 2, <const char *>topic, tlen)
    wr_u64(dst + 2 + tlen, ts)
    wr_u32(dst + 10 + tlen, <uint32_t>plen)
    if plen:
        memcpy(dst + 14 + tlen, <const char *>payload, plen)
    return out


def encode_record_block(records):
    cdef Py_ssize_t total = 0
    cdef bytes topic, payload
    for topic, _, payload in records:
        total += 14 + len(topic) + len(payload)
    cdef bytes out = PyBytes_FromStringAndSize(NULL, total)
    cdef uint8_t *dst = <uint8_t *><char *>out
    cdef Py_ssize_t pos = 0, tlen, plen
    cdef uint64_t ts
    for topic, timestamp, payload in records:
        tlen = len(topic)
        plen = len(payload)
        ts = timestamp
        wr_u16(dst + pos, <uint16_t>tlen)
        pos += 2
        if tlen:
            memcpy(dst + pos, <const char *>topic, tlen)
        pos += tlen
        wr_u64(dst + pos, ts)
        pos += 8
        wr_u32(dst + pos, <uint32_t>plen)
        pos += 4
        if plen:
            memcpy(dst + pos, <const char *>payload, plen)
        pos += plen
    return out


def parse_record_block(block, record_count):
    """Parse exactly record_count records filling the block exactly."""
    cdef const uint8_t[::1] view = block
    cdef const uint8_t *base = NULL
    cdef Py_ssize_t n = view.shape[0]
    if n:
        base = &view[0]
    cdef Py_ssize_t pos = 0, i, count = record_count
    cdef Py_ssize_t topic_len, payload_len
    cdef uint64_t ts
    out = []
    for i in range(count):
        if pos + 2 > n:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        topic_len = rd_u16(base + pos)
        pos += 2
        if topic_len == 0:
            raise ValueError(f"record {i} has empty topic at block byte {pos - 2}")
        if pos + topic_len + 12 > n:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        topic = PyBytes_FromStringAndSize(<const char *>(base + pos), topic_len)
        pos += topic_len
        ts = rd_u64(base + pos)
        pos += 8
        payload_len = <Py_ssize_t>rd_u32(base + pos)
        pos += 4
        if payload_len > n - pos:
            raise ValueError(f"record {i} truncated at block byte {pos}")
        payload = PyBytes_FromStringAndSize(<const char *>(base + pos), payload_len)
        pos += payload_len
        out.append((topic, ts, payload))
    if pos != n:
        raise ValueError(f"{n - pos} stray bytes after {record_count} records")
    return out


def encode_frame_stream(frames):
    cdef Py_ssize_t total = 8
    cdef bytes name, payload
    for name, payload in frames:
        total += 12 + len(name) + len(payload)
    cdef bytes out = PyBytes_FromStringAndSize(NULL, total)
    cdef uint8_t *dst = <uint8_t *><char *>out
    memcpy(dst, b"BPR1", 4)
    cdef Py_ssize_t pos = 4, nlen, plen
    for name, payload in frames:
        nlen = len(name)
        plen = len(payload)
        wr_u32(dst + pos, <uint32_t>nlen)
        pos += 4
        if nlen:
            memcpy(dst + pos, <const char *>name, nlen)
        pos += nlen
        wr_u64(dst + pos, <uint64_t>plen)
        pos += 8
        if plen:
            memcpy(dst + pos, <const char *>payload, plen)
        pos += plen
    wr_u32(dst + pos, _SENTINEL)
    return out


def decode_frame_stream(data):
    """Decode one frame stream from the head of data -> (frames, consumed)."""
    cdef const uint8_t[::1] view = data
    cdef const uint8_t *base = NULL
    cdef Py_ssize_t n = view.shape[0]
    if n:
        base = &view[0]
    if n < 4:
        if bytes(data)[:n] == b"BPR1"[:n]:
            raise ValueError(f"frame stream truncated at byte {n}")
        raise ValueError("frame stream has bad magic")
    if not (base[0] == 0x42 and base[1] == 0x50 and base[2] == 0x52 and base[3] == 0x31):
        raise ValueError("frame stream has bad magic")
    cdef Py_ssize_t pos = 4
    cdef uint32_t name_len
    cdef uint64_t payload_len
    frames = []
    while True:
        if pos + 4 > n:
            raise ValueError(f"frame stream truncated at byte {n}")
        name_len = rd_u32(base + pos)
        pos += 4
        if name_len == _SENTINEL:
            return frames, pos
        if <uint64_t>name_len > <uint64_t>(n - pos):
            raise ValueError(f"frame stream truncated at byte {n}")
        name = PyBytes_FromStringAndSize(<const char *>(base + pos), name_len)
        pos += name_len
        if pos + 8 > n:
            raise ValueError(f"frame stream truncated at byte {n}")
        payload_len = rd_u64(base + pos)
        pos += 8
        if payload_len > <uint64_t>(n - pos):
            raise ValueError(f"frame stream truncated at byte {n}")
        payload = PyBytes_FromStringAndSize(<const char *>(base + pos), <Py_ssize_t>payload_len)
        pos += <Py_ssize_t>payload_len
        frames.append((name, payload))
