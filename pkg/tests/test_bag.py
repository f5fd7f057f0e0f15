"""Bag format tests: golden bytes, roundtrip properties, truncation and
corruption handling, summary bookkeeping."""

import struct

import pytest
from hypothesis import given, settings, strategies as st

from bagpipe.bag import MessageRecord, open_reader, open_writer, scan_summary
from bagpipe.errors import (
    BagCorruptionError,
    BagFormatError,
    BagSealedError,
    BagpipeError,
)
from bagpipe.stores import MemoryStore

from conftest import build_bag_bytes, make_records


def read_all(data: bytes) -> list[MessageRecord]:
    reader = open_reader(MemoryStore.from_bytes(data))
    out = []
    while (record := reader.next_record()) is not None:
        out.append(record)
    return out


def chunk_counts(data: bytes) -> list[int]:
    """Per-chunk record counts of a sealed bag, read straight off the bytes."""
    counts = []
    pos = 8
    while pos < len(data) - 12:
        byte_length, count = struct.unpack_from("<QI", data, pos)
        counts.append(count)
        pos += 12 + byte_length
    return counts


# --- golden bytes ---


def test_empty_sealed_bag_golden():
    data = build_bag_bytes([])
    assert data == b"DBAG" + struct.pack("<I", 1) + b"DEND" + struct.pack("<Q", 0)
    assert len(data) == 20


def test_single_record_bag_golden():
    data = build_bag_bytes([MessageRecord("a", 5, b"\x01\x02")])
    record = bytes.fromhex("0100" + "61" + "0500000000000000" + "02000000" + "0102")
    expected = (
        b"DBAG"
        + struct.pack("<I", 1)
        + struct.pack("<QI", len(record), 1)
        + record
        + b"DEND"
        + struct.pack("<Q", 1)
    )
    assert data == expected
    assert len(data) == 8 + 12 + 17 + 12


def test_header_written_at_open():
    store = MemoryStore()
    open_writer(store)
    assert store.size == 8
    assert store.read_at(0, 8) == b"DBAG" + struct.pack("<I", 1)


# --- writer contract ---


def test_writer_rejects_nonempty_store():
    store = MemoryStore()
    store.write(b"junk")
    with pytest.raises(ValueError):
        open_writer(store)


def test_writer_rejects_sealed_store():
    store = MemoryStore()
    store.seal()
    with pytest.raises(BagSealedError):
        open_writer(store)


def test_writer_rejects_bad_chunk_target():
    with pytest.raises(ValueError):
        open_writer(MemoryStore(), chunk_target_bytes=0)


def test_append_after_seal_fails():
    store = MemoryStore()
    writer = open_writer(store)
    writer.seal()
    with pytest.raises(BagSealedError):
        writer.append(MessageRecord("a", 0, b""))


def test_double_seal_fails():
    writer = open_writer(MemoryStore())
    writer.seal()
    with pytest.raises(BagSealedError):
        writer.seal()


def test_oversized_topic_rejected():
    writer = open_writer(MemoryStore())
    with pytest.raises(ValueError):
        writer.append(MessageRecord("t" * 65536, 0, b""))
    writer.append(MessageRecord("t" * 65535, 0, b""))  # at the field limit


def test_bad_topic_rejected():
    writer = open_writer(MemoryStore())
    for topic in ("", "a\x00b"):
        with pytest.raises(ValueError):
            writer.append(MessageRecord(topic, 0, b""))


def test_bad_timestamp_rejected():
    writer = open_writer(MemoryStore())
    for timestamp in (-1, 2**64):
        with pytest.raises(ValueError):
            writer.append(MessageRecord("a", timestamp, b""))
    writer.append(MessageRecord("a", 2**64 - 1, b""))


def test_empty_payload_legal():
    data = build_bag_bytes([MessageRecord("a", 0, b"")])
    [record] = read_all(data)
    assert record.payload == b""


def test_three_small_records_make_one_chunk():
    records = [MessageRecord("t", i, b"x" * 10) for i in range(3)]
    data = build_bag_bytes(records, chunk_target=1024 * 1024)
    assert chunk_counts(data) == [3]


def test_chunk_target_one_makes_chunk_per_record():
    records = make_records(5, seed=1)
    data = build_bag_bytes(records, chunk_target=1)
    assert chunk_counts(data) == [1, 1, 1, 1, 1]


# --- reader contract ---


def test_reader_rejects_bad_magic():
    with pytest.raises(BagFormatError):
        open_reader(MemoryStore.from_bytes(b"\x00" * 24))


def test_reader_rejects_unsupported_version():
    data = b"DBAG" + struct.pack("<I", 2) + b"DEND" + struct.pack("<Q", 0)
    with pytest.raises(BagFormatError):
        open_reader(MemoryStore.from_bytes(data))


def test_reader_rejects_short_file():
    with pytest.raises(BagFormatError):
        open_reader(MemoryStore.from_bytes(b"DBAG"))


def test_empty_bag_end_on_first_call():
    reader = open_reader(MemoryStore.from_bytes(build_bag_bytes([])))
    assert not reader.truncated
    assert reader.next_record() is None
    assert reader.next_record() is None


def test_end_of_bag_is_sticky():
    data = build_bag_bytes(make_records(3))
    reader = open_reader(MemoryStore.from_bytes(data))
    assert len([1 for _ in range(3) if reader.next_record()]) == 3
    for _ in range(5):
        assert reader.next_record() is None


def test_multi_chunk_order_preserved():
    # [2 records][1 record]: 16-byte records, target 32 flushes after two
    records = [MessageRecord("t", i, bytes([i])) for i in range(3)]
    data = build_bag_bytes(records, chunk_target=32)
    assert chunk_counts(data) == [2, 1]
    assert read_all(data) == records


@given(
    records=st.lists(
        st.builds(
            MessageRecord,
            st.text(min_size=1, max_size=8).filter(lambda t: "\x00" not in t),
            st.integers(0, 2**64 - 1),
            st.binary(max_size=40),
        ),
        max_size=20,
    ),
    chunk_target=st.integers(1, 200),
)
@settings(max_examples=60)
def test_roundtrip_any_chunking(records, chunk_target):
    data = build_bag_bytes(records, chunk_target)
    assert read_all(data) == records
    # chunking choice never changes the record sequence
    assert read_all(build_bag_bytes(records, chunk_target=4 * 1024 * 1024)) == records


def test_file_size_algebra():
    data = build_bag_bytes(make_records(25, seed=3), chunk_target=100)
    chunk_lengths = []
    pos = 8
    while pos < len(data) - 12:
        byte_length, _count = struct.unpack_from("<QI", data, pos)
        chunk_lengths.append(byte_length)
        pos += 12 + byte_length
    assert len(data) == 8 + sum(12 + n for n in chunk_lengths) + 12
    assert len(chunk_lengths) > 1


def test_skip_records():
    records = make_records(20, seed=5)
    data = build_bag_bytes(records, chunk_target=60)
    reader = open_reader(MemoryStore.from_bytes(data))
    reader.skip_records(7)
    assert reader.next_record() == records[7]
    reader.skip_records(5)
    assert reader.next_record() == records[13]


def test_skip_past_end():
    data = build_bag_bytes(make_records(4))
    reader = open_reader(MemoryStore.from_bytes(data))
    reader.skip_records(10)
    assert reader.next_record() is None


# --- truncation ---


def test_truncated_bag_readable():
    records = make_records(6, seed=2)
    data = build_bag_bytes(records, chunk_target=50)
    without_trailer = data[:-12]
    reader = open_reader(MemoryStore.from_bytes(without_trailer))
    assert reader.truncated
    out = []
    while (record := reader.next_record()) is not None:
        out.append(record)
    assert out == records


def test_truncation_sweep_never_crashes():
    # cut a sealed bag at every byte boundary: the truncated file must
    # either read some record prefix quietly or raise a bag error
    records = make_records(6, seed=9)
    data = build_bag_bytes(records, chunk_target=50)
    for cut in range(8, len(data)):
        piece = data[:cut]
        try:
            reader = open_reader(MemoryStore.from_bytes(piece))
        except BagpipeError:
            continue
        try:
            out = []
            while (record := reader.next_record()) is not None:
                out.append(record)
        except BagpipeError:
            continue
        assert out == records[: len(out)]


def test_mid_chunk_cut_stops_at_last_complete_chunk():
    records = make_records(9, seed=4)
    data = build_bag_bytes(records, chunk_target=60)
    counts = chunk_counts(data)
    assert len(counts) >= 2
    # cut 5 bytes into the second chunk's body
    first_end = 8 + 12 + struct.unpack_from("<QI", data, 8)[0]
    piece = data[: first_end + 17]
    reader = open_reader(MemoryStore.from_bytes(piece))
    assert reader.truncated
    out = []
    while (record := reader.next_record()) is not None:
        out.append(record)
    assert out == records[: counts[0]]


# --- corruption ---


def test_record_count_mismatch_detected():
    data = build_bag_bytes([MessageRecord("a", 0, b"x")])
    # chunk head at offset 8: byte_length u64, record_count u32
    corrupted = bytearray(data)
    struct.pack_into("<I", corrupted, 16, 2)
    reader = open_reader(MemoryStore.from_bytes(bytes(corrupted)))
    with pytest.raises(BagCorruptionError, match="offset 8"):
        reader.next_record()


def test_trailer_total_mismatch_detected():
    data = build_bag_bytes(make_records(3))
    corrupted = bytearray(data)
    struct.pack_into("<Q", corrupted, len(data) - 8, 7)
    reader = open_reader(MemoryStore.from_bytes(bytes(corrupted)))
    reader.next_record()
    reader.next_record()
    reader.next_record()
    with pytest.raises(BagCorruptionError, match="trailer claims 7 records, found 3"):
        reader.next_record()


def test_chunk_overrun_detected():
    data = build_bag_bytes([MessageRecord("a", 0, b"x")])
    corrupted = bytearray(data)
    struct.pack_into("<Q", corrupted, 8, 10_000)  # byte_length way past EOF
    reader = open_reader(MemoryStore.from_bytes(bytes(corrupted)))
    with pytest.raises(BagCorruptionError, match="overruns the file"):
        reader.next_record()


def _length_field_offsets(data: bytes) -> list[int]:
    """Byte offsets of every length/count field in a sealed bag."""
    offsets = []
    pos = 8
    while pos < len(data) - 12:
        byte_length, count = struct.unpack_from("<QI", data, pos)
        offsets.extend(range(pos, pos + 12))  # chunk byte_length + record_count
        body = pos + 12
        cursor = body
        for _ in range(count):
            offsets.extend(range(cursor, cursor + 2))  # topic_len
            (topic_len,) = struct.unpack_from("<H", data, cursor)
            cursor += 2 + topic_len + 8
            offsets.extend(range(cursor, cursor + 4))  # payload_len
            (payload_len,) = struct.unpack_from("<I", data, cursor)
            cursor += 4 + payload_len
        pos = body + byte_length
    offsets.extend(range(len(data) - 8, len(data)))  # trailer total
    return offsets


def test_single_byte_length_corruption_detected():
    records = [
        MessageRecord("aa", 1, b"\x10\x20\x30"),
        MessageRecord("bbb", 2, b"\x40\x50\x60\x70\x80"),
        MessageRecord("c", 3, b""),
    ]
    data = build_bag_bytes(records, chunk_target=30)
    for offset in _length_field_offsets(data):
        for mutation in (0x01, 0x80, 0xFF):
            corrupted = bytearray(data)
            corrupted[offset] ^= mutation
            if bytes(corrupted) == data:
                continue
            reader = open_reader(MemoryStore.from_bytes(bytes(corrupted)))
            with pytest.raises(BagpipeError):
                out = []
                while (record := reader.next_record()) is not None:
                    out.append(record)


# --- summary ---


def test_summary_counts_and_timestamps():
    records = [
        MessageRecord("a", 5, b"x"),
        MessageRecord("a", 2, b"y"),
        MessageRecord("b", 9, b"z"),
    ]
    data = build_bag_bytes(records)
    summary = scan_summary(MemoryStore.from_bytes(data))
    assert summary.record_count == 3
    assert summary.per_topic == {"a": 2, "b": 1}
    assert summary.min_timestamp == 2
    assert summary.max_timestamp == 9
    assert summary.byte_size == len(data)
    assert not summary.truncated


def test_empty_summary_is_all_zero():
    summary = scan_summary(MemoryStore.from_bytes(build_bag_bytes([])))
    assert summary.record_count == 0
    assert summary.per_topic == {}
    assert summary.min_timestamp == 0
    assert summary.max_timestamp == 0
    assert summary.byte_size == 20


def test_seal_returns_matching_summary():
    store = MemoryStore()
    writer = open_writer(store, chunk_target_bytes=64)
    records = make_records(12, seed=11)
    for record in records:
        writer.append(record)
    sealed = writer.seal()
    rescanned = scan_summary(store)
    assert sealed == rescanned


def test_ordered_appends_pin_min_max():
    records = [MessageRecord("t", ts, b"") for ts in (100, 200, 300)]
    summary = scan_summary(MemoryStore.from_bytes(build_bag_bytes(records)))
    assert summary.min_timestamp == 100
    assert summary.max_timestamp == 300
