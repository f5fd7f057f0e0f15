"""The DBAG v1 container: timestamped, topic-tagged binary messages.

Layout (all integers little-endian, byte offsets from file start):

    header    magic 'DBAG' (44 42 41 47), version u32 = 1          8 bytes
    chunk*    byte_length u64, record_count u32, records block
    trailer   magic 'DEND' (44 45 4E 44), total_records u64       12 bytes

Records block = concatenated record encodings (see bagpipe.codec).
The trailer is written at seal; a file without one is a truncated
recording and is readable up to its last complete chunk.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

from bagpipe import codec
from bagpipe.errors import BagCorruptionError, BagFormatError, BagSealedError
from bagpipe.stores import ChunkedStore

BAG_MAGIC = b"DBAG"
BAG_VERSION = 1
TRAILER_MAGIC = b"DEND"
DEFAULT_CHUNK_TARGET = 4 * 1024 * 1024

HEADER_SIZE = 8
CHUNK_HEAD_SIZE = 12
TRAILER_SIZE = 12

_HEADER = struct.Struct("<4sI")
_CHUNK_HEAD = struct.Struct("<QI")
_TRAILER = struct.Struct("<4sQ")

MAX_TOPIC_BYTES = 0xFFFF
MAX_PAYLOAD_BYTES = 0xFFFFFFFF
MAX_TIMESTAMP = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True, slots=True)
class MessageRecord:
    """One timestamped, topic-tagged binary payload."""

    topic: str
    timestamp: int
    payload: bytes


def check_topic(topic: str) -> bytes:
    """Validate a topic string and return its UTF-8 encoding."""
    if not isinstance(topic, str) or not topic:
        raise ValueError("topic must be a non-empty string")
    if "\x00" in topic:
        raise ValueError("topic must not contain NUL")
    raw = topic.encode("utf-8")
    if len(raw) > MAX_TOPIC_BYTES:
        raise ValueError(f"topic of {len(raw)} bytes exceeds {MAX_TOPIC_BYTES}")
    return raw


def check_record(record: MessageRecord) -> bytes:
    topic = check_topic(record.topic)
    if not 0 <= record.timestamp <= MAX_TIMESTAMP:
        raise ValueError("timestamp out of u64 range")
    if len(record.payload) > MAX_PAYLOAD_BYTES:
        raise ValueError("payload exceeds u32 length field")
    return topic


@dataclass
class BagSummary:
    record_count: int = 0
    per_topic: dict[str, int] = field(default_factory=dict)
    min_timestamp: int = 0
    max_timestamp: int = 0
    byte_size: int = 0
    truncated: bool = False

    def add(self, record: MessageRecord) -> None:
        if self.record_count == 0:
            self.min_timestamp = self.max_timestamp = record.timestamp
        else:
            self.min_timestamp = min(self.min_timestamp, record.timestamp)
            self.max_timestamp = max(self.max_timestamp, record.timestamp)
        self.record_count += 1
        self.per_topic[record.topic] = self.per_topic.get(record.topic, 0) + 1


class BagWriter:
    """Single-writer append handle; buffers records into chunks."""

    def __init__(self, store: ChunkedStore, chunk_target_bytes: int):
        if chunk_target_bytes < 1:
            raise ValueError("chunk_target_bytes must be >= 1")
        if store.sealed or not store.writable:
            raise BagSealedError("store is not writable")
        if store.size != 0:
            raise ValueError("store already holds bytes; refusing to overwrite")
        self._store = store
        self._target = chunk_target_bytes
        self._buf: list[bytes] = []
        self._buf_bytes = 0
        self._buf_count = 0
        self._sealed = False
        self._summary = BagSummary()
        store.write(_HEADER.pack(BAG_MAGIC, BAG_VERSION))

    def append(self, record: MessageRecord) -> None:
        if self._sealed:
            raise BagSealedError("writer is sealed")
        topic = check_record(record)
        encoded = codec.encode_record(topic, record.timestamp, record.payload)
        self._buf.append(encoded)
        self._buf_bytes += len(encoded)
        self._buf_count += 1
        self._summary.add(record)
        if self._buf_bytes >= self._target:
            self._flush_chunk()

    def _flush_chunk(self) -> None:
        if not self._buf_count:
            return
        self._store.write(_CHUNK_HEAD.pack(self._buf_bytes, self._buf_count))
        self._store.write(b"".join(self._buf))
        self._buf.clear()
        self._buf_bytes = 0
        self._buf_count = 0

    def seal(self) -> BagSummary:
        if self._sealed:
            raise BagSealedError("writer already sealed")
        self._flush_chunk()
        self._store.write(_TRAILER.pack(TRAILER_MAGIC, self._summary.record_count))
        self._store.seal()
        self._sealed = True
        self._summary.byte_size = self._store.size
        return self._summary


def open_writer(
    store: ChunkedStore, chunk_target_bytes: int = DEFAULT_CHUNK_TARGET
) -> BagWriter:
    return BagWriter(store, chunk_target_bytes)


class BagReader:
    """Forward iterator over a bag's records.

    `truncated` is True when the trailer is missing; such bags yield
    records up to the last complete chunk.
    """

    def __init__(self, store: ChunkedStore):
        size = store.size
        if size < HEADER_SIZE:
            raise BagFormatError("not a bag: shorter than the header")
        magic, version = _HEADER.unpack(store.read_at(0, HEADER_SIZE))
        if magic != BAG_MAGIC:
            raise BagFormatError("not a bag: bad magic")
        if version != BAG_VERSION:
            raise BagFormatError(f"unsupported bag version {version}")
        self._store = store
        self.truncated = True
        self._trailer_total: int | None = None
        if size >= HEADER_SIZE + TRAILER_SIZE:
            tmagic, total = _TRAILER.unpack(store.read_at(size - TRAILER_SIZE, TRAILER_SIZE))
            if tmagic == TRAILER_MAGIC:
                self.truncated = False
                self._trailer_total = total
        self._chunks_end = size - (0 if self.truncated else TRAILER_SIZE)
        self._pos = HEADER_SIZE
        self._pending: deque[MessageRecord] = deque()
        self._records_seen = 0
        self._exhausted = False

    def next_record(self) -> MessageRecord | None:
        """Next record in stored order, or None at end-of-bag."""
        while not self._pending:
            if not self._advance_chunk():
                return None
        return self._pending.popleft()

    def skip_records(self, count: int) -> int:
        """Skip forward without decoding whole chunks where possible."""
        skipped = 0
        while skipped < count:
            take = min(len(self._pending), count - skipped)
            for _ in range(take):
                self._pending.popleft()
            skipped += take
            if skipped == count:
                break
            head = self._peek_chunk_head()
            if head is None:
                if not self._advance_chunk():
                    break
                continue
            byte_length, record_count, data_off = head
            if record_count <= count - skipped:
                self._pos = data_off + byte_length
                self._records_seen += record_count
                skipped += record_count
            else:
                if not self._advance_chunk():
                    break
        return skipped

    def __iter__(self):
        return self

    def __next__(self) -> MessageRecord:
        record = self.next_record()
        if record is None:
            raise StopIteration
        return record

    def _peek_chunk_head(self):
        if self._exhausted or self._pos >= self._chunks_end:
            return None
        remaining = self._chunks_end - self._pos
        if remaining < CHUNK_HEAD_SIZE:
            return None
        byte_length, record_count = _CHUNK_HEAD.unpack(
            self._store.read_at(self._pos, CHUNK_HEAD_SIZE)
        )
        if byte_length > remaining - CHUNK_HEAD_SIZE:
            return None
        return byte_length, record_count, self._pos + CHUNK_HEAD_SIZE

    def _advance_chunk(self) -> bool:
        if self._exhausted:
            return False
        if self._pos >= self._chunks_end:
            self._finish()
            return False
        offset = self._pos
        remaining = self._chunks_end - offset
        if remaining < CHUNK_HEAD_SIZE:
            if self.truncated:
                self._finish()
                return False
            raise BagCorruptionError(f"chunk header truncated at offset {offset}")
        byte_length, record_count = _CHUNK_HEAD.unpack(
            self._store.read_at(offset, CHUNK_HEAD_SIZE)
        )
        if byte_length > remaining - CHUNK_HEAD_SIZE:
            if self.truncated:
                # partial final chunk of an unsealed recording
                self._finish()
                return False
            raise BagCorruptionError(
                f"chunk at offset {offset} overruns the file"
            )
        block = self._store.read_at(offset + CHUNK_HEAD_SIZE, byte_length)
        try:
            raw = codec.parse_record_block(block, record_count)
            records = [
                MessageRecord(topic.decode("utf-8"), ts, payload)
                for topic, ts, payload in raw
            ]
        except (ValueError, UnicodeDecodeError) as exc:
            raise BagCorruptionError(f"chunk at offset {offset}: {exc}") from exc
        self._pending.extend(records)
        self._records_seen += record_count
        self._pos = offset + CHUNK_HEAD_SIZE + byte_length
        return True

    def _finish(self) -> None:
        self._exhausted = True
        if self._trailer_total is not None and self._records_seen != self._trailer_total:
            raise BagCorruptionError(
                f"trailer claims {self._trailer_total} records, found {self._records_seen}"
            )


def open_reader(store: ChunkedStore) -> BagReader:
    return BagReader(store)


def scan_summary(store: ChunkedStore) -> BagSummary:
    """Full pass over a bag, accumulating counts and timestamp bounds."""
    reader = open_reader(store)
    summary = BagSummary(byte_size=store.size, truncated=reader.truncated)
    for record in reader:
        summary.add(record)
    return summary
