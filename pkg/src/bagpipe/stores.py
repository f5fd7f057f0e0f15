"""Chunked byte stores: the lower storage tier behind bags.

A ChunkedStore is an append-only, randomly-readable byte sequence. The
disk and memory implementations are interchangeable through this
interface; a differential test holds them to identical behavior.

Unsealed stores belong to one thread of control. Sealed stores are
immutable and safe for concurrent read_at.
"""

from __future__ import annotations

import abc
import os
from typing import BinaryIO

from bagpipe.errors import StoreRangeError, StoreSealedError

_COPY_BLOCK = 1 << 20


class ChunkedStore(abc.ABC):
    @property
    @abc.abstractmethod
    def size(self) -> int: ...

    @property
    @abc.abstractmethod
    def writable(self) -> bool: ...

    @property
    @abc.abstractmethod
    def sealed(self) -> bool: ...

    @abc.abstractmethod
    def write(self, data: bytes) -> int:
        """Append data; returns the offset of its first byte."""

    @abc.abstractmethod
    def read_at(self, offset: int, length: int) -> bytes:
        """Read exactly length bytes previously written at offset."""

    @abc.abstractmethod
    def seal(self) -> None:
        """Flush and freeze; further writes raise StoreSealedError."""

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _check_write(self, data) -> None:
        if self.sealed or not self.writable:
            raise StoreSealedError("store is sealed")
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise TypeError("expected bytes-like data")

    def _check_range(self, offset: int, length: int) -> None:
        if offset < 0 or length < 0:
            raise ValueError("offset and length must be non-negative")
        if offset + length > self.size:
            raise StoreRangeError(
                f"read [{offset}, {offset + length}) beyond size {self.size}"
            )


class MemoryStore(ChunkedStore):
    """In-memory chunked store; the cache-tier counterpart of DiskStore."""

    def __init__(self):
        self._buf = bytearray()
        self._sealed = False

    @classmethod
    def from_bytes(cls, data: bytes) -> "MemoryStore":
        store = cls()
        store._buf = bytes(data)
        store._sealed = True
        return store

    @property
    def size(self) -> int:
        return len(self._buf)

    @property
    def writable(self) -> bool:
        return not self._sealed

    @property
    def sealed(self) -> bool:
        return self._sealed

    def write(self, data) -> int:
        self._check_write(data)
        offset = len(self._buf)
        self._buf += data
        return offset

    def read_at(self, offset: int, length: int) -> bytes:
        self._check_range(offset, length)
        if self._sealed:
            # frozen to bytes at seal, so a slice is a single copy
            return self._buf[offset : offset + length]
        return bytes(memoryview(self._buf)[offset : offset + length])

    def seal(self) -> None:
        self._buf = bytes(self._buf)
        self._sealed = True


class DiskStore(ChunkedStore):
    """File-backed chunked store with buffered writes, flushed at seal."""

    def __init__(self, f, path: str, size: int, writable: bool):
        self._f = f
        self._path = path
        self._size = size
        self._writable = writable
        self._sealed = not writable

    @classmethod
    def create(cls, path) -> "DiskStore":
        return cls(open(path, "x+b"), str(path), 0, writable=True)

    @classmethod
    def open(cls, path) -> "DiskStore":
        f = open(path, "rb")
        size = os.fstat(f.fileno()).st_size
        return cls(f, str(path), size, writable=False)

    @property
    def path(self) -> str:
        return self._path

    @property
    def size(self) -> int:
        return self._size

    @property
    def writable(self) -> bool:
        return self._writable and not self._sealed

    @property
    def sealed(self) -> bool:
        return self._sealed

    def write(self, data) -> int:
        self._check_write(data)
        self._f.seek(self._size)
        self._f.write(data)
        offset = self._size
        self._size += len(data)
        return offset

    def read_at(self, offset: int, length: int) -> bytes:
        self._check_range(offset, length)
        if self._writable:
            self._f.flush()
        # pread keeps sealed stores safe for concurrent readers
        chunks = []
        fd = self._f.fileno()
        while length:
            chunk = os.pread(fd, length, offset)
            if not chunk:
                raise StoreRangeError(f"short read at offset {offset}")
            chunks.append(chunk)
            offset += len(chunk)
            length -= len(chunk)
        return b"".join(chunks)

    def seal(self) -> None:
        # sealed means durable, not just complete
        if not self._sealed:
            self._f.flush()
            os.fsync(self._f.fileno())
            self._sealed = True

    def close(self) -> None:
        self._f.close()


def load_from_input_stream(source: BinaryIO) -> MemoryStore:
    """Materialize a byte stream (e.g. standard input) as a sealed MemoryStore."""
    buf = bytearray()
    while True:
        chunk = source.read(_COPY_BLOCK)
        if not chunk:
            break
        buf += chunk
    return MemoryStore.from_bytes(bytes(buf))


def dump_to(store: ChunkedStore, sink: BinaryIO) -> int:
    """Write a sealed store's full contents to sink; returns the byte count."""
    if not store.sealed:
        raise StoreSealedError("dump requires a sealed store")
    total = store.size
    offset = 0
    while offset < total:
        n = min(_COPY_BLOCK, total - offset)
        sink.write(store.read_at(offset, n))
        offset += n
    return total
