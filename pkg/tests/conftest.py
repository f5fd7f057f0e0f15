"""Shared test helpers: deterministic record generators and bag builders."""

import random

import pytest

from bagpipe.bag import MessageRecord, open_writer
from bagpipe.stores import MemoryStore


def make_records(count: int, seed: int = 0, topics=("/a", "/b/c"), max_payload: int = 64):
    rng = random.Random(seed)
    records = []
    for i in range(count):
        topic = rng.choice(topics)
        payload = rng.randbytes(rng.randint(0, max_payload))
        records.append(MessageRecord(topic, i * 1000, payload))
    return records


def build_bag_bytes(records, chunk_target: int = 4 * 1024 * 1024) -> bytes:
    store = MemoryStore()
    writer = open_writer(store, chunk_target_bytes=chunk_target)
    for record in records:
        writer.append(record)
    writer.seal()
    return store.read_at(0, store.size)


def write_bag_file(path, records, chunk_target: int = 4 * 1024 * 1024):
    path.write_bytes(build_bag_bytes(records, chunk_target))
    return path


@pytest.fixture
def small_bag_bytes():
    return build_bag_bytes(make_records(10, seed=7))
