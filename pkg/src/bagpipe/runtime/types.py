"""Shared value types for the driver/worker runtime."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

from bagpipe import frames as framing
from bagpipe.errors import ProtocolError
from bagpipe.frames import Frame
from bagpipe.userproc import UserLogicSpec


def partition_ranges(total_records: int, partition_count: int) -> list[tuple[int, int]]:
    """Split [0, total) into `partition_count` contiguous near-equal ranges.

    Sizes differ by at most one; earlier partitions take the remainder.
    """
    if partition_count < 1:
        raise ValueError("partition_count must be >= 1")
    if total_records < 0:
        raise ValueError("total_records must be >= 0")
    base, extra = divmod(total_records, partition_count)
    ranges = []
    start = 0
    for index in range(partition_count):
        size = base + (1 if index < extra else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


@dataclass(frozen=True, slots=True)
class PartitionSpec:
    partition_id: int
    bag_path: str
    range_start: int
    range_end: int


@dataclass(frozen=True, slots=True)
class OutputMode:
    """collect: frames return inline; store: frames land in a directory."""

    kind: str
    store_dir: str | None = None

    @classmethod
    def collect(cls) -> "OutputMode":
        return cls("collect")

    @classmethod
    def store(cls, directory: str) -> "OutputMode":
        return cls("store", directory)

    def to_wire(self) -> str:
        if self.kind == "collect":
            return "collect"
        return f"store:{self.store_dir}"

    @classmethod
    def from_wire(cls, text: str) -> "OutputMode":
        if text == "collect":
            return cls.collect()
        if text.startswith("store:") and len(text) > len("store:"):
            return cls.store(text[len("store:") :])
        raise ProtocolError(f"bad output mode {text!r}")


@dataclass(frozen=True, slots=True)
class TaskSpec:
    job_id: int
    partition: PartitionSpec
    user_logic: UserLogicSpec
    output_mode: OutputMode


@dataclass(frozen=True, slots=True)
class WorkerInfo:
    worker_id: str
    address: str
    slots: int


@dataclass(slots=True)
class PartitionOutcome:
    partition_id: int
    ok: bool
    frames: list[Frame] | None = None
    stored_path: str | None = None
    error: str | None = None


@dataclass(slots=True)
class JobResult:
    outcomes: list[PartitionOutcome] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def ok(self) -> bool:
        return all(outcome.ok for outcome in self.outcomes)

    def collected_frames(self) -> list[Frame]:
        """All collected frames, partition order."""
        collected = []
        for outcome in self.outcomes:
            if outcome.frames:
                collected.extend(outcome.frames)
        return collected


def store_output(frames: list[Frame], target_dir: str, partition_id: int) -> str:
    """Write the frames as `part-<5-digit id>.bpr`, atomically."""
    final_path = os.path.join(target_dir, f"part-{partition_id:05d}.bpr")
    fd, tmp_path = tempfile.mkstemp(prefix=".part-", dir=target_dir)
    try:
        with os.fdopen(fd, "wb") as sink:
            framing.encode_stream(frames, sink)
            sink.flush()
            os.fsync(sink.fileno())
        os.replace(tmp_path, final_path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise
    return final_path
