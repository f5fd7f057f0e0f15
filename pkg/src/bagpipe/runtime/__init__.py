"""Distributed execution: driver scheduling, workers, and the wire protocol."""

from bagpipe.runtime.driver import DEFAULT_PORT, Driver
from bagpipe.runtime.types import (
    JobResult,
    OutputMode,
    PartitionOutcome,
    PartitionSpec,
    TaskSpec,
    WorkerInfo,
    partition_ranges,
    store_output,
)
from bagpipe.runtime.worker import Worker

__all__ = [
    "DEFAULT_PORT",
    "Driver",
    "JobResult",
    "OutputMode",
    "PartitionOutcome",
    "PartitionSpec",
    "TaskSpec",
    "WorkerInfo",
    "Worker",
    "partition_ranges",
    "store_output",
]
