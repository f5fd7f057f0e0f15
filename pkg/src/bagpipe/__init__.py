"""bagpipe: record, replay, and distribute processing of sensor-log bags.

The pieces, bottom up: chunked byte stores (disk or memory), the bag
container format over them, an in-process replay bus, a framed pipe
protocol for external user logic, and a driver/worker runtime that
fans bag partitions out to user-logic processes.
"""

from bagpipe.bag import (
    BagReader,
    BagSummary,
    BagWriter,
    MessageRecord,
    open_reader,
    open_writer,
    scan_summary,
)
from bagpipe.bus import Bus
from bagpipe.errors import (
    BagCorruptionError,
    BagFormatError,
    BagpipeError,
    BagSealedError,
    FrameDecodeError,
    FrameError,
    JobError,
    ProtocolError,
    StoreError,
    StoreRangeError,
    StoreSealedError,
    UserLogicError,
    UserLogicExit,
    UserLogicTimeout,
)
from bagpipe.frames import Frame, decode_bytes, decode_stream, encode_bytes, encode_stream
from bagpipe.playback import PlayClock, PlayReport, StopCondition, play, record, record_from
from bagpipe.stores import (
    ChunkedStore,
    DiskStore,
    MemoryStore,
    dump_to,
    load_from_input_stream,
)
from bagpipe.userproc import UserLogicResult, UserLogicSpec, run_user_logic

__version__ = "0.1.0"

__all__ = [
    "BagCorruptionError",
    "BagFormatError",
    "BagReader",
    "BagSealedError",
    "BagSummary",
    "BagWriter",
    "BagpipeError",
    "Bus",
    "ChunkedStore",
    "DiskStore",
    "Frame",
    "FrameDecodeError",
    "FrameError",
    "JobError",
    "MemoryStore",
    "MessageRecord",
    "PlayClock",
    "PlayReport",
    "ProtocolError",
    "StopCondition",
    "StoreError",
    "StoreRangeError",
    "StoreSealedError",
    "UserLogicError",
    "UserLogicExit",
    "UserLogicResult",
    "UserLogicSpec",
    "UserLogicTimeout",
    "decode_bytes",
    "decode_stream",
    "dump_to",
    "encode_bytes",
    "encode_stream",
    "load_from_input_stream",
    "open_reader",
    "open_writer",
    "play",
    "record",
    "record_from",
    "run_user_logic",
    "scan_summary",
    "__version__",
]
