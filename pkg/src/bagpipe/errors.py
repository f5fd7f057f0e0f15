"""Exception types shared across the package."""


class BagpipeError(Exception):
    """Base class for all bagpipe errors."""


class StoreError(BagpipeError):
    """Chunked store misuse or failure."""


class StoreSealedError(StoreError):
    """Write attempted on a sealed or read-only store."""


class StoreRangeError(StoreError):
    """read_at outside the store's current size."""


class BagFormatError(BagpipeError):
    """Bytes are not a bag: bad magic or unsupported version."""


class BagCorruptionError(BagFormatError):
    """Structural damage inside a bag; message names the chunk offset."""


class BagSealedError(BagpipeError):
    """Operation on a writer after seal."""


class FrameError(BagpipeError):
    """Invalid frame or frame stream."""


class FrameDecodeError(FrameError):
    """Frame stream failed to decode; `offset` is the byte position."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class UserLogicError(BagpipeError):
    """External user-logic process failed."""

    def __init__(self, message: str, stderr: bytes = b""):
        super().__init__(message)
        self.stderr = stderr


class UserLogicExit(UserLogicError):
    """Child exited nonzero; decoded frames, if any, ride along."""

    def __init__(self, message: str, exit_code: int, frames=None, stderr: bytes = b""):
        super().__init__(message, stderr)
        self.exit_code = exit_code
        self.frames = frames


class UserLogicTimeout(UserLogicError):
    """Child exceeded its time budget and was terminated."""


class ProtocolError(BagpipeError):
    """Malformed driver/worker wire message."""


class JobError(BagpipeError):
    """Job could not be run (no workers, unreadable source, ...)."""
