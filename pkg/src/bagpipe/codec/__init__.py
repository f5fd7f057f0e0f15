"""Byte codec kernels with a compiled core and a pure-Python fallback.

The compiled module is preferred when importable; set BAGPIPE_PURE_PYTHON=1
to force the fallback. `BACKEND` names the one in use.
"""

import os

from bagpipe.codec import pure

if os.environ.get("BAGPIPE_PURE_PYTHON"):
    _impl = pure
else:
    try:
        from bagpipe.codec import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
FRAME_MAGIC = pure.FRAME_MAGIC
SENTINEL = pure.SENTINEL

encode_record = _impl.encode_record
encode_record_block = _impl.encode_record_block
parse_record_block = _impl.parse_record_block
encode_frame_stream = _impl.encode_frame_stream
decode_frame_stream = _impl.decode_frame_stream


def record_encoded_size(topic_len: int, payload_len: int) -> int:
    return 14 + topic_len + payload_len


def _backends_for_bench() -> list[tuple[str, object]]:
    """Every importable implementation, for differential tests and timing."""
    backends: list[tuple[str, object]] = [("pure", pure)]
    try:
        from bagpipe.codec import _native

        backends.append(("native", _native))
    except ImportError:
        pass
    return backends
