"""Run external user logic over standard streams.

The child receives one encoded frame stream on standard input and must
write one back on standard output. Standard error is captured for
diagnostics and never mixed into the data channel.
"""

from __future__ import annotations

import os
import subprocess
import threading
from dataclasses import dataclass, field

from bagpipe import frames as framing
from bagpipe.errors import FrameDecodeError, UserLogicError, UserLogicExit, UserLogicTimeout
from bagpipe.frames import Frame

# Inputs at or below this size are written before the output is read;
# they fit the smallest common OS pipe buffer, so the write cannot block
# and no feeder thread is needed.
PIPE_SAFE_BYTES = 32768

_FEED_BLOCK = 1024 * 1024


@dataclass(frozen=True, slots=True)
class UserLogicSpec:
    """An external command plus its execution envelope."""

    command: tuple[str, ...]
    env: dict[str, str] = field(default_factory=dict)
    timeout_s: float | None = None

    def __post_init__(self):
        if not self.command:
            raise ValueError("user logic command is empty")
        object.__setattr__(self, "command", tuple(self.command))


@dataclass(slots=True)
class UserLogicResult:
    frames: list[Frame]
    exit_code: int
    stderr: bytes


def _drain(stream, sink: list[bytes]) -> None:
    sink.append(stream.read())
    stream.close()


def _feed(stream, data: bytes) -> None:
    try:
        for start in range(0, len(data), _FEED_BLOCK):
            stream.write(data[start : start + _FEED_BLOCK])
    except (BrokenPipeError, OSError):
        pass  # child closed its input early; its exit status tells the story
    finally:
        try:
            stream.close()
        except (BrokenPipeError, OSError):
            pass


def run_user_logic(
    spec: UserLogicSpec,
    input_frames: list[Frame],
    task_id: str = "local",
) -> UserLogicResult:
    """Pipe `input_frames` through the command, decode what comes back.

    Input feeding and output draining overlap, so streams of any size
    move without deadlock. Raises UserLogicExit on a nonzero exit
    (decoded frames attached when the output still parsed),
    UserLogicTimeout when `spec.timeout_s` elapses, and UserLogicError
    for spawn failures or malformed output.
    """
    data = framing.encode_bytes(input_frames)
    env = dict(os.environ)
    env.update(spec.env)
    env["BAGPIPE_TASK_ID"] = task_id

    try:
        child = subprocess.Popen(
            spec.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
        )
    except OSError as exc:
        raise UserLogicError(f"cannot start user logic {spec.command[0]!r}: {exc}") from exc

    timed_out = threading.Event()
    timer = None
    if spec.timeout_s is not None:

        def _expire():
            timed_out.set()
            child.kill()

        timer = threading.Timer(spec.timeout_s, _expire)
        timer.daemon = True
        timer.start()

    stderr_parts: list[bytes] = []
    err_thread = threading.Thread(target=_drain, args=(child.stderr, stderr_parts), daemon=True)
    err_thread.start()

    feeder = None
    try:
        if len(data) <= PIPE_SAFE_BYTES:
            _feed(child.stdin, data)
        else:
            feeder = threading.Thread(target=_feed, args=(child.stdin, data), daemon=True)
            feeder.start()
        out = child.stdout.read()
        child.stdout.close()
        if feeder is not None:
            feeder.join()
        err_thread.join()
        exit_code = child.wait()
    finally:
        if timer is not None:
            timer.cancel()
        if child.poll() is None:
            child.kill()
            child.wait()

    stderr = stderr_parts[0] if stderr_parts else b""
    if timed_out.is_set():
        raise UserLogicTimeout(
            f"user logic exceeded {spec.timeout_s} s and was killed", stderr=stderr
        )

    decoded: list[Frame] | None
    decode_error: FrameDecodeError | None = None
    try:
        decoded = framing.decode_bytes(out)
    except FrameDecodeError as exc:
        decoded = None
        decode_error = exc

    if exit_code != 0:
        raise UserLogicExit(
            f"user logic exited with status {exit_code}",
            exit_code=exit_code,
            frames=decoded,
            stderr=stderr,
        )
    if decode_error is not None:
        raise UserLogicError(
            f"user logic produced a malformed frame stream: {decode_error}", stderr=stderr
        )
    return UserLogicResult(frames=decoded, exit_code=exit_code, stderr=stderr)
