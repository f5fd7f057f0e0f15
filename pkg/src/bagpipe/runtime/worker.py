"""Task execution node: registers with a driver, runs user logic per task.

A worker loads the task's bag into memory, extracts the record range,
encodes the records as frames named "<partition_id>/<record_index>",
pipes them through the task's user logic, then either sends the output
frames inline (collect) or persists them to shared storage (store).
"""

from __future__ import annotations

import os
import secrets
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from bagpipe import codec
from bagpipe import frames as framing
from bagpipe.bag import open_reader
from bagpipe.errors import BagpipeError, ProtocolError, UserLogicError
from bagpipe.frames import Frame
from bagpipe.runtime import wire
from bagpipe.runtime.types import OutputMode, store_output
from bagpipe.runtime.wire import MsgType
from bagpipe.stores import MemoryStore, load_from_input_stream
from bagpipe.userproc import UserLogicSpec, run_user_logic

COLLECT_CAP_BYTES = 64 * 1024 * 1024

_BACKOFF_START_S = 0.2
_BACKOFF_MAX_S = 2.0


def default_worker_id() -> str:
    return f"{socket.gethostname()}-{os.getpid()}-{secrets.token_hex(3)}"


class Worker:
    """Connects to a driver and executes tasks in up to `slots` slots."""

    def __init__(
        self,
        driver_address: tuple[str, int],
        slots: int = 1,
        worker_id: str | None = None,
        *,
        collect_cap_bytes: int = COLLECT_CAP_BYTES,
    ):
        if slots < 1:
            raise ValueError("slots must be >= 1")
        self.driver_address = driver_address
        self.slots = slots
        self.worker_id = worker_id or default_worker_id()
        self.collect_cap_bytes = collect_cap_bytes

        self._executor = ThreadPoolExecutor(max_workers=slots)
        self._stop = threading.Event()
        self._sock: socket.socket | None = None
        self._send_lock = threading.Lock()
        self._heartbeat_s = 2.0
        self._registered = threading.Event()
        self._register_error: str | None = None
        self._thread: threading.Thread | None = None
        self._bag_cache: tuple[tuple[str, int, int], MemoryStore] | None = None
        self._cache_lock = threading.Lock()

    # ------------------------------------------------------------- lifecycle

    def start(self, timeout: float = 10.0) -> None:
        """Run in the background; returns once the first registration lands."""
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()
        if not self._registered.wait(timeout):
            self.stop()
            raise ProtocolError(f"worker could not register within {timeout} s")
        if self._register_error is not None:
            self.stop()
            raise ProtocolError(f"registration rejected: {self._register_error}")

    def stop(self) -> None:
        self._stop.set()
        self._close_socket()
        if self._thread is not None and self._thread is not threading.current_thread():
            self._thread.join(timeout=5.0)
        self._executor.shutdown(wait=False, cancel_futures=True)

    def abort(self) -> None:
        """Drop off the network abruptly, simulating a crash."""
        self._stop.set()
        self._close_socket()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _close_socket(self) -> None:
        sock, self._sock = self._sock, None
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    # ------------------------------------------------------------- main loop

    def run(self) -> None:
        """Register, serve tasks, reconnect with backoff until stopped."""
        backoff = _BACKOFF_START_S
        while not self._stop.is_set():
            try:
                sock = socket.create_connection(self.driver_address, timeout=5.0)
            except OSError:
                if self._sleep_backoff(backoff):
                    return
                backoff = min(backoff * 2, _BACKOFF_MAX_S)
                continue
            sock.settimeout(None)
            try:
                if not self._register(sock):
                    sock.close()
                    return
            except (ProtocolError, OSError):
                sock.close()
                if self._sleep_backoff(backoff):
                    return
                backoff = min(backoff * 2, _BACKOFF_MAX_S)
                continue
            backoff = _BACKOFF_START_S
            self._sock = sock
            beat = threading.Thread(target=self._heartbeat_loop, args=(sock,), daemon=True)
            beat.start()
            try:
                if self._serve(sock):
                    return
            finally:
                self._close_socket()

    def _sleep_backoff(self, seconds: float) -> bool:
        return self._stop.wait(seconds)

    def _register(self, sock: socket.socket) -> bool:
        wire.send_message(
            sock,
            MsgType.REGISTER,
            {"worker_id": self.worker_id.encode("utf-8"), "slots": wire.u32(self.slots)},
        )
        message = wire.recv_message(sock)
        if message is None or message[0] != MsgType.REGISTER_ACK:
            raise ProtocolError("no registration ack")
        fields = message[1]
        if fields.get("status") != b"ok":
            self._register_error = fields.get("error", b"").decode("utf-8", "replace")
            self._registered.set()
            return False
        if "heartbeat_ms" in fields:
            self._heartbeat_s = max(wire.read_u64(fields["heartbeat_ms"]) / 1000.0, 0.05)
        self._registered.set()
        return True

    def _heartbeat_loop(self, sock: socket.socket) -> None:
        while not self._stop.is_set() and self._sock is sock:
            if self._stop.wait(self._heartbeat_s):
                return
            if self._sock is not sock:
                return
            try:
                with self._send_lock:
                    wire.send_message(sock, MsgType.HEARTBEAT, {})
            except OSError:
                try:
                    sock.close()
                except OSError:
                    pass
                return

    def _serve(self, sock: socket.socket) -> bool:
        """Handle messages until disconnect; True means shut down for good."""
        while True:
            try:
                message = wire.recv_message(sock)
            except (ProtocolError, OSError):
                return self._stop.is_set()
            if message is None:
                return self._stop.is_set()
            msg_type, fields = message
            if msg_type == MsgType.SHUTDOWN:
                self._stop.set()
                return True
            if msg_type == MsgType.TASK:
                self._executor.submit(self._run_task, fields)

    # ---------------------------------------------------------------- tasks

    def _run_task(self, fields: dict[str, bytes]) -> None:
        reply = {
            "job_id": fields.get("job_id", wire.u64(0)),
            "partition_id": fields.get("partition_id", wire.u32(0)),
        }
        try:
            output = self._execute(fields)
            reply["status"] = b"ok"
            reply.update(output)
        except BagpipeError as exc:
            reply["status"] = b"fail"
            reply["error"] = self._describe(exc).encode("utf-8", "replace")
        except Exception as exc:  # noqa: BLE001 - a task must never kill the worker
            reply["status"] = b"fail"
            reply["error"] = f"{type(exc).__name__}: {exc}".encode("utf-8", "replace")
        sock = self._sock
        if sock is None:
            return
        try:
            with self._send_lock:
                wire.send_message(sock, MsgType.RESULT, reply)
        except OSError:
            pass  # driver treats the drop as a lost worker and retries

    @staticmethod
    def _describe(exc: BagpipeError) -> str:
        text = str(exc)
        stderr = getattr(exc, "stderr", b"")
        if stderr:
            tail = stderr[-500:].decode("utf-8", "replace").strip()
            if tail:
                text = f"{text}; stderr: {tail}"
        return text

    def _execute(self, fields: dict[str, bytes]) -> dict[str, bytes]:
        try:
            job_id = wire.read_u64(fields["job_id"])
            partition_id = wire.read_u32(fields["partition_id"])
            bag_path = fields["bag_path"].decode("utf-8")
            range_start = wire.read_u64(fields["range_start"])
            range_end = wire.read_u64(fields["range_end"])
            argv = fields["cmd"].decode("utf-8").split("\x00")
            output_mode = OutputMode.from_wire(fields["output_mode"].decode("utf-8"))
        except (KeyError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"malformed task: {exc}") from exc
        env = {}
        if "env" in fields:
            for pair in fields["env"].decode("utf-8").split("\x00"):
                key, sep, value = pair.partition("=")
                if sep:
                    env[key] = value
        timeout_s = None
        if "timeout_ms" in fields:
            timeout_s = wire.read_u64(fields["timeout_ms"]) / 1000.0

        input_frames = self._load_partition(bag_path, partition_id, range_start, range_end)
        spec = UserLogicSpec(tuple(argv), env=env, timeout_s=timeout_s)
        result = run_user_logic(spec, input_frames, task_id=f"{job_id}/{partition_id}")

        if output_mode.kind == "store":
            path = store_output(result.frames, output_mode.store_dir, partition_id)
            return {"path": path.encode("utf-8")}
        data = framing.encode_bytes(result.frames)
        if len(data) > self.collect_cap_bytes:
            raise UserLogicError(
                f"collected output is {len(data)} bytes, over the "
                f"{self.collect_cap_bytes} byte cap; use store mode"
            )
        return {"data": data}

    def _load_partition(
        self, bag_path: str, partition_id: int, range_start: int, range_end: int
    ) -> list[Frame]:
        store = self._load_bag(bag_path)
        reader = open_reader(store)
        if range_start:
            reader.skip_records(range_start)
        frames = []
        for index in range(range_start, range_end):
            record = reader.next_record()
            if record is None:
                raise UserLogicError(
                    f"bag {bag_path!r} ended at record {index}, range goes to {range_end}"
                )
            encoded = codec.encode_record(
                record.topic.encode("utf-8"), record.timestamp, record.payload
            )
            frames.append(Frame(f"{partition_id}/{index}", encoded))
        return frames

    def _load_bag(self, bag_path: str) -> MemoryStore:
        try:
            stat = os.stat(bag_path)
        except OSError as exc:
            raise UserLogicError(f"source not found: {bag_path}") from exc
        key = (bag_path, stat.st_size, stat.st_mtime_ns)
        with self._cache_lock:
            if self._bag_cache is not None and self._bag_cache[0] == key:
                return self._bag_cache[1]
        with open(bag_path, "rb") as source:
            store = load_from_input_stream(source)
        with self._cache_lock:
            self._bag_cache = (key, store)
        return store
