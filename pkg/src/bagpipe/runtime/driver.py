"""Job scheduling: accept workers, split bags into partitions, dispatch.

One job runs at a time. Tasks go FIFO to free worker slots; a task lost
to a worker failure or reported as failed is retried exactly once,
preferably on a different worker; a second failure fails the job and
cancels what has not finished.
"""

from __future__ import annotations

import socket
import threading
import time
from collections import deque

from bagpipe import frames as framing
from bagpipe.bag import scan_summary
from bagpipe.errors import FrameDecodeError, JobError, ProtocolError
from bagpipe.runtime import wire
from bagpipe.runtime.types import (
    JobResult,
    OutputMode,
    PartitionOutcome,
    WorkerInfo,
    partition_ranges,
)
from bagpipe.runtime.wire import MsgType
from bagpipe.stores import DiskStore
from bagpipe.userproc import UserLogicSpec

DEFAULT_PORT = 7787
COLLECT_CAP_BYTES = 64 * 1024 * 1024


class _WorkerConn:
    def __init__(self, worker_id: str, slots: int, sock: socket.socket, address: str):
        self.worker_id = worker_id
        self.slots = slots
        self.sock = sock
        self.address = address
        self.send_lock = threading.Lock()
        self.free_slots = slots
        self.last_beat = time.monotonic()
        self.alive = True
        # not dispatchable until the registration ack is on the wire,
        # otherwise a task could reach the worker ahead of the ack
        self.ready = False
        self.in_flight: set[int] = set()


class Driver:
    """Accepts worker registrations and runs jobs over them."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        worker_wait_s: float = 10.0,
        heartbeat_interval_s: float = 2.0,
        heartbeat_misses: int = 3,
        collect_cap_bytes: int = COLLECT_CAP_BYTES,
    ):
        self.worker_wait_s = worker_wait_s
        self.heartbeat_interval_s = heartbeat_interval_s
        self.heartbeat_misses = heartbeat_misses
        self.collect_cap_bytes = collect_cap_bytes

        self._cond = threading.Condition()
        self._workers: dict[str, _WorkerConn] = {}
        self._closing = False
        self._workers_empty_since: float | None = time.monotonic()

        # current-job state, all guarded by _cond
        self._job_id = 0
        self._job_active = False
        self._job_failed = False
        self._pending: deque[int] = deque()
        self._attempts: dict[int, int] = {}
        self._avoid: dict[int, str] = {}
        self._outcomes: dict[int, PartitionOutcome] = {}
        self._task_fields: dict[int, dict[str, bytes]] = {}

        self._listener = socket.create_server((host, port))
        self.address: tuple[str, int] = self._listener.getsockname()[:2]
        self._threads: list[threading.Thread] = []
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        self._monitor_thread = threading.Thread(target=self._monitor_loop, daemon=True)
        self._monitor_thread.start()

    # ------------------------------------------------------------- lifecycle

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()

    def shutdown(self) -> None:
        """Send SHUTDOWN to all workers and stop serving."""
        with self._cond:
            if self._closing:
                return
            self._closing = True
            conns = list(self._workers.values())
            self._workers.clear()
            self._cond.notify_all()
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in conns:
            try:
                with conn.send_lock:
                    wire.send_message(conn.sock, MsgType.SHUTDOWN, {})
            except OSError:
                pass
            try:
                conn.sock.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)

    def workers(self) -> list[WorkerInfo]:
        with self._cond:
            return [
                WorkerInfo(c.worker_id, c.address, c.slots)
                for c in self._workers.values()
                if c.ready
            ]

    # ------------------------------------------------------- worker handling

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            thread = threading.Thread(
                target=self._serve_worker, args=(sock, f"{addr[0]}:{addr[1]}"), daemon=True
            )
            self._threads.append(thread)
            thread.start()

    def _serve_worker(self, sock: socket.socket, address: str) -> None:
        try:
            message = wire.recv_message(sock)
        except (ProtocolError, OSError):
            sock.close()
            return
        if message is None or message[0] != MsgType.REGISTER:
            sock.close()
            return
        fields = message[1]
        try:
            worker_id = fields["worker_id"].decode("utf-8")
            slots = wire.read_u32(fields["slots"])
        except (KeyError, UnicodeDecodeError, ProtocolError):
            sock.close()
            return
        if slots < 1 or not worker_id:
            self._send_ack(sock, ok=False, error="slots must be >= 1 and worker_id non-empty")
            sock.close()
            return

        conn = _WorkerConn(worker_id, slots, sock, address)
        while True:
            with self._cond:
                if self._closing:
                    reject = "driver is shutting down"
                    break
                old = self._workers.get(worker_id)
                if old is None:
                    reject = None
                    self._workers[worker_id] = conn
                    self._workers_empty_since = None
                    self._cond.notify_all()
                    break
            # the id is taken; only reject if that session is provably
            # alive, else reap it so a fast-reconnecting worker can return
            try:
                with old.send_lock:
                    wire.send_message(old.sock, MsgType.HEARTBEAT, {})
            except OSError:
                self._lose_worker(old, "connection dead at re-registration")
                continue
            reject = "duplicate worker id"
            break
        if reject is not None:
            self._send_ack(sock, ok=False, error=reject)
            sock.close()
            return
        if not self._send_ack(sock, ok=True):
            self._lose_worker(conn, "registration ack failed")
            return
        with self._cond:
            conn.ready = True
            self._cond.notify_all()

        while True:
            try:
                message = wire.recv_message(sock)
            except (ProtocolError, OSError) as exc:
                self._lose_worker(conn, str(exc))
                return
            if message is None:
                self._lose_worker(conn, "connection closed")
                return
            msg_type, fields = message
            conn.last_beat = time.monotonic()
            if msg_type == MsgType.HEARTBEAT:
                continue
            if msg_type == MsgType.RESULT:
                self._handle_result(conn, fields)
                continue
            self._lose_worker(conn, f"unexpected {msg_type.name} from worker")
            return

    def _send_ack(self, sock: socket.socket, ok: bool, error: str = "") -> bool:
        fields = {"status": b"ok" if ok else b"rejected"}
        if error:
            fields["error"] = error.encode("utf-8")
        if ok:
            fields["heartbeat_ms"] = wire.u64(int(self.heartbeat_interval_s * 1000))
        try:
            wire.send_message(sock, MsgType.REGISTER_ACK, fields)
            return True
        except OSError:
            return False

    def _monitor_loop(self) -> None:
        limit = self.heartbeat_interval_s * self.heartbeat_misses
        while True:
            with self._cond:
                if self._closing:
                    return
                now = time.monotonic()
                stale = [c for c in self._workers.values() if now - c.last_beat > limit]
            for conn in stale:
                self._lose_worker(conn, "heartbeats stopped")
            time.sleep(self.heartbeat_interval_s / 2)

    def _lose_worker(self, conn: _WorkerConn, reason: str) -> None:
        with self._cond:
            if not conn.alive:
                return
            conn.alive = False
            self._workers.pop(conn.worker_id, None)
            if not self._workers:
                self._workers_empty_since = time.monotonic()
            lost = sorted(conn.in_flight)
            conn.in_flight.clear()
            for partition_id in lost:
                self._record_failure(partition_id, f"worker {conn.worker_id} lost: {reason}")
            self._cond.notify_all()
        try:
            conn.sock.close()
        except OSError:
            pass

    # --------------------------------------------------------- job execution

    def submit_job(
        self,
        bag_path: str,
        partition_count: int,
        user_logic: UserLogicSpec,
        output_mode: OutputMode,
    ) -> JobResult:
        """Run one job to completion; one at a time.

        Setup problems (no workers, unreadable bag) raise JobError; task
        failures after retry produce a JobResult with failed outcomes.
        """
        if partition_count < 1:
            raise JobError("partition_count must be >= 1")
        if output_mode.kind == "store" and not output_mode.store_dir:
            raise JobError("store output mode needs a directory")
        started = time.perf_counter()

        try:
            with DiskStore.open(bag_path) as store:
                total_records = scan_summary(store).record_count
        except OSError as exc:
            raise JobError(f"cannot read bag {bag_path!r}: {exc}") from exc

        ranges = partition_ranges(total_records, partition_count)
        deadline = time.monotonic() + self.worker_wait_s
        with self._cond:
            if self._job_active:
                raise JobError("another job is already running")
            while not self._workers:
                if self._closing:
                    raise JobError("driver is shutting down")
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise JobError(f"no workers registered within {self.worker_wait_s} s")
                self._cond.wait(remaining)

            self._job_id += 1
            self._job_active = True
            self._job_failed = False
            self._pending = deque(range(partition_count))
            self._attempts = {pid: 0 for pid in range(partition_count)}
            self._avoid = {}
            self._outcomes = {}
            self._task_fields = {
                pid: self._build_task_fields(pid, bag_path, ranges[pid], user_logic, output_mode)
                for pid in range(partition_count)
            }

            try:
                while len(self._outcomes) < partition_count:
                    self._dispatch_ready()
                    if len(self._outcomes) >= partition_count:
                        break
                    self._check_worker_drought()
                    self._cond.wait(0.05)
            finally:
                self._job_active = False
                self._pending.clear()
                self._task_fields.clear()

            outcomes = [self._outcomes[pid] for pid in sorted(self._outcomes)]
        return JobResult(outcomes=outcomes, wall_time_s=time.perf_counter() - started)

    def _build_task_fields(
        self,
        partition_id: int,
        bag_path: str,
        record_range: tuple[int, int],
        user_logic: UserLogicSpec,
        output_mode: OutputMode,
    ) -> dict[str, bytes]:
        fields = {
            "job_id": wire.u64(self._job_id),
            "partition_id": wire.u32(partition_id),
            "bag_path": bag_path.encode("utf-8"),
            "range_start": wire.u64(record_range[0]),
            "range_end": wire.u64(record_range[1]),
            "cmd": "\x00".join(user_logic.command).encode("utf-8"),
            "output_mode": output_mode.to_wire().encode("utf-8"),
        }
        if user_logic.env:
            pairs = "\x00".join(f"{k}={v}" for k, v in user_logic.env.items())
            fields["env"] = pairs.encode("utf-8")
        if user_logic.timeout_s is not None:
            fields["timeout_ms"] = wire.u64(int(user_logic.timeout_s * 1000))
        return fields

    def _check_worker_drought(self) -> None:
        if self._workers or self._workers_empty_since is None:
            return
        if time.monotonic() - self._workers_empty_since < self.worker_wait_s:
            return
        note = f"all workers lost; none returned within {self.worker_wait_s} s"
        for pid in list(self._pending):
            if pid not in self._outcomes:
                self._outcomes[pid] = PartitionOutcome(pid, ok=False, error=note)
        self._pending.clear()

    def _dispatch_ready(self) -> None:
        if self._job_failed:
            return
        while self._pending:
            partition_id = self._pending[0]
            conn = self._pick_worker(partition_id)
            if conn is None:
                return
            self._pending.popleft()
            conn.free_slots -= 1
            conn.in_flight.add(partition_id)
            try:
                with conn.send_lock:
                    wire.send_message(conn.sock, MsgType.TASK, self._task_fields[partition_id])
            except OSError as exc:
                # loss path re-queues or fails this partition
                self._lose_worker_locked(conn, f"send failed: {exc}")

    def _pick_worker(self, partition_id: int) -> _WorkerConn | None:
        avoid = self._avoid.get(partition_id)
        fallback = None
        for conn in self._workers.values():
            if not conn.ready or conn.free_slots <= 0:
                continue
            if conn.worker_id == avoid:
                fallback = conn
                continue
            return conn
        return fallback

    def _lose_worker_locked(self, conn: _WorkerConn, reason: str) -> None:
        if not conn.alive:
            return
        conn.alive = False
        self._workers.pop(conn.worker_id, None)
        if not self._workers:
            self._workers_empty_since = time.monotonic()
        lost = sorted(conn.in_flight)
        conn.in_flight.clear()
        for pid in lost:
            self._record_failure(pid, f"worker {conn.worker_id} lost: {reason}")
        self._cond.notify_all()
        try:
            conn.sock.close()
        except OSError:
            pass

    def _handle_result(self, conn: _WorkerConn, fields: dict[str, bytes]) -> None:
        with self._cond:
            try:
                job_id = wire.read_u64(fields["job_id"])
                partition_id = wire.read_u32(fields["partition_id"])
                status = fields["status"]
            except (KeyError, ProtocolError):
                self._lose_worker_locked(conn, "malformed RESULT")
                return
            if partition_id in conn.in_flight:
                conn.in_flight.discard(partition_id)
                conn.free_slots += 1
            if not self._job_active or job_id != self._job_id:
                self._cond.notify_all()
                return
            if partition_id in self._outcomes:
                self._cond.notify_all()
                return
            if status == b"ok":
                outcome = self._decode_success(conn, partition_id, fields)
                if outcome is None:
                    self._record_failure(partition_id, "worker returned malformed output data")
                else:
                    self._outcomes[partition_id] = outcome
            else:
                error = fields.get("error", b"").decode("utf-8", "replace") or "task failed"
                self._avoid[partition_id] = conn.worker_id
                self._record_failure(partition_id, error)
            self._cond.notify_all()

    def _decode_success(
        self, conn: _WorkerConn, partition_id: int, fields: dict[str, bytes]
    ) -> PartitionOutcome | None:
        if "path" in fields:
            return PartitionOutcome(
                partition_id, ok=True, stored_path=fields["path"].decode("utf-8", "replace")
            )
        data = fields.get("data")
        if data is None or len(data) > self.collect_cap_bytes:
            return None
        try:
            decoded = framing.decode_bytes(data)
        except FrameDecodeError:
            return None
        self._avoid.pop(partition_id, None)
        return PartitionOutcome(partition_id, ok=True, frames=decoded)

    def _record_failure(self, partition_id: int, reason: str) -> None:
        """Guarded by _cond. Requeue on first failure, fail the job on second."""
        if not self._job_active or self._job_failed or partition_id in self._outcomes:
            return
        self._attempts[partition_id] += 1
        if self._attempts[partition_id] <= 1:
            self._pending.append(partition_id)
            return
        self._job_failed = True
        self._outcomes[partition_id] = PartitionOutcome(
            partition_id, ok=False, error=f"failed twice, giving up: {reason}"
        )
        note = f"cancelled after partition {partition_id} failed twice"
        self._pending.clear()
        for pid in self._attempts:
            if pid not in self._outcomes:
                self._outcomes[pid] = PartitionOutcome(pid, ok=False, error=note)
