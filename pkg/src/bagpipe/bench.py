"""Desk-scale benchmarks: cache backend comparison, scheduler scaling,
and the cluster-hours estimator.

Workloads mirror the reference experiments at 1/100 to 1/1000 of their
size; the scale factor is embedded in every report so desk numbers are
never confused with server numbers. Reference multipliers (3X write,
10X small-file read, 5X large-file read) are printed as context only;
the pass/fail gate is directional: memory must not lose to disk.
"""

from __future__ import annotations

import os
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from statistics import mean, pstdev

from bagpipe import codec
from bagpipe.bag import MessageRecord, open_reader, open_writer
from bagpipe.errors import JobError
from bagpipe.runtime.driver import Driver
from bagpipe.runtime.types import OutputMode
from bagpipe.runtime.worker import Worker
from bagpipe.stores import ChunkedStore, DiskStore, MemoryStore
from bagpipe.userproc import UserLogicSpec

NOISY_COV = 0.20

# reference multipliers reported by the original cache experiment
PAPER_WRITE_X = 3.0
PAPER_READ_SMALL_X = 10.0
PAPER_READ_LARGE_X = 5.0

# reference workload sizes; desk scale divides the counts down
PAPER_SMALL = (1_000_000, 1024)
PAPER_LARGE = (100_000, 1_048_576)
DEFAULT_SCALE = {"small-file": 100, "large-file": 1000}


@dataclass(frozen=True, slots=True)
class CacheBenchConfig:
    file_count: int
    file_size_bytes: int
    backend: str  # "disk" | "memory"
    workload: str  # "small-file" | "large-file"
    work_dir: str | None = None

    def __post_init__(self):
        if self.file_count <= 0:
            raise ValueError("empty benchmark: file_count must be positive")
        if self.file_size_bytes <= 0:
            raise ValueError("file_size_bytes must be positive")
        if self.backend not in ("disk", "memory"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "disk" and not self.work_dir:
            raise ValueError("disk backend needs a work_dir")


def _preflight(config: CacheBenchConfig) -> None:
    total = config.file_count * (config.file_size_bytes + 64)
    if config.backend == "disk":
        free = shutil.disk_usage(config.work_dir).free
        if total * 1.2 > free:
            raise ValueError(
                f"insufficient disk space: need {total} bytes, {free} free"
            )
        return
    try:
        available = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError):
        return
    if total * 2 > available:
        raise ValueError(f"insufficient RAM: need {total} bytes, {available} available")


def run_cache_bench(config: CacheBenchConfig) -> dict[str, float]:
    """Write file_count one-record bags, read them back; time each phase."""
    _preflight(config)
    payload = os.urandom(config.file_size_bytes)
    record = MessageRecord("/bench/blob", 1, payload)

    disk_paths: list[str] = []
    memory_stores: list[MemoryStore] = []

    def open_store(index: int) -> ChunkedStore:
        if config.backend == "disk":
            path = os.path.join(config.work_dir, f"bench-{index:06d}.dbag")
            disk_paths.append(path)
            return DiskStore.create(path)
        store = MemoryStore()
        memory_stores.append(store)
        return store

    started = time.perf_counter()
    for index in range(config.file_count):
        store = open_store(index)
        writer = open_writer(store)
        writer.append(record)
        writer.seal()
        if config.backend == "disk":
            store.close()
    write_s = time.perf_counter() - started

    def reopen(index: int) -> ChunkedStore:
        if config.backend == "disk":
            return DiskStore.open(disk_paths[index])
        return memory_stores[index]

    started = time.perf_counter()
    read_back = 0
    for index in range(config.file_count):
        store = reopen(index)
        for item in open_reader(store):
            read_back += len(item.payload)
        if config.backend == "disk":
            store.close()
    read_s = time.perf_counter() - started

    for path in disk_paths:
        os.unlink(path)
    if read_back != config.file_count * config.file_size_bytes:
        raise RuntimeError("benchmark readback size mismatch")
    return {"write_s": write_s, "read_s": read_s}


@dataclass(slots=True)
class BenchCell:
    backend: str
    phase: str
    mean_s: float
    cov: float


@dataclass(slots=True)
class BenchReport:
    workload: str
    file_count: int
    file_size_bytes: int
    repeats: int
    scale_factor: int
    machine: str
    timestamp: str
    noisy: bool
    write_ratio: float
    read_ratio: float
    paper_reference: str
    cells: list[BenchCell] = field(default_factory=list)


def _cov(samples: list[float]) -> float:
    avg = mean(samples)
    if avg == 0:
        return 0.0
    return pstdev(samples) / avg


def compare_backends(
    workload: str,
    work_dir: str | None = None,
    repeats: int = 3,
    scale_factor: int | None = None,
) -> BenchReport:
    """Identical workloads on both backends; ratios are disk over memory."""
    if workload not in DEFAULT_SCALE:
        raise ValueError(f"unknown workload {workload!r}; use small-file or large-file")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    scale = scale_factor if scale_factor is not None else DEFAULT_SCALE[workload]
    if scale < 1:
        raise ValueError("scale_factor must be >= 1")
    paper_count, file_size = PAPER_SMALL if workload == "small-file" else PAPER_LARGE
    file_count = max(paper_count // scale, 1)

    own_dir = None
    if work_dir is None:
        own_dir = tempfile.mkdtemp(prefix="bagpipe-bench-")
        work_dir = own_dir
    try:
        times: dict[tuple[str, str], list[float]] = {}
        for _ in range(repeats):
            for backend in ("disk", "memory"):
                config = CacheBenchConfig(
                    file_count, file_size, backend, workload, work_dir
                )
                result = run_cache_bench(config)
                times.setdefault((backend, "write"), []).append(result["write_s"])
                times.setdefault((backend, "read"), []).append(result["read_s"])
    finally:
        if own_dir is not None:
            shutil.rmtree(own_dir, ignore_errors=True)

    cells = [
        BenchCell(backend, phase, mean(samples), _cov(samples))
        for (backend, phase), samples in sorted(times.items())
    ]
    means = {(c.backend, c.phase): c.mean_s for c in cells}
    read_x = PAPER_READ_SMALL_X if workload == "small-file" else PAPER_READ_LARGE_X
    return BenchReport(
        workload=workload,
        file_count=file_count,
        file_size_bytes=file_size,
        repeats=repeats,
        scale_factor=scale,
        machine=f"{platform.platform()}/{os.cpu_count()}cpu",
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        noisy=any(cell.cov >= NOISY_COV for cell in cells),
        write_ratio=means[("disk", "write")] / means[("memory", "write")],
        read_ratio=means[("disk", "read")] / means[("memory", "read")],
        paper_reference=(
            f"reference run: write {PAPER_WRITE_X:g}X, read {read_x:g}X "
            f"({paper_count} files of {file_size} bytes)"
        ),
        cells=cells,
    )


def serialize_report(report: BenchReport) -> str:
    lines = [
        f"workload={report.workload}",
        f"file_count={report.file_count}",
        f"file_size_bytes={report.file_size_bytes}",
        f"repeats={report.repeats}",
        f"scale_factor={report.scale_factor}",
        f"machine={report.machine}",
        f"timestamp={report.timestamp}",
        f"noisy={'true' if report.noisy else 'false'}",
        f"write_ratio={report.write_ratio!r}",
        f"read_ratio={report.read_ratio!r}",
        f"paper_reference={report.paper_reference}",
        "[table]",
        "backend\tphase\tmean_s\tcov",
    ]
    for cell in report.cells:
        lines.append(f"{cell.backend}\t{cell.phase}\t{cell.mean_s!r}\t{cell.cov!r}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> BenchReport:
    head: dict[str, str] = {}
    cells: list[BenchCell] = []
    in_table = False
    for line in text.splitlines():
        if not line:
            continue
        if line == "[table]":
            in_table = True
            continue
        if not in_table:
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"bad report line {line!r}")
            head[key] = value
            continue
        columns = line.split("\t")
        if columns == ["backend", "phase", "mean_s", "cov"]:
            continue
        if len(columns) != 4:
            raise ValueError(f"bad table row {line!r}")
        cells.append(BenchCell(columns[0], columns[1], float(columns[2]), float(columns[3])))
    try:
        return BenchReport(
            workload=head["workload"],
            file_count=int(head["file_count"]),
            file_size_bytes=int(head["file_size_bytes"]),
            repeats=int(head["repeats"]),
            scale_factor=int(head["scale_factor"]),
            machine=head["machine"],
            timestamp=head["timestamp"],
            noisy=head["noisy"] == "true",
            write_ratio=float(head["write_ratio"]),
            read_ratio=float(head["read_ratio"]),
            paper_reference=head["paper_reference"],
            cells=cells,
        )
    except KeyError as exc:
        raise ValueError(f"report is missing key {exc.args[0]!r}") from exc


# --------------------------------------------------------------- scalability


@dataclass(frozen=True, slots=True)
class ScaleBenchConfig:
    worker_counts: tuple[int, ...] = (1, 2, 4, 8)
    task_count: int = 400
    task_ms: int = 25

    def __post_init__(self):
        if not self.worker_counts or any(w < 1 for w in self.worker_counts):
            raise ValueError("worker_counts must be positive")
        if tuple(sorted(self.worker_counts)) != tuple(self.worker_counts):
            raise ValueError("worker_counts must be ascending")
        if self.task_count < 1 or self.task_ms < 1:
            raise ValueError("task_count and task_ms must be positive")
        object.__setattr__(self, "worker_counts", tuple(self.worker_counts))


@dataclass(slots=True)
class ScaleRow:
    workers: int
    wall_s: float
    speedup: float
    efficiency: float


def sleep_task_command(task_ms: int) -> tuple[str, ...]:
    """A child that sleeps, then emits an empty frame stream."""
    seconds = task_ms / 1000.0
    return ("/bin/sh", "-c", f"sleep {seconds}; printf 'BPR1\\377\\377\\377\\377'")


def run_scale_bench(config: ScaleBenchConfig = ScaleBenchConfig()) -> list[ScaleRow]:
    """Same job at each worker count; speedup(w) = time(1)/time(w)."""
    rows: list[ScaleRow] = []
    with tempfile.TemporaryDirectory(prefix="bagpipe-scale-") as work_dir:
        bag_path = os.path.join(work_dir, "tasks.dbag")
        with DiskStore.create(bag_path) as store:
            writer = open_writer(store)
            for index in range(config.task_count):
                writer.append(MessageRecord("/t", index, b"x"))
            writer.seal()

        command = sleep_task_command(config.task_ms)
        baseline: float | None = None
        for count in config.worker_counts:
            wall = _timed_job(bag_path, config.task_count, command, count)
            if baseline is None:
                baseline = wall * count  # exact when the first count is 1
            speedup = baseline / wall
            rows.append(ScaleRow(count, wall, speedup, speedup / count))
    return rows


def _timed_job(
    bag_path: str, partitions: int, command: tuple[str, ...], worker_count: int
) -> float:
    with Driver(port=0, worker_wait_s=10.0) as driver:
        workers = [Worker(driver.address, slots=1) for _ in range(worker_count)]
        try:
            for worker in workers:
                worker.start()
            result = driver.submit_job(
                bag_path, partitions, UserLogicSpec(command), OutputMode.collect()
            )
            if not result.ok:
                failed = [o for o in result.outcomes if not o.ok]
                raise JobError(f"scale bench job failed: {failed[0].error}")
            return result.wall_time_s
        finally:
            for worker in workers:
                worker.stop()


def serialize_scale_rows(rows: list[ScaleRow]) -> str:
    lines = ["workers\twall_s\tspeedup\tefficiency"]
    for row in rows:
        lines.append(
            f"{row.workers}\t{row.wall_s:.4f}\t{row.speedup:.3f}\t{row.efficiency:.3f}"
        )
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- estimator


def estimate_cluster_hours(
    single_machine_hours: float, workers: int, efficiency: float
) -> float:
    """Wall hours on `workers` machines at the given parallel efficiency."""
    if single_machine_hours < 0:
        raise ValueError("single_machine_hours must be >= 0")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not 0 < efficiency <= 1:
        raise ValueError("efficiency must be in (0, 1]")
    return single_machine_hours / (workers * efficiency)


# --------------------------------------------------------------- codec bench


@dataclass(slots=True)
class CodecRow:
    backend: str
    op: str
    mean_s: float


def run_codec_bench(
    record_count: int = 20_000, payload_size: int = 512, repeats: int = 3
) -> list[CodecRow]:
    """Time the two codec implementations on identical data."""
    from bagpipe.codec import _backends_for_bench

    payload = os.urandom(payload_size)
    records = [(b"/bench/topic", index, payload) for index in range(record_count)]
    rows: list[CodecRow] = []
    for name, module in _backends_for_bench():
        block = module.encode_record_block(records)
        frame_items = [(b"f/%d" % i, payload) for i in range(record_count)]
        stream = module.encode_frame_stream(frame_items)
        timings: dict[str, list[float]] = {"encode_block": [], "parse_block": [],
                                           "encode_frames": [], "decode_frames": []}
        for _ in range(repeats):
            t0 = time.perf_counter()
            module.encode_record_block(records)
            timings["encode_block"].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            module.parse_record_block(block, record_count)
            timings["parse_block"].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            module.encode_frame_stream(frame_items)
            timings["encode_frames"].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            module.decode_frame_stream(stream)
            timings["decode_frames"].append(time.perf_counter() - t0)
        for op, samples in timings.items():
            rows.append(CodecRow(name, op, mean(samples)))
    return rows


def serialize_codec_rows(rows: list[CodecRow]) -> str:
    lines = ["backend\top\tmean_s"]
    by_op: dict[str, dict[str, float]] = {}
    for row in rows:
        lines.append(f"{row.backend}\t{row.op}\t{row.mean_s:.6f}")
        by_op.setdefault(row.op, {})[row.backend] = row.mean_s
    for op, backends in sorted(by_op.items()):
        if "pure" in backends and "native" in backends and backends["native"] > 0:
            lines.append(f"# {op}: native is {backends['pure'] / backends['native']:.2f}x pure")
    return "\n".join(lines) + "\n"
