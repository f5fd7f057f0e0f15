"""Command-line entry point.

Exit codes: 0 success, 1 operational error (one-line reason on standard
error), 2 usage error. Machine-readable output goes to standard output,
diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading
import time

from bagpipe import bench as benchmod
from bagpipe import codec
from bagpipe import frames as framing
from bagpipe import scenario as scenariomod
from bagpipe.bag import BagSummary, open_reader, open_writer, scan_summary
from bagpipe.bus import Bus
from bagpipe.errors import BagpipeError
from bagpipe.frames import Frame
from bagpipe.playback import PlayClock, StopCondition, play, record_from
from bagpipe.runtime.driver import DEFAULT_PORT, Driver
from bagpipe.runtime.types import OutputMode
from bagpipe.runtime.worker import Worker
from bagpipe.stores import DiskStore, load_from_input_stream
from bagpipe.userproc import UserLogicSpec


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bad address {text!r}; expected host:port")
    return host or "127.0.0.1", int(port)


def _topic_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    topics = [t for t in text.split(",") if t]
    return topics or None


def _print_summary(summary: BagSummary, sealed: bool | None = None) -> None:
    out = sys.stdout
    out.write(f"record_count={summary.record_count}\n")
    out.write(f"byte_size={summary.byte_size}\n")
    out.write(f"min_timestamp={summary.min_timestamp}\n")
    out.write(f"max_timestamp={summary.max_timestamp}\n")
    out.write(f"truncated={'true' if summary.truncated else 'false'}\n")
    for topic in sorted(summary.per_topic):
        out.write(f"topic:{topic}={summary.per_topic[topic]}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bagpipe",
        description="Record, replay, and distribute processing of sensor-log bags.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bag = sub.add_parser("bag", help="bag file tools")
    bag_sub = bag.add_subparsers(dest="bag_command", required=True)

    bag_info = bag_sub.add_parser("info", help="print a bag's summary")
    bag_info.add_argument("path", help="bag file, or - for standard input")

    bag_play = bag_sub.add_parser("play", help="replay a bag onto an in-process bus")
    bag_play.add_argument("path")
    bag_play.add_argument("--rate", type=float, default=1.0)
    bag_play.add_argument("--topics", help="comma-separated topic filter")

    bag_record = bag_sub.add_parser(
        "record", help="record bus traffic into a bag (source: --from-play)"
    )
    bag_record.add_argument("path", help="output bag file")
    bag_record.add_argument("--topics", help="comma-separated topics (default: all)")
    bag_record.add_argument("--all", action="store_true", help="record every topic")
    bag_record.add_argument("--count", type=int, help="stop after N messages")
    bag_record.add_argument("--idle-ms", type=int, help="stop after M ms of silence")
    bag_record.add_argument("--from-play", metavar="BAG", help="replay this bag as the source")
    bag_record.add_argument("--from-rate", type=float, default=0.0)
    bag_record.add_argument("--chunk-bytes", type=int, default=None)

    frames_cmd = sub.add_parser("frames", help="frame stream tools")
    frames_sub = frames_cmd.add_subparsers(dest="frames_command", required=True)
    frames_sub.add_parser(
        "unwrap",
        help="replace each record-carrying frame payload with the record's payload",
    )

    driver_cmd = sub.add_parser("driver", help="run a standalone driver")
    driver_cmd.add_argument("--host", default="127.0.0.1")
    driver_cmd.add_argument("--port", type=int, default=DEFAULT_PORT)
    driver_cmd.add_argument("--worker-wait-s", type=float, default=10.0)

    worker_cmd = sub.add_parser("worker", help="run a worker")
    worker_cmd.add_argument("--driver", help="driver host:port (env BAGPIPE_DRIVER)")
    worker_cmd.add_argument(
        "--slots", type=int, default=None, help="concurrent tasks (env BAGPIPE_WORKER_SLOTS)"
    )
    worker_cmd.add_argument("--id", help="worker id (default: generated)")

    run_cmd = sub.add_parser("run", help="run one job over a bag")
    run_cmd.add_argument("--bag", required=True)
    run_cmd.add_argument("--partitions", type=int, required=True)
    run_cmd.add_argument(
        "--cmd", required=True, help="user logic shell command (may be a pipeline)"
    )
    out_group = run_cmd.add_mutually_exclusive_group(required=True)
    out_group.add_argument("--collect", action="store_true")
    out_group.add_argument("--store", metavar="DIR")
    run_cmd.add_argument("--driver", help="bind address for the job's driver")
    run_cmd.add_argument(
        "--local-workers", type=int, default=0, help="spawn N in-process workers"
    )
    run_cmd.add_argument("--timeout-ms", type=int, help="per-task user logic timeout")
    run_cmd.add_argument("--worker-wait-s", type=float, default=10.0)

    scenario_cmd = sub.add_parser("scenario", help="scenario suite tools")
    scenario_sub = scenario_cmd.add_subparsers(dest="scenario_command", required=True)
    generate = scenario_sub.add_parser("generate", help="write one bag per case")
    generate.add_argument("--out", required=True, metavar="DIR")
    generate.add_argument("--duration-s", type=float, default=10.0)
    generate.add_argument("--step-ms", type=int, default=100)
    generate.add_argument("--ego-speed", type=float, default=10.0)
    generate.add_argument("--speed-delta", type=float, default=2.0)
    generate.add_argument("--yaw-rate", type=float, default=0.2)
    generate.add_argument("--no-filter", action="store_true", help="keep all 72 cases")

    bench_cmd = sub.add_parser("bench", help="benchmarks")
    bench_sub = bench_cmd.add_subparsers(dest="bench_command", required=True)

    cache = bench_sub.add_parser("cache", help="disk vs memory backend comparison")
    cache.add_argument("--workload", choices=("small", "large"), default="small")
    cache.add_argument("--scale-factor", type=int, default=None)
    cache.add_argument("--repeats", type=int, default=3)
    cache.add_argument("--work-dir")

    scale = bench_sub.add_parser("scale", help="scheduler speedup curve")
    scale.add_argument("--workers", default="1,2,4,8", help="comma-separated counts")
    scale.add_argument("--tasks", type=int, default=400)
    scale.add_argument("--task-ms", type=int, default=25)

    estimate = bench_sub.add_parser("estimate", help="cluster-hours calculator")
    estimate.add_argument("--hours", type=float, required=True)
    estimate.add_argument("--workers", type=int, required=True)
    estimate.add_argument("--efficiency", type=float, required=True)

    codec_bench = bench_sub.add_parser("codec", help="compare codec implementations")
    codec_bench.add_argument("--records", type=int, default=20_000)
    codec_bench.add_argument("--size", type=int, default=512)
    codec_bench.add_argument("--repeats", type=int, default=3)

    return parser


# ------------------------------------------------------------------ handlers


def _cmd_bag_info(args) -> int:
    if args.path == "-":
        store = load_from_input_stream(sys.stdin.buffer)
        summary = scan_summary(store)
    else:
        with DiskStore.open(args.path) as store:
            summary = scan_summary(store)
    _print_summary(summary)
    return 0


def _cmd_bag_play(args) -> int:
    bus = Bus()
    with DiskStore.open(args.path) as store:
        report = play(
            open_reader(store), bus, PlayClock(args.rate), _topic_list(args.topics)
        )
    sys.stdout.write(f"published={report.published}\n")
    sys.stdout.write(f"duration_s={report.duration_s:.3f}\n")
    sys.stdout.write(f"out_of_order={report.out_of_order}\n")
    if report.error:
        sys.stderr.write(f"playback stopped early: {report.error}\n")
        return 1
    return 0


def _cmd_bag_record(args) -> int:
    if args.count is None and args.idle_ms is None and not args.from_play:
        raise ValueError("bag record needs --count or --idle-ms (or --from-play)")
    selector = None if args.all else _topic_list(args.topics)
    idle_ms = args.idle_ms
    if args.from_play and idle_ms is None:
        idle_ms = 500  # replay sources end; stop once the bus goes quiet
    stop = StopCondition(
        count=args.count,
        idle_timeout_s=None if idle_ms is None else idle_ms / 1000.0,
    )

    bus = Bus()
    subscription = bus.subscribe(selector)
    player = None
    if args.from_play:
        source = DiskStore.open(args.from_play)
        reader = open_reader(source)
        player = threading.Thread(
            target=play, args=(reader, bus, PlayClock(args.from_rate)), daemon=True
        )

    with DiskStore.create(args.path) as store:
        if args.chunk_bytes is not None:
            writer = open_writer(store, chunk_target_bytes=args.chunk_bytes)
        else:
            writer = open_writer(store)
        if player is not None:
            player.start()
        summary = record_from(subscription, writer, stop)
        if player is not None:
            player.join()
    subscription.close()
    summary.byte_size = os.path.getsize(args.path)
    _print_summary(summary)
    return 0


def _cmd_frames_unwrap(args) -> int:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def unwrapped():
        for frame in framing.decode_stream(stdin):
            parsed = codec.parse_record_block(frame.payload, 1)
            yield Frame(frame.name, parsed[0][2])

    framing.encode_stream(unwrapped(), stdout)
    stdout.flush()
    return 0


def _cmd_driver(args) -> int:
    driver = Driver(args.host, args.port, worker_wait_s=args.worker_wait_s)
    sys.stderr.write(f"driver listening on {driver.address[0]}:{driver.address[1]}\n")
    sys.stderr.flush()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        driver.shutdown()
    return 0


def _cmd_worker(args) -> int:
    address = args.driver or os.environ.get("BAGPIPE_DRIVER")
    if not address:
        sys.stderr.write("no driver address: pass --driver or set BAGPIPE_DRIVER\n")
        return 1
    slots = args.slots
    if slots is None:
        slots = int(os.environ.get("BAGPIPE_WORKER_SLOTS", "1"))
    worker = Worker(_parse_address(address), slots=slots, worker_id=args.id)
    sys.stderr.write(f"worker {worker.worker_id} connecting to {address}\n")
    sys.stderr.flush()
    try:
        worker.run()
    except KeyboardInterrupt:
        pass
    finally:
        worker.stop()
    return 0


def _cmd_run(args) -> int:
    if args.partitions < 1:
        sys.stderr.write("--partitions must be >= 1\n")
        return 1
    if not args.cmd.strip():
        sys.stderr.write("--cmd is empty\n")
        return 1
    # one string in, shell semantics out, so pipelines compose filters
    command = ("/bin/sh", "-c", args.cmd)
    timeout_s = args.timeout_ms / 1000.0 if args.timeout_ms else None
    user_logic = UserLogicSpec(command, timeout_s=timeout_s)
    output_mode = OutputMode.store(args.store) if args.store else OutputMode.collect()

    address = args.driver or os.environ.get("BAGPIPE_DRIVER")
    if address:
        host, port = _parse_address(address)
    elif args.local_workers > 0:
        host, port = "127.0.0.1", 0
    else:
        host, port = "127.0.0.1", DEFAULT_PORT

    workers: list[Worker] = []
    with Driver(host, port, worker_wait_s=args.worker_wait_s) as driver:
        try:
            for _ in range(args.local_workers):
                worker = Worker(driver.address, slots=1)
                worker.start()
                workers.append(worker)
            if not args.local_workers:
                sys.stderr.write(
                    f"driver listening on {driver.address[0]}:{driver.address[1]}; "
                    "waiting for workers\n"
                )
                sys.stderr.flush()
            result = driver.submit_job(args.bag, args.partitions, user_logic, output_mode)
        finally:
            for worker in workers:
                worker.stop()

    failed = [outcome for outcome in result.outcomes if not outcome.ok]
    for outcome in failed:
        sys.stderr.write(f"partition {outcome.partition_id}: {outcome.error}\n")
    if failed:
        return 1
    if args.store:
        for outcome in result.outcomes:
            sys.stdout.write(f"{outcome.stored_path}\n")
        return 0
    collected = result.collected_frames()
    if sys.stdout.isatty():
        total = sum(len(frame.payload) for frame in collected)
        sys.stdout.write(
            f"collected {len(collected)} frames, {total} payload bytes "
            "(redirect standard output to capture the stream)\n"
        )
    else:
        sys.stdout.buffer.write(framing.encode_bytes(collected))
        sys.stdout.buffer.flush()
    return 0


def _cmd_scenario_generate(args) -> int:
    params = scenariomod.SynthesisParams(
        duration_s=args.duration_s,
        step_ms=args.step_ms,
        ego_speed=args.ego_speed,
        speed_delta=args.speed_delta,
        yaw_rate=args.yaw_rate,
    )
    predicate = None if args.no_filter else scenariomod.default_filter
    manifest = scenariomod.generate_suite(
        scenariomod.barrier_defaults(), predicate, params, args.out
    )
    with open(manifest, "r", encoding="utf-8") as fh:
        count = sum(1 for _ in fh)
    sys.stdout.write(f"cases={count}\n")
    sys.stdout.write(f"manifest={manifest}\n")
    return 0


def _cmd_bench_cache(args) -> int:
    workload = "small-file" if args.workload == "small" else "large-file"
    report = benchmod.compare_backends(
        workload, args.work_dir, repeats=args.repeats, scale_factor=args.scale_factor
    )
    sys.stdout.write(benchmod.serialize_report(report))
    if report.write_ratio < 1.0 or report.read_ratio < 1.0:
        sys.stderr.write("regression: memory backend lost to disk on some phase\n")
        return 1
    return 0


def _cmd_bench_scale(args) -> int:
    counts = tuple(int(part) for part in args.workers.split(",") if part)
    config = benchmod.ScaleBenchConfig(counts, args.tasks, args.task_ms)
    rows = benchmod.run_scale_bench(config)
    sys.stdout.write(benchmod.serialize_scale_rows(rows))
    return 0


def _cmd_bench_estimate(args) -> int:
    hours = benchmod.estimate_cluster_hours(args.hours, args.workers, args.efficiency)
    sys.stdout.write(f"{hours:g}\n")
    return 0


def _cmd_bench_codec(args) -> int:
    rows = benchmod.run_codec_bench(args.records, args.size, args.repeats)
    sys.stdout.write(benchmod.serialize_codec_rows(rows))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        ("bag", "info"): _cmd_bag_info,
        ("bag", "play"): _cmd_bag_play,
        ("bag", "record"): _cmd_bag_record,
        ("frames", "unwrap"): _cmd_frames_unwrap,
        ("driver", None): _cmd_driver,
        ("worker", None): _cmd_worker,
        ("run", None): _cmd_run,
        ("scenario", "generate"): _cmd_scenario_generate,
        ("bench", "cache"): _cmd_bench_cache,
        ("bench", "scale"): _cmd_bench_scale,
        ("bench", "estimate"): _cmd_bench_estimate,
        ("bench", "codec"): _cmd_bench_codec,
    }
    second = getattr(
        args,
        f"{args.command}_command",
        None,
    )
    handler = handlers[(args.command, second)]
    try:
        return handler(args)
    except (BagpipeError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
