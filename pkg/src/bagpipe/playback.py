"""Play and Record: move messages between bags and the bus.

Play publishes a bag's records onto the bus, pacing publishes by the
recorded timestamps scaled by a rate (0 = as fast as possible).
Record appends envelopes from a subscription into a bag writer,
preserving original timestamps, until a stop condition fires.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Iterable

from bagpipe.bag import BagReader, BagSummary, BagWriter
from bagpipe.bus import Bus, Publisher, Selector, Subscription
from bagpipe.errors import BagCorruptionError

_NS = 1_000_000_000


@dataclass(frozen=True, slots=True)
class PlayClock:
    """rate > 0 scales the timeline; rate 0 publishes immediately."""

    rate: float = 1.0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be >= 0")


@dataclass(slots=True)
class PlayReport:
    published: int = 0
    duration_s: float = 0.0
    out_of_order: int = 0
    error: str | None = None


def play(
    reader: BagReader,
    bus: Bus,
    clock: PlayClock = PlayClock(),
    topics: Iterable[str] | None = None,
) -> PlayReport:
    """Publish the bag's records in stored order.

    Out-of-order timestamps are published as stored and counted in the
    report. Corruption mid-play stops playback; the report carries the
    partial count and the error text.
    """
    wanted = None if topics is None else frozenset(topics)
    publishers: dict[str, Publisher] = {}
    report = PlayReport()
    started = time.perf_counter()
    epoch_wall: float | None = None
    epoch_ts = 0
    prev_ts: int | None = None
    while True:
        try:
            record = reader.next_record()
        except BagCorruptionError as exc:
            report.error = str(exc)
            break
        if record is None:
            break
        if wanted is not None and record.topic not in wanted:
            continue
        if prev_ts is not None and record.timestamp < prev_ts:
            report.out_of_order += 1
        prev_ts = record.timestamp
        if clock.rate > 0:
            if epoch_wall is None:
                epoch_wall = time.perf_counter()
                epoch_ts = record.timestamp
            else:
                target = epoch_wall + (record.timestamp - epoch_ts) / _NS / clock.rate
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
        publisher = publishers.get(record.topic)
        if publisher is None:
            publisher = publishers[record.topic] = bus.advertise(record.topic)
        publisher.publish(record.payload, record.timestamp)
        report.published += 1
    report.duration_s = time.perf_counter() - started
    return report


@dataclass(frozen=True, slots=True)
class StopCondition:
    """Record until: N messages written, the queue idles, or an event fires."""

    count: int | None = None
    idle_timeout_s: float | None = None
    stop_event: threading.Event | None = None

    def __post_init__(self):
        if self.count is None and self.idle_timeout_s is None and self.stop_event is None:
            raise ValueError("stop condition needs count, idle timeout, or event")
        if self.count is not None and self.count < 0:
            raise ValueError("count must be >= 0")
        if self.idle_timeout_s is not None and self.idle_timeout_s <= 0:
            raise ValueError("idle timeout must be positive")


_EVENT_POLL_S = 0.05


def record_from(
    subscription: Subscription, writer: BagWriter, stop: StopCondition
) -> BagSummary:
    """Append envelopes from an existing subscription, then seal.

    A count stop fires exactly at the Nth written message.
    """
    written = 0
    while not (stop.count is not None and written >= stop.count):
        if stop.stop_event is not None and stop.stop_event.is_set():
            break
        if stop.idle_timeout_s is not None:
            timeout = stop.idle_timeout_s
        elif stop.stop_event is not None:
            timeout = _EVENT_POLL_S
        else:
            timeout = None
        record = subscription.pop(timeout)
        if record is None:
            if stop.idle_timeout_s is not None:
                break
            continue
        writer.append(record)
        written += 1
    return writer.seal()


def record(bus: Bus, selector: Selector, writer: BagWriter, stop: StopCondition) -> BagSummary:
    """Subscribe, record until the stop condition fires, seal the bag."""
    subscription = bus.subscribe(selector)
    try:
        return record_from(subscription, writer, stop)
    finally:
        subscription.close()
