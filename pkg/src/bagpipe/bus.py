"""In-process advertise/subscribe message bus.

Envelopes are MessageRecords in flight. Delivery per topic preserves
publish order, and a subscriber only sees messages published after it
subscribed. Queues are unbounded; a warning is logged when one crosses
the high-water mark.
"""

from __future__ import annotations

import logging
import queue
import threading
from typing import Iterable

from bagpipe.bag import MessageRecord, check_topic

log = logging.getLogger(__name__)

QUEUE_HIGH_WATER = 100_000

Selector = None | str | Iterable[str]


class Subscription:
    """A reader handle: one FIFO queue of matching envelopes."""

    def __init__(self, bus: "Bus", topics: frozenset[str] | None):
        self._bus = bus
        self._topics = topics
        self._queue: queue.Queue[MessageRecord] = queue.Queue()
        self._warned = False
        self.closed = False

    def _matches(self, topic: str) -> bool:
        return self._topics is None or topic in self._topics

    def _deliver(self, record: MessageRecord) -> None:
        self._queue.put(record)
        if not self._warned and self._queue.qsize() >= QUEUE_HIGH_WATER:
            self._warned = True
            log.warning(
                "subscription backlog reached %d envelopes; consumer is falling behind",
                QUEUE_HIGH_WATER,
            )

    def pop(self, timeout: float | None = None) -> MessageRecord | None:
        """Next envelope, blocking up to `timeout` seconds; None on timeout."""
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._bus._remove(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Publisher:
    """A writer handle bound to one topic."""

    def __init__(self, bus: "Bus", topic: str):
        check_topic(topic)
        self._bus = bus
        self.topic = topic

    def publish(self, payload: bytes, timestamp: int) -> None:
        self._bus._dispatch(MessageRecord(self.topic, timestamp, payload))


class Bus:
    """Topic registry; safe for concurrent publishers and subscribers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subscriptions: list[Subscription] = []

    def advertise(self, topic: str) -> Publisher:
        """Publishing to a topic nobody subscribes to is legal (dropped)."""
        return Publisher(self, topic)

    def subscribe(self, selector: Selector = None) -> Subscription:
        """selector: None for all topics, a topic string, or an iterable."""
        if selector is None:
            topics = None
        elif isinstance(selector, str):
            check_topic(selector)
            topics = frozenset((selector,))
        else:
            topics = frozenset(selector)
            for topic in topics:
                check_topic(topic)
        sub = Subscription(self, topics)
        with self._lock:
            self._subscriptions.append(sub)
        return sub

    def _dispatch(self, record: MessageRecord) -> None:
        with self._lock:
            targets = [s for s in self._subscriptions if s._matches(record.topic)]
            for sub in targets:
                sub._deliver(record)

    def _remove(self, sub: Subscription) -> None:
        with self._lock:
            try:
                self._subscriptions.remove(sub)
            except ValueError:
                pass
