"""Topic-based publish/subscribe middleware with a key-value parameter server.

Scene data and kinematics flow over this bus: the simulator publishes
stamped transforms and echo replies, mirrors and benches subscribe. One
Bus instance is the in-process broker; netbus adds TCP transparency with
identical semantics for remote peers.

Delivery contract: per-(publisher, topic) FIFO with strictly increasing
seq numbers; queued subscriptions keep a bounded backlog (oldest dropped
on overflow), latest subscriptions keep only the newest envelope. Latched
topics replay their last envelope to new subscribers.
"""

from __future__ import annotations

import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional


class BusError(Exception):
    pass


class TopicNameError(BusError):
    """Topic or parameter key violates the naming rules."""


class SchemaError(BusError):
    """Payload kind is not registered or misses required fields."""


class BusClosedError(BusError):
    pass


class TransportError(BusError):
    """The remote peer or connection failed; the local bus stays usable."""


_TOPIC_RE = re.compile(r"[A-Za-z0-9_/]+\Z")

# Registered message kinds and the fields each body must carry.
SCHEMAS: dict[str, frozenset[str]] = {
    "TransformUpdate": frozenset({"stamp_nanos", "transforms"}),
    "JointCommand": frozenset({"joint", "target"}),
    "EchoRequest": frozenset({"seq", "t0_nanos"}),
    "EchoReply": frozenset({"seq", "t0_nanos", "body_count"}),
    "SceneMetadata": frozenset({"scene", "bodies"}),
    "ErrorEvent": frozenset({"source", "message"}),
}


def validate_topic(name: str) -> str:
    if not name or not _TOPIC_RE.match(name) or name.startswith("/") or name.endswith("/"):
        raise TopicNameError(f"invalid topic name: {name!r}")
    return name


def validate_payload(kind: str, body: dict[str, Any]) -> None:
    required = SCHEMAS.get(kind)
    if required is None:
        raise SchemaError(f"unregistered message kind: {kind!r}")
    missing = required - body.keys()
    if missing:
        raise SchemaError(f"{kind} body missing fields: {sorted(missing)}")


def now_ns() -> int:
    """Process-monotonic stamp used for every envelope on this bus."""
    return time.monotonic_ns()


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    stamp_nanos: int
    kind: str
    body: dict[str, Any]


class Subscription:
    """Pull-style subscription handle owned by a single consumer.

    receive() blocks up to `timeout` seconds and returns None on timeout.
    """

    def __init__(self, topic: str, mode: str, maxlen: int = 1024):
        if mode not in ("queued", "latest"):
            raise ValueError(f"mode must be 'queued' or 'latest', got {mode!r}")
        self.topic = topic
        self.mode = mode
        self._queue: deque[Envelope] = deque(maxlen=maxlen if mode == "queued" else 1)
        self._cond = threading.Condition()
        self._closed = False
        self._fault: Optional[Exception] = None
        self._detach = None  # set by the owning bus

    def _deliver(self, env: Envelope) -> None:
        with self._cond:
            if self._closed:
                return
            self._queue.append(env)  # deque maxlen drops oldest on overflow
            self._cond.notify()

    def _fail(self, exc: Exception) -> None:
        with self._cond:
            self._fault = exc
            self._cond.notify_all()

    def receive(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while True:
                if self._queue:
                    return self._queue.popleft()
                if self._closed:
                    raise BusClosedError("subscription closed")
                if self._fault is not None:
                    raise TransportError(str(self._fault)) from self._fault
                if deadline is None:
                    self._cond.wait()
                else:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        return None
                    self._cond.wait(remaining)

    def drain(self) -> list[Envelope]:
        """Non-blocking: everything currently queued, in order."""
        out = []
        with self._cond:
            while self._queue:
                out.append(self._queue.popleft())
        return out

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        if self._detach is not None:
            self._detach(self)


class Publisher:
    """Named publisher handle; seq numbers increase per (publisher, topic)."""

    def __init__(self, bus: Bus, topic: str, name: str):
        self._bus = bus
        self.topic = topic
        self.name = name

    def publish(self, kind: str, body: dict[str, Any], *, latch: bool = False) -> int:
        return self._bus.publish(self.topic, kind, body, latch=latch, publisher=self.name)


@dataclass
class _Topic:
    subscribers: list[Subscription] = field(default_factory=list)
    seqs: dict[str, int] = field(default_factory=dict)  # publisher name -> last seq
    latched: Optional[Envelope] = None


class Bus:
    """In-process broker: topics, subscriptions, and the parameter server.

    Thread-safe: publish and param operations are atomic; a subscription
    handle belongs to one consumer at a time.
    """

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._topics: dict[str, _Topic] = {}
        self._params: dict[str, str] = {}
        self._closed = False
        self._pub_counter = 0

    # -- pub/sub ---------------------------------------------------------

    def publisher(self, topic: str, name: Optional[str] = None) -> Publisher:
        validate_topic(topic)
        with self._lock:
            if name is None:
                self._pub_counter += 1
                name = f"pub-{self._pub_counter}"
        return Publisher(self, topic, name)

    def publish(
        self,
        topic: str,
        kind: str,
        body: dict[str, Any],
        *,
        latch: bool = False,
        publisher: str = "default",
        seq: Optional[int] = None,
        stamp_nanos: Optional[int] = None,
    ) -> int:
        """Deliver to all current subscribers; returns the assigned seq.

        `seq`/`stamp_nanos` are supplied only by the network layer relaying
        envelopes that a remote peer already stamped.
        """
        validate_topic(topic)
        validate_payload(kind, body)
        with self._lock:
            if self._closed:
                raise BusClosedError("bus closed")
            entry = self._topics.setdefault(topic, _Topic())
            if seq is None:
                seq = entry.seqs.get(publisher, 0) + 1
            entry.seqs[publisher] = seq
            env = Envelope(topic, seq, stamp_nanos if stamp_nanos is not None else now_ns(), kind, body)
            if latch:
                entry.latched = env
            subs = list(entry.subscribers)
        for sub in subs:
            sub._deliver(env)
        return seq

    def subscribe(self, topic: str, mode: str = "queued", maxlen: int = 1024) -> Subscription:
        validate_topic(topic)
        sub = Subscription(topic, mode, maxlen)
        with self._lock:
            if self._closed:
                raise BusClosedError("bus closed")
            entry = self._topics.setdefault(topic, _Topic())
            entry.subscribers.append(sub)
            latched = entry.latched
        sub._detach = lambda s: self._remove_subscription(topic, s)
        if latched is not None:
            sub._deliver(latched)
        return sub

    def _remove_subscription(self, topic: str, sub: Subscription) -> None:
        with self._lock:
            entry = self._topics.get(topic)
            if entry and sub in entry.subscribers:
                entry.subscribers.remove(sub)

    # -- parameter server --------------------------------------------------

    def param_set(self, key: str, value: str) -> None:
        if not key:
            raise TopicNameError("parameter key must be nonempty")
        with self._lock:
            if self._closed:
                raise BusClosedError("bus closed")
            self._params[key] = value

    def param_get(self, key: str) -> Optional[str]:
        if not key:
            raise TopicNameError("parameter key must be nonempty")
        with self._lock:
            return self._params.get(key)

    # -- lifecycle ---------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            subs = [s for t in self._topics.values() for s in t.subscribers]
        for sub in subs:
            sub.close()
