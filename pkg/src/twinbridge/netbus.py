"""TCP transparency for the bus: a broker server and a remote client.

Wire format: each frame is a 4-byte big-endian length prefix followed by
a UTF-8 JSON document. Message envelopes carry exactly
{topic, seq, stamp_nanos, kind, body} (plus a "latch" flag on latched
publishes); control frames are distinguished by an "op" field
(subscribe/unsubscribe/param_set/param_get and their replies).

A connected peer sees publish/subscribe/param semantics identical to
in-process use. Connection loss surfaces as TransportError on the
affected handles; the broker and its other peers stay usable.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from typing import Any, Optional

from twinbridge.bus import (
    Bus,
    BusClosedError,
    Envelope,
    Subscription,
    TransportError,
    now_ns,
    validate_payload,
    validate_topic,
)

DEFAULT_ENDPOINT = "127.0.0.1:7447"

_HEADER = struct.Struct("!I")
_MAX_FRAME = 64 * 1024 * 1024


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


def _close_socket(sock: socket.socket) -> None:
    # shutdown first: wakes any thread blocked in recv and pushes FIN to the peer
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
    try:
        sock.close()
    except OSError:
        pass


def _send_frame(sock: socket.socket, lock: threading.Lock, doc: dict[str, Any]) -> None:
    raw = json.dumps(doc, separators=(",", ":")).encode("utf-8")
    with lock:
        sock.sendall(_HEADER.pack(len(raw)) + raw)


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except OSError:
            return None
        if not chunk:
            return None
        buf += chunk
    return buf


def _recv_frame(sock: socket.socket) -> Optional[dict[str, Any]]:
    header = _recv_exact(sock, _HEADER.size)
    if header is None:
        return None
    (length,) = _HEADER.unpack(header)
    if length > _MAX_FRAME:
        return None
    raw = _recv_exact(sock, length)
    if raw is None:
        return None
    return json.loads(raw.decode("utf-8"))


class BusServer:
    """Serves one in-process Bus to TCP peers."""

    def __init__(self, bus: Bus, host: str = "127.0.0.1", port: int = 7447):
        self.bus = bus
        self._listener = socket.create_server((host, port))
        self.host, self.port = self._listener.getsockname()[:2]
        self._lock = threading.Lock()
        self._conns: list[_ServerConn] = []
        self._closed = False
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def _accept_loop(self) -> None:
        counter = 0
        while not self._closed:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            counter += 1
            conn = _ServerConn(self, sock, f"conn-{counter}")
            with self._lock:
                if self._closed:
                    sock.close()
                    return
                self._conns.append(conn)
            conn.start()

    def _drop(self, conn: _ServerConn) -> None:
        with self._lock:
            if conn in self._conns:
                self._conns.remove(conn)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            conns = list(self._conns)
        try:
            self._listener.close()
        except OSError:
            pass
        for conn in conns:
            conn.close()


class _ServerConn:
    """One accepted peer: relays publishes in, forwards subscriptions out."""

    def __init__(self, server: BusServer, sock: socket.socket, name: str):
        self.server = server
        self.sock = sock
        self.name = name
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._subs: dict[str, Subscription] = {}
        self._subs_lock = threading.Lock()
        self._alive = True

    def start(self) -> None:
        threading.Thread(target=self._read_loop, daemon=True).start()

    def _read_loop(self) -> None:
        while True:
            doc = _recv_frame(self.sock)
            if doc is None:
                break
            try:
                self._handle(doc)
            except BusClosedError:
                break
            except Exception as exc:  # protocol errors answer, never kill the broker
                self._safe_send({"op": "error", "message": str(exc)})
        self.close()

    def _handle(self, doc: dict[str, Any]) -> None:
        op = doc.get("op")
        if op is None:
            self.server.bus.publish(
                doc["topic"],
                doc["kind"],
                doc["body"],
                latch=bool(doc.get("latch", False)),
                publisher=self.name,
                seq=int(doc["seq"]),
                stamp_nanos=int(doc["stamp_nanos"]),
            )
        elif op == "subscribe":
            topic = doc["topic"]
            with self._subs_lock:
                if topic in self._subs:
                    return
                sub = self.server.bus.subscribe(topic, mode="queued", maxlen=4096)
                self._subs[topic] = sub
            threading.Thread(target=self._forward_loop, args=(sub,), daemon=True).start()
        elif op == "unsubscribe":
            with self._subs_lock:
                sub = self._subs.pop(doc["topic"], None)
            if sub is not None:
                sub.close()
        elif op == "param_set":
            self.server.bus.param_set(doc["key"], doc["value"])
            self._safe_send({"op": "param_ack", "rid": doc["rid"]})
        elif op == "param_get":
            value = self.server.bus.param_get(doc["key"])
            self._safe_send(
                {"op": "param", "rid": doc["rid"], "found": value is not None, "value": value}
            )
        else:
            self._safe_send({"op": "error", "message": f"unknown op {op!r}"})

    def _forward_loop(self, sub: Subscription) -> None:
        while True:
            try:
                env = sub.receive(timeout=None)
            except BusClosedError:
                return
            if env is None:
                continue
            frame = {
                "topic": env.topic,
                "seq": env.seq,
                "stamp_nanos": env.stamp_nanos,
                "kind": env.kind,
                "body": env.body,
            }
            if not self._safe_send(frame):
                return

    def _safe_send(self, doc: dict[str, Any]) -> bool:
        try:
            _send_frame(self.sock, self._send_lock, doc)
            return True
        except OSError:
            self.close()
            return False

    def close(self) -> None:
        if not self._alive:
            return
        self._alive = False
        with self._subs_lock:
            subs = list(self._subs.values())
            self._subs.clear()
        for sub in subs:
            sub.close()
        _close_socket(self.sock)
        self.server._drop(self)


class RemoteBus:
    """Client end of a served bus; same call surface as Bus."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._lock = threading.Lock()
        self._seqs: dict[str, int] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._param_waits: dict[int, _ParamWait] = {}
        self._rid = 0
        self._closed = False
        self._fault: Optional[Exception] = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- bus surface -------------------------------------------------------

    def publish(
        self, topic: str, kind: str, body: dict[str, Any], *, latch: bool = False, **_: Any
    ) -> int:
        validate_topic(topic)
        validate_payload(kind, body)
        with self._lock:
            self._check_open()
            seq = self._seqs.get(topic, 0) + 1
            self._seqs[topic] = seq
        frame: dict[str, Any] = {
            "topic": topic,
            "seq": seq,
            "stamp_nanos": now_ns(),
            "kind": kind,
            "body": body,
        }
        if latch:
            frame["latch"] = True
        self._send(frame)
        return seq

    def publisher(self, topic: str, name: Optional[str] = None):
        # The connection itself is the publisher identity; per-topic seqs
        # already satisfy the FIFO contract, so this is a thin alias.
        bus = self

        class _Pub:
            def __init__(self):
                self.topic = topic

            def publish(self, kind, body, *, latch=False):
                return bus.publish(topic, kind, body, latch=latch)

        return _Pub()

    def subscribe(self, topic: str, mode: str = "queued", maxlen: int = 1024) -> Subscription:
        validate_topic(topic)
        sub = Subscription(topic, mode, maxlen)
        first = False
        with self._lock:
            self._check_open()
            locals_ = self._subs.setdefault(topic, [])
            first = not locals_
            locals_.append(sub)
        sub._detach = lambda s: self._drop_subscription(topic, s)
        if first:
            self._send({"op": "subscribe", "topic": topic})
        return sub

    def _drop_subscription(self, topic: str, sub: Subscription) -> None:
        last = False
        with self._lock:
            locals_ = self._subs.get(topic, [])
            if sub in locals_:
                locals_.remove(sub)
            last = not locals_ and topic in self._subs
            if last:
                del self._subs[topic]
        if last and not self._closed and self._fault is None:
            try:
                self._send({"op": "unsubscribe", "topic": topic})
            except TransportError:
                pass

    def param_set(self, key: str, value: str, timeout: float = 10.0) -> None:
        if not key:
            from twinbridge.bus import TopicNameError

            raise TopicNameError("parameter key must be nonempty")
        wait = self._new_wait()
        self._send({"op": "param_set", "key": key, "value": value, "rid": wait.rid})
        wait.result(timeout)

    def param_get(self, key: str, timeout: float = 10.0) -> Optional[str]:
        if not key:
            from twinbridge.bus import TopicNameError

            raise TopicNameError("parameter key must be nonempty")
        wait = self._new_wait()
        self._send({"op": "param_get", "key": key, "rid": wait.rid})
        doc = wait.result(timeout)
        return doc["value"] if doc.get("found") else None

    def close(self) -> None:
        self._shutdown(None)

    # -- internals -----------------------------------------------------------

    def _check_open(self) -> None:
        if self._closed:
            raise BusClosedError("remote bus closed")
        if self._fault is not None:
            raise TransportError(str(self._fault))

    def _send(self, doc: dict[str, Any]) -> None:
        self._check_open()
        try:
            _send_frame(self._sock, self._send_lock, doc)
        except OSError as exc:
            self._shutdown(exc)
            raise TransportError(f"send failed: {exc}") from exc

    def _new_wait(self) -> _ParamWait:
        with self._lock:
            self._check_open()
            self._rid += 1
            wait = _ParamWait(self._rid)
            self._param_waits[wait.rid] = wait
        return wait

    def _read_loop(self) -> None:
        while True:
            doc = _recv_frame(self._sock)
            if doc is None:
                self._shutdown(ConnectionError("connection to bus server lost"))
                return
            op = doc.get("op")
            if op is None:
                env = Envelope(
                    doc["topic"], int(doc["seq"]), int(doc["stamp_nanos"]), doc["kind"], doc["body"]
                )
                with self._lock:
                    subs = list(self._subs.get(env.topic, ()))
                for sub in subs:
                    sub._deliver(env)
            elif op in ("param", "param_ack"):
                with self._lock:
                    wait = self._param_waits.pop(doc.get("rid"), None)
                if wait is not None:
                    wait.set(doc)
            # "error" frames for bad publishes are advisory; publish already
            # validated locally, so these indicate a version mismatch.

    def _shutdown(self, exc: Optional[Exception]) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = exc is None
            self._fault = exc
            subs = [s for lst in self._subs.values() for s in lst]
            waits = list(self._param_waits.values())
            self._param_waits.clear()
        _close_socket(self._sock)
        for sub in subs:
            if exc is None:
                sub.close()
            else:
                sub._fail(exc)
        for wait in waits:
            wait.fail(exc or BusClosedError("remote bus closed"))


class _ParamWait:
    def __init__(self, rid: int):
        self.rid = rid
        self._event = threading.Event()
        self._doc: Optional[dict[str, Any]] = None
        self._exc: Optional[Exception] = None

    def set(self, doc: dict[str, Any]) -> None:
        self._doc = doc
        self._event.set()

    def fail(self, exc: Exception) -> None:
        self._exc = exc
        self._event.set()

    def result(self, timeout: float) -> dict[str, Any]:
        if not self._event.wait(timeout):
            raise TransportError("parameter request timed out")
        if self._exc is not None:
            raise TransportError(str(self._exc)) from self._exc
        assert self._doc is not None
        return self._doc


def serve(bus: Bus, endpoint: str = DEFAULT_ENDPOINT) -> BusServer:
    host, port = parse_endpoint(endpoint)
    return BusServer(bus, host, port)


def connect(endpoint: str = DEFAULT_ENDPOINT, connect_timeout: float = 5.0) -> RemoteBus:
    host, port = parse_endpoint(endpoint)
    return RemoteBus(host, port, connect_timeout)
