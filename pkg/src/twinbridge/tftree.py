"""Time-buffered transform tree.

Stores stamped parent->child rigid transforms per edge and answers
frame-to-frame lookups at a requested time, interpolating between the
bracketing stamps on each edge.  The buffer never extrapolates: a query
outside an edge's retained time span is an error, and callers that want
"most recent consistent state" ask for :data:`LATEST` instead.

Each child frame has exactly one parent among retained data, so the frame
graph is a forest and every lookup reduces to walking both frames up to
their common ancestor.
"""

from __future__ import annotations

import bisect
import math
import re
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .transforms import RigidTransform, TimestampNs, compose, interpolate, invert

DEFAULT_RETENTION_NS = 10_000_000_000
"""Default per-edge retention window: 10 seconds of history."""

TF_TOPIC = "tf"
"""Bus topic carrying TransformUpdate messages."""

_FRAME_RE = re.compile(r"[A-Za-z0-9_/]+\Z")


class TransformTreeError(Exception):
    """Base class for transform-buffer failures."""


class StaleInsertError(TransformTreeError):
    """An insert arrived with a stamp at or before the edge's newest."""


class TreeViolationError(TransformTreeError):
    """An insert would give a child frame a second parent."""


class ConnectivityError(TransformTreeError):
    """The requested frames are unknown or not connected."""


class TimeBoundsError(TransformTreeError):
    """The requested time falls outside an edge's retained span."""


class _Latest:
    __slots__ = ()

    def __repr__(self) -> str:
        return "LATEST"


LATEST = _Latest()
"""Sentinel lookup time: resolve to the newest mutually-buffered stamp."""

LookupTime = Union[TimestampNs, _Latest]


def _validate_frame(name: str) -> None:
    if not isinstance(name, str) or not _FRAME_RE.fullmatch(name):
        raise ValueError(f"invalid frame name: {name!r}")


@dataclass(frozen=True)
class StampedTransform:
    """A child frame's pose in its parent frame at one instant."""

    parent_frame: str
    child_frame: str
    stamp_nanos: TimestampNs
    transform: RigidTransform

    def __post_init__(self) -> None:
        _validate_frame(self.parent_frame)
        _validate_frame(self.child_frame)
        if self.parent_frame == self.child_frame:
            raise ValueError(f"self-referential frame: {self.parent_frame!r}")
        t = self.transform
        if not (t.translation.is_finite() and math.isfinite(t.rotation.w)
                and math.isfinite(t.rotation.x) and math.isfinite(t.rotation.y)
                and math.isfinite(t.rotation.z)):
            raise ValueError("non-finite transform")


class _Edge:
    """Time-sorted history for one parent->child edge (no locking here)."""

    __slots__ = ("parent", "child", "stamps", "values")

    def __init__(self, parent: str, child: str) -> None:
        self.parent = parent
        self.child = child
        self.stamps: list[TimestampNs] = []
        self.values: list[RigidTransform] = []

    def newest(self) -> TimestampNs:
        return self.stamps[-1]

    def append(self, stamp: TimestampNs, value: RigidTransform,
               retention_ns: int) -> None:
        if self.stamps and stamp <= self.stamps[-1]:
            raise StaleInsertError(
                f"edge {self.parent}->{self.child}: stamp {stamp} is not newer "
                f"than retained {self.stamps[-1]}")
        self.stamps.append(stamp)
        self.values.append(value)
        cutoff = stamp - retention_ns
        drop = bisect.bisect_left(self.stamps, cutoff)
        if drop:
            del self.stamps[:drop]
            del self.values[:drop]

    def value_at(self, stamp: TimestampNs) -> RigidTransform:
        if stamp < self.stamps[0] or stamp > self.stamps[-1]:
            raise TimeBoundsError(
                f"edge {self.parent}->{self.child}: time {stamp} outside "
                f"[{self.stamps[0]}, {self.stamps[-1]}]")
        i = bisect.bisect_left(self.stamps, stamp)
        if self.stamps[i] == stamp:
            # Exact hit: hand back the stored transform untouched so a
            # publish/lookup round trip is bit-stable.
            return self.values[i]
        lo, hi = i - 1, i
        span = self.stamps[hi] - self.stamps[lo]
        alpha = (stamp - self.stamps[lo]) / span
        return interpolate(self.values[lo], self.values[hi], alpha)


class TransformBuffer:
    """Thread-safe store of stamped transforms with interpolated lookup.

    One writer per edge and any number of readers are supported; a single
    lock makes every lookup observe a consistent snapshot.
    """

    def __init__(self, retention_ns: int = DEFAULT_RETENTION_NS) -> None:
        if retention_ns <= 0:
            raise ValueError("retention must be positive")
        self._retention_ns = retention_ns
        self._edges: dict[str, _Edge] = {}  # keyed by child frame
        self._parents: set[str] = set()
        self._lock = threading.Lock()

    @property
    def retention_ns(self) -> int:
        return self._retention_ns

    def frames(self) -> set[str]:
        """All frame names currently known to the graph."""
        with self._lock:
            return set(self._edges) | set(self._parents)

    def insert(self, st: StampedTransform) -> None:
        """Record one stamped transform.

        Raises StaleInsertError if the stamp is not strictly newer than the
        edge's newest, and TreeViolationError if the child already has a
        different parent or the edge would close a cycle.
        """
        with self._lock:
            edge = self._edges.get(st.child_frame)
            if edge is not None and edge.parent != st.parent_frame:
                raise TreeViolationError(
                    f"frame {st.child_frame!r} already has parent "
                    f"{edge.parent!r}, refusing {st.parent_frame!r}")
            if edge is None:
                # Walking up from the proposed parent must not reach the
                # child, otherwise lookups would follow the loop forever.
                frame = st.parent_frame
                while frame in self._edges:
                    frame = self._edges[frame].parent
                    if frame == st.child_frame:
                        raise TreeViolationError(
                            f"edge {st.parent_frame}->{st.child_frame} "
                            "would close a cycle")
                edge = _Edge(st.parent_frame, st.child_frame)
                self._edges[st.child_frame] = edge
                self._parents.add(st.parent_frame)
            edge.append(st.stamp_nanos, st.transform, self._retention_ns)

    def _known(self, frame: str) -> bool:
        return frame in self._edges or frame in self._parents

    def _path_edges(self, target: str, source: str) -> tuple[list[_Edge], list[_Edge]]:
        """Edges from the common ancestor down to each frame.

        Returns (target_side, source_side), each ordered ancestor-first.
        Caller holds the lock.
        """
        for frame in (target, source):
            if not self._known(frame):
                raise ConnectivityError(f"unknown frame: {frame!r}")

        def chain(frame: str) -> list[_Edge]:
            out = []
            while frame in self._edges:
                edge = self._edges[frame]
                out.append(edge)
                frame = edge.parent
            return out  # leaf-first, ends at a root

        up_t = chain(target)
        up_s = chain(source)
        roots_t = up_t[-1].parent if up_t else target
        roots_s = up_s[-1].parent if up_s else source
        if roots_t != roots_s:
            raise ConnectivityError(
                f"frames {target!r} and {source!r} are not connected")
        # Trim the shared tail above the common ancestor.
        while up_t and up_s and up_t[-1] is up_s[-1]:
            up_t.pop()
            up_s.pop()
        # The walk above can overshoot when one frame lies on the other's
        # chain; edges whose child is the other endpoint's ancestor are
        # already shared, so no further trimming is needed for a forest.
        up_t.reverse()
        up_s.reverse()
        return up_t, up_s

    def lookup(self, target_frame: str, source_frame: str,
               time: LookupTime = LATEST) -> RigidTransform:
        """Transform mapping points in source_frame to target_frame.

        With LATEST, the time resolves to the newest stamp that every edge
        on the path has buffered.  Raises ConnectivityError for unknown or
        disconnected frames and TimeBoundsError outside the retained span.
        """
        with self._lock:
            if target_frame == source_frame:
                if not self._known(target_frame):
                    raise ConnectivityError(f"unknown frame: {target_frame!r}")
                return RigidTransform.identity()
            side_t, side_s = self._path_edges(target_frame, source_frame)
            if isinstance(time, _Latest):
                stamp = min(e.newest() for e in side_t + side_s)
            else:
                stamp = time

            def side_value(edges: list[_Edge]) -> RigidTransform | None:
                acc: RigidTransform | None = None
                for edge in edges:  # ancestor-first
                    value = edge.value_at(stamp)
                    acc = value if acc is None else compose(acc, value)
                return acc

            x_anc_target = side_value(side_t)
            x_anc_source = side_value(side_s)
        if x_anc_target is None:
            assert x_anc_source is not None
            return x_anc_source
        if x_anc_source is None:
            return invert(x_anc_target)
        return compose(invert(x_anc_target), x_anc_source)

    def latest_uniform_stamp(self) -> Optional[TimestampNs]:
        """Newest stamp if every edge agrees on it, else None.

        A single publisher stamping whole-scene updates keeps all edges on
        one clock; rooted_poses exploits exactly that case.
        """
        with self._lock:
            stamps = {edge.stamps[-1] for edge in self._edges.values()}
        if len(stamps) == 1:
            return stamps.pop()
        return None

    def rooted_poses(self, root: str,
                     stamp: TimestampNs) -> dict[str, RigidTransform]:
        """Poses of every frame below root, all evaluated at one stamp.

        Bit-identical to lookup(root, frame, stamp) for each reachable
        frame, but shared ancestors are composed once, so a whole scene
        costs one pass over its edges instead of one path walk per frame.
        Frames without data at the stamp are omitted with their subtrees.
        """
        with self._lock:
            children: dict[str, list[_Edge]] = {}
            for edge in self._edges.values():
                children.setdefault(edge.parent, []).append(edge)
            out: dict[str, RigidTransform] = {}
            pending: list[tuple[str, Optional[RigidTransform]]] = [(root, None)]
            while pending:
                frame, pose = pending.pop()
                for edge in children.get(frame, ()):
                    try:
                        value = edge.value_at(stamp)
                    except TimeBoundsError:
                        continue
                    child_pose = value if pose is None else compose(pose, value)
                    out[edge.child] = child_pose
                    pending.append((edge.child, child_pose))
        return out

    def latest_common_time(self, frames: Iterable[str]) -> TimestampNs:
        """Newest stamp buffered on every edge connecting the given frames."""
        names = list(frames)
        if len(names) < 2:
            raise ValueError("need at least two frames")
        with self._lock:
            involved: list[_Edge] = []
            seen: set[int] = set()
            for other in names[1:]:
                side_a, side_b = self._path_edges(names[0], other)
                for edge in side_a + side_b:
                    if id(edge) not in seen:
                        seen.add(id(edge))
                        involved.append(edge)
            if not involved:
                raise ConnectivityError("no edges connect the given frames")
            return min(edge.newest() for edge in involved)

    def can_transform(self, target_frame: str, source_frame: str,
                      time: LookupTime = LATEST) -> bool:
        """True iff lookup would succeed; never raises."""
        try:
            self.lookup(target_frame, source_frame, time)
        except TransformTreeError:
            return False
        return True


def encode_update(stamp_nanos: TimestampNs,
                  transforms: Iterable[tuple[str, str, RigidTransform]]) -> dict:
    """Build a TransformUpdate message body for the "tf" topic."""
    return {
        "stamp_nanos": int(stamp_nanos),
        "transforms": [
            {"parent": parent, "child": child, "pose": pose.to_list()}
            for parent, child, pose in transforms
        ],
    }


def decode_update(body: dict) -> list[StampedTransform]:
    """Parse a TransformUpdate message body into stamped transforms."""
    stamp = int(body["stamp_nanos"])
    out = []
    for item in body["transforms"]:
        out.append(StampedTransform(
            parent_frame=item["parent"],
            child_frame=item["child"],
            stamp_nanos=stamp,
            transform=RigidTransform.from_list(item["pose"]),
        ))
    return out


def apply_update(buffer: TransformBuffer, body: dict) -> int:
    """Insert every transform from a TransformUpdate body; returns the count."""
    stamps = decode_update(body)
    for st in stamps:
        buffer.insert(st)
    return len(stamps)
