"""Navigation-scene mirror.

Holds a flat node scene (one model node plus one transform node per body)
built from published scene metadata, and refreshes every node's world pose
from a transform buffer on a fixed-rate timer.  The timer runs on absolute
deadlines from loop start and skips missed ticks instead of bunching them,
so a stall shows up in the stats rather than as a burst of stale updates.

All pose writes happen on the timer thread; readers take snapshots under
the scene lock between ticks.
"""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .bus import Bus, Subscription, now_ns
from .scene import (
    METADATA_PARAM,
    METADATA_TOPIC,
    WORLD,
    SceneSemanticError,
    metadata_from_json,
)
from .tftree import (
    LATEST,
    TF_TOPIC,
    TransformBuffer,
    TransformTreeError,
    apply_update,
)
from .transforms import RigidTransform, TimestampNs

SCENE_ROOT = "scene_root"

_MAX_RECORDED_INTERVALS = 20_000


class MirrorError(Exception):
    """Base class for mirror failures."""


class NotReadyError(MirrorError):
    """Scene metadata has not been published yet."""


@dataclass
class TransformNode:
    """World pose of one body; pose is rewritten in place by sync ticks."""

    node_id: str
    pose: RigidTransform
    parent_node: str = SCENE_ROOT
    updates: int = 0


@dataclass(frozen=True)
class ModelNode:
    """Display-side handle for one body; geometry stays an opaque path."""

    name: str
    mesh_ref: str
    transform_node: str
    visible: bool = True


@dataclass
class SyncStats:
    """Counters maintained by the sync loop; read under the scene lock."""

    ticks: int = 0
    updated_total: int = 0
    updated_last: int = 0
    skipped_last: int = 0
    apply_errors: int = 0
    skipped_deadlines: int = 0
    overrun_warnings: int = 0
    intervals_ns: list[int] = field(default_factory=list)

    def record_interval(self, interval_ns: int) -> None:
        self.intervals_ns.append(interval_ns)
        if len(self.intervals_ns) > _MAX_RECORDED_INTERVALS:
            del self.intervals_ns[:len(self.intervals_ns) // 2]

    def mean_period_ms(self) -> float:
        if not self.intervals_ns:
            return 0.0
        return statistics.fmean(self.intervals_ns) / 1e6


class MirrorScene:
    """Flat node scene mirroring one source scene; single-writer."""

    def __init__(self, source_scene: str,
                 bodies: list[tuple[str, str]]) -> None:
        self.source_scene = source_scene
        self.lock = threading.Lock()
        self.last_sync: TimestampNs = 0
        self.stats = SyncStats()
        self.model_nodes: dict[str, ModelNode] = {}
        self.transform_nodes: dict[str, TransformNode] = {}
        self.order: tuple[str, ...] = tuple(name for name, _ in bodies)
        for name, mesh in bodies:
            if name in self.model_nodes:
                raise SceneSemanticError(f"duplicate body in metadata: {name!r}")
            tn_id = f"{name}/transform"
            self.transform_nodes[tn_id] = TransformNode(
                node_id=tn_id, pose=RigidTransform.identity())
            self.model_nodes[name] = ModelNode(
                name=name, mesh_ref=mesh, transform_node=tn_id)

    def node_count(self) -> int:
        return len(self.model_nodes) + len(self.transform_nodes)

    def never_synced(self) -> set[str]:
        """Body names whose pose has not been written since build."""
        with self.lock:
            return {m.name for m in self.model_nodes.values()
                    if self.transform_nodes[m.transform_node].updates == 0}

    def snapshot(self) -> dict:
        """Consistent copy of poses and stats for readers off the timer thread."""
        with self.lock:
            poses = {}
            for name in self.order:
                node = self.transform_nodes[self.model_nodes[name].transform_node]
                poses[name] = node.pose.to_list()
            return {
                "scene": self.source_scene,
                "last_sync": self.last_sync,
                "ticks": self.stats.ticks,
                "updated_last": self.stats.updated_last,
                "mean_period_ms": self.stats.mean_period_ms(),
                "poses": poses,
            }


@dataclass(frozen=True)
class SyncTimerConfig:
    rate_hz: float = 200.0
    drift_compensation: bool = True

    def __post_init__(self) -> None:
        if self.rate_hz <= 0:
            raise ValueError("rate must be positive")


def build_from_metadata(bus: Bus) -> MirrorScene:
    """Build an identity-posed mirror from the published scene metadata."""
    raw = bus.param_get(METADATA_PARAM)
    if raw is None:
        sub = bus.subscribe(METADATA_TOPIC)
        try:
            env = sub.receive(timeout=0.05)  # latched replay, if any
        finally:
            sub.close()
        if env is None:
            raise NotReadyError("scene metadata has not been published")
        raw = env.body
    meta = metadata_from_json(raw)
    return MirrorScene(meta.scene, list(meta.bodies))


def sync_tick(scene: MirrorScene, buffer: TransformBuffer) -> int:
    """Refresh every body pose available in the buffer; returns the count."""
    updated = 0
    skipped = 0
    # One publisher stamping whole-scene batches keeps every edge on a
    # single clock; that case resolves with one tree pass instead of a path
    # walk per body.  Mixed stamps fall back to per-body lookups.
    stamp = buffer.latest_uniform_stamp()
    batch = buffer.rooted_poses(WORLD, stamp) if stamp is not None else None
    with scene.lock:
        for name, model in scene.model_nodes.items():
            if batch is not None:
                pose = batch.get(name)
                if pose is None:
                    skipped += 1
                    continue
            else:
                try:
                    pose = buffer.lookup(WORLD, name, LATEST)
                except TransformTreeError:
                    skipped += 1
                    continue
            node = scene.transform_nodes[model.transform_node]
            node.pose = pose
            node.updates += 1
            updated += 1
        scene.stats.ticks += 1
        scene.stats.updated_last = updated
        scene.stats.skipped_last = skipped
        scene.stats.updated_total += updated
        if updated:
            scene.last_sync = max(scene.last_sync, now_ns())
    return updated


def world_pose(scene: MirrorScene, body_name: str) -> RigidTransform:
    """The pose last written for a body; raises KeyError if unknown."""
    with scene.lock:
        model = scene.model_nodes[body_name]
        return scene.transform_nodes[model.transform_node].pose


def drain_into_buffer(subscription: Subscription,
                      buffer: TransformBuffer, stats: SyncStats) -> int:
    """Apply every pending TransformUpdate; bad inserts are counted, not fatal."""
    n = 0
    for env in subscription.drain():
        try:
            n += apply_update(buffer, env.body)
        except TransformTreeError:
            stats.apply_errors += 1
    return n


def run_sync_loop(scene: MirrorScene, buffer: TransformBuffer,
                  config: SyncTimerConfig = SyncTimerConfig(), *,
                  subscription: Optional[Subscription] = None,
                  stop_event: Optional[threading.Event] = None,
                  max_ticks: Optional[int] = None) -> SyncStats:
    """Drain deliveries and tick the mirror on a fixed-rate schedule.

    Deadlines are start + k * period.  A tick that wakes late still fires
    (the absolute schedule absorbs the jitter); only deadlines already a
    full period stale are skipped, so the loop never bursts to catch up.
    A stretch of over-period ticks longer than one second is surfaced as
    an overrun warning in the stats.
    """
    stop = stop_event or threading.Event()
    period_ns = round(1e9 / config.rate_hz)
    start = time.monotonic_ns()
    k = 1
    deadline = start + period_ns
    last_tick_start: Optional[int] = None
    overrun_since: Optional[int] = None
    while not stop.is_set():
        wait_ns = deadline - time.monotonic_ns()
        if wait_ns > 0 and stop.wait(wait_ns / 1e9):
            break
        tick_start = time.monotonic_ns()
        if subscription is not None:
            drain_into_buffer(subscription, buffer, scene.stats)
        sync_tick(scene, buffer)
        tick_end = time.monotonic_ns()
        with scene.lock:
            if last_tick_start is not None:
                scene.stats.record_interval(tick_start - last_tick_start)
            if tick_end - tick_start > period_ns:
                if overrun_since is None:
                    overrun_since = tick_start
                elif tick_end - overrun_since > 1_000_000_000:
                    scene.stats.overrun_warnings += 1
                    overrun_since = tick_start
            else:
                overrun_since = None
        last_tick_start = tick_start
        if max_ticks is not None and scene.stats.ticks >= max_ticks:
            break
        if config.drift_compensation:
            k += 1
            deadline = start + k * period_ns
            now = time.monotonic_ns()
            while deadline + period_ns <= now:
                k += 1
                deadline = start + k * period_ns
                with scene.lock:
                    scene.stats.skipped_deadlines += 1
        else:
            deadline = time.monotonic_ns() + period_ns
    return scene.stats


class MirrorRunner:
    """Wires subscription, buffer, and sync loop into a background thread."""

    def __init__(self, bus: Bus,
                 config: SyncTimerConfig = SyncTimerConfig()) -> None:
        self.scene = build_from_metadata(bus)
        self.buffer = TransformBuffer()
        self.config = config
        self._sub = bus.subscribe(TF_TOPIC, maxlen=4096)
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        if self._thread is not None:
            raise MirrorError("mirror already started")
        self._thread = threading.Thread(
            target=run_sync_loop,
            args=(self.scene, self.buffer, self.config),
            kwargs={"subscription": self._sub, "stop_event": self._stop},
            name="mirror-sync", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
        self._sub.close()
