"""Kinematic rigid-body simulator.

Loads a scene description into a flat kinematic model, tracks joint targets
with speed- and limit-clamped motion, and runs a fixed-step loop that
publishes every body's parent->child transform on the bus.  The same loop
hosts an echo responder used by the round-trip-delay bench; an injected
one-way delay is applied to each leg of the echo so a configured d yields a
round trip of about 2d plus transport cost.

There are no dynamics here: no contacts, no gravity, no closed loops.  The
model is a forest and forward kinematics is a single chained pass, which is
what the synchronization pipeline actually exercises.
"""

from __future__ import annotations

import math
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .bus import Bus, now_ns
from .scene import WORLD, JointSpec, SceneDescription
from .tftree import TF_TOPIC, encode_update
from .transforms import RigidTransform, UnitQuaternion, Vec3, compose

JOINT_CMD_TOPIC = "joint_cmd"
RTD_REQUEST_TOPIC = "rtd/request"
RTD_REPLY_TOPIC = "rtd/reply"
SIM_ERRORS_TOPIC = "sim/errors"


class SimError(Exception):
    """Base class for simulator failures."""


class LimitError(SimError):
    """A joint value fell outside its limits."""


@dataclass(frozen=True)
class SimConfig:
    """Loop rates and the injected echo delay."""

    step_hz: float = 1000.0
    publish_hz: float = 200.0
    inject_delay_ms: float = 0.0
    default_max_speed: float = 1.0

    def __post_init__(self) -> None:
        if not (self.step_hz > 0 and self.publish_hz > 0):
            raise ValueError("rates must be positive")
        if self.publish_hz > self.step_hz:
            raise ValueError("publish rate cannot exceed step rate")
        if self.inject_delay_ms < 0:
            raise ValueError("injected delay cannot be negative")
        if self.default_max_speed <= 0:
            raise ValueError("default max speed must be positive")


@dataclass(frozen=True)
class ModelBody:
    """One body in topological order; parent_index -1 means the world."""

    name: str
    parent_index: int
    origin: RigidTransform
    joint_index: int  # -1 when rigidly attached to the parent


@dataclass(frozen=True)
class KinematicModel:
    """Flattened scene: bodies parent-before-child, joints in scene order."""

    scene_name: str
    bodies: tuple[ModelBody, ...]
    joints: tuple[JointSpec, ...]

    def joint_index(self, name: str) -> int:
        for i, joint in enumerate(self.joints):
            if joint.name == name:
                return i
        raise KeyError(name)

    def body_names(self) -> list[str]:
        return [b.name for b in self.bodies]


@dataclass(frozen=True)
class JointState:
    """Positions, velocities, targets, and speed caps, indexed like joints."""

    positions: tuple[float, ...]
    velocities: tuple[float, ...]
    targets: tuple[float, ...]
    max_speeds: tuple[float, ...]

    @staticmethod
    def home(model: KinematicModel, default_max_speed: float = 1.0) -> JointState:
        """Zero configuration, clamped into limits where zero is outside."""
        q = []
        for joint in model.joints:
            if joint.limits is None:
                q.append(0.0)
            else:
                lo, hi = joint.limits
                q.append(min(max(0.0, lo), hi))
        n = len(model.joints)
        return JointState(positions=tuple(q), velocities=(0.0,) * n,
                          targets=tuple(q), max_speeds=(default_max_speed,) * n)

    def with_target(self, index: int, target: float,
                    max_speed: Optional[float] = None) -> JointState:
        targets = list(self.targets)
        targets[index] = target
        speeds = list(self.max_speeds)
        if max_speed is not None:
            speeds[index] = max_speed
        return replace(self, targets=tuple(targets), max_speeds=tuple(speeds))


def build_model(desc: SceneDescription) -> KinematicModel:
    """Flatten a validated scene into topological order."""
    joint_by_child = {j.child: j for j in desc.joints}
    joint_order = {j.name: i for i, j in enumerate(desc.joints)}
    by_name = {b.name: b for b in desc.bodies}

    ordered: list[str] = []
    placed: set[str] = set()
    remaining = [b.name for b in desc.bodies]
    while remaining:
        left = []
        for name in remaining:
            parent = by_name[name].parent
            if parent == WORLD or parent in placed:
                ordered.append(name)
                placed.add(name)
            else:
                left.append(name)
        remaining = left

    index_of = {name: i for i, name in enumerate(ordered)}
    bodies = []
    for name in ordered:
        spec = by_name[name]
        joint = joint_by_child.get(name)
        bodies.append(ModelBody(
            name=name,
            parent_index=-1 if spec.parent == WORLD else index_of[spec.parent],
            origin=spec.initial_pose,
            joint_index=joint_order[joint.name] if joint else -1,
        ))
    return KinematicModel(scene_name=desc.name, bodies=tuple(bodies),
                          joints=desc.joints)


def _joint_motion(joint: JointSpec, q: float) -> RigidTransform:
    if joint.kind == "revolute":
        return RigidTransform(
            rotation=UnitQuaternion.from_axis_angle(joint.axis, q),
            translation=Vec3(0.0, 0.0, 0.0))
    if joint.kind == "prismatic":
        return RigidTransform(rotation=UnitQuaternion.identity(),
                              translation=joint.axis * q)
    return RigidTransform.identity()


def _check_limits(model: KinematicModel, state: JointState) -> None:
    for joint, q in zip(model.joints, state.positions):
        if joint.limits is not None:
            lo, hi = joint.limits
            if q < lo or q > hi:
                raise LimitError(
                    f"joint {joint.name!r}: q={q} outside [{lo}, {hi}]")


def local_pose(model: KinematicModel, state: JointState,
               body_index: int) -> RigidTransform:
    """The body's pose in its parent frame at the current joint values."""
    body = model.bodies[body_index]
    if body.joint_index < 0:
        return body.origin
    joint = model.joints[body.joint_index]
    if joint.kind == "fixed":
        return body.origin
    motion = _joint_motion(joint, state.positions[body.joint_index])
    return compose(body.origin, motion)


def edge_transforms(model: KinematicModel, state: JointState
                    ) -> list[tuple[str, str, RigidTransform]]:
    """(parent, child, local pose) for every body, in topological order."""
    _check_limits(model, state)
    out = []
    for i, body in enumerate(model.bodies):
        parent = WORLD if body.parent_index < 0 else model.bodies[body.parent_index].name
        out.append((parent, body.name, local_pose(model, state, i)))
    return out


def forward_kinematics(model: KinematicModel,
                       state: JointState) -> dict[str, RigidTransform]:
    """World pose of every body: pose(parent) composed with the local pose."""
    _check_limits(model, state)
    world: list[RigidTransform] = []
    poses: dict[str, RigidTransform] = {}
    for i, body in enumerate(model.bodies):
        local = local_pose(model, state, i)
        if body.parent_index < 0:
            pose = local
        else:
            pose = compose(world[body.parent_index], local)
        world.append(pose)
        poses[body.name] = pose
    return poses


def step(model: KinematicModel, state: JointState, dt: float) -> JointState:
    """Advance every joint toward its target at most max_speed * dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_new = []
    v_new = []
    for i, joint in enumerate(model.joints):
        q = state.positions[i]
        if joint.kind == "fixed":
            q_new.append(q)
            v_new.append(0.0)
            continue
        target = state.targets[i]
        max_delta = state.max_speeds[i] * dt
        if abs(target - q) <= max_delta:
            q2 = target  # land exactly; q + (target - q) would miss by an ulp
        elif target > q:
            q2 = q + max_delta
        else:
            q2 = q - max_delta
        lo, hi = joint.limits  # moving joints always carry limits
        q2 = min(max(q2, lo), hi)
        q_new.append(q2)
        v_new.append((q2 - q) / dt)
    return replace(state, positions=tuple(q_new), velocities=tuple(v_new))


@dataclass(frozen=True)
class TimedCommand:
    """A joint target applied just before the given physics step."""

    step_index: int
    joint: str
    target: float
    max_speed: Optional[float] = None


def simulate_script(model: KinematicModel, commands: Sequence[TimedCommand],
                    n_steps: int, config: SimConfig = SimConfig()
                    ) -> list[tuple[int, list[tuple[str, str, RigidTransform]]]]:
    """Deterministic offline run: fixed dt, no clock, no bus.

    Returns (step_index, edge transforms) at every publish tick.  Two runs
    with the same inputs produce bit-identical poses.
    """
    dt = 1.0 / config.step_hz
    decim = max(1, round(config.step_hz / config.publish_hz))
    by_step: dict[int, list[TimedCommand]] = {}
    for cmd in commands:
        by_step.setdefault(cmd.step_index, []).append(cmd)
    state = JointState.home(model, config.default_max_speed)
    published = []
    for k in range(n_steps):
        for cmd in by_step.get(k, ()):
            state = state.with_target(model.joint_index(cmd.joint),
                                      cmd.target, cmd.max_speed)
        state = step(model, state, dt)
        if (k + 1) % decim == 0:
            published.append((k, edge_transforms(model, state)))
    return published


@dataclass
class LoopReport:
    """Counters exposed by the live loop, updated from the loop thread."""

    steps: int = 0
    publishes: int = 0
    errors: int = 0
    echo_replies: int = 0


class Simulator:
    """Live simulation: bus subscriptions, fixed-step loop, echo responder.

    Callers publish the scene metadata themselves before starting so that
    consumers joining later can always resolve body names first.
    """

    def __init__(self, bus: Bus, model: KinematicModel,
                 config: SimConfig = SimConfig()) -> None:
        self._bus = bus
        self._model = model
        self._config = config
        self._state = JointState.home(model, config.default_max_speed)
        self._state_lock = threading.Lock()
        self._stop = threading.Event()
        self._tf_pub = bus.publisher(TF_TOPIC, "sim")
        self._reply_pub = bus.publisher(RTD_REPLY_TOPIC, "sim")
        self._err_pub = bus.publisher(SIM_ERRORS_TOPIC, "sim")
        self._cmd_sub = bus.subscribe(JOINT_CMD_TOPIC)
        self._echo_sub = bus.subscribe(RTD_REQUEST_TOPIC)
        self._loop_thread: Optional[threading.Thread] = None
        self._echo_thread: Optional[threading.Thread] = None
        self.report = LoopReport()

    @property
    def model(self) -> KinematicModel:
        return self._model

    def joint_positions(self) -> dict[str, float]:
        with self._state_lock:
            state = self._state
        return {j.name: q for j, q in zip(self._model.joints, state.positions)}

    def joint_targets(self) -> dict[str, float]:
        with self._state_lock:
            state = self._state
        return {j.name: t for j, t in zip(self._model.joints, state.targets)}

    def start(self) -> None:
        if self._loop_thread is not None:
            raise SimError("simulator already started")
        self._loop_thread = threading.Thread(
            target=self._run_loop, name="sim-loop", daemon=True)
        self._echo_thread = threading.Thread(
            target=self._run_echo, name="sim-echo", daemon=True)
        self._loop_thread.start()
        self._echo_thread.start()

    def stop(self) -> None:
        self._stop.set()
        for t in (self._loop_thread, self._echo_thread):
            if t is not None:
                t.join(timeout=5.0)

    def _publish_error(self, message: str) -> None:
        self.report.errors += 1
        self._err_pub.publish("ErrorEvent", {"source": "sim", "message": message})

    def _apply_command(self, body: dict) -> None:
        name = body.get("joint")
        try:
            index = self._model.joint_index(name)
        except KeyError:
            self._publish_error(f"unknown joint: {name!r}")
            return
        joint = self._model.joints[index]
        if joint.kind == "fixed":
            self._publish_error(f"joint {name!r} is fixed and cannot move")
            return
        target = body.get("target")
        if not isinstance(target, (int, float)) or not math.isfinite(target):
            self._publish_error(f"joint {name!r}: bad target {target!r}")
            return
        max_speed = body.get("max_speed")
        if max_speed is not None and (
                not isinstance(max_speed, (int, float)) or max_speed <= 0):
            self._publish_error(f"joint {name!r}: bad max_speed {max_speed!r}")
            return
        with self._state_lock:
            self._state = self._state.with_target(index, float(target),
                                                  max_speed)

    def _run_loop(self) -> None:
        cfg = self._config
        period_ns = round(1e9 / cfg.step_hz)
        decim = max(1, round(cfg.step_hz / cfg.publish_hz))
        dt = 1.0 / cfg.step_hz
        last = time.monotonic_ns()
        acc = 0
        last_stamp = 0
        while not self._stop.is_set():
            now = time.monotonic_ns()
            acc += now - last
            last = now
            # Cap the catch-up burst after a long stall; a burst of stale
            # steps helps nobody once the scheduler starves us.
            acc = min(acc, 250 * period_ns)
            while acc >= period_ns:
                acc -= period_ns
                for env in self._cmd_sub.drain():
                    self._apply_command(env.body)
                with self._state_lock:
                    self._state = step(self._model, self._state, dt)
                    state = self._state
                self.report.steps += 1
                if self.report.steps % decim == 0:
                    stamp = max(now_ns(), last_stamp + 1)
                    last_stamp = stamp
                    self._tf_pub.publish(
                        "TransformUpdate",
                        encode_update(stamp, edge_transforms(self._model, state)))
                    self.report.publishes += 1
            self._stop.wait(max(period_ns - acc, 0) / 1e9)

    def _run_echo(self) -> None:
        delay2_s = 2.0 * self._config.inject_delay_ms / 1e3
        body_count = len(self._model.bodies)
        pending: deque[tuple[float, dict]] = deque()
        while not self._stop.is_set():
            if pending:
                wait = pending[0][0] - time.monotonic()
                if wait <= 0:
                    _, req = pending.popleft()
                    self._reply_pub.publish("EchoReply", {
                        "seq": req["seq"],
                        "t0_nanos": req["t0_nanos"],
                        "body_count": body_count,
                    })
                    self.report.echo_replies += 1
                    continue
                env = self._echo_sub.receive(timeout=min(wait, 0.05))
            else:
                env = self._echo_sub.receive(timeout=0.05)
            if env is not None:
                pending.append((time.monotonic() + delay2_s, env.body))
