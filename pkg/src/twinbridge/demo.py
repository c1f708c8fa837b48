"""All-in-one tracking demo.

Runs bus, simulator, and mirror in a single process, plays a timed joint
script, and reports how far the mirrored scene strayed from the simulator's
forward-kinematics ground truth, both while the robot was moving and after
it settled.  The post-quiescence numbers are the headline: once the sim has
been still for a couple of timer periods, the mirror must match exactly as
transmitted.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .bus import Bus
from .mirror import MirrorRunner, SyncTimerConfig, world_pose
from .scene import SceneDescription, publish_description, publish_metadata
from .sim import (
    JOINT_CMD_TOPIC,
    JointState,
    SimConfig,
    Simulator,
    build_model,
    forward_kinematics,
)


class DemoError(Exception):
    """Demo setup or settling failure."""


@dataclass(frozen=True)
class ScriptStep:
    at_s: float
    joint: str
    target: float
    max_speed: Optional[float] = None


@dataclass(frozen=True)
class DemoScript:
    """Timed joint targets; offsets must be non-decreasing."""

    steps: tuple[ScriptStep, ...]
    duration_s: float

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        last = 0.0
        for step in self.steps:
            if step.at_s < last:
                raise ValueError("script offsets must be non-decreasing")
            last = step.at_s
            if step.at_s >= self.duration_s:
                raise ValueError(
                    f"step at {step.at_s} s falls outside the {self.duration_s} s run")


def sine_script(model, duration_s: float, *, joints: Optional[Sequence[str]] = None,
                rate_hz: float = 10.0, scale: float = 0.25,
                max_speed: float = 0.5) -> DemoScript:
    """Sinusoidal targets for a few joints, leaving the tail quiescent.

    Targets stop changing at 70% of the duration so the remaining time
    covers convergence and the settled comparison window.
    """
    movable = [j for j in model.joints if j.kind != "fixed"]
    if joints is None:
        chosen = movable[:3]
    else:
        by_name = {j.name: j for j in movable}
        try:
            chosen = [by_name[name] for name in joints]
        except KeyError as err:
            raise DemoError(f"unknown or fixed joint in script: {err}") from None
    steps = []
    active_until = 0.7 * duration_s
    n = max(2, int(active_until * rate_hz))
    for i in range(n):
        at = i / rate_hz
        for k, joint in enumerate(chosen):
            lo, hi = joint.limits
            center = (lo + hi) / 2.0
            amp = scale * (hi - lo) / 2.0
            target = center + amp * math.sin(
                2.0 * math.pi * (0.3 + 0.1 * k) * at)
            steps.append(ScriptStep(at_s=at, joint=joint.name,
                                    target=target, max_speed=max_speed))
    # Park every driven joint on a fixed target for the settling window.
    for joint in chosen:
        lo, hi = joint.limits
        steps.append(ScriptStep(at_s=active_until, joint=joint.name,
                                target=(lo + hi) / 2.0, max_speed=max_speed))
    return DemoScript(steps=tuple(steps), duration_s=duration_s)


@dataclass(frozen=True)
class BodyDiscrepancy:
    angle_rad: float
    translation_m: float


@dataclass
class DemoReport:
    scene: str
    duration_s: float
    bodies: int
    post_quiescence: dict[str, BodyDiscrepancy]
    post_quiescence_max_angle_rad: float
    post_quiescence_max_translation_m: float
    in_motion_max_angle_rad: float
    in_motion_max_translation_m: float
    ticks: int
    mean_period_ms: float
    skipped_deadlines: int
    overrun_warnings: int
    sim_publishes: int
    mirror_updates_total: int

    def to_json(self) -> dict:
        return {
            "scene": self.scene,
            "duration_s": self.duration_s,
            "bodies": self.bodies,
            "post_quiescence": {
                name: {"angle_rad": d.angle_rad,
                       "translation_m": d.translation_m}
                for name, d in self.post_quiescence.items()
            },
            "post_quiescence_max_angle_rad": self.post_quiescence_max_angle_rad,
            "post_quiescence_max_translation_m":
                self.post_quiescence_max_translation_m,
            "in_motion_max_angle_rad": self.in_motion_max_angle_rad,
            "in_motion_max_translation_m": self.in_motion_max_translation_m,
            "ticks": self.ticks,
            "mean_period_ms": self.mean_period_ms,
            "skipped_deadlines": self.skipped_deadlines,
            "overrun_warnings": self.overrun_warnings,
            "sim_publishes": self.sim_publishes,
            "mirror_updates_total": self.mirror_updates_total,
        }


def _state_at(model, positions: dict[str, float]) -> JointState:
    q = tuple(positions[j.name] for j in model.joints)
    n = len(model.joints)
    return JointState(positions=q, velocities=(0.0,) * n, targets=q,
                      max_speeds=(1.0,) * n)


def _compare(model, sim: Simulator, runner: MirrorRunner
             ) -> dict[str, BodyDiscrepancy]:
    """Mirror poses against FK of the sim's positions, sampled now."""
    truth = forward_kinematics(model, _state_at(model, sim.joint_positions()))
    out = {}
    for name, want in truth.items():
        got = world_pose(runner.scene, name)
        out[name] = BodyDiscrepancy(
            angle_rad=got.rotation.angle_to(want.rotation),
            translation_m=(got.translation - want.translation).norm())
    return out


def run_demo(desc: SceneDescription, script: DemoScript,
             sim_config: SimConfig = SimConfig(),
             timer: SyncTimerConfig = SyncTimerConfig(), *,
             settle_timeout_s: float = 10.0,
             sample_period_s: float = 0.05) -> DemoReport:
    """Play the script against an in-process sim+mirror pair and report."""
    model = build_model(desc)
    known = {j.name for j in model.joints if j.kind != "fixed"}
    for step in script.steps:
        if step.joint not in known:
            raise DemoError(f"script references unknown joint: {step.joint!r}")

    bus = Bus()
    publish_metadata(bus, desc)
    publish_description(bus, desc)
    sim = Simulator(bus, model, sim_config)
    runner = MirrorRunner(bus, timer)
    in_motion_angle = 0.0
    in_motion_translation = 0.0
    sim.start()
    runner.start()
    try:
        start = time.monotonic()
        next_step = 0
        next_sample = start + sample_period_s
        while True:
            now = time.monotonic()
            elapsed = now - start
            if elapsed >= script.duration_s:
                break
            while (next_step < len(script.steps)
                   and script.steps[next_step].at_s <= elapsed):
                step = script.steps[next_step]
                body = {"joint": step.joint, "target": step.target}
                if step.max_speed is not None:
                    body["max_speed"] = step.max_speed
                bus.publish(JOINT_CMD_TOPIC, "JointCommand", body)
                next_step += 1
            if now >= next_sample and runner.scene.stats.ticks > 0:
                for d in _compare(model, sim, runner).values():
                    in_motion_angle = max(in_motion_angle, d.angle_rad)
                    in_motion_translation = max(in_motion_translation,
                                                d.translation_m)
                next_sample = now + sample_period_s
            time.sleep(0.002)

        # Quiescence: wait until every joint sits exactly on its (limit-
        # clamped) target, then give the pipeline time to flush through.
        limits = {j.name: j.limits for j in model.joints}
        deadline = time.monotonic() + settle_timeout_s
        while True:
            positions = sim.joint_positions()
            targets = sim.joint_targets()
            settled = True
            for name, q in positions.items():
                want = targets[name]
                if limits[name] is not None:
                    lo, hi = limits[name]
                    want = min(max(want, lo), hi)
                if q != want:
                    settled = False
                    break
            if settled:
                break
            if time.monotonic() > deadline:
                raise DemoError("joints did not settle within the timeout")
            time.sleep(0.01)
        time.sleep(max(4.0 / timer.rate_hz, 4.0 / sim_config.publish_hz) + 0.05)
        final = _compare(model, sim, runner)
    finally:
        sim.stop()
        runner.stop()

    stats = runner.scene.stats
    return DemoReport(
        scene=desc.name,
        duration_s=script.duration_s,
        bodies=len(model.bodies),
        post_quiescence=final,
        post_quiescence_max_angle_rad=max(d.angle_rad for d in final.values()),
        post_quiescence_max_translation_m=max(
            d.translation_m for d in final.values()),
        in_motion_max_angle_rad=in_motion_angle,
        in_motion_max_translation_m=in_motion_translation,
        ticks=stats.ticks,
        mean_period_ms=stats.mean_period_ms(),
        skipped_deadlines=stats.skipped_deadlines,
        overrun_warnings=stats.overrun_warnings,
        sim_publishes=sim.report.publishes,
        mirror_updates_total=stats.updated_total,
    )
