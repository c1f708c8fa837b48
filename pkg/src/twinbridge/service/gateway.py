"""FastAPI gateway between the bus and browser clients.

The mirror loop keeps running in its own thread; the gateway only reads
scene snapshots, so a stuck client can never stall synchronization.  Each
client command is validated here and published on the bus exactly once.
"""

from __future__ import annotations

import asyncio
import contextlib
import dataclasses
import threading
import time
from typing import Any, Dict, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import ValidationError

from ..latency import BenchConfig, BenchResult, LatencyError, assess_hci, run_rtd_bench
from ..mirror import MirrorRunner, NotReadyError, SyncTimerConfig
from ..registration import FiducialSet, RegistrationError, register_rigid, result_to_json
from ..scene import DESCRIPTION_PARAM, SceneDescription, scene_from_json
from ..sim import JOINT_CMD_TOPIC
from ..transforms import Vec3
from .models import (
    BenchRequest,
    CLIENT_COMMAND,
    ErrorFrame,
    JogCommand,
    JointInfo,
    LatencyFrame,
    LatencyStatsBody,
    PosesFrame,
    RegisterRequest,
    SceneFrame,
    SetTargetCommand,
    StartBenchCommand,
)

DEFAULT_BROADCAST_HZ = 30.0
_SEND_TIMEOUT_S = 1.0
_METADATA_POLL_S = 0.2


class GatewayState:
    """Mutable state shared by the endpoints of one gateway instance."""

    def __init__(self, bus: Any, runner: MirrorRunner, desc: SceneDescription,
                 broadcast_hz: float) -> None:
        self.bus = bus
        self.runner = runner
        self.desc = desc
        self.broadcast_hz = broadcast_hz
        self.clients: Dict[WebSocket, asyncio.Lock] = {}
        self.latest_latency: Optional[dict] = None
        self.bench_lock = threading.Lock()
        self.tasks: set = set()
        self.cmd_pub = bus.publisher(JOINT_CMD_TOPIC, "gateway")
        # Commanded target per movable joint; jog deltas accumulate here.
        # Starts at each joint's home position (zero clamped into limits).
        self.joint_limits: Dict[str, tuple] = {}
        self.targets: Dict[str, float] = {}
        for joint in desc.joints:
            if joint.kind == "fixed" or joint.limits is None:
                continue
            lo, hi = joint.limits
            self.joint_limits[joint.name] = (lo, hi)
            self.targets[joint.name] = min(max(0.0, lo), hi)

    def scene_frame(self) -> SceneFrame:
        return SceneFrame(
            scene=self.desc.name,
            bodies=[b.name for b in self.desc.bodies],
            joints=[JointInfo(name=j.name, kind=j.kind, parent=j.parent,
                              child=j.child, limits=j.limits)
                    for j in self.desc.joints],
            broadcast_hz=self.broadcast_hz,
        )

    def poses_frame(self) -> PosesFrame:
        snap = self.runner.scene.snapshot()
        return PosesFrame(stamp_nanos=snap["last_sync"], ticks=snap["ticks"],
                          poses=snap["poses"])

    def command_target(self, joint: str, target: float,
                       max_speed: Optional[float]) -> tuple:
        """Clamp into limits, publish exactly one JointCommand, track it.

        Returns (published, message).  Clamping keeps the tracked target in
        lockstep with the simulator, which rejects out-of-limit targets.
        """
        limits = self.joint_limits.get(joint)
        if limits is None:
            return False, f"unknown or fixed joint {joint!r}"
        lo, hi = limits
        clamped = min(max(target, lo), hi)
        body: Dict[str, Any] = {"joint": joint, "target": clamped}
        if max_speed is not None:
            body["max_speed"] = max_speed
        self.cmd_pub.publish("JointCommand", body)
        self.targets[joint] = clamped
        return True, ""


def _latency_frame(result: BenchResult, config: BenchConfig) -> LatencyFrame:
    verdict = assess_hci(result.stats, config)
    return LatencyFrame(
        stats=LatencyStatsBody(**dataclasses.asdict(result.stats)),
        one_way_ms=verdict["one_way_ms"],
        within_threshold=verdict["within_threshold"],
        dropped=len(result.dropped),
        series=[s.rtd_ms for s in result.samples],
    )


def _load_description(bus: Any, wait_s: float) -> SceneDescription:
    deadline = time.monotonic() + wait_s
    while True:
        text = bus.param_get(DESCRIPTION_PARAM)
        if text is not None:
            return scene_from_json(text)
        if time.monotonic() > deadline:
            raise NotReadyError(
                f"no scene description on the bus after {wait_s:g}s")
        time.sleep(_METADATA_POLL_S)


async def _send_text(state: GatewayState, ws: WebSocket, text: str) -> bool:
    """Send to one client; drop it on timeout or failure."""
    lock = state.clients.get(ws)
    if lock is None:
        return False
    try:
        async with lock:
            await asyncio.wait_for(ws.send_text(text), _SEND_TIMEOUT_S)
        return True
    except Exception:
        state.clients.pop(ws, None)
        with contextlib.suppress(Exception):
            await ws.close()
        return False


async def _send_error(state: GatewayState, ws: WebSocket, source: str,
                      message: str) -> None:
    frame = ErrorFrame(source=source, message=message)
    await _send_text(state, ws, frame.model_dump_json())


async def _broadcast(state: GatewayState, text: str) -> None:
    await asyncio.gather(*(_send_text(state, ws, text)
                           for ws in list(state.clients)))


async def _broadcast_loop(state: GatewayState) -> None:
    period = 1.0 / state.broadcast_hz
    next_due = time.monotonic() + period
    while True:
        await asyncio.sleep(max(0.0, next_due - time.monotonic()))
        next_due += period
        now = time.monotonic()
        if next_due < now:  # fell behind; realign instead of bursting
            next_due = now + period
        if state.clients:
            await _broadcast(state, state.poses_frame().model_dump_json())


async def _run_bench(state: GatewayState, ws: WebSocket, frames: int,
                     rate_hz: float) -> None:
    if not state.bench_lock.acquire(blocking=False):
        await _send_error(state, ws, "bench", "a bench is already running")
        return
    try:
        config = BenchConfig(n_frames=frames, rate_hz=rate_hz)
        result = await asyncio.to_thread(run_rtd_bench, state.bus, config)
    except LatencyError as err:
        await _send_error(state, ws, "bench", str(err))
        return
    finally:
        state.bench_lock.release()
    frame = _latency_frame(result, config)
    state.latest_latency = frame.model_dump()
    await _broadcast(state, frame.model_dump_json())


def _spawn(state: GatewayState, coro) -> None:
    task = asyncio.get_running_loop().create_task(coro)
    state.tasks.add(task)
    task.add_done_callback(state.tasks.discard)


async def _handle_command(state: GatewayState, ws: WebSocket,
                          text: str) -> None:
    try:
        cmd = CLIENT_COMMAND.validate_json(text)
    except ValidationError as err:
        first = err.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "frame"
        await _send_error(state, ws, "gateway",
                          f"invalid command ({where}): {first['msg']}")
        return
    if isinstance(cmd, JogCommand):
        current = state.targets.get(cmd.joint, 0.0)
        ok, message = state.command_target(cmd.joint, current + cmd.delta,
                                           None)
        if not ok:
            await _send_error(state, ws, "gateway", message)
    elif isinstance(cmd, SetTargetCommand):
        ok, message = state.command_target(cmd.joint, cmd.target,
                                           cmd.max_speed)
        if not ok:
            await _send_error(state, ws, "gateway", message)
    elif isinstance(cmd, StartBenchCommand):
        _spawn(state, _run_bench(state, ws, cmd.frames, cmd.rate_hz))


def create_app(bus: Any, *, broadcast_hz: float = DEFAULT_BROADCAST_HZ,
               mirror_rate_hz: float = 200.0,
               static_dir: Optional[str] = None,
               metadata_wait_s: float = 10.0) -> FastAPI:
    """Build the gateway app around an already-connected bus handle."""
    desc = _load_description(bus, metadata_wait_s)
    runner = MirrorRunner(bus, SyncTimerConfig(rate_hz=mirror_rate_hz))
    state = GatewayState(bus, runner, desc, broadcast_hz)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        runner.start()
        broadcaster = asyncio.get_running_loop().create_task(
            _broadcast_loop(state))
        try:
            yield
        finally:
            broadcaster.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await broadcaster
            runner.stop()

    app = FastAPI(title="twinbridge gateway", lifespan=lifespan)
    app.state.gateway = state

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        state.clients[ws] = asyncio.Lock()
        await _send_text(state, ws, state.scene_frame().model_dump_json())
        try:
            while True:
                text = await ws.receive_text()
                await _handle_command(state, ws, text)
        except WebSocketDisconnect:
            pass
        finally:
            state.clients.pop(ws, None)

    @app.get("/healthz")
    async def healthz() -> dict:
        return {
            "status": "ok",
            "scene": state.desc.name,
            "clients": len(state.clients),
            "ticks": state.runner.scene.stats.ticks,
        }

    @app.get("/api/scene")
    async def api_scene() -> SceneFrame:
        return state.scene_frame()

    @app.get("/api/poses")
    async def api_poses() -> PosesFrame:
        return state.poses_frame()

    @app.get("/api/latency")
    async def api_latency() -> dict:
        if state.latest_latency is None:
            raise HTTPException(status_code=404,
                                detail="no bench has completed yet")
        return state.latest_latency

    @app.post("/api/register")
    def api_register(req: RegisterRequest) -> dict:
        try:
            fixed = FiducialSet("fixed", tuple(Vec3(*p) for p in req.fixed))
            moving = FiducialSet("moving",
                                 tuple(Vec3(*p) for p in req.moving))
            return result_to_json(register_rigid(fixed, moving))
        except RegistrationError as err:
            raise HTTPException(status_code=400, detail=str(err))

    @app.post("/api/bench")
    def api_bench(req: BenchRequest) -> dict:
        if not state.bench_lock.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail="a bench is already running")
        try:
            config = BenchConfig(n_frames=req.frames, rate_hz=req.rate_hz)
            result = run_rtd_bench(state.bus, config)
        except LatencyError as err:
            raise HTTPException(status_code=503, detail=str(err))
        finally:
            state.bench_lock.release()
        frame = _latency_frame(result, config)
        state.latest_latency = frame.model_dump()
        return state.latest_latency

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="console")
    else:

        @app.get("/", include_in_schema=False)
        async def index() -> dict:
            return {
                "service": "twinbridge gateway",
                "scene": state.desc.name,
                "websocket": "/ws",
                "rest": ["/healthz", "/api/scene", "/api/poses",
                         "/api/latency", "/api/register", "/api/bench"],
            }

    return app


def run_gateway(bus: Any, *, host: str = "127.0.0.1", port: int = 8090,
                broadcast_hz: float = DEFAULT_BROADCAST_HZ,
                mirror_rate_hz: float = 200.0,
                static_dir: Optional[str] = None,
                metadata_wait_s: float = 10.0) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    app = create_app(bus, broadcast_hz=broadcast_hz,
                     mirror_rate_hz=mirror_rate_hz, static_dir=static_dir,
                     metadata_wait_s=metadata_wait_s)
    uvicorn.run(app, host=host, port=port, log_level="warning")
