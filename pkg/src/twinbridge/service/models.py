"""Wire frames for the console websocket and REST bodies.

Every frame carries `v`, the protocol version.  Client frames are a
discriminated union on `type`; anything that fails validation is answered
with an error frame on the same connection rather than a close.
"""

from __future__ import annotations

from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, TypeAdapter

PROTOCOL_VERSION = 1

# -- client -> server --------------------------------------------------------


class JogCommand(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["jog"]
    joint: str = Field(min_length=1)
    delta: float = Field(allow_inf_nan=False)


class SetTargetCommand(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["set_target"]
    joint: str = Field(min_length=1)
    target: float = Field(allow_inf_nan=False)
    max_speed: Optional[float] = Field(default=None, gt=0.0,
                                       allow_inf_nan=False)


class StartBenchCommand(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["start_bench"]
    frames: int = Field(default=200, ge=1, le=100_000)
    rate_hz: float = Field(default=50.0, gt=0.0, le=1000.0,
                           allow_inf_nan=False)


ClientCommand = Annotated[
    Union[JogCommand, SetTargetCommand, StartBenchCommand],
    Field(discriminator="type"),
]
CLIENT_COMMAND: TypeAdapter[ClientCommand] = TypeAdapter(ClientCommand)

# -- server -> client --------------------------------------------------------


class JointInfo(BaseModel):
    name: str
    kind: str
    parent: str
    child: str
    limits: Optional[Tuple[float, float]] = None


class SceneFrame(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["scene"] = "scene"
    scene: str
    bodies: List[str]
    joints: List[JointInfo]
    broadcast_hz: float


class PosesFrame(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["poses"] = "poses"
    stamp_nanos: int
    ticks: int
    poses: Dict[str, List[float]]


class LatencyStatsBody(BaseModel):
    n: int
    mean_ms: float
    median_ms: float
    std_ms: float
    min_ms: float
    max_ms: float
    p95_ms: float


class LatencyFrame(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["latency"] = "latency"
    stats: LatencyStatsBody
    one_way_ms: float
    within_threshold: bool
    dropped: int
    series: List[float]  # per-frame RTDs in sequence order, for charting


class ErrorFrame(BaseModel):
    v: Literal[1] = PROTOCOL_VERSION
    type: Literal["error"] = "error"
    source: str
    message: str


# -- REST bodies --------------------------------------------------------------


class RegisterRequest(BaseModel):
    fixed: List[Tuple[float, float, float]] = Field(min_length=3)
    moving: List[Tuple[float, float, float]] = Field(min_length=3)


class BenchRequest(BaseModel):
    frames: int = Field(default=200, ge=1, le=100_000)
    rate_hz: float = Field(default=50.0, gt=0.0, le=1000.0)
