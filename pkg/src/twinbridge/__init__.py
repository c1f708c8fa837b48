"""twinbridge: digital-twin scene synchronization over a topic bus.

A kinematic simulator publishes stamped transforms over a small pub/sub
middleware; a mirror scene refreshes from a time-buffered transform tree
on a fixed-rate timer. Rigid registration and a round-trip-delay bench
round out the toolkit, with a FastAPI gateway serving an operator console.
"""

from twinbridge.registration import FiducialSet, RegistrationResult, register_rigid
from twinbridge.scene import SceneDescription, load_scene_file
from twinbridge.tftree import StampedTransform, TransformBuffer
from twinbridge.transforms import (
    RigidTransform,
    UnitQuaternion,
    Vec3,
    compose,
    interpolate,
    invert,
    transform_point,
)

__version__ = "0.1.0"

__all__ = [
    "FiducialSet",
    "RegistrationResult",
    "RigidTransform",
    "SceneDescription",
    "StampedTransform",
    "TransformBuffer",
    "UnitQuaternion",
    "Vec3",
    "compose",
    "interpolate",
    "invert",
    "load_scene_file",
    "register_rigid",
    "transform_point",
    "__version__",
]
