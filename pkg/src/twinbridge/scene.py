"""Scene descriptions: ADF-subset and URDF-subset parsing, validation, metadata.

The ADF subset is a YAML document (see docs/adf-subset.md) listing rigid
bodies (name, mesh path, parent, pose, mass) and joints (kind, parent,
child, axis, limits). The URDF subset covers robot/link/joint with
origin, axis, and limit elements only; anything outside the subset is an
explicit unsupported-feature error, never a silent skip.

Both parsers produce the same validated SceneDescription: a forest of
bodies rooted at the world frame, where a joint's origin equals its child
body's pose in the parent frame (motion is applied after that origin).
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from twinbridge.transforms import RigidTransform, Vec3

WORLD = "world"

METADATA_PARAM = "scene/metadata"
METADATA_TOPIC = "scene/metadata"
DESCRIPTION_PARAM = "scene/description"

JOINT_KINDS = ("revolute", "prismatic", "fixed")


class SceneError(Exception):
    pass


class SceneSyntaxError(SceneError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SceneSemanticError(SceneError):
    """Validation failure naming the offending body or joint."""


class UnsupportedFeatureError(SceneError):
    """Input uses a construct outside the documented subset."""


@dataclass(frozen=True)
class BodySpec:
    name: str
    mesh_path: str
    parent: str = WORLD
    initial_pose: RigidTransform = RigidTransform()
    mass: float = 1.0


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str
    parent: str
    child: str
    origin: RigidTransform
    axis: Vec3
    limits: Optional[tuple[float, float]]  # None for fixed joints


@dataclass(frozen=True)
class SceneDescription:
    name: str
    bodies: tuple[BodySpec, ...]
    joints: tuple[JointSpec, ...]

    def body(self, name: str) -> BodySpec:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(name)

    def joint(self, name: str) -> JointSpec:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)


@dataclass(frozen=True)
class SceneMetadata:
    scene: str
    bodies: tuple[tuple[str, str], ...]  # (body name, mesh path), scene order


# -- ADF subset -----------------------------------------------------------


def parse_adf(text: str) -> SceneDescription:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise SceneSyntaxError(str(getattr(exc, "problem", exc)), line) from exc
    if not isinstance(doc, dict):
        raise SceneSyntaxError("ADF document must be a mapping", 1)

    unknown = set(doc) - {"scene", "bodies", "joints"}
    if unknown:
        raise UnsupportedFeatureError(f"unsupported ADF keys: {sorted(unknown)}")

    name = doc.get("scene", "scene")
    bodies = []
    for i, entry in enumerate(_as_list(doc.get("bodies"), "bodies")):
        bodies.append(_adf_body(entry, i))
    joints = []
    body_poses = {b.name: b for b in bodies}
    for i, entry in enumerate(_as_list(doc.get("joints"), "joints")):
        joints.append(_adf_joint(entry, i, body_poses))
    desc = SceneDescription(str(name), tuple(bodies), tuple(joints))
    validate_scene(desc)
    return desc


def _as_list(value: Any, what: str) -> list:
    if value is None:
        return []
    if not isinstance(value, list):
        raise SceneSyntaxError(f"{what} must be a list")
    return value


def _adf_body(entry: Any, index: int) -> BodySpec:
    if not isinstance(entry, dict):
        raise SceneSyntaxError(f"body #{index} must be a mapping")
    unknown = set(entry) - {"name", "mesh", "parent", "pose", "mass"}
    if unknown:
        raise UnsupportedFeatureError(f"body #{index}: unsupported keys {sorted(unknown)}")
    name = entry.get("name")
    if not name:
        raise SceneSemanticError(f"body #{index} has no name")
    mesh = entry.get("mesh", "")
    parent = entry.get("parent", WORLD)
    if parent == "WORLD":
        parent = WORLD
    pose = _parse_pose(entry.get("pose"), f"body {name!r}")
    mass = entry.get("mass", 1.0)
    return BodySpec(str(name), str(mesh), str(parent), pose, float(mass))


def _adf_joint(entry: Any, index: int, bodies: dict[str, BodySpec]) -> JointSpec:
    if not isinstance(entry, dict):
        raise SceneSyntaxError(f"joint #{index} must be a mapping")
    unknown = set(entry) - {"name", "kind", "parent", "child", "axis", "limits"}
    if unknown:
        raise UnsupportedFeatureError(f"joint #{index}: unsupported keys {sorted(unknown)}")
    name = entry.get("name")
    if not name:
        raise SceneSemanticError(f"joint #{index} has no name")
    kind = entry.get("kind", "revolute")
    parent = entry.get("parent")
    child = entry.get("child")
    if not parent or not child:
        raise SceneSemanticError(f"joint {name!r} must declare parent and child")
    child_body = bodies.get(str(child))
    # joint origin is the child body's pose in the parent frame
    origin = child_body.initial_pose if child_body is not None else RigidTransform()
    axis = entry.get("axis", [1.0, 0.0, 0.0])
    limits = entry.get("limits")
    return _make_joint(str(name), str(kind), str(parent), str(child), origin, axis, limits)


def _make_joint(
    name: str,
    kind: str,
    parent: str,
    child: str,
    origin: RigidTransform,
    axis: Any,
    limits: Any,
) -> JointSpec:
    if kind not in JOINT_KINDS:
        raise SceneSemanticError(f"joint {name!r}: unknown kind {kind!r}")
    try:
        axis_v = Vec3.from_seq([float(v) for v in axis])
    except (TypeError, ValueError) as exc:
        raise SceneSemanticError(f"joint {name!r}: bad axis {axis!r}") from exc
    if not axis_v.is_finite() or axis_v.norm() == 0.0:
        raise SceneSemanticError(f"joint {name!r}: axis must be finite and nonzero")
    axis_v = axis_v.normalized()
    if kind == "fixed":
        if limits is not None:
            raise SceneSemanticError(f"joint {name!r}: fixed joints take no limits")
        lim = None
    else:
        if limits is None:
            raise SceneSemanticError(f"joint {name!r}: {kind} joints require limits")
        try:
            lower, upper = (float(v) for v in limits)
        except (TypeError, ValueError) as exc:
            raise SceneSemanticError(f"joint {name!r}: bad limits {limits!r}") from exc
        if not (math.isfinite(lower) and math.isfinite(upper)) or lower > upper:
            raise SceneSemanticError(f"joint {name!r}: limits must satisfy lower <= upper")
        lim = (lower, upper)
    return JointSpec(name, kind, parent, child, origin, axis_v, lim)


def _parse_pose(value: Any, where: str) -> RigidTransform:
    if value is None:
        return RigidTransform()
    if not isinstance(value, dict) or set(value) - {"xyz", "rpy"}:
        raise SceneSyntaxError(f"{where}: pose must be a mapping with xyz/rpy")
    xyz = value.get("xyz", [0.0, 0.0, 0.0])
    rpy = value.get("rpy", [0.0, 0.0, 0.0])
    try:
        return RigidTransform.from_parts([float(v) for v in xyz], [float(v) for v in rpy])
    except (TypeError, ValueError) as exc:
        raise SceneSyntaxError(f"{where}: bad pose numbers") from exc


def serialize_adf(desc: SceneDescription) -> str:
    """Canonical ADF writer; parse_adf(serialize_adf(d)) reproduces d."""
    lines = [f"scene: {desc.name}"]
    lines.append("bodies:")
    for b in desc.bodies:
        t = b.initial_pose.translation
        rpy = b.initial_pose.rotation.to_rpy()
        lines.append(f"  - name: {b.name}")
        lines.append(f"    mesh: {b.mesh_path}")
        lines.append(f"    parent: {b.parent}")
        lines.append(f"    pose: {{xyz: [{t.x!r}, {t.y!r}, {t.z!r}], "
                     f"rpy: [{rpy[0]!r}, {rpy[1]!r}, {rpy[2]!r}]}}")
        lines.append(f"    mass: {b.mass!r}")
    if desc.joints:
        lines.append("joints:")
        for j in desc.joints:
            lines.append(f"  - name: {j.name}")
            lines.append(f"    kind: {j.kind}")
            lines.append(f"    parent: {j.parent}")
            lines.append(f"    child: {j.child}")
            lines.append(f"    axis: [{j.axis.x!r}, {j.axis.y!r}, {j.axis.z!r}]")
            if j.limits is not None:
                lines.append(f"    limits: [{j.limits[0]!r}, {j.limits[1]!r}]")
    return "\n".join(lines) + "\n"


# -- URDF subset ----------------------------------------------------------

_URDF_ALLOWED: dict[str, set[str]] = {
    "robot": {"name"},
    "link": {"name"},
    "joint": {"name", "type"},
    "origin": {"xyz", "rpy"},
    "axis": {"xyz"},
    "limit": {"lower", "upper"},
    "parent": {"link"},
    "child": {"link"},
}


def parse_urdf_subset(text: str) -> SceneDescription:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line = exc.position[0] if exc.position else None
        raise SceneSyntaxError(str(exc), line) from exc
    if root.tag != "robot":
        raise UnsupportedFeatureError(f"root element must be <robot>, got <{root.tag}>")
    _check_urdf_element(root)

    link_order: list[str] = []
    joint_elems: list[ET.Element] = []
    for child in root:
        _check_urdf_element(child)
        if child.tag == "link":
            name = child.attrib.get("name")
            if not name:
                raise SceneSemanticError("link without a name")
            link_order.append(name)
            for sub in child:
                raise UnsupportedFeatureError(
                    f"link {name!r}: unsupported element <{sub.tag}>"
                )
        elif child.tag == "joint":
            joint_elems.append(child)
        else:
            raise UnsupportedFeatureError(f"unsupported element <{child.tag}>")

    joints: list[JointSpec] = []
    child_info: dict[str, tuple[str, RigidTransform]] = {}
    for elem in joint_elems:
        spec = _urdf_joint(elem)
        joints.append(spec)
        child_info[spec.child] = (spec.parent, spec.origin)

    bodies = []
    for name in link_order:
        parent, pose = child_info.get(name, (WORLD, RigidTransform()))
        bodies.append(BodySpec(name, _default_mesh(name), parent, pose, 1.0))
    desc = SceneDescription(root.attrib.get("name", "scene"), tuple(bodies), tuple(joints))
    validate_scene(desc)
    return desc


def _default_mesh(link_name: str) -> str:
    # the URDF subset has no mesh element; path is synthesized by convention
    return f"meshes/{link_name}.stl"


def _check_urdf_element(elem: ET.Element) -> None:
    allowed = _URDF_ALLOWED.get(elem.tag)
    if allowed is None:
        raise UnsupportedFeatureError(f"unsupported element <{elem.tag}>")
    extra = set(elem.attrib) - allowed
    if extra:
        raise UnsupportedFeatureError(
            f"<{elem.tag}>: unsupported attributes {sorted(extra)}"
        )


def _urdf_joint(elem: ET.Element) -> JointSpec:
    name = elem.attrib.get("name", "")
    kind = elem.attrib.get("type", "")
    parent = child = None
    origin = RigidTransform()
    axis: Any = [1.0, 0.0, 0.0]
    limits = None
    for sub in elem:
        _check_urdf_element(sub)
        if sub.tag == "parent":
            parent = sub.attrib.get("link")
        elif sub.tag == "child":
            child = sub.attrib.get("link")
        elif sub.tag == "origin":
            xyz = _floats(sub.attrib.get("xyz", "0 0 0"), name, "origin xyz", 3)
            rpy = _floats(sub.attrib.get("rpy", "0 0 0"), name, "origin rpy", 3)
            origin = RigidTransform.from_parts(xyz, rpy)
        elif sub.tag == "axis":
            axis = _floats(sub.attrib.get("xyz", "1 0 0"), name, "axis xyz", 3)
        elif sub.tag == "limit":
            limits = [
                _floats(sub.attrib.get("lower", "0"), name, "limit lower", 1)[0],
                _floats(sub.attrib.get("upper", "0"), name, "limit upper", 1)[0],
            ]
        else:
            raise UnsupportedFeatureError(f"joint {name!r}: unsupported <{sub.tag}>")
    if not name:
        raise SceneSemanticError("joint without a name")
    if parent is None or child is None:
        raise SceneSemanticError(f"joint {name!r} must declare <parent> and <child>")
    return _make_joint(name, kind, parent, child, origin, axis, limits)


def _floats(raw: str, joint: str, what: str, n: int) -> list[float]:
    parts = raw.split()
    if len(parts) != n:
        raise SceneSemanticError(f"joint {joint!r}: {what} needs {n} numbers, got {raw!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise SceneSemanticError(f"joint {joint!r}: bad number in {what}: {raw!r}") from exc


# -- validation -----------------------------------------------------------


def validate_scene(desc: SceneDescription) -> None:
    names: set[str] = set()
    for b in desc.bodies:
        if b.name in names:
            raise SceneSemanticError(f"duplicate body name {b.name!r}")
        if b.name == WORLD:
            raise SceneSemanticError(f"body name {WORLD!r} is reserved")
        names.add(b.name)
        if not b.mesh_path:
            raise SceneSemanticError(f"body {b.name!r}: mesh path must be nonempty")
        if not (math.isfinite(b.mass) and b.mass >= 0):
            raise SceneSemanticError(f"body {b.name!r}: mass must be finite and >= 0")

    for b in desc.bodies:
        if b.parent != WORLD and b.parent not in names:
            raise SceneSemanticError(f"body {b.name!r}: unknown parent {b.parent!r}")

    # parent chains must terminate at world: cycle detection
    parents = {b.name: b.parent for b in desc.bodies}
    for start in parents:
        seen = {start}
        cur = parents[start]
        while cur != WORLD:
            if cur in seen:
                raise SceneSemanticError(f"body {start!r}: parent cycle through {cur!r}")
            seen.add(cur)
            cur = parents[cur]

    joint_names: set[str] = set()
    jointed_children: set[str] = set()
    for j in desc.joints:
        if j.name in joint_names:
            raise SceneSemanticError(f"duplicate joint name {j.name!r}")
        joint_names.add(j.name)
        if j.parent == j.child:
            raise SceneSemanticError(f"joint {j.name!r}: parent equals child")
        for end, role in ((j.parent, "parent"), (j.child, "child")):
            if end != WORLD and end not in names:
                raise SceneSemanticError(f"joint {j.name!r}: unknown {role} {end!r}")
        if j.child == WORLD:
            raise SceneSemanticError(f"joint {j.name!r}: child cannot be {WORLD!r}")
        if j.child in jointed_children:
            raise SceneSemanticError(f"body {j.child!r} is the child of more than one joint")
        jointed_children.add(j.child)
        if parents[j.child] != j.parent:
            raise SceneSemanticError(
                f"joint {j.name!r}: child {j.child!r} declares parent "
                f"{parents[j.child]!r}, joint says {j.parent!r}"
            )
        if abs(j.axis.norm() - 1.0) > 1e-9:
            raise SceneSemanticError(f"joint {j.name!r}: axis is not unit length")


# -- metadata -------------------------------------------------------------


def to_metadata(desc: SceneDescription) -> SceneMetadata:
    return SceneMetadata(desc.name, tuple((b.name, b.mesh_path) for b in desc.bodies))


def metadata_to_json(meta: SceneMetadata) -> str:
    return json.dumps(
        {"scene": meta.scene, "bodies": [{"name": n, "mesh": m} for n, m in meta.bodies]}
    )


def metadata_from_json(text: str) -> SceneMetadata:
    doc = json.loads(text)
    return SceneMetadata(
        doc["scene"], tuple((b["name"], b["mesh"]) for b in doc["bodies"])
    )


def publish_metadata(bus: Any, desc: SceneDescription) -> None:
    """Store metadata on the parameter server and publish it latched."""
    meta = to_metadata(desc)
    payload = metadata_to_json(meta)
    bus.param_set(METADATA_PARAM, payload)
    bus.publish(
        METADATA_TOPIC,
        "SceneMetadata",
        {"scene": meta.scene, "bodies": [{"name": n, "mesh": m} for n, m in meta.bodies]},
        latch=True,
    )


# -- full description document (operator console support) ------------------


def scene_to_json(desc: SceneDescription) -> str:
    doc = {
        "scene": desc.name,
        "bodies": [
            {
                "name": b.name,
                "mesh": b.mesh_path,
                "parent": b.parent,
                "pose": b.initial_pose.to_list(),
                "mass": b.mass,
            }
            for b in desc.bodies
        ],
        "joints": [
            {
                "name": j.name,
                "kind": j.kind,
                "parent": j.parent,
                "child": j.child,
                "origin": j.origin.to_list(),
                "axis": j.axis.to_list(),
                "lower": j.limits[0] if j.limits else None,
                "upper": j.limits[1] if j.limits else None,
            }
            for j in desc.joints
        ],
    }
    return json.dumps(doc)


def scene_from_json(text: str) -> SceneDescription:
    doc = json.loads(text)
    bodies = tuple(
        BodySpec(
            b["name"], b["mesh"], b["parent"], RigidTransform.from_list(b["pose"]), b["mass"]
        )
        for b in doc["bodies"]
    )
    joints = tuple(
        JointSpec(
            j["name"],
            j["kind"],
            j["parent"],
            j["child"],
            RigidTransform.from_list(j["origin"]),
            Vec3.from_seq(j["axis"]),
            (j["lower"], j["upper"]) if j["lower"] is not None else None,
        )
        for j in doc["joints"]
    )
    return SceneDescription(doc["scene"], bodies, joints)


def publish_description(bus: Any, desc: SceneDescription) -> None:
    bus.param_set(DESCRIPTION_PARAM, scene_to_json(desc))


# -- file loading -----------------------------------------------------------


def load_scene_file(path: str) -> SceneDescription:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".urdf"):
        return parse_urdf_subset(text)
    if path.endswith(".adf"):
        return parse_adf(text)
    raise SceneError(f"unknown scene file extension: {path}")
