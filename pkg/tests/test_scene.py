import math

import pytest

from twinbridge.bus import Bus
from twinbridge.fixtures import fixture_path
from twinbridge import scene
from twinbridge.scene import (
    SceneSemanticError,
    SceneSyntaxError,
    UnsupportedFeatureError,
    parse_adf,
    parse_urdf_subset,
    serialize_adf,
)
from twinbridge.transforms import UnitQuaternion, Vec3

MINIMAL_ADF = """\
scene: tiny
bodies:
  - name: base
    mesh: meshes/base.stl
"""

TWO_LINK_URDF = """\
<robot name="pair">
  <link name="base"/>
  <link name="tip"/>
  <joint name="swing" type="revolute">
    <parent link="base"/>
    <child link="tip"/>
    <origin xyz="0.1 0 0" rpy="0 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="-1.0" upper="1.0"/>
  </joint>
</robot>
"""


class TestParseAdf:
    def test_minimal_scene(self):
        desc = parse_adf(MINIMAL_ADF)
        assert desc.name == "tiny"
        assert len(desc.bodies) == 1 and len(desc.joints) == 0
        body = desc.bodies[0]
        assert body.parent == scene.WORLD
        assert body.initial_pose.translation == Vec3(0, 0, 0)

    def test_galen25_fixture(self):
        desc = parse_adf(fixture_path("galen25.adf").read_text())
        assert desc.name == "galen25"
        assert len(desc.bodies) == 25
        assert len(desc.joints) == 24
        kinds = [j.kind for j in desc.joints]
        assert kinds.count("prismatic") == 3
        assert kinds.count("fixed") == 1

    def test_unknown_joint_child(self):
        text = MINIMAL_ADF + (
            "joints:\n  - name: j1\n    kind: revolute\n    parent: base\n"
            "    child: ghost\n    axis: [0.0, 0.0, 1.0]\n    limits: [-1.0, 1.0]\n"
        )
        with pytest.raises(SceneSemanticError, match="j1"):
            parse_adf(text)

    def test_duplicate_body_name(self):
        text = MINIMAL_ADF + "  - name: base\n    mesh: meshes/other.stl\n"
        with pytest.raises(SceneSemanticError, match="base"):
            parse_adf(text)

    def test_unknown_parent(self):
        text = MINIMAL_ADF + "  - name: arm\n    mesh: m.stl\n    parent: nowhere\n"
        with pytest.raises(SceneSemanticError, match="nowhere"):
            parse_adf(text)

    def test_parent_cycle(self):
        text = (
            "scene: loop\nbodies:\n"
            "  - name: a\n    mesh: a.stl\n    parent: b\n"
            "  - name: b\n    mesh: b.stl\n    parent: a\n"
        )
        with pytest.raises(SceneSemanticError, match="cycle"):
            parse_adf(text)

    def test_syntax_error_carries_line(self):
        bad = "scene: x\nbodies:\n  - name: a\n   mesh: oops\n"
        with pytest.raises(SceneSyntaxError) as err:
            parse_adf(bad)
        assert err.value.line is not None

    def test_unsupported_key_rejected(self):
        with pytest.raises(UnsupportedFeatureError):
            parse_adf(MINIMAL_ADF + "lights:\n  - on\n")


class TestParseUrdf:
    def test_two_links_one_joint(self):
        desc = parse_urdf_subset(TWO_LINK_URDF)
        assert [b.name for b in desc.bodies] == ["base", "tip"]
        joint = desc.joints[0]
        assert joint.kind == "revolute"
        assert joint.axis == Vec3(0, 0, 1)
        assert joint.limits == (-1.0, 1.0)
        tip = desc.body("tip")
        assert tip.parent == "base"
        assert (tip.initial_pose.translation - Vec3(0.1, 0, 0)).norm() <= 1e-12

    def test_rpy_becomes_quaternion(self):
        text = TWO_LINK_URDF.replace('rpy="0 0 0"', 'rpy="0 0 1.5707963"')
        desc = parse_urdf_subset(text)
        q = desc.body("tip").initial_pose.rotation
        expected = UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), math.pi / 2)
        assert q.angle_to(expected) <= 1e-6

    def test_unsupported_element(self):
        text = TWO_LINK_URDF.replace(
            '<axis xyz="0 0 1"/>', '<axis xyz="0 0 1"/><dynamics damping="1"/>'
        )
        with pytest.raises(UnsupportedFeatureError, match="dynamics"):
            parse_urdf_subset(text)

    def test_unsupported_attribute(self):
        text = TWO_LINK_URDF.replace('<link name="tip"/>', '<link name="tip" mass="2"/>')
        with pytest.raises(UnsupportedFeatureError):
            parse_urdf_subset(text)

    def test_dual_format_equivalence(self):
        adf = parse_adf(fixture_path("galen25.adf").read_text())
        urdf = parse_urdf_subset(fixture_path("galen25.urdf").read_text())
        assert adf == urdf

    def test_xml_syntax_error(self):
        with pytest.raises(SceneSyntaxError):
            parse_urdf_subset("<robot name='x'><link name='a'>")


class TestRoundTrip:
    def test_adf_round_trip_identity(self):
        desc = parse_adf(fixture_path("galen25.adf").read_text())
        again = parse_adf(serialize_adf(desc))
        assert again.name == desc.name
        assert len(again.bodies) == len(desc.bodies)
        for a, b in zip(again.bodies, desc.bodies):
            assert (a.name, a.mesh_path, a.parent, a.mass) == (
                b.name, b.mesh_path, b.parent, b.mass)
            assert a.initial_pose.rotation.angle_to(b.initial_pose.rotation) <= 1e-9
            assert (a.initial_pose.translation - b.initial_pose.translation).norm() <= 1e-9
        for a, b in zip(again.joints, desc.joints):
            assert (a.name, a.kind, a.parent, a.child, a.limits) == (
                b.name, b.kind, b.parent, b.child, b.limits)
            assert (a.axis - b.axis).norm() <= 1e-12

    def test_serialize_is_stable(self):
        desc = parse_adf(fixture_path("galen25.adf").read_text())
        once = serialize_adf(desc)
        assert serialize_adf(parse_adf(once)) == once


class TestMetadata:
    def test_single_body(self):
        meta = scene.to_metadata(parse_adf(MINIMAL_ADF))
        assert meta.bodies == (("base", "meshes/base.stl"),)

    def test_galen25_order_preserved(self):
        desc = parse_adf(fixture_path("galen25.adf").read_text())
        meta = scene.to_metadata(desc)
        assert len(meta.bodies) == 25
        assert [n for n, _ in meta.bodies] == [b.name for b in desc.bodies]

    def test_publish_stores_param_and_latches(self):
        bus = Bus()
        desc = parse_adf(MINIMAL_ADF)
        scene.publish_metadata(bus, desc)
        stored = bus.param_get(scene.METADATA_PARAM)
        assert scene.metadata_from_json(stored) == scene.to_metadata(desc)
        late = bus.subscribe(scene.METADATA_TOPIC)
        env = late.receive(timeout=0.5)
        assert env is not None and env.body["scene"] == "tiny"

    def test_republish_last_write_wins(self):
        bus = Bus()
        scene.publish_metadata(bus, parse_adf(MINIMAL_ADF))
        scene.publish_metadata(bus, parse_adf(MINIMAL_ADF.replace("tiny", "tiny2")))
        stored = scene.metadata_from_json(bus.param_get(scene.METADATA_PARAM))
        assert stored.scene == "tiny2"


class TestDescriptionJson:
    def test_round_trip(self):
        desc = parse_adf(fixture_path("galen25.adf").read_text())
        assert scene.scene_from_json(scene.scene_to_json(desc)) == desc
