import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinbridge.transforms import (
    RigidTransform,
    UnitQuaternion,
    Vec3,
    compose,
    interpolate,
    invert,
    transform_point,
)

ROT90Z = UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), math.pi / 2)


def to_matrix44(t: RigidTransform) -> np.ndarray:
    """Independent homogeneous-matrix oracle for transform operations."""
    m = np.eye(4)
    m[:3, :3] = np.array(t.rotation.to_matrix())
    m[:3, 3] = t.translation.to_list()
    return m


def from_matrix44(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return m[:3, :3], m[:3, 3]


def assert_close(a: RigidTransform, b: RigidTransform, tol: float = 1e-9) -> None:
    assert a.rotation.angle_to(b.rotation) <= tol
    assert (a.translation - b.translation).norm() <= tol


def random_transform(rng: np.random.Generator) -> RigidTransform:
    axis = rng.normal(size=3)
    angle = rng.uniform(-math.pi, math.pi)
    q = UnitQuaternion.from_axis_angle(Vec3.from_seq(axis), angle)
    return RigidTransform(q, Vec3.from_seq(rng.uniform(-2, 2, size=3)))


finite_floats = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@st.composite
def quaternions_st(draw):
    ax = Vec3(draw(finite_floats) + 0.1, draw(finite_floats), draw(finite_floats))
    angle = draw(st.floats(min_value=-math.pi, max_value=math.pi))
    return UnitQuaternion.from_axis_angle(ax, angle)


@st.composite
def transforms_st(draw):
    q = draw(quaternions_st())
    t = Vec3(draw(finite_floats), draw(finite_floats), draw(finite_floats))
    return RigidTransform(q, t)


class TestCompose:
    def test_identity_left(self):
        t = RigidTransform(ROT90Z, Vec3(1, 2, 3))
        assert_close(compose(RigidTransform.identity(), t), t, tol=0)

    def test_rotation_addition(self):
        half = RigidTransform(ROT90Z, Vec3())
        full = compose(half, half)
        expected = UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), math.pi)
        assert full.rotation.angle_to(expected) <= 1e-9
        assert full.translation.norm() <= 1e-9

    def test_pure_translation_sum(self):
        a = RigidTransform(translation=Vec3(1, 0, 0))
        b = RigidTransform(translation=Vec3(0, 2, 0))
        assert_close(compose(a, b), RigidTransform(translation=Vec3(1, 2, 0)))

    def test_matches_point_application(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a, b = random_transform(rng), random_transform(rng)
            p = Vec3.from_seq(rng.uniform(-3, 3, size=3))
            lhs = transform_point(compose(a, b), p)
            rhs = transform_point(a, transform_point(b, p))
            assert (lhs - rhs).norm() <= 1e-9


class TestInvert:
    def test_identity(self):
        assert_close(invert(RigidTransform.identity()), RigidTransform.identity(), tol=0)

    def test_translation_sign_flip(self):
        t = RigidTransform(translation=Vec3(1, 2, 3))
        assert_close(invert(t), RigidTransform(translation=Vec3(-1, -2, -3)))

    def test_against_matrix_inverse_oracle(self):
        # rotate 90 deg about z with translation (1, 0, 0)
        t = RigidTransform(ROT90Z, Vec3(1, 0, 0))
        inv = invert(t)
        expected_rot, expected_tr = from_matrix44(np.linalg.inv(to_matrix44(t)))
        assert np.allclose(np.array(inv.rotation.to_matrix()), expected_rot, atol=1e-9)
        assert np.allclose(np.array(inv.translation.to_list()), expected_tr, atol=1e-9)
        # worked by hand: the closed form is rotate -90 about z, translation (0, 1, 0)
        assert_close(
            inv,
            RigidTransform(UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), -math.pi / 2), Vec3(0, 1, 0)),
        )

    def test_randomized_matrix_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            t = random_transform(rng)
            inv = invert(t)
            expected_rot, expected_tr = from_matrix44(np.linalg.inv(to_matrix44(t)))
            assert np.allclose(np.array(inv.rotation.to_matrix()), expected_rot, atol=1e-9)
            assert np.allclose(np.array(inv.translation.to_list()), expected_tr, atol=1e-9)


class TestInterpolate:
    def test_endpoints(self):
        rng = np.random.default_rng(3)
        a, b = random_transform(rng), random_transform(rng)
        assert interpolate(a, b, 0.0) == a
        assert interpolate(a, b, 1.0) == b

    def test_slerp_midpoint(self):
        a = RigidTransform.identity()
        b = RigidTransform(ROT90Z, Vec3())
        mid = interpolate(a, b, 0.5)
        expected = UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), math.pi / 4)
        assert mid.rotation.angle_to(expected) <= 1e-9

    def test_translation_lerp(self):
        a = RigidTransform()
        b = RigidTransform(translation=Vec3(2, 0, 0))
        assert_close(interpolate(a, b, 0.25), RigidTransform(translation=Vec3(0.5, 0, 0)))

    @pytest.mark.parametrize("alpha", [-0.1, 1.1, 2.0, -1e9])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(ValueError):
            interpolate(RigidTransform(), RigidTransform(), alpha)


class TestTransformPoint:
    def test_identity(self):
        p = Vec3(1, 2, 3)
        assert transform_point(RigidTransform.identity(), p) == p

    def test_axis_rotation(self):
        t = RigidTransform(ROT90Z, Vec3())
        out = transform_point(t, Vec3(1, 0, 0))
        assert (out - Vec3(0, 1, 0)).norm() <= 1e-9

    def test_homogeneous_matrix_oracle(self):
        t = RigidTransform(ROT90Z, Vec3(1, 0, 0))
        expected = to_matrix44(t) @ np.array([1, 0, 0, 1.0])
        out = transform_point(t, Vec3(1, 0, 0))
        assert np.allclose(np.array(out.to_list()), expected[:3], atol=1e-9)
        assert (out - Vec3(1, 1, 0)).norm() <= 1e-9


class TestSerialization:
    def test_round_trip(self):
        t = RigidTransform(ROT90Z, Vec3(0.1, -0.2, 0.3))
        assert RigidTransform.from_list(t.to_list()) == t

    def test_ordering(self):
        vals = RigidTransform(translation=Vec3(1, 2, 3)).to_list()
        assert vals == [1.0, 2.0, 3.0, 1.0, 0.0, 0.0, 0.0]

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            RigidTransform.from_list([1, 2, 3])


class TestMatrixConversion:
    def test_identity(self):
        eye = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
        assert UnitQuaternion.from_matrix(eye).angle_to(
            UnitQuaternion.identity()) == 0.0

    @settings(max_examples=150)
    @given(quaternions_st())
    def test_round_trip_hits_all_pivots(self, q):
        back = UnitQuaternion.from_matrix(q.to_matrix())
        assert back.angle_to(q) <= 1e-9


class TestProperties:
    @settings(max_examples=100)
    @given(transforms_st(), transforms_st(), transforms_st())
    def test_associativity(self, a, b, c):
        lhs = compose(a, compose(b, c))
        rhs = compose(compose(a, b), c)
        assert lhs.rotation.angle_to(rhs.rotation) <= 1e-9
        assert (lhs.translation - rhs.translation).norm() <= 1e-9

    @settings(max_examples=100)
    @given(transforms_st())
    def test_inverse_composes_to_identity(self, t):
        assert_close(compose(invert(t), t), RigidTransform.identity())
        assert_close(compose(t, invert(t)), RigidTransform.identity())

    @settings(max_examples=100)
    @given(transforms_st(), transforms_st())
    def test_unit_norm_preserved(self, a, b):
        assert abs(compose(a, b).rotation.norm() - 1.0) <= 1e-9
        assert abs(invert(a).rotation.norm() - 1.0) <= 1e-9
        assert abs(interpolate(a, b, 0.37).rotation.norm() - 1.0) <= 1e-9

    @settings(max_examples=100)
    @given(transforms_st(), st.tuples(finite_floats, finite_floats, finite_floats),
           st.tuples(finite_floats, finite_floats, finite_floats))
    def test_isometry(self, t, p, q):
        pv, qv = Vec3(*p), Vec3(*q)
        before = (pv - qv).norm()
        after = (transform_point(t, pv) - transform_point(t, qv)).norm()
        assert abs(before - after) <= 1e-9

    @settings(max_examples=100)
    @given(transforms_st(), transforms_st(), st.floats(min_value=0, max_value=1))
    def test_slerp_antipodal_invariance(self, a, b, alpha):
        q = b.rotation
        b_neg = RigidTransform(
            UnitQuaternion(-q.w, -q.x, -q.y, -q.z), b.translation
        )
        lhs = interpolate(a, b, alpha)
        rhs = interpolate(a, b_neg, alpha)
        assert lhs.rotation.angle_to(rhs.rotation) <= 1e-9


class TestRpy:
    def test_round_trip(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            rpy = rng.uniform(-math.pi + 0.01, math.pi - 0.01, size=3)
            rpy[1] = rng.uniform(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
            q = UnitQuaternion.from_rpy(*rpy)
            back = UnitQuaternion.from_rpy(*q.to_rpy())
            assert q.angle_to(back) <= 1e-9

    def test_yaw_only(self):
        q = UnitQuaternion.from_rpy(0, 0, 1.5707963)
        assert q.angle_to(UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), 1.5707963)) <= 1e-12
