import numpy as np
import pytest

from crbimpact.spatial import (
    Transform,
    Twist,
    adjoint_twist,
    adjoint_wrench,
    skew,
    spatial_cross_dual,
    spatial_cross_motion,
)

from conftest import random_rotation, random_transform


def test_skew_zero():
    assert np.array_equal(skew([0.0, 0.0, 0.0]), np.zeros((3, 3)))


def test_skew_unit_cross():
    assert np.allclose(skew([0, 0, 1]) @ [1, 0, 0], [0, 1, 0])


def test_skew_matches_cross_product():
    rng = np.random.default_rng(1)
    for _ in range(100):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.abs(skew(v) @ w - np.cross(v, w)).max() <= 1e-15 * max(1.0, np.abs(v).max() * np.abs(w).max())


def test_skew_antisymmetric():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = skew(rng.normal(size=3))
        assert np.abs(s + s.T).max() <= 1e-15


class TestTransform:
    def test_identity_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g = random_transform(rng)
            gi = g.compose(g.inverse())
            assert np.abs(gi.rotation - np.eye(3)).max() <= 1e-12
            assert np.abs(gi.translation).max() <= 1e-12

    def test_orthonormal_invariant(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            g = random_transform(rng)
            assert np.linalg.norm(g.rotation.T @ g.rotation - np.eye(3)) <= 1e-12
            assert abs(np.linalg.det(g.rotation) - 1.0) <= 1e-12

    def test_small_defect_is_projected(self):
        rng = np.random.default_rng(5)
        r = random_rotation(rng) + rng.normal(size=(3, 3)) * 1e-8
        g = Transform(r, np.zeros(3))
        assert np.linalg.norm(g.rotation.T @ g.rotation - np.eye(3)) <= 1e-12

    def test_large_defect_rejected(self):
        with pytest.raises(ValueError):
            Transform(np.eye(3) * 1.5, np.zeros(3))

    def test_reflection_rejected(self):
        with pytest.raises(ValueError):
            Transform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_from_rpy_single_axes(self):
        gx = Transform.from_rpy_xyz([np.pi / 2, 0, 0], [0, 0, 0])
        assert np.allclose(gx.apply([0, 1, 0]), [0, 0, 1], atol=1e-15)
        gz = Transform.from_rpy_xyz([0, 0, np.pi / 2], [0, 0, 0])
        assert np.allclose(gz.apply([1, 0, 0]), [0, 1, 0], atol=1e-15)


class TestAdjointTwist:
    def test_identity(self):
        assert np.allclose(adjoint_twist(Transform.identity()), np.eye(6))

    def test_pure_rotation_block_diagonal(self):
        rng = np.random.default_rng(6)
        r = random_rotation(rng)
        ad = adjoint_twist(Transform(r, np.zeros(3)))
        assert np.allclose(ad[:3, :3], r)
        assert np.allclose(ad[3:, 3:], r)
        assert np.allclose(ad[:3, 3:], 0.0)
        assert np.allclose(ad[3:, :3], 0.0)

    def test_group_homomorphism(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g1, g2 = random_transform(rng), random_transform(rng)
            lhs = adjoint_twist(g1.compose(g2))
            rhs = adjoint_twist(g1) @ adjoint_twist(g2)
            assert np.abs(lhs - rhs).max() <= 1e-12

    def test_inverse_law(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            g = random_transform(rng)
            lhs = np.linalg.inv(adjoint_twist(g))
            rhs = adjoint_twist(g.inverse())
            assert np.abs(lhs - rhs).max() <= 1e-12


class TestAdjointWrench:
    def test_identity(self):
        assert np.allclose(adjoint_wrench(Transform.identity()), np.eye(6))

    def test_lever_arm_moment(self):
        p = np.array([0.2, -0.1, 0.4])
        f = np.array([1.0, 2.0, -0.5])
        out = adjoint_wrench(Transform(np.eye(3), p)) @ np.concatenate([f, np.zeros(3)])
        assert np.allclose(out[:3], f, atol=1e-14)
        assert np.allclose(out[3:], np.cross(p, f), atol=1e-14)

    def test_power_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            g = random_transform(rng)
            wrench = rng.normal(size=6)
            twist = rng.normal(size=6)
            lhs = (adjoint_wrench(g) @ wrench) @ (adjoint_twist(g) @ twist)
            assert abs(lhs - wrench @ twist) <= 1e-12 * max(1.0, abs(wrench @ twist))


class TestSpatialCrossDual:
    def test_zero_twist(self):
        assert np.array_equal(spatial_cross_dual(np.zeros(6)), np.zeros((6, 6)))

    def test_pure_spin_gyroscopic_moment_vanishes(self):
        w = np.array([0.3, -0.2, 0.9])
        twist = Twist(np.zeros(3), w)
        bias = spatial_cross_dual(twist) @ np.concatenate([np.zeros(3), w])  # I_eq = E
        assert np.allclose(bias, 0.0, atol=1e-15)

    def test_negative_transpose_of_motion_cross(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            v = rng.normal(size=6)
            assert np.abs(spatial_cross_dual(v) + spatial_cross_motion(v).T).max() <= 1e-15

    def test_momentum_rate_of_spinning_offset_mass(self):
        # A point mass rotating about a fixed axis through the origin keeps a
        # constant spatial twist V = (0; w); the force sustaining the motion is
        # exactly the rate of change of spatial momentum, which must equal the
        # dual-cross bias V x* (I V). Oracle: central difference of h(t).
        m = 1.7
        w = np.array([0.4, -1.1, 0.8])
        r0 = np.array([0.3, 0.25, -0.1])

        def momentum(t):
            k = skew(w / np.linalg.norm(w))
            ang = np.linalg.norm(w) * t
            rot = np.eye(3) + np.sin(ang) * k + (1 - np.cos(ang)) * (k @ k)
            r = rot @ r0
            p = m * np.cross(w, r)
            return np.concatenate([p, np.cross(r, p)])

        dt = 1e-6
        dh_dt = (momentum(dt) - momentum(-dt)) / (2 * dt)
        bias = spatial_cross_dual(np.concatenate([np.zeros(3), w])) @ momentum(0.0)
        assert np.abs(dh_dt - bias).max() <= 1e-8
