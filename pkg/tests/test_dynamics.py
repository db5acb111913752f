import numpy as np
import pytest
from scipy.linalg import expm

from crbimpact import dynamics
from crbimpact.model import ChainModel, JointSpec, LinkInertia
from crbimpact.spatial import Transform, adjoint_twist, skew

from conftest import (
    EPS_INERTIA,
    EPS_MASS,
    make_gantry,
    make_rod_on_pivot,
    random_chain,
    sample_nonsingular_q,
)


def scale_model(model, s):
    links = tuple(
        LinkInertia(l.name, l.mass * s, l.com, l.rot_inertia * s) for l in model.links
    )
    return ChainModel(model.name, links, model.joints, model.contact_link,
                      model.contact_offset, model.gravity)


def naive_fk_contact(model, q):
    """Independent oracle: chain of homogeneous matrices, matrix-exponential
    joint motions."""
    t = np.eye(4)
    for joint, qi in zip(model.joints, q):
        to = np.eye(4)
        to[:3, :3] = joint.origin.rotation
        to[:3, 3] = joint.origin.translation
        tm = np.eye(4)
        if joint.kind == "revolute":
            tm[:3, :3] = expm(skew(joint.axis) * qi)
        else:
            tm[:3, 3] = joint.axis * qi
        t = t @ to @ tm
    return (t @ np.array([*model.contact_offset, 1.0]))[:3]


def kinetic_energy_by_bodies(model, q, qd):
    """Independent oracle: sum per-body translational + rotational energy."""
    frames, _ = dynamics.forward_kinematics(model, q)
    geom = dynamics.chain_geometry(model, q)
    total = 0.0
    for i, link in enumerate(model.links):
        omega = np.zeros(3)
        com_w = frames[i].apply(link.com)
        v = np.zeros(3)
        for j in range(i + 1):
            z = geom.joint_axes[j]
            if model.joints[j].kind == "revolute":
                omega = omega + z * qd[j]
                v = v + np.cross(z, com_w - geom.joint_origins[j]) * qd[j]
            else:
                v = v + z * qd[j]
        icw = frames[i].rotation @ link.rot_inertia @ frames[i].rotation.T
        total += 0.5 * link.mass * v @ v + 0.5 * omega @ icw @ omega
    return total


def iim_crb_two_path(model, q, rotation=None):
    """Corner block of the inverse of the adjoint-transformed composite
    spatial inertia (independent of the closed form)."""
    ci = dynamics.centroidal_inertia(model, q)
    geom = dynamics.chain_geometry(model, q)
    i_c = np.zeros((6, 6))
    i_c[:3, :3] = ci.mass * np.eye(3)
    i_c[3:, 3:] = ci.rot_inertia
    r_cp = np.eye(3) if rotation is None else np.asarray(rotation).T
    g_cp = Transform(r_cp, geom.contact_point - ci.com)
    ad = adjoint_twist(g_cp)
    i_p = ad.T @ i_c @ ad
    return np.linalg.inv(i_p)[:3, :3]


# --------------------------------------------------------------------------
# forward kinematics


def test_fk_zero_config_is_origin_product():
    rng = np.random.default_rng(20)
    model = random_chain(rng, dof=4)
    frames, contact = dynamics.forward_kinematics(model, np.zeros(4))
    t = Transform.identity()
    for joint in model.joints:
        t = t.compose(joint.origin)
    assert np.allclose(frames[-1].rotation, t.rotation, atol=1e-14)
    assert np.allclose(frames[-1].translation, t.translation, atol=1e-14)
    assert np.allclose(contact.translation, t.apply(model.contact_offset), atol=1e-14)


def test_fk_quarter_turn():
    link = LinkInertia("l", 1.0, (0.25, 0, 0), np.eye(3) * 1e-3)
    joint = JointSpec("j", "revolute", Transform.identity(), (0, 0, 1))
    model = ChainModel("one", (link,), (joint,), 0, (0.5, 0, 0), gravity=(0, 0, 0))
    _, contact = dynamics.forward_kinematics(model, [np.pi / 2])
    assert np.allclose(contact.translation, [0, 0.5, 0], atol=1e-15)


def test_fk_matches_naive_matrix_chain():
    rng = np.random.default_rng(21)
    for _ in range(30):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        _, contact = dynamics.forward_kinematics(model, q)
        assert np.abs(contact.translation - naive_fk_contact(model, q)).max() <= 1e-12


def test_fk_dimension_mismatch():
    rng = np.random.default_rng(22)
    model = random_chain(rng, dof=3)
    with pytest.raises(ValueError):
        dynamics.forward_kinematics(model, [0.0, 0.0])


# --------------------------------------------------------------------------
# Jacobian


def test_jacobian_gantry_identity():
    jac = dynamics.point_jacobian_linear(make_gantry(), np.zeros(3))
    assert np.abs(jac - np.eye(3)).max() <= 1e-12


def test_jacobian_single_revolute_lever():
    link = LinkInertia("l", 1.0, (0.4, 0, 0), np.eye(3) * 1e-3)
    joint = JointSpec("j", "revolute", Transform.identity(), (0, 0, 1))
    model = ChainModel("one", (link,), (joint,), 0, (0.8, 0, 0), gravity=(0, 0, 0))
    jac = dynamics.point_jacobian_linear(model, [0.0])
    assert np.allclose(jac[:, 0], [0, 0.8, 0], atol=1e-15)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(23)
    h = 1e-6
    for _ in range(20):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        jac = dynamics.point_jacobian_linear(model, q)
        fd = np.zeros_like(jac)
        for j in range(model.dof):
            dq = np.zeros(model.dof)
            dq[j] = h
            _, plus = dynamics.forward_kinematics(model, q + dq)
            _, minus = dynamics.forward_kinematics(model, q - dq)
            fd[:, j] = (plus.translation - minus.translation) / (2 * h)
        assert np.abs(jac - fd).max() <= 1e-6


# --------------------------------------------------------------------------
# joint-space inertia matrix


def test_jsim_point_mass_pendulum():
    m, l = 1.8, 0.6
    link = LinkInertia("l", m, (l, 0, 0), EPS_INERTIA)
    joint = JointSpec("j", "revolute", Transform.identity(), (0, 0, 1))
    model = ChainModel("pend", (link,), (joint,), 0, (l, 0, 0), gravity=(0, 0, 0))
    mass = dynamics.jsim(model, [0.3])
    assert mass.matrix[0, 0] == pytest.approx(m * l * l, rel=1e-9)


def test_jsim_kinetic_energy_identity():
    rng = np.random.default_rng(24)
    for _ in range(25):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        qd = rng.normal(size=model.dof)
        mass = dynamics.jsim(model, q)
        ke_matrix = 0.5 * qd @ mass.matrix @ qd
        ke_bodies = kinetic_energy_by_bodies(model, q, qd)
        assert ke_matrix == pytest.approx(ke_bodies, rel=1e-10)


def test_jsim_symmetric_positive_definite_sweep():
    rng = np.random.default_rng(25)
    for _ in range(1000):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        m = dynamics.jsim(model, q).matrix
        assert np.abs(m - m.T).max() <= 1e-10 * np.linalg.norm(m)
        assert np.linalg.eigvalsh(m)[0] > 0.0


def test_condition_number_utility():
    assert dynamics.condition_number(np.diag([1.0, 4.0])) == pytest.approx(4.0)
    assert dynamics.condition_number(np.eye(5)) == pytest.approx(1.0)


def test_condition_number_scalar_model():
    model = make_rod_on_pivot()
    assert dynamics.jsim(model, [0.7]).condition_number == pytest.approx(1.0)


# --------------------------------------------------------------------------
# centroidal inertia


def test_centroidal_single_link_is_own_inertia():
    rng = np.random.default_rng(26)
    model = random_chain(rng, dof=3)
    single = ChainModel(
        "one", (model.links[0],), (model.joints[0],), 0, (0.1, 0, 0), gravity=(0, 0, 0)
    )
    q = [0.4]
    frames, _ = dynamics.forward_kinematics(single, q)
    ci = dynamics.centroidal_inertia(single, q)
    assert ci.mass == pytest.approx(single.links[0].mass)
    assert np.allclose(ci.com, frames[0].apply(single.links[0].com), atol=1e-14)
    expected = frames[0].rotation @ single.links[0].rot_inertia @ frames[0].rotation.T
    assert np.abs(ci.rot_inertia - expected).max() <= 1e-12


def test_centroidal_dumbbell():
    a, m = 0.35, 1.2
    links = (
        LinkInertia("a", m, (a, 0, 0), EPS_INERTIA),
        LinkInertia("b", m, (-a, 0, 0), EPS_INERTIA),
    )
    joints = (
        JointSpec("j1", "revolute", Transform.identity(), (0, 0, 1)),
        JointSpec("j2", "revolute", Transform.identity(), (0, 0, 1)),
    )
    model = ChainModel("dumbbell", links, joints, 1, (0, 0, 0), gravity=(0, 0, 0))
    ci = dynamics.centroidal_inertia(model, [0.0, 0.0])
    assert np.abs(ci.com).max() <= 1e-15
    assert ci.rot_inertia[2, 2] == pytest.approx(2 * m * a * a, rel=1e-9)


def test_centroidal_parallel_axis_oracle():
    rng = np.random.default_rng(27)
    for _ in range(20):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        ci = dynamics.centroidal_inertia(model, q)
        frames, _ = dynamics.forward_kinematics(model, q)
        oracle = np.zeros((3, 3))
        for basis in np.eye(3):
            col = np.zeros(3)
            for i, link in enumerate(model.links):
                icw = frames[i].rotation @ link.rot_inertia @ frames[i].rotation.T
                d = frames[i].apply(link.com) - ci.com
                col += icw @ basis + link.mass * np.cross(d, np.cross(basis, d))
            oracle += np.outer(col, basis)
        assert np.abs(ci.rot_inertia - oracle).max() <= 1e-10 * max(1.0, np.linalg.norm(oracle))


# --------------------------------------------------------------------------
# inverse inertia matrices


def test_iim_crb_contact_at_com():
    m = 2.0
    model = make_gantry(mass=m, com=(0.05, -0.02, 0.01))
    w = dynamics.iim_crb(model, np.zeros(3))
    assert np.abs(w.matrix - np.eye(3) / m).max() <= 1e-9


def test_iim_crb_rod_tip_effective_mass():
    model = make_rod_on_pivot()
    w = dynamics.iim_crb(model, [0.0])
    # transverse directions see one quarter of the rod mass
    assert w.matrix[1, 1] == pytest.approx(4.0, abs=1e-9)
    assert w.matrix[2, 2] == pytest.approx(4.0, abs=1e-9)
    assert w.matrix[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_iim_crb_two_path_equality():
    rng = np.random.default_rng(28)
    for _ in range(50):
        model = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, model.dof)
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        from crbimpact.impact import contact_frame

        rotation = contact_frame(normal).rotation
        w = dynamics.iim_crb(model, q, rotation)
        oracle = iim_crb_two_path(model, q, rotation)
        assert np.abs(w.matrix - oracle).max() <= 1e-9
        assert np.linalg.eigvalsh(w.matrix)[0] > 0.0  # PD at any configuration


def test_iim_gm_gantry():
    m = 2.0
    model = make_gantry(mass=m, com=(0.03, 0.01, -0.04), contact_offset=(0.2, 0.1, 0.0))
    w = dynamics.iim_gm(model, np.zeros(3))
    assert np.abs(w.matrix - np.eye(3) / m).max() <= 1e-9
    assert not w.singular


def test_iim_gm_pendulum_flagged_singular():
    model = make_rod_on_pivot()
    w = dynamics.iim_gm(model, [0.2])
    assert w.singular
    eig = np.linalg.eigvalsh(w.matrix)
    assert eig[0] <= 1e-10 * np.trace(w.matrix)


def test_iim_gm_matches_column_solve_oracle():
    rng = np.random.default_rng(29)
    for _ in range(20):
        model = random_chain(rng, dof=7)
        q = sample_nonsingular_q(model, rng)
        w = dynamics.iim_gm(model, q)
        mass = dynamics.jsim(model, q).matrix
        jac = dynamics.point_jacobian_linear(model, q)
        cols = [np.linalg.solve(mass, jac.T[:, k]) for k in range(3)]
        oracle = jac @ np.stack(cols, axis=1)
        assert np.abs(w.matrix - oracle).max() <= 1e-9
        assert not w.singular


def test_uniform_mass_scaling_laws():
    rng = np.random.default_rng(30)
    for s in (1e-2, 1e2):
        model = random_chain(rng, dof=5)
        q = sample_nonsingular_q(model, rng)
        scaled = scale_model(model, s)
        m0 = dynamics.jsim(model, q).matrix
        m1 = dynamics.jsim(scaled, q).matrix
        assert np.abs(m1 - s * m0).max() <= 1e-10 * np.linalg.norm(s * m0)
        for fn in (dynamics.iim_crb, dynamics.iim_gm):
            w0 = fn(model, q).matrix
            w1 = fn(scaled, q).matrix
            assert np.abs(w1 - w0 / s).max() <= 1e-10 * np.linalg.norm(w0 / s)


def test_arm7_condition_number_range(arm7):
    rng = np.random.default_rng(31)
    for _ in range(100):
        q = rng.uniform(-np.pi, np.pi, 7)
        kappa = dynamics.jsim(arm7, q).condition_number
        assert 1e2 <= kappa <= 1e5
