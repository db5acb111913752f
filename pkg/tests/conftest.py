"""Shared fixtures: bundled models and analytic chain builders."""

from pathlib import Path

import numpy as np
import pytest

from crbimpact.model import ChainModel, JointSpec, LinkInertia, load_model
from crbimpact.spatial import Transform, skew

REPO_ROOT = Path(__file__).resolve().parents[1]
MODELS_DIR = REPO_ROOT / "models"
SCENARIOS_DIR = REPO_ROOT / "scenarios"

# near-massless carrier links for idealized mounting fixtures
EPS_MASS = 1e-12
EPS_INERTIA = np.eye(3) * 1e-14


@pytest.fixture(scope="session")
def arm7():
    return load_model(MODELS_DIR / "arm7.model")


@pytest.fixture(scope="session")
def rod3():
    return load_model(MODELS_DIR / "rod3.model")


def make_gantry(mass=2.0, com=(0.0, 0.0, 0.0), inertia=None, contact_offset=None):
    """Orthogonal 3-prismatic stage carrying one rigid body.

    Carrier links get negligible mass so J = E and M = mass * E hold to
    far better than test tolerances. Contact defaults to the body COM.
    """
    if inertia is None:
        inertia = np.eye(3) * 0.002
    if contact_offset is None:
        contact_offset = com
    axes = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    joints = [
        JointSpec(f"p{i}", "prismatic", Transform.identity(), ax)
        for i, ax in enumerate(axes)
    ]
    links = [
        LinkInertia("carrier_x", EPS_MASS, np.zeros(3), EPS_INERTIA),
        LinkInertia("carrier_y", EPS_MASS, np.zeros(3), EPS_INERTIA),
        LinkInertia("body", mass, com, inertia),
    ]
    return ChainModel("gantry", links, joints, 2, contact_offset, gravity=(0, 0, 0))


def make_six_dof_mount(mass=3.0, com=(0.02, -0.01, 0.03), inertia=None, contact_offset=(0.1, 0.05, -0.04)):
    """Full-mobility mounting: 3 prismatic + 3 revolute axes carrying one body.

    With negligible carrier masses the body responds to contact impulses
    exactly like a free rigid body, so the composite-rigid-body and
    generalized-momentum inverse inertias coincide.
    """
    if inertia is None:
        inertia = np.diag([0.04, 0.05, 0.03])
    joints = [
        JointSpec("px", "prismatic", Transform.identity(), (1, 0, 0)),
        JointSpec("py", "prismatic", Transform.identity(), (0, 1, 0)),
        JointSpec("pz", "prismatic", Transform.identity(), (0, 0, 1)),
        JointSpec("rx", "revolute", Transform.identity(), (1, 0, 0)),
        JointSpec("ry", "revolute", Transform.identity(), (0, 1, 0)),
        JointSpec("rz", "revolute", Transform.identity(), (0, 0, 1)),
    ]
    links = [LinkInertia(f"carrier{i}", EPS_MASS, np.zeros(3), EPS_INERTIA) for i in range(5)]
    links.append(LinkInertia("body", mass, com, inertia))
    return ChainModel("mount6", links, tuple(joints), 5, contact_offset, gravity=(0, 0, 0))


def make_rod_on_pivot():
    """Uniform unit rod (m=1, l=1) on one revolute joint, contact at the tip."""
    rod = LinkInertia("rod", 1.0, (0.5, 0.0, 0.0), np.diag([1e-4, 1.0 / 12.0, 1.0 / 12.0]))
    joint = JointSpec("pivot", "revolute", Transform.identity(), (0, 0, 1))
    return ChainModel("rodtip", (rod,), (joint,), 0, (1.0, 0.0, 0.0), gravity=(0, 0, 0))


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, np.pi)
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def random_transform(rng):
    return Transform(random_rotation(rng), rng.uniform(-0.5, 0.5, 3))


def random_box_inertia(rng, mass):
    """Physically consistent inertia: a random solid box, randomly oriented."""
    a, b, c = rng.uniform(0.05, 0.4, 3)
    principal = mass / 12.0 * np.array([b * b + c * c, a * a + c * c, a * a + b * b])
    rot = random_rotation(rng)
    return rot @ np.diag(principal) @ rot.T


def random_chain(rng, dof=None, allow_prismatic=True):
    """Random valid serial chain for property sweeps."""
    if dof is None:
        dof = int(rng.integers(3, 8))
    joints = []
    links = []
    for i in range(dof):
        prismatic = allow_prismatic and rng.random() < 0.15
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        origin = Transform(random_rotation(rng), rng.uniform(-0.05, 0.25, 3))
        joints.append(JointSpec(f"j{i}", "prismatic" if prismatic else "revolute", origin, axis))
        mass = rng.uniform(0.5, 3.0)
        com = rng.uniform(-0.1, 0.2, 3)
        links.append(LinkInertia(f"l{i}", mass, com, random_box_inertia(rng, mass)))
    return ChainModel(
        "random", tuple(links), tuple(joints), dof - 1, rng.uniform(-0.1, 0.2, 3),
        gravity=(0, 0, 0),
    )


def sample_nonsingular_q(model, rng, min_rel_sv=1e-2, max_tries=50):
    """Random configuration whose contact Jacobian keeps rank 3."""
    from crbimpact import dynamics

    for _ in range(max_tries):
        q = rng.uniform(-np.pi, np.pi, model.dof)
        jac = dynamics.point_jacobian_linear(model, q)
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[-1] > min_rel_sv * sv[0] and sv[-1] > 1e-4:
            return q
    raise RuntimeError("no well-conditioned configuration found")
