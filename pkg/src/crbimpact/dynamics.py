"""Chain kinematics and inertia computations.

All quantities are expressed in the inertial frame unless a contact
rotation is passed in; impact-level code works in the contact frame and
re-expresses via that rotation. The joint-space inertia matrix comes
from the composite-rigid-body recursion; its inverse is never formed,
callers solve against a Cholesky factorization instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import PRISMATIC, REVOLUTE, ChainModel
from .spatial import Transform, skew

# scale-invariant rank threshold: min eigenvalue <= RANK_EPS * trace
RANK_EPS = 1e-10


@dataclass(frozen=True)
class JointState:
    """Joint positions and velocities, lengths validated against each other."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        qd = np.array(self.qd, dtype=float).reshape(-1)
        if q.shape != qd.shape:
            raise ValueError(f"q has length {q.size} but qd has length {qd.size}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("non-finite joint state")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)


@dataclass(frozen=True)
class Jsim:
    """Joint-space inertia matrix with its 2-norm condition number."""

    matrix: np.ndarray
    condition_number: float


@dataclass(frozen=True)
class Iim:
    """3x3 inverse inertia at the contact point: impulse -> velocity jump.

    flavor 'crb' treats the chain as one frozen rigid body; flavor 'gm'
    is the joint-space (generalized-momentum) mapping J M^-1 J^T.
    """

    matrix: np.ndarray
    flavor: str
    singular: bool = False


@dataclass(frozen=True)
class CentroidalInertia:
    """Whole-chain mass, COM, and rotational inertia about the COM.

    The centroidal frame is aligned with the inertial frame; only the
    COM position carries configuration dependence.
    """

    mass: float
    com: np.ndarray
    rot_inertia: np.ndarray


@dataclass(frozen=True)
class ChainGeometry:
    """Frames and joint data at one configuration (internal work product)."""

    link_rotations: np.ndarray  # (D, 3, 3)
    link_origins: np.ndarray  # (D, 3)
    joint_origins: np.ndarray  # (D, 3) joint placement points, world
    joint_axes: np.ndarray  # (D, 3) unit axes, world
    contact_point: np.ndarray  # (3,)
    contact_rotation: np.ndarray  # (3, 3) world rotation of the contact link


def _check_q(model: ChainModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != model.dof:
        raise ValueError(f"expected {model.dof} joint values, got {q.size}")
    return q


def _rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def chain_geometry(model: ChainModel, q) -> ChainGeometry:
    """Forward kinematics flattened to arrays; the fast path for dynamics."""
    q = _check_q(model, q)
    dof = model.dof
    rots = np.empty((dof, 3, 3))
    origins = np.empty((dof, 3))
    joint_origins = np.empty((dof, 3))
    axes = np.empty((dof, 3))
    r_parent = np.eye(3)
    p_parent = np.zeros(3)
    for i, joint in enumerate(model.joints):
        r_pre = r_parent @ joint.origin.rotation
        p_pre = r_parent @ joint.origin.translation + p_parent
        z = r_pre @ joint.axis
        joint_origins[i] = p_pre
        axes[i] = z
        if joint.kind == REVOLUTE:
            r_link = r_pre @ _rodrigues(joint.axis, q[i])
            p_link = p_pre
        elif joint.kind == PRISMATIC:
            r_link = r_pre
            p_link = p_pre + z * q[i]
        else:
            raise ValueError(f"unknown joint kind '{joint.kind}'")
        rots[i] = r_link
        origins[i] = p_link
        r_parent, p_parent = r_link, p_link
    cl = model.contact_link
    contact_point = rots[cl] @ model.contact_offset + origins[cl]
    return ChainGeometry(rots, origins, joint_origins, axes, contact_point, rots[cl].copy())


def forward_kinematics(model: ChainModel, q) -> tuple[list[Transform], Transform]:
    """Link frames (one per link) plus the contact-point frame."""
    geom = chain_geometry(model, q)
    frames = [
        Transform(geom.link_rotations[i], geom.link_origins[i]) for i in range(model.dof)
    ]
    contact = Transform(geom.contact_rotation, geom.contact_point)
    return frames, contact


def point_jacobian_linear(model: ChainModel, q, geom: ChainGeometry | None = None) -> np.ndarray:
    """3xD linear Jacobian of the contact point, inertial frame.

    Joints distal to the contact link contribute zero columns.
    """
    if geom is None:
        geom = chain_geometry(model, q)
    dof = model.dof
    jac = np.zeros((3, dof))
    for i, joint in enumerate(model.joints):
        if i > model.contact_link:
            break
        if joint.kind == REVOLUTE:
            jac[:, i] = np.cross(geom.joint_axes[i], geom.contact_point - geom.joint_origins[i])
        else:
            jac[:, i] = geom.joint_axes[i]
    return jac


def _motion_subspaces(model: ChainModel, geom: ChainGeometry) -> np.ndarray:
    """(D, 6) joint motion vectors referenced at the inertial origin."""
    s = np.empty((model.dof, 6))
    for i, joint in enumerate(model.joints):
        z = geom.joint_axes[i]
        if joint.kind == REVOLUTE:
            s[i, :3] = np.cross(geom.joint_origins[i], z)
            s[i, 3:] = z
        else:
            s[i, :3] = z
            s[i, 3:] = 0.0
    return s


def _spatial_inertias(model: ChainModel, geom: ChainGeometry) -> np.ndarray:
    """(D, 6, 6) per-link spatial inertias referenced at the inertial origin."""
    out = np.empty((model.dof, 6, 6))
    for i, link in enumerate(model.links):
        r = geom.link_rotations[i]
        c = r @ link.com + geom.link_origins[i]
        icw = r @ link.rot_inertia @ r.T
        cx = skew(c)
        m = link.mass
        out[i, :3, :3] = m * np.eye(3)
        out[i, :3, 3:] = -m * cx
        out[i, 3:, :3] = m * cx
        out[i, 3:, 3:] = icw - m * (cx @ cx)
    return out


def condition_number(matrix) -> float:
    """2-norm condition number (ratio of extreme singular values)."""
    sv = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if sv[-1] == 0.0:
        return float("inf")
    return float(sv[0] / sv[-1])


def jsim(model: ChainModel, q, geom: ChainGeometry | None = None) -> Jsim:
    """Joint-space inertia matrix via the composite-rigid-body recursion."""
    if geom is None:
        geom = chain_geometry(model, q)
    dof = model.dof
    s = _motion_subspaces(model, geom)
    inertias = _spatial_inertias(model, geom)
    m = np.zeros((dof, dof))
    composite = np.zeros((6, 6))
    for i in range(dof - 1, -1, -1):
        composite += inertias[i]
        f = composite @ s[i]
        for j in range(i + 1):
            m[i, j] = s[j] @ f
            m[j, i] = m[i, j]
    m = 0.5 * (m + m.T)
    return Jsim(m, condition_number(m))


def jsim_factor(mass_matrix: np.ndarray):
    """Cholesky factorization of a JSIM for repeated solves."""
    return cho_factor(mass_matrix, lower=True)


def jsim_solve(factor, rhs: np.ndarray) -> np.ndarray:
    return cho_solve(factor, rhs)


def centroidal_inertia(
    model: ChainModel, q, geom: ChainGeometry | None = None
) -> CentroidalInertia:
    """Composite mass, COM, and rotational inertia of the frozen chain."""
    if geom is None:
        geom = chain_geometry(model, q)
    total = 0.0
    weighted = np.zeros(3)
    coms = np.empty((model.dof, 3))
    icws = np.empty((model.dof, 3, 3))
    for i, link in enumerate(model.links):
        r = geom.link_rotations[i]
        coms[i] = r @ link.com + geom.link_origins[i]
        icws[i] = r @ link.rot_inertia @ r.T
        total += link.mass
        weighted += link.mass * coms[i]
    com = weighted / total
    rot = np.zeros((3, 3))
    for i, link in enumerate(model.links):
        d = coms[i] - com
        rot += icws[i] + link.mass * (np.dot(d, d) * np.eye(3) - np.outer(d, d))
    rot = 0.5 * (rot + rot.T)
    return CentroidalInertia(total, com, rot)


def iim_crb(
    model: ChainModel,
    q,
    rotation: np.ndarray | None = None,
    geom: ChainGeometry | None = None,
) -> Iim:
    """Inverse inertia of the frozen chain at the contact point.

    ``rotation`` maps inertial to contact coordinates; identity keeps the
    result in inertial axes. Closed form: (1/m) E - R p^ I^-1 p^ R^T with
    p the contact point relative to the composite COM.
    """
    if geom is None:
        geom = chain_geometry(model, q)
    ci = centroidal_inertia(model, q, geom)
    p = skew(geom.contact_point - ci.com)
    w = np.eye(3) / ci.mass - p @ np.linalg.solve(ci.rot_inertia, p)
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=float)
        w = rotation @ w @ rotation.T
    w = 0.5 * (w + w.T)
    return Iim(w, "crb", singular=False)


def iim_gm(
    model: ChainModel,
    q,
    rotation: np.ndarray | None = None,
    geom: ChainGeometry | None = None,
    mass_matrix: np.ndarray | None = None,
) -> Iim:
    """Joint-space inverse inertia J M^-1 J^T at the contact point.

    Solved against the Cholesky factorization of M. The result is flagged
    singular when its smallest eigenvalue falls below RANK_EPS times the
    trace, which happens exactly when the contact Jacobian loses rank.
    """
    if geom is None:
        geom = chain_geometry(model, q)
    jac = point_jacobian_linear(model, q, geom)
    if rotation is not None:
        jac = np.asarray(rotation, dtype=float) @ jac
    if mass_matrix is None:
        mass_matrix = jsim(model, q, geom).matrix
    w = jac @ cho_solve(cho_factor(mass_matrix, lower=True), jac.T)
    w = 0.5 * (w + w.T)
    eig = np.linalg.eigvalsh(w)
    singular = bool(eig[0] <= RANK_EPS * np.trace(w))
    return Iim(w, "gm", singular=singular)
