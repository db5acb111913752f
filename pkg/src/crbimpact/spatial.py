"""Rigid transforms and 6D spatial operators.

Every 6-vector in this package stacks the linear part on top of the
angular part: twists are (v; w), wrenches are (f; m). Frames are named
and fixed by convention: O is the inertial frame, c the centroidal frame
of the composite chain, p the contact frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Orthonormality defects up to this size are repaired by polar projection;
# larger defects are rejected as data errors.
_PROJECT_TOL = 1e-6
_EXACT_TOL = 1e-12


def skew(v) -> np.ndarray:
    """3x3 antisymmetric matrix such that skew(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Validate a rotation matrix, polar-projecting away rounding defects."""
    defect = np.linalg.norm(rotation.T @ rotation - np.eye(3))
    if defect > _PROJECT_TOL:
        raise ValueError(f"rotation defect {defect:.3e} exceeds {_PROJECT_TOL:g}")
    if defect > _EXACT_TOL:
        u, _, vt = np.linalg.svd(rotation)
        rotation = u @ vt
    if np.linalg.det(rotation) < 0.0:
        raise ValueError("rotation has determinant -1 (reflection)")
    return rotation


@dataclass(frozen=True)
class Transform:
    """Rigid motion g = (R, p): x_parent = R @ x_child + p.

    ``compose`` chains child frames; ``inverse`` swaps the roles. The
    rotation is re-orthonormalized at construction so downstream algebra
    can assume R.T @ R == E to machine precision.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = _orthonormalize(np.array(self.rotation, dtype=float).reshape(3, 3))
        tr = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(tr)):
            raise ValueError("non-finite translation")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "Transform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rpy_xyz(cls, rpy, xyz) -> "Transform":
        """Build from intrinsic XYZ Euler angles (radians) and a translation."""
        r, p, y = (float(a) for a in rpy)
        cr, sr = np.cos(r), np.sin(r)
        cp, sp = np.cos(p), np.sin(p)
        cy, sy = np.cos(y), np.sin(y)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return cls(rx @ ry @ rz, xyz)

    def compose(self, other: "Transform") -> "Transform":
        return Transform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Transform":
        return Transform(self.rotation.T, -(self.rotation.T @ self.translation))

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation


@dataclass(frozen=True)
class Twist:
    """Body velocity (linear m/s; angular rad/s)."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", np.array(self.linear, dtype=float).reshape(3))
        object.__setattr__(self, "angular", np.array(self.angular, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.linear)) and np.all(np.isfinite(self.angular))):
            raise ValueError("non-finite twist")

    @classmethod
    def from_array(cls, arr) -> "Twist":
        arr = np.asarray(arr, dtype=float).reshape(6)
        return cls(arr[:3], arr[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])


@dataclass(frozen=True)
class Wrench:
    """Force/moment pair; also used for impulses (N·s, N·m·s)."""

    force: np.ndarray
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "force", np.array(self.force, dtype=float).reshape(3))
        object.__setattr__(self, "moment", np.array(self.moment, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.force)) and np.all(np.isfinite(self.moment))):
            raise ValueError("non-finite wrench")

    @classmethod
    def from_array(cls, arr) -> "Wrench":
        arr = np.asarray(arr, dtype=float).reshape(6)
        return cls(arr[:3], arr[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])


def adjoint_twist(g: Transform) -> np.ndarray:
    """6x6 map carrying twists from the child frame of g to its parent.

    Block form [[R, skew(p) R], [0, R]] in (linear; angular) ordering.
    It is a group homomorphism: Ad(g1 g2) = Ad(g1) Ad(g2).
    """
    r = g.rotation
    top = np.hstack([r, skew(g.translation) @ r])
    bottom = np.hstack([np.zeros((3, 3)), r])
    return np.vstack([top, bottom])


def adjoint_wrench(g: Transform) -> np.ndarray:
    """6x6 map carrying wrenches the same way adjoint_twist carries twists.

    Equals adjoint_twist(g.inverse()).T, which preserves the power pairing
    <wrench, twist> across frames.
    """
    return adjoint_twist(g.inverse()).T


def spatial_cross_dual(twist) -> np.ndarray:
    """Dual 6D cross operator acting on momenta/wrenches.

    For a body moving with twist V and carrying spatial momentum h, the
    gyroscopic bias wrench is spatial_cross_dual(V) @ h. Accepts a Twist
    or any 6-array in (linear; angular) order.
    """
    if isinstance(twist, Twist):
        v, w = twist.linear, twist.angular
    else:
        arr = np.asarray(twist, dtype=float).reshape(6)
        v, w = arr[:3], arr[3:]
    wx = skew(w)
    top = np.hstack([wx, np.zeros((3, 3))])
    bottom = np.hstack([skew(v), wx])
    return np.vstack([top, bottom])


def spatial_cross_motion(twist) -> np.ndarray:
    """6D cross operator acting on motion vectors; negative transpose of
    the dual operator."""
    if isinstance(twist, Twist):
        v, w = twist.linear, twist.angular
    else:
        arr = np.asarray(twist, dtype=float).reshape(6)
        v, w = arr[:3], arr[3:]
    wx = skew(w)
    top = np.hstack([wx, skew(v)])
    bottom = np.hstack([np.zeros((3, 3)), wx])
    return np.vstack([top, bottom])
