"""Contact-frame impulse calculation and joint velocity jump predictors.

All impulse math lives in the contact frame: z is the outward surface
normal, x and y span the tangent plane. An approaching end-effector has
negative normal velocity, so a compressive impulse has positive z
component. Three predictors are provided:

* classical - joint-space momentum balance solved through the inverted
  inertia matrix (via factorization) with the task-space impulse from
  the contact-velocity constraint;
* crb       - task-space momentum balance with the chain frozen into one
  composite rigid body;
* gm        - task-space momentum balance with the joint-space
  (generalized momentum) inverse inertia.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq

from .dynamics import RANK_EPS, Iim, Jsim
from .errors import DegenerateInertiaError, SingularConfigurationError

_HINT_ANGLE_TOL = 1e-6  # rad; hints closer than this to the normal are unusable

CLASSICAL = "classical"
CRB = "crb"
GM = "gm"
MEASURED = "measured"
METHODS = (CLASSICAL, CRB, GM)


@dataclass(frozen=True)
class ContactFrame:
    """Contact frame: rotation rows are the x/y/z axes in inertial coords."""

    rotation: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.array(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "origin", np.array(self.origin, dtype=float).reshape(3))

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[2]


@dataclass(frozen=True)
class ImpactParams:
    """Restitution and friction for one impact event."""

    restitution: float
    friction: float
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"restitution {self.restitution} outside [0, 1]")
        if self.friction < 0.0:
            raise ValueError(f"friction {self.friction} must be >= 0")
        n = np.array(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("normal must be a unit vector")
        object.__setattr__(self, "normal", n / norm)


@dataclass(frozen=True)
class Impulse:
    """Contact impulse (N·s) in contact coordinates, tagged by origin."""

    vector: np.ndarray
    method: str

    def __post_init__(self):
        vec = np.array(self.vector, dtype=float).reshape(3)
        if not np.all(np.isfinite(vec)):
            raise ValueError("non-finite impulse")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class Prediction:
    """Predicted joint velocity jump plus the quantities that produced it."""

    delta_qd: np.ndarray
    impulse: Impulse
    iim: Iim | None
    method: str

    def __post_init__(self):
        object.__setattr__(self, "delta_qd", np.array(self.delta_qd, dtype=float).reshape(-1))


@dataclass(frozen=True)
class ConeCheck:
    satisfied: bool
    margin: float


def contact_frame(normal, hint_tangent=None, origin=(0.0, 0.0, 0.0)) -> ContactFrame:
    """Right-handed frame with z along the surface normal.

    The x axis follows the hint tangent projected onto the tangent plane;
    without a usable hint it falls back to the projection of the inertial
    x axis, then the inertial y axis. y completes via y = z × x.
    """
    n = np.asarray(normal, dtype=float).reshape(3)
    norm = np.linalg.norm(n)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"normal norm {norm:.9g} is not 1 within 1e-9")
    n = n / norm

    x = None
    if hint_tangent is not None:
        hint = np.asarray(hint_tangent, dtype=float).reshape(3)
        hint = hint / np.linalg.norm(hint)
        proj = hint - np.dot(hint, n) * n
        if np.linalg.norm(proj) >= _HINT_ANGLE_TOL:
            x = proj / np.linalg.norm(proj)
        else:
            warnings.warn(
                "hint tangent is parallel to the contact normal; using fallback axis",
                RuntimeWarning,
                stacklevel=2,
            )
    if x is None:
        for candidate in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
            proj = candidate - np.dot(candidate, n) * n
            if np.linalg.norm(proj) >= _HINT_ANGLE_TOL:
                x = proj / np.linalg.norm(proj)
                break
    y = np.cross(n, x)
    return ContactFrame(np.vstack([x, y, n]), origin)


def delta_v(v_pre, restitution: float) -> np.ndarray:
    """Target contact-velocity change -(1 + c_r) v_pre."""
    return -(1.0 + float(restitution)) * np.asarray(v_pre, dtype=float)


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, Jsim):
        return m.matrix
    if isinstance(m, Iim):
        return m.matrix
    return np.asarray(m, dtype=float)


def _as_impulse_vector(impulse) -> np.ndarray:
    if isinstance(impulse, Impulse):
        return impulse.vector
    return np.asarray(impulse, dtype=float).reshape(3)


def _check_spd_3x3(g: np.ndarray, what: str) -> None:
    eig = np.linalg.eigvalsh(0.5 * (g + g.T))
    if eig[0] <= RANK_EPS * max(np.trace(g), 0.0):
        raise SingularConfigurationError(
            f"{what} is rank deficient (min eigenvalue {eig[0]:.3e}); "
            "the configuration violates the rank-3 contact assumption"
        )


def impulse_classical(jac, mass, dv) -> Impulse:
    """Task-space impulse from the contact-velocity constraint.

    Solves (J M^-1 J^T) impulse = dv through factorizations; the inverse
    inertia product is never formed explicitly.
    """
    jac = np.asarray(jac, dtype=float)
    m = _as_matrix(mass)
    factor = cho_factor(m, lower=True)
    g = jac @ cho_solve(factor, jac.T)
    g = 0.5 * (g + g.T)
    _check_spd_3x3(g, "J M^-1 J^T")
    vec = np.linalg.solve(g, np.asarray(dv, dtype=float))
    return Impulse(vec, CLASSICAL)


def normal_impulse(w, v_n_pre: float, restitution: float) -> Impulse:
    """Purely normal impulse -(1 + c_r) v_n / W_zz in contact coordinates."""
    wm = _as_matrix(w)
    wzz = float(wm[2, 2])
    if wzz <= 0.0:
        raise DegenerateInertiaError(
            f"normal inverse-inertia entry {wzz:.3e} is not positive"
        )
    scalar = -(1.0 + float(restitution)) * float(v_n_pre) / wzz
    method = w.flavor if isinstance(w, Iim) else "normal"
    return Impulse(np.array([0.0, 0.0, scalar]), method)


def _solve_joint_momentum(jac, mass, impulse_vec) -> np.ndarray:
    m = _as_matrix(mass)
    return cho_solve(cho_factor(m, lower=True), jac.T @ impulse_vec)


def _row_pinv_apply(jac, rhs) -> np.ndarray:
    """J^T (J J^T)^-1 rhs via a solve; requires full row rank."""
    gram = jac @ jac.T
    _check_spd_3x3(gram, "J J^T")
    return jac.T @ np.linalg.solve(gram, rhs)


def predict_classical(jac, mass, dv, tangential_mode: str = "full") -> Prediction:
    """Joint-space predictor M^-1 J^T impulse with the classical impulse.

    'full' keeps the complete task-space impulse, so J delta_qd == dv
    exactly; 'normal_only' zeroes the (friction-infeasible) tangential
    components before mapping to joint space.
    """
    if tangential_mode not in ("full", "normal_only"):
        raise ValueError(f"unknown tangential_mode '{tangential_mode}'")
    jac = np.asarray(jac, dtype=float)
    imp = impulse_classical(jac, mass, dv)
    vec = imp.vector
    if tangential_mode == "normal_only":
        vec = np.array([0.0, 0.0, vec[2]])
        imp = Impulse(vec, CLASSICAL)
    delta_qd = _solve_joint_momentum(jac, mass, vec)
    return Prediction(delta_qd, imp, None, CLASSICAL)


def predict_crb(jac, w: Iim, impulse) -> Prediction:
    """Task-space predictor with the composite-rigid-body inverse inertia.

    delta_qd is the minimum-norm solution of J delta_qd = W impulse, so
    the contact-velocity constraint holds exactly at full row rank.
    """
    jac = np.asarray(jac, dtype=float)
    vec = _as_impulse_vector(impulse)
    imp = impulse if isinstance(impulse, Impulse) else Impulse(vec, CRB)
    delta_qd = _row_pinv_apply(jac, _as_matrix(w) @ vec)
    return Prediction(delta_qd, imp, w if isinstance(w, Iim) else Iim(_as_matrix(w), CRB), CRB)


def predict_gm(jac, w: Iim, impulse) -> Prediction:
    """Task-space predictor with the generalized-momentum inverse inertia."""
    jac = np.asarray(jac, dtype=float)
    vec = _as_impulse_vector(impulse)
    imp = impulse if isinstance(impulse, Impulse) else Impulse(vec, GM)
    delta_qd = _row_pinv_apply(jac, _as_matrix(w) @ vec)
    return Prediction(delta_qd, imp, w if isinstance(w, Iim) else Iim(_as_matrix(w), GM), GM)


def predict_with_impulse(method: str, jac, impulse_measured, mass=None, w=None) -> Prediction:
    """Run a predictor with an externally supplied (measured) impulse."""
    vec = _as_impulse_vector(impulse_measured)
    imp = Impulse(vec, MEASURED)
    jac = np.asarray(jac, dtype=float)
    if method == CLASSICAL:
        if mass is None:
            raise ValueError("classical substitution requires the mass matrix")
        delta_qd = _solve_joint_momentum(jac, mass, vec)
        return Prediction(delta_qd, imp, None, CLASSICAL)
    if method in (CRB, GM):
        if w is None:
            raise ValueError(f"{method} substitution requires an inverse inertia matrix")
        delta_qd = _row_pinv_apply(jac, _as_matrix(w) @ vec)
        return Prediction(delta_qd, imp, w if isinstance(w, Iim) else Iim(_as_matrix(w), method), method)
    raise ValueError(f"unknown method '{method}'")


def friction_cone_check(impulse, friction: float) -> ConeCheck:
    """Coulomb cone test sqrt(ix^2 + iy^2) <= mu * iz with signed margin."""
    vec = _as_impulse_vector(impulse)
    tangential = float(np.hypot(vec[0], vec[1]))
    margin = float(friction) * vec[2] - tangential
    if vec[2] < 0.0:
        # adhesive impulse: never feasible, keep the margin strictly negative
        margin = min(margin, vec[2])
        return ConeCheck(False, margin)
    return ConeCheck(margin >= 0.0, margin)


def _tangential_blocks(w) -> tuple[np.ndarray, np.ndarray]:
    wm = _as_matrix(w)
    return wm[:2, :2], wm[:2, 2]


def stick_coefficient(w) -> float:
    """Minimal friction coefficient that makes a no-slip impulse cone-feasible.

    Equals the tangential-impulse-per-normal-impulse ratio required to
    cancel the tangential velocity jump; sliding is predicted whenever
    the surface friction is below this value.
    """
    w_tt, w_tn = _tangential_blocks(w)
    det = np.linalg.det(w_tt)
    if abs(det) <= RANK_EPS * max(1.0, np.trace(w_tt) ** 2):
        raise DegenerateInertiaError("tangential inverse-inertia block is singular")
    return float(np.linalg.norm(np.linalg.solve(w_tt, w_tn)))


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular sampling grid in the tangential velocity plane."""

    x_range: tuple[float, float] = (-0.15, 0.15)
    y_range: tuple[float, float] = (-0.15, 0.15)
    nx: int = 21
    ny: int = 21


@dataclass(frozen=True)
class InvariantDirection:
    direction: np.ndarray  # unit tangent (2,)
    converging: bool


@dataclass(frozen=True)
class PhaseField:
    """Tangential-velocity direction field under Coulomb sliding.

    ``points``/``directions`` sample the flow d v_t / d lambda with
    lambda the accumulated normal impulse; ``invariant_directions`` are
    the rays the flow preserves. ``origin_stable`` tells whether a
    trajectory reaching zero tangential velocity can stay there, i.e.
    whether sticking is cone-feasible.
    """

    points: np.ndarray  # (N, 2)
    directions: np.ndarray  # (N, 2)
    invariant_directions: tuple[InvariantDirection, ...]
    isotropic: bool
    stick_coefficient: float
    friction: float
    origin_stable: bool


def _phase_direction(w_tt, w_tn, friction, v_t):
    speed = np.linalg.norm(v_t)
    return -friction * (w_tt @ (v_t / speed)) + w_tn


def tangential_phase_field(w, friction: float, grid: PhaseGrid | None = None) -> PhaseField:
    """Sample the sliding flow and locate its invariant directions.

    At tangential velocity v_t the incremental impulse per unit normal
    impulse is (-mu v_t/|v_t|; 1), giving the flow
    d v_t / d lambda = -mu W_tt v_t/|v_t| + W_tn. The origin itself is
    excluded (sliding direction undefined there). Invariant directions
    are found by root-finding the cross product of flow and direction on
    the unit circle; each is tagged converging (flow points toward the
    origin along the ray) or diverging.
    """
    if friction < 0.0:
        raise ValueError("friction must be >= 0")
    if grid is None:
        grid = PhaseGrid()
    w_tt, w_tn = _tangential_blocks(w)
    mu_bar = stick_coefficient(w)

    xs = np.linspace(grid.x_range[0], grid.x_range[1], grid.nx)
    ys = np.linspace(grid.y_range[0], grid.y_range[1], grid.ny)
    points = []
    dirs = []
    for y in ys:
        for x in xs:
            v = np.array([x, y])
            if np.linalg.norm(v) == 0.0:
                continue
            points.append(v)
            dirs.append(_phase_direction(w_tt, w_tn, friction, v))
    points = np.array(points).reshape(-1, 2)
    dirs = np.array(dirs).reshape(-1, 2)

    def flow(theta: float) -> np.ndarray:
        return _phase_direction(w_tt, w_tn, friction, np.array([np.cos(theta), np.sin(theta)]))

    def cross(theta: float) -> float:
        f = flow(theta)
        return f[0] * np.sin(theta) - f[1] * np.cos(theta)

    thetas = np.linspace(0.0, 2.0 * np.pi, 721)
    values = np.array([cross(t) for t in thetas])
    scale = np.max(np.abs(values))
    invariants: list[InvariantDirection] = []
    isotropic = False
    if scale <= 1e-12 * max(1.0, np.linalg.norm(w_tt) * friction + np.linalg.norm(w_tn)):
        # every direction is invariant (isotropic tangential dynamics)
        isotropic = True
    else:
        roots: list[float] = []
        for k in range(len(thetas) - 1):
            a, b = values[k], values[k + 1]
            if a == 0.0:
                roots.append(thetas[k])
            elif a * b < 0.0:
                roots.append(brentq(cross, thetas[k], thetas[k + 1], xtol=1e-14))
        deduped: list[float] = []
        for r in roots:
            canon = r % (2.0 * np.pi)
            if all(
                min(abs(canon - o), 2.0 * np.pi - abs(canon - o)) > 1e-8 for o in deduped
            ):
                deduped.append(canon)
        for theta in deduped:
            d = np.array([np.cos(theta), np.sin(theta)])
            radial = float(flow(theta) @ d)
            invariants.append(InvariantDirection(d, converging=radial < 0.0))

    return PhaseField(
        points=points,
        directions=dirs,
        invariant_directions=tuple(invariants),
        isotropic=isotropic,
        stick_coefficient=mu_bar,
        friction=float(friction),
        origin_stable=bool(friction >= mu_bar),
    )


def post_impact_contact_velocity(jac, v_pre, delta_qd) -> np.ndarray:
    """Post-impact contact velocity v_pre + J delta_qd (contact coords)."""
    jac = np.asarray(jac, dtype=float)
    return np.asarray(v_pre, dtype=float) + jac @ np.asarray(delta_qd, dtype=float)
