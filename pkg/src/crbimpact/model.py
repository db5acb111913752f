"""Serial-chain model description, loading, and validation.

A chain is a fixed base plus D links connected by D one-DOF joints;
joint i connects link i-1 to link i (link -1 is the base). The contact
point is rigidly attached to one link at a fixed offset. Model files are
JSON; see ``parse_model`` for the schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ModelValidationError
from .spatial import Transform

_AXIS_FIX_TOL = 1e-6  # silently renormalize axes this close to unit length
_SYM_FIX_TOL = 1e-6  # silently symmetrize inertias this close to symmetric
_TRIANGLE_TOL = 1e-9

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: machine-readable code + JSON-pointer path."""

    code: str
    path: str
    message: str


@dataclass(frozen=True)
class LinkInertia:
    """Rigid-body inertia of one link, in that link's frame."""

    name: str
    mass: float
    com: np.ndarray
    rot_inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", np.array(self.com, dtype=float).reshape(3))
        inertia = np.array(self.rot_inertia, dtype=float).reshape(3, 3)
        defect = np.linalg.norm(inertia - inertia.T)
        if defect <= _SYM_FIX_TOL * max(1.0, np.linalg.norm(inertia)):
            inertia = 0.5 * (inertia + inertia.T)
        object.__setattr__(self, "rot_inertia", inertia)


@dataclass(frozen=True)
class JointSpec:
    """One-DOF joint: placement relative to the parent link plus an axis."""

    name: str
    kind: str
    origin: Transform
    axis: np.ndarray
    velocity_limit: float | None = None

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) <= _AXIS_FIX_TOL and norm > 0.0:
            axis = axis / norm
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class ChainModel:
    """Immutable description of a fixed-base serial chain."""

    name: str
    links: tuple[LinkInertia, ...]
    joints: tuple[JointSpec, ...]
    contact_link: int
    contact_offset: np.ndarray
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "contact_link", int(self.contact_link))
        object.__setattr__(
            self, "contact_offset", np.array(self.contact_offset, dtype=float).reshape(3)
        )
        object.__setattr__(self, "gravity", np.array(self.gravity, dtype=float).reshape(3))

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))


def _check_inertia(inertia: np.ndarray, path: str, diags: list[Diagnostic]) -> None:
    scale = max(1.0, float(np.linalg.norm(inertia)))
    if not np.all(np.isfinite(inertia)):
        diags.append(Diagnostic("physical/nonfinite", path, "non-finite inertia entries"))
        return
    if np.linalg.norm(inertia - inertia.T) > _SYM_FIX_TOL * scale:
        diags.append(
            Diagnostic("physical/inertia-asymmetric", path, "inertia matrix is not symmetric")
        )
        return
    eig = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
    if eig[0] <= 0.0:
        diags.append(
            Diagnostic(
                "physical/inertia-not-positive-definite",
                path,
                f"non-positive-definite inertia (min eigenvalue {eig[0]:.3e})",
            )
        )
        return
    tol = _TRIANGLE_TOL * max(1.0, eig[2])
    if eig[0] + eig[1] < eig[2] - tol:
        diags.append(
            Diagnostic(
                "physical/inertia-triangle",
                path,
                "principal moments violate the triangle inequality",
            )
        )


def validate_model(model: ChainModel) -> list[Diagnostic]:
    """Check every model invariant; empty list means the model is valid."""
    diags: list[Diagnostic] = []
    if len(model.links) != len(model.joints):
        diags.append(
            Diagnostic(
                "topology/link-joint-count",
                "/links",
                f"{len(model.links)} links but {len(model.joints)} joints",
            )
        )
    for i, link in enumerate(model.links):
        path = f"/links/{i}"
        if not math.isfinite(link.mass) or link.mass <= 0.0:
            diags.append(
                Diagnostic(
                    "physical/nonpositive-mass",
                    f"{path}/mass",
                    f"link '{link.name}' has mass {link.mass:g}, must be > 0",
                )
            )
        if not np.all(np.isfinite(link.com)):
            diags.append(Diagnostic("physical/nonfinite", f"{path}/com", "non-finite COM"))
        _check_inertia(link.rot_inertia, f"{path}/inertia", diags)
    for i, joint in enumerate(model.joints):
        path = f"/joints/{i}"
        if joint.kind not in (REVOLUTE, PRISMATIC):
            diags.append(
                Diagnostic("schema/bad-value", f"{path}/kind", f"unknown joint kind '{joint.kind}'")
            )
        norm = np.linalg.norm(joint.axis)
        if abs(norm - 1.0) > 1e-9:
            diags.append(
                Diagnostic(
                    "physical/axis-not-unit",
                    f"{path}/axis",
                    f"axis norm {norm:.9g} beyond renormalization tolerance",
                )
            )
        if joint.velocity_limit is not None and joint.velocity_limit < 0.0:
            diags.append(
                Diagnostic(
                    "physical/negative-velocity-limit",
                    f"{path}/velocity_limit",
                    "velocity limit must be >= 0",
                )
            )
    if not 0 <= model.contact_link < len(model.links):
        diags.append(
            Diagnostic(
                "topology/bad-contact-link",
                "/contact/link",
                f"contact link {model.contact_link} out of range",
            )
        )
    if not np.all(np.isfinite(model.contact_offset)):
        diags.append(Diagnostic("physical/nonfinite", "/contact/offset", "non-finite offset"))
    if not np.all(np.isfinite(model.gravity)):
        diags.append(Diagnostic("physical/nonfinite", "/gravity", "non-finite gravity"))
    return diags


class _DocReader:
    """Schema walker collecting diagnostics with JSON-pointer paths."""

    def __init__(self, doc):
        self.doc = doc
        self.diags: list[Diagnostic] = []

    def fail(self, code, path, message):
        self.diags.append(Diagnostic(code, path, message))
        return None

    def get(self, obj, key, path, kind, required=True, default=None):
        if not isinstance(obj, dict):
            return self.fail("schema/wrong-type", path, "expected an object")
        if key not in obj:
            if required:
                return self.fail("schema/missing-field", f"{path}/{key}", "missing required field")
            return default
        value = obj[key]
        if kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return self.fail("schema/wrong-type", f"{path}/{key}", "expected a number")
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                return self.fail("schema/wrong-type", f"{path}/{key}", "expected an integer")
            return int(value)
        if kind == "str":
            if not isinstance(value, str):
                return self.fail("schema/wrong-type", f"{path}/{key}", "expected a string")
            return value
        if kind == "list":
            if not isinstance(value, list):
                return self.fail("schema/wrong-type", f"{path}/{key}", "expected an array")
            return value
        if kind == "dict":
            if not isinstance(value, dict):
                return self.fail("schema/wrong-type", f"{path}/{key}", "expected an object")
            return value
        raise AssertionError(kind)

    def vec(self, obj, key, path, n, required=True, default=None):
        raw = self.get(obj, key, path, "list", required=required)
        if raw is None:
            return np.array(default, dtype=float) if default is not None else None
        if len(raw) != n or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw
        ):
            return self.fail("schema/bad-length", f"{path}/{key}", f"expected {n} numbers")
        arr = np.array(raw, dtype=float)
        if not np.all(np.isfinite(arr)):
            return self.fail("physical/nonfinite", f"{path}/{key}", "non-finite entries")
        return arr

    def matrix3(self, obj, key, path):
        raw = self.get(obj, key, path, "list")
        if raw is None:
            return None
        ok = len(raw) == 3 and all(
            isinstance(row, list)
            and len(row) == 3
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row)
            for row in raw
        )
        if not ok:
            return self.fail("schema/bad-length", f"{path}/{key}", "expected a 3x3 number matrix")
        return np.array(raw, dtype=float)


def parse_model(doc: dict) -> ChainModel:
    """Build a validated ChainModel from a parsed JSON document.

    Schema::

        {"name": str, "gravity": [3 num],
         "links": [{"name": str, "mass": num, "com": [3 num],
                    "inertia": [[3x3 num]]}],
         "joints": [{"name": str, "kind": "revolute"|"prismatic",
                     "parent": int, "origin": {"xyz": [3 num], "rpy": [3 num]},
                     "axis": [3 num], "velocity_limit": num?}],
         "contact": {"link": int, "offset": [3 num]}}

    ``rpy`` are intrinsic XYZ Euler angles in radians; ``parent`` is the
    parent link index with -1 for the fixed base. Raises
    ModelValidationError listing every violation found.
    """
    rd = _DocReader(doc)
    name = rd.get(doc, "name", "", "str") or ""
    gravity = rd.vec(doc, "gravity", "", 3, required=False, default=[0.0, 0.0, -9.81])

    links: list[LinkInertia] = []
    raw_links = rd.get(doc, "links", "", "list") or []
    for i, raw in enumerate(raw_links):
        path = f"/links/{i}"
        lname = rd.get(raw, "name", path, "str", required=False, default=f"link{i}")
        mass = rd.get(raw, "mass", path, "number")
        com = rd.vec(raw, "com", path, 3)
        inertia = rd.matrix3(raw, "inertia", path)
        if mass is None or com is None or inertia is None:
            continue
        links.append(LinkInertia(lname or f"link{i}", mass, com, inertia))

    joints: list[JointSpec] = []
    raw_joints = rd.get(doc, "joints", "", "list") or []
    for i, raw in enumerate(raw_joints):
        path = f"/joints/{i}"
        jname = rd.get(raw, "name", path, "str", required=False, default=f"joint{i}")
        kind = rd.get(raw, "kind", path, "str")
        if kind is not None and kind not in (REVOLUTE, PRISMATIC):
            rd.fail("schema/bad-value", f"{path}/kind", f"unknown joint kind '{kind}'")
            kind = None
        parent = rd.get(raw, "parent", path, "int")
        if parent is not None and parent != i - 1:
            rd.fail(
                "topology/bad-parent",
                f"{path}/parent",
                f"serial chain requires parent {i - 1}, got {parent}",
            )
        origin_raw = rd.get(raw, "origin", path, "dict")
        xyz = rpy = None
        if origin_raw is not None:
            xyz = rd.vec(origin_raw, "xyz", f"{path}/origin", 3)
            rpy = rd.vec(origin_raw, "rpy", f"{path}/origin", 3)
        axis = rd.vec(raw, "axis", path, 3)
        if axis is not None:
            norm = np.linalg.norm(axis)
            if abs(norm - 1.0) > _AXIS_FIX_TOL:
                rd.fail(
                    "physical/axis-not-unit",
                    f"{path}/axis",
                    f"axis norm {norm:.9g} beyond renormalization tolerance {_AXIS_FIX_TOL:g}",
                )
                axis = None
        vlim = rd.get(raw, "velocity_limit", path, "number", required=False)
        if kind is None or xyz is None or rpy is None or axis is None:
            continue
        joints.append(
            JointSpec(jname or f"joint{i}", kind, Transform.from_rpy_xyz(rpy, xyz), axis, vlim)
        )

    contact_raw = rd.get(doc, "contact", "", "dict")
    contact_link = 0
    contact_offset = np.zeros(3)
    if contact_raw is not None:
        cl = rd.get(contact_raw, "link", "/contact", "int")
        co = rd.vec(contact_raw, "offset", "/contact", 3)
        contact_link = cl if cl is not None else 0
        contact_offset = co if co is not None else np.zeros(3)

    if rd.diags:
        raise ModelValidationError(rd.diags)
    if len(links) != len(raw_links) or len(joints) != len(raw_joints):
        # some element failed schema checks above; diags already raised
        raise AssertionError("unreachable")

    model = ChainModel(
        name=name,
        links=tuple(links),
        joints=tuple(joints),
        contact_link=contact_link,
        contact_offset=contact_offset,
        gravity=gravity,
    )
    diags = validate_model(model)
    if diags:
        raise ModelValidationError(diags)
    return model


def load_model(path) -> ChainModel:
    """Read and validate a JSON model file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelValidationError(
            [Diagnostic("schema/not-json", "", f"invalid JSON: {exc}")]
        ) from exc
    if not isinstance(doc, dict):
        raise ModelValidationError(
            [Diagnostic("schema/wrong-type", "", "top-level value must be an object")]
        )
    return parse_model(doc)


def _rpy_from_rotation(rotation: np.ndarray) -> list[float]:
    """Recover intrinsic XYZ Euler angles from a rotation matrix."""
    sp = float(np.clip(rotation[0, 2], -1.0, 1.0))
    p = math.asin(sp)
    if abs(sp) < 1.0 - 1e-12:
        r = math.atan2(-rotation[1, 2], rotation[2, 2])
        y = math.atan2(-rotation[0, 1], rotation[0, 0])
    else:
        # gimbal lock: fold yaw into roll
        r = math.atan2(rotation[2, 1], rotation[1, 1])
        y = 0.0
    return [r, p, y]


def model_to_dict(model: ChainModel) -> dict:
    """Serialize a model back to the document schema (canonical values)."""
    return {
        "name": model.name,
        "gravity": model.gravity.tolist(),
        "links": [
            {
                "name": link.name,
                "mass": link.mass,
                "com": link.com.tolist(),
                "inertia": link.rot_inertia.tolist(),
            }
            for link in model.links
        ],
        "joints": [
            {
                "name": joint.name,
                "kind": joint.kind,
                "parent": i - 1,
                "origin": {
                    "xyz": joint.origin.translation.tolist(),
                    "rpy": _rpy_from_rotation(joint.origin.rotation),
                },
                "axis": joint.axis.tolist(),
                **(
                    {"velocity_limit": joint.velocity_limit}
                    if joint.velocity_limit is not None
                    else {}
                ),
            }
            for i, joint in enumerate(model.joints)
        ],
        "contact": {"link": model.contact_link, "offset": model.contact_offset.tolist()},
    }


def save_model(model: ChainModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")
