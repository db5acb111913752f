"""Exception types shared across the toolkit.

Exit-code convention for the CLI: I/O and parse failures map to 1,
mathematical precondition failures (singularities, degenerate inertias,
assumption violations) map to 2.
"""

from __future__ import annotations


class CrbImpactError(Exception):
    """Base class for all toolkit errors."""


class ModelValidationError(CrbImpactError):
    """A model document violates the schema or a physical invariant.

    Carries the full diagnostics list so callers can report every
    violation, not just the first.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(f"{d.code} at {d.path}: {d.message}" for d in self.diagnostics)
        super().__init__(f"invalid model: {lines}")


class DatasetError(CrbImpactError):
    """A dataset file is malformed. ``row`` is the 1-based data row."""

    def __init__(self, message, row=None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(prefix + message)


class SingularConfigurationError(CrbImpactError):
    """The contact Jacobian (or a derived system) lost rank at this q."""


class DegenerateInertiaError(CrbImpactError):
    """An inverse inertia matrix is unusable (non-positive normal entry,
    singular tangential block, ...)."""


class SimulationError(CrbImpactError):
    """Base class for contact-simulation failures."""


class StepTooLargeError(SimulationError):
    """The integration step violates the penalty-stiffness stability bound."""

    def __init__(self, step, suggested_step):
        self.step = step
        self.suggested_step = suggested_step
        super().__init__(
            f"step {step:g} s too large for the contact stiffness; "
            f"use {suggested_step:g} s or smaller"
        )


class NoImpactError(SimulationError):
    """The end-effector never reached the surface within the sim duration."""
