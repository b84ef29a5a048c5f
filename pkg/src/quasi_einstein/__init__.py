"""Numerical toolkit for quasi-Einstein metrics ``Hess w = (w/m)(Ric - lam g)``.

Modules
-------
model
    Specs, radial profiles, warped models and check reports.
tensor_algebra
    Pointwise algebra of curvature-type tensors.
curvature
    Closed-form curvature of warped metrics and the derived tensors.
oracle
    Finite-difference curvature of arbitrary chart metrics.
ode
    ODE reductions, integrators, shooting and series starts.
catalog
    Closed-form example families.
verify
    Identity checks and the regression suite.
cli
    Command-line entry point.
"""
from .errors import QEError
from .model import CheckReport, DoublyWarpedModel, ModelSpec, Profile, WarpedModel, validate_spec

__all__ = [
    "CheckReport",
    "DoublyWarpedModel",
    "ModelSpec",
    "Profile",
    "QEError",
    "WarpedModel",
    "validate_spec",
]
__version__ = "0.1.0"
