"""Domain types shared by every module.

The central object is :class:`ModelSpec`, the parameter tuple ``(n, m, lam)``
of the equation ``Hess w = (w/m)(Ric - lam g)`` together with the fiber
constant ``mu``. :class:`Profile` wraps a scalar function of ``t`` with two
derivatives, and :class:`WarpedModel` combines two profiles into a
cohomogeneity-one metric ``dt^2 + psi(t)^2 g_L`` with potential ``w(t)``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import (
    BoundaryEvaluation,
    DomainError,
    InconsistentMu,
    InvalidDimension,
    InvalidM,
    NonIntegerM,
    SmoothnessViolation,
    UnsupportedLink,
)

FIBER_KINDS = ("sphere", "flat", "hyperbolic", "abstract-einstein")
LINK_KINDS = ("sphere", "flat", "hyperbolic", "none")
ORIGIN_TYPES = ("pole", "boundary", "interior-level-set")
MU_SOURCES = ("given", "boundary-derived", "formula-derived")

# tolerance used when checking structural conditions at the end of a profile
_ENDPOINT_TOL = 1e-7


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a quasi-Einstein problem.

    Parameters
    ----------
    n : int
        Base dimension.
    m : float
        Fiber-dimension parameter. Must be a positive integer when a total
        space is built.
    lam : float
        Einstein constant.
    mu : float, optional
        Fiber Einstein constant. Filled in by :func:`validate_spec` when it
        can be derived.
    fiber_kind : str
        One of ``sphere``, ``flat``, ``hyperbolic``, ``abstract-einstein``.
    kappa_F : float, optional
        Einstein constant of the fiber metric. Never inferred.
    boundary : bool
        Whether the base has a boundary where ``w = 0``.
    boundary_slope : float, optional
        ``|grad w|`` on the boundary.
    w_constant : float, optional
        Value of ``w`` when the potential is constant.
    mu_source : str, optional
        How ``mu`` was obtained: ``given``, ``boundary-derived`` or
        ``formula-derived``.
    total_space : bool
        Request a warped product total space (needs integer ``m``).
    m_one_path : bool
        Explicitly select the ``m = 1`` branch for total-space constructions.
    """

    n: int
    m: float
    lam: float
    mu: float | None = None
    fiber_kind: str = "abstract-einstein"
    kappa_F: float | None = None
    boundary: bool = False
    boundary_slope: float | None = None
    w_constant: float | None = None
    mu_source: str | None = None
    total_space: bool = False
    m_one_path: bool = False

    @property
    def auxiliary_condition_active(self) -> bool:
        """For ``m = 1`` the extra condition ``Laplacian w = -lam w`` applies."""
        return self.m == 1

    @property
    def m_is_integer(self) -> bool:
        return float(self.m).is_integer()

    def replace(self, **changes: Any) -> "ModelSpec":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        """Serialize to the ``{n, m, lambda, mu, fiber}`` document."""
        return {
            "n": self.n,
            "m": self.m,
            "lambda": self.lam,
            "mu": self.mu,
            "fiber": {"kind": self.fiber_kind, "kappa": self.kappa_F},
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "ModelSpec":
        if isinstance(doc, str):
            doc = json.loads(doc)
        fiber = doc.get("fiber") or {}
        if isinstance(fiber, str):
            fiber = {"kind": fiber}
        mu = doc.get("mu")
        return cls(
            n=int(doc["n"]),
            m=float(doc["m"]),
            lam=float(doc["lambda"]),
            mu=None if mu is None else float(mu),
            fiber_kind=fiber.get("kind", "abstract-einstein"),
            kappa_F=fiber.get("kappa"),
            mu_source=None if mu is None else "given",
        )


def validate_spec(spec: ModelSpec) -> ModelSpec:
    """Check a spec and fill in ``mu`` where it is determined.

    ``mu`` is derived from boundary data through ``mu = (m-1)|grad w|^2`` or,
    for a constant potential, from ``mu = lam w^2``. A given ``mu`` that
    contradicts derivable data is rejected. The function is idempotent.

    Raises
    ------
    InvalidDimension
        ``n < 1``.
    InvalidM
        ``m <= 0``, or ``m = 1`` for a total space without ``m_one_path``.
    NonIntegerM
        Total space requested for non-integer ``m``.
    InconsistentMu
        Boundary present with ``m > 1`` and ``mu <= 0``, or a given ``mu``
        disagreeing with derived values.
    """
    if not isinstance(spec.n, (int, np.integer)) or spec.n < 1:
        raise InvalidDimension(f"n must be an integer >= 1, got {spec.n!r}")
    if not (spec.m > 0 and math.isfinite(spec.m)):
        raise InvalidM(f"m must be positive, got {spec.m!r}")
    if spec.fiber_kind not in FIBER_KINDS:
        raise UnsupportedLink(f"unknown fiber kind {spec.fiber_kind!r}")
    if spec.total_space:
        if not spec.m_is_integer:
            raise NonIntegerM(f"total space needs integer m, got {spec.m}")
        if spec.m == 1 and not spec.m_one_path:
            raise InvalidM("m = 1 total space requires m_one_path=True")

    derived: list[tuple[float, str]] = []
    if spec.boundary_slope is not None:
        derived.append(((spec.m - 1.0) * spec.boundary_slope ** 2, "boundary-derived"))
    if spec.w_constant is not None:
        derived.append((spec.lam * spec.w_constant ** 2, "formula-derived"))

    mu, source = spec.mu, spec.mu_source
    if mu is not None and source is None:
        source = "given"
    for value, tag in derived:
        if mu is None:
            mu, source = value, tag
        elif not math.isclose(mu, value, rel_tol=1e-10, abs_tol=1e-12):
            raise InconsistentMu(f"mu={mu} disagrees with {tag} value {value}")

    if spec.boundary and spec.m > 1 and mu is not None and mu <= 0:
        raise InconsistentMu(f"a boundary with m > 1 forces mu > 0, got mu={mu}")

    if mu == spec.mu and source == spec.mu_source:
        return spec
    return spec.replace(mu=mu, mu_source=source)


def _as_float_array(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Profile:
    """Scalar function of one variable with first and second derivatives.

    Parameters
    ----------
    func : callable
        ``t -> (value, d1, d2)``; vectorized over numpy arrays.
    domain : tuple of float
        Closed interval ``[t0, t1]``; ``t1`` may be ``inf``.
    kind : str
        ``closed`` or ``sampled``.
    label : str
        Free-form description.
    """

    func: Callable[[np.ndarray], tuple]
    domain: tuple[float, float] = (-math.inf, math.inf)
    kind: str = "closed"
    label: str = ""

    def __call__(self, t):
        t = _as_float_array(t)
        lo, hi = self.domain
        slack = 1e-9 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0,
                           abs(hi) if math.isfinite(hi) else 1.0)
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            raise DomainError(f"t outside profile domain {self.domain}")
        v, d1, d2 = self.func(t)
        shape = np.shape(t)
        return (np.broadcast_to(np.asarray(v, float), shape).copy(),
                np.broadcast_to(np.asarray(d1, float), shape).copy(),
                np.broadcast_to(np.asarray(d2, float), shape).copy())

    def value(self, t):
        return self(t)[0]

    # constructors -------------------------------------------------------
    @classmethod
    def closed(cls, func, domain=(-math.inf, math.inf), label=""):
        return cls(func=func, domain=tuple(domain), kind="closed", label=label)

    @classmethod
    def constant(cls, c: float, domain=(-math.inf, math.inf)):
        c = float(c)
        return cls.closed(lambda t: (c, 0.0, 0.0), domain, label=f"const {c}")

    @classmethod
    def sampled(cls, t, value, d1, d2=None, label=""):
        """Piecewise cubic Hermite interpolant of samples.

        When ``d2`` is given the second derivative is interpolated linearly
        from the samples; otherwise it is the spline's own second derivative.
        """
        t = _as_float_array(t)
        value, d1 = _as_float_array(value), _as_float_array(d1)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("sample grid must be strictly increasing with >= 2 points")
        spline = CubicHermiteSpline(t, value, d1)
        if d2 is None:
            dspl = spline.derivative(2)
            d2_of = dspl
        else:
            d2s = CubicHermiteSpline(t, d1, _as_float_array(d2))
            d2_of = d2s.derivative(1)

        def func(s):
            return spline(s), spline(s, 1), d2_of(s)

        return cls(func=func, domain=(float(t[0]), float(t[-1])), kind="sampled", label=label)

    # combinators --------------------------------------------------------
    def scaled(self, c: float) -> "Profile":
        c = float(c)

        def func(t):
            v, d1, d2 = self.func(t)
            return c * v, c * d1, c * d2

        return Profile(func, self.domain, self.kind, self.label)

    def plus(self, other: "Profile") -> "Profile":
        lo = max(self.domain[0], other.domain[0])
        hi = min(self.domain[1], other.domain[1])

        def func(t):
            a, b = self.func(t), other.func(t)
            return a[0] + b[0], a[1] + b[1], a[2] + b[2]

        return Profile(func, (lo, hi), self.kind, self.label)

    def restricted(self, t0: float, t1: float) -> "Profile":
        return Profile(self.func, (float(t0), float(t1)), self.kind, self.label)

    def derivative_profile(self) -> "Profile":
        """``t -> (f', f'', nan)``; used for the ``v = w'`` variable."""

        def func(t):
            _, d1, d2 = self.func(t)
            return d1, d2, np.full(np.shape(d1), np.nan)

        return Profile(func, self.domain, self.kind, self.label)

    def derivative_consistency(self, n: int = 201, h: float = 1e-5) -> float:
        """Max mismatch between centered differences and stored derivatives.

        Returns the larger of the first and second derivative mismatches
        relative to ``1 + |f|``; this is ``O(h^2)`` for a consistent profile.
        """
        lo, hi = self.domain
        if not math.isfinite(hi):
            hi = lo + 10.0
        if not math.isfinite(lo):
            lo = hi - 10.0
        t = np.linspace(lo + 2 * h, hi - 2 * h, n)
        v, d1, d2 = self.func(t)
        vp, d1p, _ = self.func(t + h)
        vm, d1m, _ = self.func(t - h)
        e1 = np.abs((vp - vm) / (2 * h) - d1) / (1 + np.abs(d1))
        e2 = np.abs((d1p - d1m) / (2 * h) - d2) / (1 + np.abs(d2))
        return float(max(e1.max(), e2.max()))


def link_kappa(link: str, n: int) -> float:
    """Einstein constant of the unit link of dimension ``n - 1``."""
    if link == "sphere":
        return float(n - 2)
    if link == "flat" or link == "none":
        return 0.0
    if link == "hyperbolic":
        return -float(n - 2)
    raise UnsupportedLink(f"unknown link kind {link!r}")


@dataclass(frozen=True)
class WarpedModel:
    """Metric ``dt^2 + psi(t)^2 g_L`` on an ``n``-dimensional base with ``w(t)``.

    ``g_L`` has dimension ``n - 1`` and constant curvature determined by
    ``link`` (sphere, flat or hyperbolic), so its Einstein constant is
    ``kappa_L`` (``n - 2``, ``0`` or ``-(n - 2)``).
    """

    spec: ModelSpec
    psi: Profile
    w: Profile
    link: str = "sphere"
    origin_type: str = "interior-level-set"
    label: str = ""
    check_origin: bool = True

    def __post_init__(self):
        if self.link not in LINK_KINDS:
            raise UnsupportedLink(f"unknown link kind {self.link!r}")
        if self.origin_type not in ORIGIN_TYPES:
            raise ValueError(f"unknown origin type {self.origin_type!r}")
        if self.spec.n == 1 and self.link != "none":
            object.__setattr__(self, "link", "none")
        if self.check_origin:
            self._check_origin()

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def m(self) -> float:
        return self.spec.m

    @property
    def lam(self) -> float:
        return self.spec.lam

    @property
    def kappa_L(self) -> float:
        return link_kappa(self.link, self.spec.n)

    @property
    def domain(self) -> tuple[float, float]:
        return (max(self.psi.domain[0], self.w.domain[0]),
                min(self.psi.domain[1], self.w.domain[1]))

    def _check_origin(self):
        t0 = self.domain[0]
        if not math.isfinite(t0):
            return
        if self.origin_type == "pole":
            p, dp, _ = self.psi(t0)
            _, dw, _ = self.w(t0)
            if abs(p) > _ENDPOINT_TOL or abs(dp - 1) > _ENDPOINT_TOL or abs(dw) > _ENDPOINT_TOL:
                raise SmoothnessViolation(
                    f"pole needs psi=0, psi'=1, w'=0; got {float(p)}, {float(dp)}, {float(dw)}")
        elif self.origin_type == "boundary":
            v, dw, _ = self.w(t0)
            if abs(v) > _ENDPOINT_TOL or abs(dw) <= _ENDPOINT_TOL:
                raise BoundaryEvaluation(
                    f"boundary needs w=0 and w'!=0; got {float(v)}, {float(dw)}")

    def interior_grid(self, samples: int = 50, margin: float = 0.02) -> np.ndarray:
        """Evaluation points strictly inside the domain (finite ends only)."""
        lo, hi = self.domain
        if not math.isfinite(lo):
            lo = -5.0 if math.isfinite(hi) is False else hi - 5.0
        if not math.isfinite(hi):
            hi = lo + 5.0
        pad = margin * (hi - lo)
        return np.linspace(lo + pad, hi - pad, samples)


@dataclass(frozen=True)
class DoublyWarpedModel:
    """Three-dimensional metric ``dr^2 + phi^2 dth1^2 + psi^2 dth2^2`` with ``w(r)``."""

    spec: ModelSpec
    phi: Profile
    psi: Profile
    w: Profile
    label: str = ""

    @property
    def domain(self) -> tuple[float, float]:
        doms = [self.phi.domain, self.psi.domain, self.w.domain]
        return max(d[0] for d in doms), min(d[1] for d in doms)


@dataclass
class CheckReport:
    """Outcome of one numerical identity check.

    ``passed`` is computed from ``residual <= tolerance`` and cannot be set.
    """

    name: str
    residual: float
    tolerance: float
    samples: int = 1
    notes: str = ""
    target: str = ""
    expect_fail: bool = False
    passed: bool = field(init=False)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        r = float(self.residual)
        self.residual = r if math.isfinite(r) else math.inf
        self.residual = abs(self.residual)
        self.passed = bool(self.residual <= self.tolerance)

    @property
    def as_expected(self) -> bool:
        """True when the outcome matches the expectation (negative controls fail)."""
        return self.passed != self.expect_fail

    def to_json(self) -> dict:
        return {
            "check": self.name,
            "target": self.target,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "samples": self.samples,
            "notes": self.notes,
        }

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        if self.expect_fail:
            tag += " (expected FAIL)" if not self.passed else " (expected FAIL!)"
        return f"{tag:<22} {self.target:<24} {self.name:<32} residual={self.residual:.3e} tol={self.tolerance:.1e}"
