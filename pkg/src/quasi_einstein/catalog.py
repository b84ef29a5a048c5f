"""Closed-form example families packaged as warped models.

Every entry carries the model, a short description of the family and the
values the verifier should reproduce (``mu``, ``rho``, ``kbar``, domain
endpoints).

Families
--------
* ``table1-*``: one-dimensional bases with ``w'' = -(lam/m) w``.
* ``table2-*``: bases that are themselves Einstein, ``Ric = rho g`` with
  ``(m+n-1) rho = (n-1) lam`` and ``Hess w = -kbar w g``,
  ``kbar = lam/(m+n-1)``.
* ``schwarzschild-m*``: the ``lam = 0`` surface with ``w'^2 = 1 - w^(1-m)``.
* ``trivial-*``: constant ``w`` over a space form, ``mu = lam``.
* ``gaussian-family``: the disks of ``table2-pos-pos`` with ``w(0) = 1`` as
  ``m`` grows, whose ``w^m`` approaches ``exp(-lam t^2/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import EmptyCell, InvalidM, UnknownId
from .model import ModelSpec, Profile, WarpedModel, validate_spec

SIGNS = {"pos": 1, "zero": 0, "neg": -1}
SIGN_NAMES = {v: k for k, v in SIGNS.items()}


@dataclass(frozen=True)
class CatalogEntry:
    """A named example: model, family description and expected values."""

    id: str
    model: WarpedModel
    family: str
    expected: dict = field(default_factory=dict)
    tolerance: float = 1e-8
    compact: bool = False
    sample_window: tuple[float, float] | None = None

    @property
    def spec(self) -> ModelSpec:
        return self.model.spec

    def window(self) -> tuple[float, float]:
        """Finite interval used for sampling."""
        if self.sample_window is not None:
            return self.sample_window
        lo, hi = self.model.domain
        lo = lo if math.isfinite(lo) else -3.0
        hi = hi if math.isfinite(hi) else lo + 6.0
        return lo, hi

    def samples(self, count: int = 50, margin: float = 1e-3) -> np.ndarray:
        """Interior points at least ``margin`` (relative) from the ends."""
        lo, hi = self.window()
        pad = max(margin * (hi - lo), 1e-3)
        return np.linspace(lo + pad, hi - pad, count)

    def describe(self) -> dict:
        lo, hi = self.model.domain
        return {"id": self.id, "family": self.family, "n": self.spec.n, "m": self.spec.m,
                "lambda": self.spec.lam, "mu": self.spec.mu, "link": self.model.link,
                "domain": [lo, hi], "expected": self.expected}


def _sign(x) -> int:
    if isinstance(x, str):
        if x not in SIGNS:
            raise EmptyCell(f"unknown sign {x!r}")
        return SIGNS[x]
    return int(np.sign(x))


# ---------------------------------------------------------------------------
# elementary profiles

def _cos(C, s):
    return lambda t: (C * np.cos(s * t), -C * s * np.sin(s * t), -C * s * s * np.cos(s * t))


def _sin_over(s):
    return lambda t: (np.sin(s * t) / s, np.cos(s * t), -s * np.sin(s * t))


def _cosh(C, s):
    return lambda t: (C * np.cosh(s * t), C * s * np.sinh(s * t), C * s * s * np.cosh(s * t))


def _sinh(C, s):
    return lambda t: (C * np.sinh(s * t), C * s * np.cosh(s * t), C * s * s * np.sinh(s * t))


def _exp(C, s):
    return lambda t: (C * np.exp(s * t), C * s * np.exp(s * t), C * s * s * np.exp(s * t))


def _linear(C):
    return lambda t: (C * t, C + 0 * t, 0 * t)


def _const(C):
    return lambda t: (C + 0 * t, 0 * t, 0 * t)


# ---------------------------------------------------------------------------
# one-dimensional bases

def table1(lambda_sign, mu_sign, C: float | None = None, m: float = 3.0,
           lam: float | None = None) -> CatalogEntry:
    """One-dimensional solutions of ``w'' = -k w``, ``k = lam/m``.

    ``lam`` defaults to ``sign * m`` so that ``|k| = 1``. ``C`` defaults to the
    value giving ``mu = m - 1`` when ``mu > 0`` and to 1 otherwise.

    Raises
    ------
    EmptyCell
        The sign pattern admits no solution (``lam >= 0`` with ``mu < 0``, or
        ``lam > 0`` with ``mu = 0``).
    """
    ls, ms = _sign(lambda_sign), _sign(mu_sign)
    if m <= 0:
        raise InvalidM("m must be positive")
    if lam is None:
        lam = ls * m
    elif _sign(lam) != ls:
        raise EmptyCell("lam does not have the requested sign")
    k = lam / m
    r = math.sqrt(abs(k))
    if m == 1:
        # the fiber constant always vanishes; every lam sign has a solution
        ms = {1: 1, 0: 1, -1: 1 if ms >= 0 else -1}[ls] if ms == 0 else ms
    cells = {(1, 1): "cos", (0, 1): "linear", (-1, 1): "sinh",
             (0, 0): "const", (-1, 0): "exp", (-1, -1): "cosh"}
    if (ls, ms) not in cells:
        raise EmptyCell(f"no one-dimensional solution with sign(lam)={ls}, sign(mu)={ms}")
    kind = cells[(ls, ms)]
    if C is None:
        C = (1.0 / r if r > 0 else 1.0) if ms > 0 else 1.0
    if kind == "cos":
        dom, func, mu = (-math.pi / (2 * r), math.pi / (2 * r)), _cos(C, r), (m - 1) * k * C * C
    elif kind == "linear":
        dom, func, mu = (0.0, math.inf), _linear(C), (m - 1) * C * C
    elif kind == "sinh":
        dom, func, mu = (0.0, math.inf), _sinh(C, r), -(m - 1) * k * C * C
    elif kind == "const":
        dom, func, mu = (-math.inf, math.inf), _const(C), 0.0
    elif kind == "exp":
        dom, func, mu = (-math.inf, math.inf), _exp(C, r), 0.0
    else:
        dom, func, mu = (-math.inf, math.inf), _cosh(C, r), (m - 1) * k * C * C
    has_boundary = kind in ("cos", "linear", "sinh")
    spec = validate_spec(ModelSpec(n=1, m=float(m), lam=float(lam), mu=mu, boundary=has_boundary))
    model = WarpedModel(spec, Profile.constant(1.0, dom), Profile.closed(func, dom, f"w={kind}"),
                        link="none", origin_type="boundary" if has_boundary else "interior-level-set")
    window = None
    if not math.isfinite(dom[1]):
        window = (dom[0] if math.isfinite(dom[0]) else -3.0, 3.0)
    ident = f"table1-{SIGN_NAMES[ls]}-{SIGN_NAMES[_sign(mu_sign)]}"
    return CatalogEntry(ident, model, f"one-dimensional base, w={kind}",
                        {"mu": mu, "k": k, "domain": list(dom), "C": C},
                        compact=kind == "cos", sample_window=window)


# ---------------------------------------------------------------------------
# Einstein bases

def table2(lambda_sign, mu_sign, n: int = 3, m: float = 2.0, C: float | None = None,
           lam: float | None = None) -> CatalogEntry:
    """Non-trivial solutions on Einstein bases.

    With ``kbar = lam/(m+n-1)`` and ``s = sqrt(|kbar|)``, the base is
    ``dt^2 + psi^2 g_L`` with one of

    ============  =========================  ==============  =============
    cell          psi                        link            w
    ============  =========================  ==============  =============
    (+, +)        sin(s t)/s                 unit sphere     C cos(s t)
    (0, +)        1                          flat            C t
    (-, +)        cosh(s t)/s                unit hyperbolic C sinh(s t)
    (-, 0)        exp(s t)                   flat            C exp(s t)
    (-, -)        sinh(s t)/s                unit sphere     C cosh(s t)
    ============  =========================  ==============  =============

    ``lam`` defaults to ``sign * (m+n-1)`` so that ``s = 1``.

    Raises
    ------
    EmptyCell
        Unpopulated sign pattern.
    """
    ls, ms = _sign(lambda_sign), _sign(mu_sign)
    if n < 2:
        raise EmptyCell("Einstein-base family needs n >= 2")
    if lam is None:
        lam = ls * (m + n - 1.0)
    kbar = lam / (m + n - 1)
    rho = (n - 1) * kbar
    s = math.sqrt(abs(kbar))
    if m == 1 and ms == 0 and ls >= 0:
        # the fiber constant vanishes; keep the cell keyed by sign(lam)
        ms = 1
    cells = {(1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)}
    if (ls, ms) not in cells:
        raise EmptyCell(f"no Einstein-base solution with sign(lam)={ls}, sign(mu)={ms}")
    if C is None:
        C = (1.0 / s if s > 0 else 1.0) if ms > 0 else 1.0
    if (ls, ms) == (1, 1):
        psi, w, link, dom = _sin_over(s), _cos(C, s), "sphere", (0.0, math.pi / (2 * s))
        mu = (m - 1) * kbar * C * C
        origin, compact = "pole", True
    elif (ls, ms) == (0, 1):
        psi, w, link, dom = _const(1.0), _linear(C), "flat", (0.0, math.inf)
        mu = (m - 1) * C * C
        origin, compact = "boundary", False
    elif (ls, ms) == (-1, 1):
        psi = lambda t: (np.cosh(s * t) / s, np.sinh(s * t), s * np.cosh(s * t))
        w, link, dom = _sinh(C, s), "hyperbolic", (0.0, math.inf)
        mu = (m - 1) * s * s * C * C
        origin, compact = "boundary", False
    elif (ls, ms) == (-1, 0):
        psi, w, link, dom = _exp(1.0, s), _exp(C, s), "flat", (-math.inf, math.inf)
        mu = 0.0
        origin, compact = "interior-level-set", False
    else:
        psi = lambda t: (np.sinh(s * t) / s, np.cosh(s * t), s * np.sinh(s * t))
        w, link, dom = _cosh(C, s), "sphere", (0.0, math.inf)
        mu = -(m - 1) * s * s * C * C
        origin, compact = "pole", False
    if m == 1:
        mu = 0.0
    spec = validate_spec(ModelSpec(n=n, m=float(m), lam=float(lam), mu=mu,
                                   boundary=origin == "boundary" or compact))
    model = WarpedModel(spec, Profile.closed(psi, dom), Profile.closed(w, dom), link=link,
                        origin_type=origin)
    window = None
    if not math.isfinite(dom[1]):
        window = (dom[0] if math.isfinite(dom[0]) else -2.0, 2.0)
    ident = f"table2-{SIGN_NAMES[ls]}-{SIGN_NAMES[_sign(mu_sign)]}"
    return CatalogEntry(ident, model, f"Einstein base with {link} link",
                        {"mu": mu, "rho": rho, "kbar": kbar, "domain": list(dom), "C": C},
                        compact=compact, sample_window=window)


# ---------------------------------------------------------------------------
# Schwarzschild-type surfaces

def _schwarzschild_m2_u(t):
    """Solve ``u sqrt(1+u^2) + asinh(u) = t`` for ``u >= 0`` by Newton's method."""
    t = np.asarray(t, float)
    u = np.where(t < 2.0, t / 2.0, np.sqrt(t))
    for _ in range(60):
        F = u * np.sqrt(1 + u * u) + np.arcsinh(u) - t
        step = F / (2 * np.sqrt(1 + u * u))
        u = np.maximum(u - step, 0.0)
        if np.all(np.abs(step) <= 1e-16 * (1 + np.abs(u))):
            break
    return u


def schwarzschild_profile(m: float) -> tuple[Profile, Profile]:
    """``(w, psi)`` for ``w'^2 = 1 - w^(1-m)``, ``w(0) = 1``, with ``psi = w'/w''(0)``.

    ``m = 2`` uses ``r = 1 + u^2`` with ``t = u sqrt(1+u^2) + asinh(u)``;
    ``m = 3`` has ``w = sqrt(1 + t^2)``. Other ``m`` come from the integrator.
    """
    c = 0.5 * (m - 1)
    if m == 2:
        def wf(t):
            u = _schwarzschild_m2_u(t)
            r = 1 + u * u
            dw = u / np.sqrt(r)
            return r, dw, 0.5 / r ** 2

        def w3(t):
            r, dw, _ = wf(t)
            return -dw / r ** 3
    elif m == 3:
        def wf(t):
            q = 1 + np.asarray(t, float) ** 2
            return np.sqrt(q), t / np.sqrt(q), q ** -1.5

        def w3(t):
            return -3 * np.asarray(t, float) * (1 + np.asarray(t, float) ** 2) ** -2.5
    else:
        from .ode import schwarzschild_solve, _surface_third
        traj = schwarzschild_solve(m, (0.0, 60.0))
        prof = traj.profile("w")
        wf = prof.func

        def w3(t):
            return _surface_third(traj.spec, *prof.func(t))
    dom = (0.0, 60.0)

    def psi(t):
        _, dw, ddw = wf(t)
        return dw / c, ddw / c, w3(t) / c

    return Profile.closed(wf, dom, f"schwarzschild m={m}"), Profile.closed(psi, dom)


def schwarzschild_t_of_r(m: float, r: float) -> float:
    """Distance from the axis to the level ``w = r``: ``int_1^r dr/sqrt(1 - r^(1-m))``."""
    if m == 2:
        u = math.sqrt(r - 1)
        return u * math.sqrt(1 + u * u) + math.asinh(u)
    if m == 3:
        return math.sqrt(r * r - 1)
    # substitute r = 1 + v^2 to remove the endpoint singularity
    f = lambda v: 2 * v / math.sqrt(1 - (1 + v * v) ** (1 - m)) if v > 0 else 2 / math.sqrt(m - 1)
    val, _ = quad(f, 0.0, math.sqrt(r - 1), epsabs=1e-14, epsrel=1e-13)
    return val


def schwarzschild(m: float = 2) -> CatalogEntry:
    """The ``lam = 0`` surface with a smooth axis and ``w`` growing like ``t``.

    The total space ``g + w^2 g_{S^m}`` (unit round sphere) is Ricci flat; in
    the coordinate ``r = w`` the base reads ``dr^2/(1 - r^(1-m)) +
    (1 - r^(1-m)) du^2``.
    """
    if m <= 1:
        raise InvalidM("Schwarzschild-type entries need m > 1")
    w, psi = schwarzschild_profile(m)
    spec = validate_spec(ModelSpec(n=2, m=float(m), lam=0.0, mu=m - 1.0, fiber_kind="sphere",
                                   kappa_F=m - 1.0))
    model = WarpedModel(spec, psi, w, link="sphere", origin_type="pole")
    mid = int(m) if float(m).is_integer() else m
    return CatalogEntry(f"schwarzschild-m{mid}", model, "Ricci-flat total space over a surface",
                        {"mu": m - 1.0, "lambda": 0.0, "w0": 1.0, "ddw0": 0.5 * (m - 1)},
                        sample_window=(0.0, 10.0))


# ---------------------------------------------------------------------------
# trivial solutions

def trivial(lam: float, n: int = 3, m: float = 2.0) -> CatalogEntry:
    """Constant ``w = 1`` over the space form with ``Ric = lam g``; ``mu = lam``."""
    if n == 1:
        if lam != 0:
            raise EmptyCell("a one-dimensional base is flat, so lam must vanish")
        psi, dom, link, origin = _const(1.0), (-math.inf, math.inf), "none", "interior-level-set"
    else:
        K = lam / (n - 1)
        if K > 0:
            s = math.sqrt(K)
            psi, dom = _sin_over(s), (0.0, math.pi / s)
        elif K == 0:
            psi, dom = (lambda t: (t, 1 + 0 * t, 0 * t)), (0.0, math.inf)
        else:
            s = math.sqrt(-K)
            psi = lambda t: (np.sinh(s * t) / s, np.cosh(s * t), s * np.sinh(s * t))
            dom = (0.0, math.inf)
        link, origin = "sphere", "pole"
    spec = validate_spec(ModelSpec(n=n, m=float(m), lam=float(lam), w_constant=1.0))
    model = WarpedModel(spec, Profile.closed(psi, dom), Profile.constant(1.0, dom), link=link,
                        origin_type=origin)
    tag = {0: "l0", 1: "l1", -1: "lm1"}.get(lam, f"l{lam:g}")
    window = (0.0, 3.0) if not math.isfinite(dom[1]) else None
    return CatalogEntry(f"trivial-{tag}", model, "constant potential over a space form",
                        {"mu": float(lam), "rho": float(lam)}, compact=lam > 0 and n > 1,
                        sample_window=window)


# ---------------------------------------------------------------------------
# large-m limit

@dataclass(frozen=True)
class GaussianFamily:
    """Disks (or hyperbolic spaces for ``lam < 0``) with ``w(0) = 1`` as ``m`` grows."""

    lam: float
    n: int
    m_list: tuple
    entries: tuple
    window: tuple
    sup_distance: tuple

    def limit(self, t):
        return np.exp(-0.5 * self.lam * np.asarray(t, float) ** 2)


def w_power_m(lam: float, n: int, m: float, t) -> np.ndarray:
    """``w^m`` for the ``w(0) = 1`` member, evaluated as ``exp(m log w)``."""
    kbar = lam / (m + n - 1)
    s = math.sqrt(abs(kbar))
    t = np.asarray(t, float)
    w = np.cos(s * t) if lam > 0 else np.cosh(s * t)
    return np.exp(m * np.log(w))


def gaussian_limit_family(lam: float = 1.0, n: int = 2, m_list=(1e2, 1e3, 1e4),
                          window=(-1.0, 1.0), samples: int = 2001) -> GaussianFamily:
    """Sup distance of ``w^m`` to ``exp(-lam t^2/2)`` on ``window`` for each ``m``."""
    if lam == 0:
        raise EmptyCell("the Gaussian limit needs lam != 0")
    ms = 1 if lam > 0 else -1
    t = np.linspace(window[0], window[1], samples)
    entries, dists = [], []
    for m in m_list:
        entries.append(table2(1 if lam > 0 else -1, ms, n=n, m=float(m), C=1.0, lam=lam))
        dists.append(float(np.max(np.abs(w_power_m(lam, n, m, t) - np.exp(-0.5 * lam * t * t)))))
    return GaussianFamily(lam, n, tuple(m_list), tuple(entries), tuple(window), tuple(dists))


# ---------------------------------------------------------------------------
# registry

def _t1(ls, ms):
    return lambda n=None, m=None: table1(ls, ms, m=3.0 if m is None else m)


def _t2(ls, ms):
    return lambda n=None, m=None: table2(ls, ms, n=3 if n is None else n, m=2.0 if m is None else m)


def _triv(lam):
    return lambda n=None, m=None: trivial(lam, n=3 if n is None else n, m=2.0 if m is None else m)


REGISTRY: dict[str, tuple[Callable, str]] = {
    "table1-pos-pos": (_t1(1, 1), "one-dimensional, w = C cos"),
    "table1-zero-pos": (_t1(0, 1), "one-dimensional, w = C t"),
    "table1-neg-pos": (_t1(-1, 1), "one-dimensional, w = C sinh"),
    "table1-zero-zero": (_t1(0, 0), "one-dimensional, w = C (trivial)"),
    "table1-neg-zero": (_t1(-1, 0), "one-dimensional, w = C exp"),
    "table1-neg-neg": (_t1(-1, -1), "one-dimensional, w = C cosh"),
    "table2-pos-pos": (_t2(1, 1), "Einstein base: disk, w = C cos"),
    "table2-zero-pos": (_t2(0, 1), "Einstein base: half-space product, w = C t"),
    "table2-neg-pos": (_t2(-1, 1), "Einstein base: hyperbolic link, w = C sinh"),
    "table2-neg-zero": (_t2(-1, 0), "Einstein base: exponential warping, w = C exp"),
    "table2-neg-neg": (_t2(-1, -1), "Einstein base: hyperbolic space, w = C cosh"),
    "schwarzschild-m2": (lambda n=None, m=None: schwarzschild(2), "Ricci-flat total space, m = 2"),
    "schwarzschild-m3": (lambda n=None, m=None: schwarzschild(3), "Ricci-flat total space, m = 3"),
    "trivial-l0": (_triv(0.0), "constant w over flat space"),
    "trivial-l1": (_triv(1.0), "constant w over a round sphere"),
    "trivial-lm1": (_triv(-1.0), "constant w over hyperbolic space"),
    "gaussian-family": (lambda n=None, m=None: gaussian_limit_family(n=2 if n is None else n),
                        "large-m limit of the disks"),
}


def catalog_ids() -> list[str]:
    return list(REGISTRY)


def get(ident: str, n: int | None = None, m: float | None = None):
    """Build a registry entry by id.

    Raises
    ------
    UnknownId
        ``ident`` is not registered.
    """
    if ident not in REGISTRY:
        raise UnknownId(f"unknown catalog id {ident!r}")
    return REGISTRY[ident][0](n=n, m=m)


def model_entries() -> list[CatalogEntry]:
    """All entries that carry a single warped model (everything but the family)."""
    return [get(i) for i in REGISTRY if i != "gaussian-family"]
