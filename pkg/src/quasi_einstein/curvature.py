"""Closed-form curvature of cohomogeneity-one metrics.

The base metric is ``g = dt^2 + psi(t)^2 g_L`` where ``g_L`` is a space form
of dimension ``n - 1`` with Einstein constant ``kappa_L``. In the adapted
orthonormal frame ``(e_0 = d/dt, e_1, ..., e_{n-1})`` every tensor built from
``g``, ``w`` and their derivatives is diagonal, so a handful of scalar
functions of ``t`` describe everything:

* sectional curvature of radial planes ``K_rad = -psi''/psi``;
* sectional curvature of link planes ``K_link = (K_L - psi'^2)/psi^2`` where
  ``K_L = kappa_L/(n-2)``;
* ``Ric = diag(-(n-1) psi''/psi, K_rad + (n-2) K_link, ...)``;
* ``Hess w = diag(w'', w' psi'/psi, ...)``.

These formulas are certified against :mod:`quasi_einstein.oracle`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryEvaluation,
    DomainError,
    FiberMismatch,
    MEqualsOne,
    NonIntegerM,
    UnsupportedLink,
)
from .model import DoublyWarpedModel, ModelSpec, Profile, WarpedModel
from .tensor_algebra import curvature_from_sectional, kulkarni_nomizu

# step for the five-point t-derivative stencil
T_STEP = 1e-3


def t_derivative(f, t, h: float = T_STEP, order: int = 1):
    """Five-point central difference of a scalar function of ``t``.

    Truncation error is ``O(h^4)``. ``order`` may be 1 or 2.
    """
    t = np.asarray(t, float)
    f2, f1, f0 = f(t + 2 * h), f(t + h), f(t)
    g1, g2 = f(t - h), f(t - 2 * h)
    if order == 1:
        return (-f2 + 8 * f1 - 8 * g1 + g2) / (12 * h)
    if order == 2:
        return (-f2 + 16 * f1 - 30 * f0 + 16 * g1 - g2) / (12 * h * h)
    raise ValueError("order must be 1 or 2")


@dataclass(frozen=True)
class CurvatureFrame:
    """Curvature data of a warped model at ``t`` (scalars or arrays).

    ``ric_LL`` is the Ricci eigenvalue on each unit link vector; ``mu1`` and
    ``mu2`` are the Hessian eigenvalues in the radial and link directions.
    """

    t: np.ndarray
    n: int
    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    ddw: np.ndarray
    ric_tt: np.ndarray
    ric_LL: np.ndarray
    scal: np.ndarray
    hessw_tt: np.ndarray
    hessw_LL: np.ndarray
    K_rad: np.ndarray
    K_link: np.ndarray

    @property
    def mu1(self):
        return self.hessw_tt

    @property
    def mu2(self):
        return self.hessw_LL

    @property
    def laplacian_w(self):
        return self.hessw_tt + (self.n - 1) * self.hessw_LL

    def _diag(self, a, b) -> np.ndarray:
        if np.ndim(a) != 0:
            raise ValueError("matrix forms need a scalar t")
        return np.diag([float(a)] + [float(b)] * (self.n - 1))

    def ric_matrix(self) -> np.ndarray:
        return self._diag(self.ric_tt, self.ric_LL)

    def hess_matrix(self) -> np.ndarray:
        return self._diag(self.hessw_tt, self.hessw_LL)

    def sectional_matrix(self) -> np.ndarray:
        n = self.n
        K = np.full((n, n), float(self.K_link))
        K[0, :] = K[:, 0] = float(self.K_rad)
        np.fill_diagonal(K, 0.0)
        return K

    def riemann(self) -> np.ndarray:
        """Full ``(n, n, n, n)`` curvature tensor in the adapted frame."""
        return curvature_from_sectional(self.sectional_matrix())


def warped_curvature(model: WarpedModel, t) -> CurvatureFrame:
    """Curvature, Ricci and Hessian of ``w`` for ``dt^2 + psi^2 g_L``.

    Raises
    ------
    DomainError
        ``t`` outside the domain or ``psi(t) <= 0`` for ``n >= 2``.
    """
    n = model.n
    t = np.asarray(t, float)
    w, dw, ddw = model.w(t)
    if n == 1:
        one, zero = np.ones_like(t), np.zeros_like(t)
        return CurvatureFrame(t, 1, one, zero, zero, w, dw, ddw,
                              zero, zero, zero, ddw, zero, zero, zero)
    psi, dpsi, ddpsi = model.psi(t)
    if np.any(psi <= 0):
        raise DomainError("psi must be positive at evaluation points")
    K_rad = -ddpsi / psi
    if n >= 3:
        K_L = model.kappa_L / (n - 2)
        K_link = (K_L - dpsi ** 2) / psi ** 2
    else:
        K_link = np.zeros_like(psi)
    ric_tt = (n - 1) * K_rad
    ric_LL = K_rad + (n - 2) * K_link
    scal = ric_tt + (n - 1) * ric_LL
    hess_LL = dw * dpsi / psi
    return CurvatureFrame(t, n, psi, dpsi, ddpsi, w, dw, ddw,
                          ric_tt, ric_LL, scal, ddw, hess_LL, K_rad, K_link)


def point_geometry(model: WarpedModel, t: float):
    """Return ``(g, Ric, R, scal, Hess w, grad w)`` as frame arrays at one ``t``."""
    fr = warped_curvature(model, float(t))
    n = model.n
    grad = np.zeros(n)
    grad[0] = float(fr.dw)
    R = fr.riemann() if n >= 2 else np.zeros((1, 1, 1, 1))
    return np.eye(n), fr.ric_matrix(), R, float(fr.scal), fr.hess_matrix(), grad


# ---------------------------------------------------------------------------
# quasi-Einstein scalars

def qe_residual(model: WarpedModel, t) -> np.ndarray:
    """Max component of ``Hess w - (w/m)(Ric - lam g)`` at each ``t``."""
    fr = warped_curvature(model, t)
    m, lam = model.m, model.lam
    r_tt = fr.hessw_tt - fr.w / m * (fr.ric_tt - lam)
    if model.n == 1:
        return np.abs(r_tt)
    r_LL = fr.hessw_LL - fr.w / m * (fr.ric_LL - lam)
    return np.maximum(np.abs(r_tt), np.abs(r_LL))


def mu_values(model: WarpedModel, t) -> tuple[np.ndarray, np.ndarray]:
    """The two pointwise expressions for ``mu``.

    Returns ``w Lap w + (m-1)|w'|^2 + lam w^2`` and
    ``k w^2 + (m-1)|w'|^2`` with ``k = (scal + (m-n) lam)/m``.
    """
    fr = warped_curvature(model, t)
    m, n, lam = model.m, model.n, model.lam
    mu_a = fr.w * fr.laplacian_w + (m - 1) * fr.dw ** 2 + lam * fr.w ** 2
    k = (fr.scal + (m - n) * lam) / m
    mu_b = k * fr.w ** 2 + (m - 1) * fr.dw ** 2
    return mu_a, mu_b


@dataclass(frozen=True)
class PQComponents:
    """Diagonal data of ``rho``, ``P`` and ``Q`` in the adapted frame."""

    rho: np.ndarray
    P_tt: np.ndarray
    P_LL: np.ndarray
    Q_rad: np.ndarray
    Q_link: np.ndarray

    def trace_P(self, n: int):
        return self.P_tt + (n - 1) * self.P_LL


def pq_components(model: WarpedModel, t) -> PQComponents:
    """``rho``, the eigenvalues of ``P`` and the sectional values of ``Q``.

    With ``Q = R + (2/m) Ric o g - ((lam + rho)/m) g o g`` and
    ``(s o g)(X, Y, Y, X) = (s_X + s_Y)/2`` for eigenvectors of ``s``.
    """
    if model.m == 1:
        raise MEqualsOne("rho, P and Q need m > 1")
    fr = warped_curvature(model, t)
    n, m, lam = model.n, model.m, model.lam
    rho = ((n - 1) * lam - fr.scal) / (m - 1)
    c = (lam + rho) / m
    Q_rad = fr.K_rad + (fr.ric_tt + fr.ric_LL) / m - c
    Q_link = fr.K_link + 2.0 * fr.ric_LL / m - c
    return PQComponents(rho, fr.ric_tt - rho, fr.ric_LL - rho, Q_rad, Q_link)


# ---------------------------------------------------------------------------
# weighted Laplacian and divergences

def weighted_density(model: WarpedModel, a: float, t):
    """Density of ``w^a dvol`` with respect to ``dt`` times the link volume."""
    w = model.w.value(t)
    psi = model.psi.value(t) if model.n > 1 else 1.0
    return np.power(w, a) * np.power(psi, model.n - 1)


def weighted_laplacian(a: float, u: Profile, model: WarpedModel, t):
    """``L_a u = u'' + (n-1)(psi'/psi) u' + a (w'/w) u'`` for radial ``u``.

    Raises
    ------
    BoundaryEvaluation
        ``w(t) <= 0``.
    """
    t = np.asarray(t, float)
    w, dw, _ = model.w(t)
    if np.any(w <= 0):
        raise BoundaryEvaluation("weighted Laplacian needs w > 0")
    _, du, ddu = u(t)
    out = ddu + a * dw / w * du
    if model.n > 1:
        psi, dpsi, _ = model.psi(t)
        out = out + (model.n - 1) * dpsi / psi * du
    return out


def _x(model: WarpedModel, t):
    if model.n == 1:
        return np.zeros_like(np.asarray(t, float))
    psi, dpsi, _ = model.psi(t)
    if np.any(psi <= 0):
        raise DomainError("psi must be positive")
    return dpsi / psi


def cohomog1_divergence(a, b, model: WarpedModel, t, h: float = T_STEP):
    """``(div T)(d/dt)`` for ``T = a(t) dt^2 + b(t) psi^2 g_L``.

    ``a`` and ``b`` are callables of ``t``; ``a'`` is taken with a five-point
    stencil. The link components vanish by symmetry.
    """
    t = np.asarray(t, float)
    lo, hi = model.domain
    if np.any(t - 2 * h < lo) or np.any(t + 2 * h > hi):
        raise DomainError("divergence stencil leaves the domain")
    return t_derivative(a, t, h) + (model.n - 1) * _x(model, t) * (a(t) - b(t))


def cohomog1_divergence4(q_rad, q_link, model: WarpedModel, t, h: float = T_STEP):
    """Independent component of ``div T`` for a diagonal curvature-type tensor.

    ``T`` has ``T(e_0, e_i, e_i, e_0) = q_rad(t)`` and
    ``T(e_i, e_j, e_j, e_i) = q_link(t)`` for link vectors ``e_i``, ``e_j``
    and no other independent components. Contracting on the last slot, the
    only nonzero component of ``div T`` is

    ``div T(e_0, e_i, e_i) = q_rad' + (n-2)(psi'/psi)(q_rad - q_link)``

    together with its antisymmetric image. Returns that scalar.
    """
    if model.n >= 2 and model.link not in ("sphere", "flat", "hyperbolic"):
        raise UnsupportedLink("divergence of a 4-tensor needs a space-form link")
    t = np.asarray(t, float)
    lo, hi = model.domain
    if np.any(t - 2 * h < lo) or np.any(t + 2 * h > hi):
        raise DomainError("divergence stencil leaves the domain")
    return t_derivative(q_rad, t, h) + (model.n - 2) * _x(model, t) * (q_rad(t) - q_link(t))


# ---------------------------------------------------------------------------
# total space

@dataclass(frozen=True)
class TotalSpaceRicci:
    """Ricci eigenvalues of ``g + w^2 g_F`` in the radial, link and fiber blocks."""

    ric_tt: np.ndarray
    ric_LL: np.ndarray
    ric_FF: np.ndarray
    lam: float
    n: int

    def residual(self):
        r = np.maximum(np.abs(self.ric_tt - self.lam), np.abs(self.ric_FF - self.lam))
        if self.n > 1:
            r = np.maximum(r, np.abs(self.ric_LL - self.lam))
        return r

    def matrix(self, m: int) -> np.ndarray:
        return np.diag([float(self.ric_tt)] + [float(self.ric_LL)] * (self.n - 1)
                       + [float(self.ric_FF)] * m)


def einstein_total_space(model: WarpedModel, t, kappa_F: float | None = None) -> TotalSpaceRicci:
    """Ricci curvature of the warped product ``g_E = g + w^2 g_F``.

    The fiber ``F`` is Einstein of dimension ``m`` with constant ``kappa_F``
    (default: ``model.spec.mu``).

    Raises
    ------
    NonIntegerM
        ``m`` not an integer.
    FiberMismatch
        ``kappa_F`` differs from ``model.spec.mu``.
    """
    spec = model.spec
    if not spec.m_is_integer:
        raise NonIntegerM(f"total space needs integer m, got {spec.m}")
    mu = spec.mu
    if kappa_F is None:
        if mu is None:
            raise FiberMismatch("fiber constant unknown: set spec.mu or pass kappa_F")
        kappa_F = mu
    elif mu is not None and not math.isclose(kappa_F, mu, rel_tol=1e-9, abs_tol=1e-12):
        raise FiberMismatch(f"fiber Einstein constant {kappa_F} differs from mu={mu}")
    fr = warped_curvature(model, t)
    m, n = int(spec.m), model.n
    x = fr.dpsi / fr.psi if n > 1 else 0.0
    y = fr.dw / fr.w
    ric_tt = fr.ric_tt - m * fr.ddw / fr.w
    ric_LL = fr.ric_LL - m * x * y
    ric_FF = kappa_F / fr.w ** 2 - fr.ddw / fr.w - (m - 1) * y ** 2 - (n - 1) * x * y
    return TotalSpaceRicci(ric_tt, ric_LL, ric_FF, spec.lam, n)


# ---------------------------------------------------------------------------
# doubly warped three-dimensional base

@dataclass(frozen=True)
class DoublyWarpedFrame:
    """Curvature of ``dr^2 + phi^2 dth1^2 + psi^2 dth2^2`` and ``Hess w``."""

    ric: np.ndarray      # (3, ...) Ricci eigenvalues
    hess: np.ndarray     # (3, ...) Hessian eigenvalues
    sectional: np.ndarray  # (K01, K02, K12)
    scal: np.ndarray
    w: np.ndarray


def doubly_warped_curvature(model: DoublyWarpedModel, r) -> DoublyWarpedFrame:
    r = np.asarray(r, float)
    f, df, ddf = model.phi(r)
    p, dp, ddp = model.psi(r)
    w, dw, ddw = model.w(r)
    if np.any(f <= 0) or np.any(p <= 0):
        raise DomainError("warping functions must be positive")
    K01, K02, K12 = -ddf / f, -ddp / p, -df * dp / (f * p)
    ric = np.array([K01 + K02, K01 + K12, K02 + K12])
    hess = np.array([ddw, dw * df / f, dw * dp / p])
    return DoublyWarpedFrame(ric, hess, np.array([K01, K02, K12]), ric.sum(axis=0), w)


def doubly_warped_qe_residual(model: DoublyWarpedModel, r):
    fr = doubly_warped_curvature(model, r)
    m, lam = model.spec.m, model.spec.lam
    return np.max(np.abs(fr.hess - fr.w / m * (fr.ric - lam)), axis=0)


def doubly_warped_mu_values(model: DoublyWarpedModel, r) -> tuple[np.ndarray, np.ndarray]:
    """The two pointwise expressions for ``mu`` on the doubly warped base (see :func:`mu_values`)."""
    fr = doubly_warped_curvature(model, r)
    m, lam, n = model.spec.m, model.spec.lam, 3
    f, df, _ = model.phi(r)
    p, dp, _ = model.psi(r)
    w, dw, ddw = model.w(r)
    lap = ddw + (df / f + dp / p) * dw
    mu_a = w * lap + (m - 1) * dw ** 2 + lam * w ** 2
    k = (fr.scal + (m - n) * lam) / m
    return mu_a, k * w ** 2 + (m - 1) * dw ** 2


def doubly_warped_cotton(model: DoublyWarpedModel, r, h: float = T_STEP):
    """Independent Cotton components ``C(e_1, e_0, e_1)`` and ``C(e_2, e_0, e_2)``.

    ``C(X, Y, Z) = (nabla_X S)(Y, Z) - (nabla_Y S)(X, Z)`` for the Schouten
    tensor ``S``; a three-manifold is locally conformally flat exactly when
    ``C = 0``.
    """
    r = np.asarray(r, float)

    def schouten(s, i):
        fr = doubly_warped_curvature(model, s)
        return fr.ric[i] - fr.scal / 4.0

    f, df, _ = model.phi(r)
    p, dp, _ = model.psi(r)
    S0, S1, S2 = schouten(r, 0), schouten(r, 1), schouten(r, 2)
    c1 = df / f * (S0 - S1) - t_derivative(lambda s: schouten(s, 1), r, h)
    c2 = dp / p * (S0 - S2) - t_derivative(lambda s: schouten(s, 2), r, h)
    return c1, c2


def doubly_warped_p(model: DoublyWarpedModel, r: float) -> np.ndarray:
    """``P = Ric - rho g`` as a 3x3 frame matrix at one point."""
    spec = model.spec
    if spec.m == 1:
        raise MEqualsOne("P needs m > 1")
    fr = doubly_warped_curvature(model, float(r))
    rho = (2 * spec.lam - float(fr.scal)) / (spec.m - 1)
    return np.diag(fr.ric) - rho * np.eye(3)


# ---------------------------------------------------------------------------
# conformal relation

def conformal_target(model: WarpedModel, t: float, sign: float) -> np.ndarray:
    """Frame components of ``w^2 Q + sign * (mu/(m-1)) g o g``.

    These are the components of the candidate curvature of ``w^{-2} g`` in a
    frame orthonormal for ``w^{-2} g``.
    """
    from .tensor_algebra import q_tensor
    spec = model.spec
    if spec.m <= 1:
        raise MEqualsOne("conformal relation needs m > 1")
    g, ric, R, scal, _, _ = point_geometry(model, t)
    rho = ((spec.n - 1) * spec.lam - scal) / (spec.m - 1)
    Q = q_tensor(R, ric, g, rho, spec)
    mu = float(np.mean(mu_values(model, t)))
    w = float(model.w.value(t))
    return w ** 2 * Q + sign * mu / (spec.m - 1) * kulkarni_nomizu(g, g)


_CONFORMAL_SIGN: list[float] = []


def calibrate_conformal_sign(reference: WarpedModel | None = None, t: float | None = None) -> float:
    """Fix the sign in ``R_{w^-2 g} = w^-2 Q +/- (mu/(m-1)) g o g``.

    Both signs are tested against the finite-difference curvature of
    ``w^{-2} g`` on a reference instance (default: hyperbolic space with
    ``w = cosh``); the sign with the smaller residual is cached and returned.
    """
    if reference is None and _CONFORMAL_SIGN:
        return _CONFORMAL_SIGN[0]
    from .oracle import conformal_curvature_fd
    if reference is None:
        from .catalog import table2
        reference = table2(-1, -1, n=3, m=2).model
    if t is None:
        lo, hi = reference.domain
        t = 0.7 if not math.isfinite(hi) else 0.5 * (lo + hi)
    Rfd = conformal_curvature_fd(reference, t)
    res = {s: float(np.abs(Rfd - conformal_target(reference, t, s)).max()) for s in (1.0, -1.0)}
    sign = min(res, key=res.get)
    if res[sign] > 1e-4 or res[-sign] < 1e-4:
        raise RuntimeError(f"conformal calibration inconclusive: {res}")
    if not _CONFORMAL_SIGN:
        _CONFORMAL_SIGN.append(sign)
    return sign


def conformal_check(model: WarpedModel, t: float) -> float:
    """Max frame-component residual of the conformal curvature relation.

    Compares the finite-difference curvature of ``w^{-2} g`` with
    ``w^{-2} Q + s (mu/(m-1)) g~ o g~`` where ``s`` comes from
    :func:`calibrate_conformal_sign`.
    """
    from .oracle import conformal_curvature_fd
    if model.n >= 2 and model.link not in ("sphere", "flat", "hyperbolic"):
        raise UnsupportedLink("conformal check needs a space-form link")
    w = float(model.w.value(t))
    if w <= 0:
        raise BoundaryEvaluation("conformal check needs w > 0")
    sign = calibrate_conformal_sign()
    return float(np.abs(conformal_curvature_fd(model, t) - conformal_target(model, t, sign)).max())
