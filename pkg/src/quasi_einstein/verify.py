"""Identity checks on warped models, catalog entries and solver output.

Each ``check_*`` function is a pure function of its inputs and returns a
list of :class:`~quasi_einstein.model.CheckReport`. :func:`run_suite`
resolves target ids, runs the requested checks in a fixed order and adds
the negative controls.

Default tolerances follow the dominant error source: ``1e-12`` for purely
algebraic identities, ``1e-7`` for closed-form differential identities,
``1e-5`` for finite-difference comparisons and ``1e-8`` for quadrature.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.integrate import quad

from . import catalog
from .curvature import (
    T_STEP,
    cohomog1_divergence,
    cohomog1_divergence4,
    doubly_warped_curvature,
    doubly_warped_mu_values,
    doubly_warped_p,
    doubly_warped_qe_residual,
    einstein_total_space,
    mu_values,
    point_geometry,
    pq_components,
    qe_residual,
    t_derivative,
    warped_curvature,
    weighted_laplacian,
)
from .errors import (
    DimensionTooLow,
    MEqualsOne,
    NonCompactEntry,
    NonIntegerM,
    QEError,
    UnknownId,
    UnsupportedLink,
)
from .model import CheckReport, DoublyWarpedModel, ModelSpec, Profile, WarpedModel
from .oracle import fd_divergence, total_space_ricci_fd, warped_chart, warped_point
from .tensor_algebra import kulkarni_nomizu, q_tensor, sym_eigen, weyl_schouten

TOL_ALGEBRAIC = 1e-12
TOL_DIFFERENTIAL = 1e-7
TOL_FD = 1e-5
TOL_QUADRATURE = 1e-8
TOL_MU = 1e-8
TOL_DIV = 1e-6
EIGEN_MERGE = 1e-6

CHECKS = ("qe", "mu", "weighted", "div", "weyl", "integrals", "total-space")


# ---------------------------------------------------------------------------
# helpers

def _samples_for(model, count: int = 25, margin: float = 1e-3, window=None) -> np.ndarray:
    lo, hi = window if window is not None else model.domain
    if not math.isfinite(lo):
        lo = -3.0 if not math.isfinite(hi) else hi - 6.0
    if not math.isfinite(hi):
        hi = lo + 6.0
    pad = max(margin * (hi - lo), margin)
    return np.linspace(lo + pad, hi - pad, count)


SAMPLED_STEP = 5e-3


def _is_sampled(model) -> bool:
    return getattr(model.w, "kind", "") == "sampled"


def _step(model, t: float) -> float:
    """Stencil step that keeps ``t +- 2h`` inside the domain.

    Interpolated solver output carries noise near the integrator tolerance,
    so a wider stencil is used there.
    """
    lo, hi = model.domain
    room = min(t - lo, hi - t)
    base = SAMPLED_STEP if _is_sampled(model) else T_STEP
    return min(base, 0.4 * room)


def _away_from_ends(model, ts, frac: float = 0.05) -> np.ndarray:
    """Samples at least ``frac`` of the sampled span from finite domain ends.

    Stencils of curvature quantities lose accuracy next to an axis, where
    the link term divides by ``psi^2``.
    """
    ts = np.asarray(ts, float)
    span = float(ts.max() - ts.min()) if ts.size > 1 else 1.0
    lo, hi = model.domain
    keep = np.ones(ts.size, bool)
    if math.isfinite(lo):
        keep &= ts - lo >= frac * span
    if math.isfinite(hi):
        keep &= hi - ts >= frac * span
    return ts[keep] if keep.any() else ts


def _fmt_notes(d: dict) -> str:
    return "; ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items())


def _report(name, residual, tol, samples, notes=None, target="", expect_fail=False):
    text = notes if isinstance(notes, str) else _fmt_notes(notes or {})
    return CheckReport(name, float(residual), tol, int(samples), text, target, expect_fail)


def _perturbed_w(model: WarpedModel, eps: float = 0.01) -> WarpedModel:
    """``w + eps t^2``: a potential that no longer solves the equation."""
    bump = Profile.closed(lambda t: (eps * np.asarray(t, float) ** 2, 2 * eps * np.asarray(t, float),
                                     2 * eps + 0 * np.asarray(t, float)), model.w.domain)
    return WarpedModel(model.spec, model.psi, model.w.plus(bump), link=model.link,
                       origin_type="interior-level-set", label="perturbed", check_origin=False)


# ---------------------------------------------------------------------------
# pointwise equation and fiber constant

def check_qe_residual(model, sample_ts=None, tol: float = TOL_MU, target: str = "",
                      expect_fail: bool = False) -> list[CheckReport]:
    """Max of ``|Hess w - (w/m)(Ric - lam g)|`` over samples and components."""
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    if isinstance(model, DoublyWarpedModel):
        r = doubly_warped_qe_residual(model, ts)
    else:
        r = qe_residual(model, ts)
    return [_report("qe_residual", np.max(r), tol, ts.size, {"max_at_t": float(ts[np.argmax(r)])},
                    target, expect_fail)]


def _worst(values) -> float:
    """Largest value, with any non-finite entry counting as infinite."""
    vals = [float(v) if math.isfinite(float(v)) else math.inf for v in values]
    return max(vals) if vals else 0.0


def _hess_size(model: WarpedModel, t: float) -> float:
    _, dw, ddw = model.w(t)
    out = abs(float(ddw))
    if model.n > 1:
        psi, dpsi, _ = model.psi(t)
        out = max(out, abs(float(dw) * float(dpsi) / float(psi)))
    return out


def _boundary_limit(model: WarpedModel, end: float, f: Callable[[float], float],
                    delta: float = 1e-4) -> float:
    """Value of ``f`` at a domain end, extrapolated from inside when not finite there.

    Uses the quadratic extrapolation ``3 f(d) - 3 f(2d) + f(3d)``.
    """
    with np.errstate(all="ignore"):
        try:
            v = float(f(end))
        except (ZeroDivisionError, QEError):
            v = math.nan
    if math.isfinite(v):
        return v
    lo, hi = model.domain
    sgn = 1.0 if end == lo else -1.0
    vals = [float(f(end + sgn * k * delta)) for k in (1, 2, 3)]
    return 3 * vals[0] - 3 * vals[1] + vals[2]


def _boundary_ends(model: WarpedModel) -> list[float]:
    ends = []
    for e in model.domain:
        if math.isfinite(e):
            v, dw, _ = model.w(e)
            if abs(float(v)) <= 1e-8:
                ends.append(float(e))
    return ends


def check_mu(model, sample_ts=None, tol: float = TOL_MU, target: str = "",
             expect_fail: bool = False) -> list[CheckReport]:
    """Constancy and agreement of the fiber-constant expressions.

    Residual is the largest of: the sample standard deviation of ``mu``
    relative to ``max(1, |mu|)``; the gap between the two pointwise
    expressions; the gap to ``model.spec.mu``; at each end where ``w = 0``,
    the gap to ``(m-1) w'^2`` and the size of ``Hess w``. A vanishing slope at
    the boundary fails the check outright.
    """
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    if isinstance(model, DoublyWarpedModel):
        mu_a, mu_b = doubly_warped_mu_values(model, ts)
    else:
        mu_a, mu_b = mu_values(model, ts)
    mean = float(np.mean(mu_a))
    scale = max(1.0, abs(mean))
    parts = {
        "std": float(np.std(mu_a, ddof=1) / scale) if ts.size > 1 else 0.0,
        "forms": float(np.max(np.abs(mu_a - mu_b)) / scale),
    }
    spec_mu = model.spec.mu
    if spec_mu is not None:
        parts["spec"] = abs(mean - spec_mu) / scale
    if isinstance(model, WarpedModel):
        for end in _boundary_ends(model):
            slope = _boundary_limit(model, end, lambda t: model.w(t)[1])
            parts[f"boundary@{end:.6g}"] = abs((model.m - 1) * slope * slope - mean) / scale
            if not abs(slope) > 1e-12:
                parts["vanishing-slope"] = math.inf
            parts[f"hess@{end:.6g}"] = abs(_boundary_limit(model, end, lambda t: _hess_size(model, t)))
    notes = dict(parts, mu=mean)
    return [_report("mu", _worst(parts.values()), tol, ts.size, notes, target, expect_fail)]


# ---------------------------------------------------------------------------
# weighted Laplacian identities

def _scal(model, t):
    return warped_curvature(model, t).scal


def _rho(model, t):
    return pq_components(model, t).rho


def check_weighted_identities(model: WarpedModel, sample_ts=None, tol: float = TOL_DIFFERENTIAL,
                              target: str = "", expect_fail: bool = False) -> list[CheckReport]:
    """Weighted-Laplacian identities along radial functions.

    * ``L_{m-2}(w^2) = -2 lam w^2 + 2 mu``;
    * ``L_{m-2}(phi) = -2 lam phi`` with ``phi = w^2 - mu/lam`` (``lam != 0``);
    * ``(1/2) L_{m+1}(scal) = ((m-1)/m)((lam - rho) tr P - |P|^2)
      + (m-1) P(grad w, grad w)/w^2``;
    * ``(w/2) rho' = P(grad w, d/dt)``.

    The scalar-curvature identity follows from ``grad scal = -(2(m-1)/w)
    P(grad w)``, ``div P = -((m+1)/2) grad rho`` and
    ``<P, Hess w> = (w/m)(|P|^2 + (rho - lam) tr P)``. Derivatives of
    ``scal`` and ``rho`` use a five-point stencil at samples kept away from
    the domain ends.

    Raises
    ------
    MEqualsOne
        ``m = 1``: ``rho`` and ``P`` are undefined.
    """
    if model.m == 1:
        raise MEqualsOne("weighted identities involving rho need m > 1")
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    m, n, lam = model.m, model.n, model.lam
    mu = float(np.mean(mu_values(model, ts)[0]))
    w, dw, ddw = model.w(ts)
    sq = Profile(lambda t: tuple(np.asarray(a) for a in _square(model, t)), model.domain)
    L = weighted_laplacian(m - 2, sq, model, ts)
    parts = {"L(w^2)": float(np.max(np.abs(L + 2 * lam * w ** 2 - 2 * mu)))}
    if lam != 0:
        phi = w ** 2 - mu / lam
        parts["L(phi)"] = float(np.max(np.abs(L + 2 * lam * phi)))
    scal_res, rho_res = 0.0, 0.0
    for t in _away_from_ends(model, ts):
        h = _step(model, t)
        f = lambda s: _scal(model, s)
        d1, d2 = t_derivative(f, t, h, 1), t_derivative(f, t, h, 2)
        wt, dwt, _ = model.w(t)
        x = 0.0
        if n > 1:
            psi, dpsi, _ = model.psi(t)
            x = float(dpsi / psi)
        Ls = d2 + (n - 1) * x * d1 + (m + 1) * float(dwt / wt) * d1
        pq = pq_components(model, t)
        trP = pq.P_tt + (n - 1) * pq.P_LL
        normP = pq.P_tt ** 2 + (n - 1) * pq.P_LL ** 2
        target_val = ((m - 1) / m * ((lam - pq.rho) * trP - normP)
                      + (m - 1) * pq.P_tt * float(dwt / wt) ** 2)
        scal_res = max(scal_res, abs(0.5 * Ls - target_val))
        drho = t_derivative(lambda s: _rho(model, s), t, h, 1)
        rho_res = max(rho_res, abs(0.5 * float(wt) * drho - pq.P_tt * float(dwt)))
    parts["L(scal)"] = float(scal_res)
    parts["grad rho"] = float(rho_res)
    return [_report("weighted_identities", max(parts.values()), tol, ts.size, parts, target,
                    expect_fail)]


def _square(model, t):
    w, dw, ddw = model.w(t)
    return w * w, 2 * w * dw, 2 * dw * dw + 2 * w * ddw


# ---------------------------------------------------------------------------
# divergence identities

def _frame_tensors(model: WarpedModel):
    """Coordinate versions of ``P`` and ``Q`` on the chart used by the oracle."""
    metric, _ = warped_chart(model)

    def parts(x):
        G = metric(x)
        D = np.zeros_like(G)
        D[0, 0] = 1.0
        return G, D, pq_components(model, float(x[0]))

    def P(x):
        G, D, c = parts(x)
        return c.P_LL * G + (c.P_tt - c.P_LL) * D

    def Q(x):
        G, D, c = parts(x)
        return c.Q_link * kulkarni_nomizu(G, G) + 2.0 * (c.Q_rad - c.Q_link) * kulkarni_nomizu(G, D)

    return metric, P, Q


def check_div_identities(model: WarpedModel, sample_ts=None, tol: float = TOL_DIV,
                         fd_tol: float = TOL_FD, target: str = "",
                         expect_fail: bool = False) -> list[CheckReport]:
    """``div(w^(m+1) P) = 0``, ``div(w^(m+1) Q) = 0`` and the derivative of ``P``.

    The derivative identity is the radial component of
    ``(w/m)(nabla_X P)(Y,Z) - (w/m)(nabla_Y P)(X,Z)
    = -Q(X,Y,Z,grad w) - (1/m)(g o g)(X,Y,Z,P(grad w))`` with ``X`` radial
    and ``Y = Z`` a link vector; it has its own report. The closed-form divergences of ``P`` and ``Q`` are
    compared once with the finite-difference oracle at a mid sample; that
    comparison enters each report scaled by ``tol/fd_tol``.

    Raises
    ------
    UnsupportedLink
        The link is not a space form.
    MEqualsOne
        ``m = 1``.
    """
    if model.m == 1:
        raise MEqualsOne("P and Q need m > 1")
    if model.n >= 2 and model.link not in ("sphere", "flat", "hyperbolic"):
        raise UnsupportedLink("divergence identities need a space-form link")
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    m, n = model.m, model.n
    pq = lambda s: pq_components(model, s)
    wp = lambda s: np.asarray(model.w.value(s)) ** (m + 1)
    res_P = res_Q = res_diff = 0.0
    for t in ts:
        h = _step(model, t)
        dP = cohomog1_divergence(lambda s: wp(s) * pq(s).P_tt, lambda s: wp(s) * pq(s).P_LL,
                                 model, t, h)
        res_P = max(res_P, abs(float(dP)))
        if n >= 2:
            dQ = cohomog1_divergence4(lambda s: wp(s) * pq(s).Q_rad,
                                      lambda s: wp(s) * pq(s).Q_link, model, t, h)
            res_Q = max(res_Q, abs(float(dQ)))
            c = pq(t)
            w, dw, _ = model.w(t)
            x = float(model.psi(t)[1] / model.psi(t)[0])
            dPLL = t_derivative(lambda s: pq(s).P_LL, t, h, 1)
            lhs = float(w) / m * (dPLL - x * (c.P_tt - c.P_LL))
            rhs = -float(dw) * c.Q_rad - c.P_tt * float(dw) / m
            res_diff = max(res_diff, abs(lhs - rhs))
    # one finite-difference cross-check of the unweighted divergences
    t_mid = float(ts[len(ts) // 2])
    h = _step(model, t_mid)
    closed_P = float(cohomog1_divergence(lambda s: pq(s).P_tt, lambda s: pq(s).P_LL, model, t_mid, h))
    metric, P_coord, Q_coord = _frame_tensors(model)
    point = warped_point(model, t_mid)
    fd_P = float(fd_divergence(metric, P_coord, point)[0])
    fd_res_P = abs(closed_P - fd_P) / (1.0 + abs(closed_P))
    reports = [_report("div(w^(m+1) P)", max(res_P, fd_res_P * tol / fd_tol), tol, ts.size,
                       {"closed": res_P, "fd_crosscheck": fd_res_P}, target, expect_fail)]
    if n >= 2:
        closed_Q = float(cohomog1_divergence4(lambda s: pq(s).Q_rad, lambda s: pq(s).Q_link,
                                              model, t_mid, h))
        fd_Q = float(fd_divergence(metric, Q_coord, point)[0, 1, 1])
        fd_res_Q = abs(closed_Q - fd_Q) / (1.0 + abs(closed_Q))
        reports.append(_report("div(w^(m+1) Q)", max(res_Q, fd_res_Q * tol / fd_tol),
                               tol, ts.size, {"closed": res_Q, "fd_crosscheck": fd_res_Q},
                               target, expect_fail))
        reports.append(_report("derivative of P", res_diff, tol, ts.size, "", target,
                               expect_fail))
    return reports


# ---------------------------------------------------------------------------
# Weyl structure

def _two_cluster_defect(values: np.ndarray, radial: float) -> tuple[float, bool]:
    """Distance of a spectrum from the pattern ``{1, n-1}`` with the radial value isolated.

    Returns ``(defect, merged)``: ``defect`` is the spread of the remaining
    eigenvalues after removing the one closest to ``radial``; ``merged`` tells
    whether all eigenvalues nearly coincide.
    """
    vals = np.sort(np.asarray(values, float))
    i = int(np.argmin(np.abs(vals - radial)))
    rest = np.delete(vals, i)
    defect = float(rest.max() - rest.min()) if rest.size else 0.0
    scale = 1.0 + float(np.max(np.abs(vals)))
    merged = float(vals.max() - vals.min()) <= EIGEN_MERGE * scale
    return defect / scale, merged


def check_weyl_structure(model, sample_ts=None, tol: float = TOL_DIFFERENTIAL,
                         alg_tol: float = 1e-10, target: str = "",
                         expect_fail: bool = False) -> list[CheckReport]:
    """Consequences of harmonic Weyl curvature with vanishing radial Weyl part.

    * ``Q(X,Y,Z,grad w) = ((m+n-2)/(m(n-1))) (g o g)(X,Y,Z,P(grad w))``;
    * ``P`` has eigenvalue clusters of sizes ``{1, n-1}`` with ``d/dt`` in
      the single one (or a single cluster);
    * ``Q = W + (2(n+m-2)/(m(n-2))) P o g - ((n+m-2)/(m(n-1)(n-2))) tr(P) g o g``.

    For a :class:`DoublyWarpedModel` only the eigenstructure and the
    decomposition are evaluated.

    Raises
    ------
    DimensionTooLow
        ``n < 3``.
    MEqualsOne
        ``m = 1``.
    """
    n = 3 if isinstance(model, DoublyWarpedModel) else model.n
    spec = model.spec
    if n < 3:
        raise DimensionTooLow("Weyl structure needs n >= 3")
    if spec.m == 1:
        raise MEqualsOne("P and Q need m > 1")
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    m, lam = spec.m, spec.lam
    c_wp = (m + n - 2) / (m * (n - 1))
    eig_res, decomp_res, divwp_res = 0.0, 0.0, 0.0
    merged_at = []
    for t in ts:
        if isinstance(model, DoublyWarpedModel):
            fr = doubly_warped_curvature(model, float(t))
            from .tensor_algebra import curvature_from_sectional
            K01, K02, K12 = (float(v) for v in fr.sectional)
            R = curvature_from_sectional(np.array([[0, K01, K02], [K01, 0, K12], [K02, K12, 0]]))
            g = np.eye(3)
            ric = np.diag(fr.ric.astype(float))
            scal = float(fr.scal)
            P = doubly_warped_p(model, float(t))
            grad = np.array([float(model.w(t)[1]), 0.0, 0.0])
        else:
            g, ric, R, scal, _, grad = point_geometry(model, float(t))
            P = ric - ((n - 1) * lam - scal) / (m - 1) * g
        rho = ((n - 1) * lam - scal) / (m - 1)
        Q = q_tensor(R, ric, g, rho, spec)
        defect, merged = _two_cluster_defect(np.linalg.eigvalsh(P), float(P[0, 0]))
        offdiag = float(np.max(np.abs(P[0, 1:])))
        eig_res = max(eig_res, defect, offdiag)
        if merged:
            merged_at.append(float(t))
        W = weyl_schouten(R, ric, scal, g).W
        trP = float(np.trace(P))
        rhs = (W + 2 * (n + m - 2) / (m * (n - 2)) * kulkarni_nomizu(P, g)
               - (n + m - 2) / (m * (n - 1) * (n - 2)) * trP * kulkarni_nomizu(g, g))
        decomp_res = max(decomp_res, float(np.max(np.abs(Q - rhs))) / (1.0 + float(np.max(np.abs(Q)))))
        if not isinstance(model, DoublyWarpedModel):
            lhs = np.einsum("abcd,d->abc", Q, grad)
            gg = kulkarni_nomizu(g, g)
            right = c_wp * np.einsum("abcd,d->abc", gg, P @ grad)
            divwp_res = max(divwp_res, float(np.max(np.abs(lhs - right)))
                            / (1.0 + float(np.max(np.abs(lhs)))))
    reports = []
    if not isinstance(model, DoublyWarpedModel):
        reports.append(_report("weyl:Q(.,.,.,grad w)", divwp_res, tol, ts.size, {}, target))
    notes = {"near-merged samples": len(merged_at)} if merged_at else {}
    reports.append(_report("weyl:eigenstructure", eig_res, tol, ts.size, notes, target, expect_fail))
    reports.append(_report("weyl:Q decomposition", decomp_res, alg_tol, ts.size, {}, target))
    return reports


# ---------------------------------------------------------------------------
# integral identities

def _is_compact(target) -> bool:
    if isinstance(target, catalog.CatalogEntry):
        return target.compact
    lo, hi = target.domain
    return math.isfinite(lo) and math.isfinite(hi)


def _integral(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Adaptive Gauss-Kronrod, split at the midpoint so each end is handled separately."""
    mid = 0.5 * (lo + hi)
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    return quad(f, lo, mid, **opts)[0] + quad(f, mid, hi, **opts)[0]


def check_integrals(target, tol: float = TOL_QUADRATURE, name: str = "",
                    expect_fail: bool = False) -> list[CheckReport]:
    """Integral identities on a compact base with ``lam > 0``.

    With ``dvol_a = w^a dvol``:

    * ``mu = lam * int dvol_m / int dvol_(m-2)``;
    * ``int (scal - n lam) dvol_m + m(m-1) int |grad w|^2 dvol_(m-2) = 0``;
    * integration by parts for ``phi = w^2 - mu/lam`` with weight ``m-2``:
      ``int phi L phi dvol_(m-2) = -int |grad phi|^2 dvol_(m-2)``;
    * ``int |grad phi|^2 dvol_(m-2) = 2 lam int phi^2 dvol_(m-2)``.

    Integrals are over ``t`` with density ``w^a psi^(n-1)``; the link volume
    cancels from every identity. Each residual is relative to the size of
    the terms involved.

    Raises
    ------
    NonCompactEntry
        The base is not compact or ``lam <= 0``.
    MEqualsOne
        ``m = 1``.
    """
    model = target.model if isinstance(target, catalog.CatalogEntry) else target
    name = name or getattr(target, "id", "")
    if not _is_compact(target) or model.lam <= 0:
        raise NonCompactEntry("integral identities need a compact base with lam > 0")
    if model.m == 1:
        raise MEqualsOne("integral identities need m > 1")
    m, n, lam = model.m, model.n, model.lam
    lo, hi = model.domain

    def dens(t, a):
        w = float(model.w.value(t))
        if w <= 0:
            return 0.0
        psi = float(model.psi.value(t)) if n > 1 else 1.0
        return math.exp(a * math.log(w)) * psi ** (n - 1)

    I_m = _integral(lambda t: dens(t, m), lo, hi)
    I_m2 = _integral(lambda t: dens(t, m - 2), lo, hi)
    mu_int = lam * I_m / I_m2
    mu_ref = model.spec.mu if model.spec.mu is not None else float(
        np.mean(mu_values(model, _samples_for(model))[0]))
    r_mu = abs(mu_int - mu_ref) / max(1.0, abs(mu_ref))

    def scal_term(t):
        return (float(warped_curvature(model, t).scal) - n * lam) * dens(t, m)

    def grad_term(t):
        return float(model.w(t)[1]) ** 2 * dens(t, m - 2)

    A = _integral(scal_term, lo, hi)
    B = m * (m - 1) * _integral(grad_term, lo, hi)
    r_cor = abs(A + B) / (1.0 + abs(A) + abs(B))

    def phi(t):
        w, dw, ddw = model.w(t)
        return float(w * w - mu_ref / lam), float(2 * w * dw), float(2 * dw * dw + 2 * w * ddw)

    phi_prof = Profile(lambda t: tuple(np.asarray(v) for v in phi(t)), model.domain)

    def phiLphi(t):
        if float(model.w.value(t)) <= 0 or (n > 1 and float(model.psi.value(t)) <= 0):
            return 0.0
        return phi(t)[0] * float(weighted_laplacian(m - 2, phi_prof, model, t)) * dens(t, m - 2)

    grad_phi = _integral(lambda t: phi(t)[1] ** 2 * dens(t, m - 2), lo, hi)
    pair = _integral(phiLphi, lo, hi)
    phi_sq = _integral(lambda t: phi(t)[0] ** 2 * dens(t, m - 2), lo, hi)
    r_ibp = abs(pair + grad_phi) / (1.0 + abs(pair) + abs(grad_phi))
    r_pos = abs(grad_phi - 2 * lam * phi_sq) / (1.0 + abs(grad_phi))
    return [
        _report("integral:mu ratio", r_mu, tol, 1,
                {"int w^m": I_m, "int w^(m-2)": I_m2, "mu": mu_int}, name, expect_fail),
        _report("integral:scalar curvature", r_cor, tol, 1, {"scal part": A, "gradient part": B},
                name),
        _report("integral:by parts", max(r_ibp, r_pos), tol, 1,
                {"pairing": r_ibp, "gradient vs 2 lam": r_pos}, name),
    ]


# ---------------------------------------------------------------------------
# total space

def check_total_space(model: WarpedModel, sample_ts=None, tol: float = TOL_DIFFERENTIAL,
                      fd_tol: float = TOL_FD, target: str = "",
                      expect_fail: bool = False) -> list[CheckReport]:
    """``Ric(g + w^2 g_F) = lam (g + w^2 g_F)`` blockwise with a round-sphere fiber.

    The fiber is the round sphere of Einstein constant ``mu``. One
    finite-difference evaluation of the total-space Ricci tensor enters the
    residual scaled by ``tol/fd_tol``.

    Raises
    ------
    NonIntegerM
        ``m`` is not an integer greater than 1.
    """
    spec = model.spec
    if not spec.m_is_integer or spec.m <= 1:
        raise NonIntegerM("total space needs an integer fiber dimension m > 1")
    ts = _samples_for(model) if sample_ts is None else np.asarray(sample_ts, float)
    closed = float(np.max(einstein_total_space(model, ts).residual()))
    t_mid = float(ts[len(ts) // 2])
    ric = total_space_ricci_fd(model, t_mid, spec.mu, h=SAMPLED_STEP if _is_sampled(model) else 1e-4)
    fd = float(np.max(np.abs(ric - spec.lam * np.eye(ric.shape[0]))))
    return [_report("total_space_einstein", max(closed, fd * tol / fd_tol), tol, ts.size,
                    {"closed": closed, "fd_spot": fd}, target, expect_fail)]


# ---------------------------------------------------------------------------
# targets

@dataclass
class Target:
    """A model to check together with its sample points and expected failures."""

    id: str
    model: object
    samples: np.ndarray
    entry: catalog.CatalogEntry | None = None
    expect_fail: frozenset = frozenset()
    checks: tuple = CHECKS
    stencil_tol: float = TOL_DIFFERENTIAL


BOHM_GUESS = {"w0": 0.2535542586, "t_b": 2.684706397, "psi_b": 0.2535542586}


@functools.lru_cache(maxsize=None)
def bohm_disk_model() -> WarpedModel:
    """Numerical disk with ``n = 3``, ``m = 2``, ``lam = 4``, ``mu = 1``."""
    from .ode import rotsym_model, solve_rotsym_disk
    spec = ModelSpec(n=3, m=2.0, lam=4.0, mu=1.0, boundary=True)
    traj = solve_rotsym_disk(spec, **BOHM_GUESS)
    return rotsym_model(traj, label="bohm-disk")


@functools.lru_cache(maxsize=None)
def doubly_nonconformal_model() -> DoublyWarpedModel:
    """Three-dimensional doubly warped solution with unequal initial slopes."""
    from .ode import doubly_model, solve_doubly_warped_3d
    spec = ModelSpec(n=3, m=2.0, lam=-1.0)
    traj = solve_doubly_warped_3d(spec, 1.0, 0.3, 1.0, -0.2, 1.0, t_range=(0.0, 0.5))
    return doubly_model(traj)


EXTRA_TARGETS = ("bohm-disk", "perturbed-w", "doubly-noncf")


def resolve_target(ident: str, samples: int = 25) -> Target:
    """Catalog id or one of ``bohm-disk``, ``perturbed-w``, ``doubly-noncf``.

    Raises
    ------
    UnknownId
        Unrecognized id (``gaussian-family`` is not a single model).
    """
    if ident == "bohm-disk":
        model = bohm_disk_model()
        return Target(ident, model, _samples_for(model, samples), checks=CHECKS,
                      stencil_tol=TOL_FD)
    if ident == "perturbed-w":
        model = _perturbed_w(catalog.get("table2-pos-pos").model)
        return Target(ident, model, _samples_for(model, samples), expect_fail=frozenset({"qe"}),
                      checks=("qe",))
    if ident == "doubly-noncf":
        model = doubly_nonconformal_model()
        return Target(ident, model, _samples_for(model, samples, margin=1e-2),
                      expect_fail=frozenset({"weyl:eigenstructure"}), checks=("qe", "mu", "weyl"))
    if ident not in catalog.REGISTRY or ident == "gaussian-family":
        raise UnknownId(f"unknown verify target {ident!r}")
    entry = catalog.get(ident)
    return Target(ident, entry.model, entry.samples(samples), entry=entry)


def target_from_files(csv_path: str, json_path: str) -> Target:
    """Rebuild a model from a trajectory CSV and its JSON metadata.

    The model interpolates the samples; checks are evaluated at the stored
    sample times, where values and derivatives are exact records of the
    solve. Second derivatives are recomputed from the reduced equations.
    Only pointwise checks apply: stencil-based identities would difference
    the cubic interpolant between samples. Doubly warped bases are not of
    cohomogeneity one, so the Weyl-structure checks are left out for them.
    Samples near a singular end (a state component above ``STATE_BOUND`` or
    a warping function below ``WARP_FLOOR``) are dropped.
    """
    from .ode import STATE_BOUND, doubly_accel, regular_mask, rotsym_accel
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    spec = ModelSpec.from_json(meta["spec"])
    kind = meta["kind"]
    t = np.asarray(data["t"], float)
    keep = np.concatenate([[True], np.diff(t) > 0])
    t = t[keep]
    col = lambda k: np.asarray(data[k], float)[keep]
    if kind.startswith("rotsym"):
        link = meta.get("meta", {}).get("link", "sphere")
        from .model import link_kappa
        kL = link_kappa(link, spec.n)
        psi, dpsi, w, dw = col("psi"), col("dpsi"), col("w"), col("dw")
        with np.errstate(all="ignore"):
            ddpsi, ddw = rotsym_accel(spec, kL, psi, dpsi, w, dw)
        ok = (np.isfinite(ddpsi) & np.isfinite(ddw) & (w > 0) & (psi > 0)
              & regular_mask({"psi": psi, "dpsi": dpsi, "w": w, "dw": dw}))
        model = WarpedModel(spec, Profile.sampled(t[ok], psi[ok], dpsi[ok], ddpsi[ok]),
                            Profile.sampled(t[ok], w[ok], dw[ok], ddw[ok]), link=link,
                            check_origin=False)
        ts = t[ok][1:-1]
        return Target(csv_path, model, ts, checks=("qe", "mu", "weyl"))
    if kind.startswith("surface") or kind == "schwarzschild":
        from .ode import _surface_third
        w, dw = col("w"), col("dw")
        mu, m, lam = spec.mu, spec.m, spec.lam
        ddw = (mu - (m - 1) * dw ** 2 - lam * w ** 2) / (2 * w)
        d3 = _surface_third(spec, w, dw, ddw)
        polar = meta.get("meta", {}).get("mode", "polar") == "polar"
        c = float(ddw[0]) if polar else float(meta.get("meta", {}).get("psi_scale", 1.0))
        ok = (w > 0) & (dw / c > 0) & (np.abs(dw) <= STATE_BOUND) & (w <= STATE_BOUND)
        tt = t[ok]
        model = WarpedModel(spec, Profile.sampled(tt, dw[ok] / c, ddw[ok] / c, d3[ok] / c),
                            Profile.sampled(tt, w[ok], dw[ok], ddw[ok]), link="sphere",
                            check_origin=False)
        return Target(csv_path, model, tt[1:-1], checks=("qe", "mu"))
    if kind == "doubly":
        y = [col(k) for k in ("phi", "dphi", "psi", "dpsi", "w", "dw")]
        bounded = regular_mask(dict(zip(("phi", "dphi", "psi", "dpsi", "w", "dw"), y)))
        t = t[bounded]
        y = [v[bounded] for v in y]
        a, b, c = doubly_accel(spec, *y)
        model = DoublyWarpedModel(spec, Profile.sampled(t, y[0], y[1], a),
                                  Profile.sampled(t, y[2], y[3], b), Profile.sampled(t, y[4], y[5], c))
        return Target(csv_path, model, t[1:-1], checks=("qe", "mu"))
    if kind == "1d":
        w, dw = col("w"), col("dw")
        ddw = -spec.lam / spec.m * w
        ok = w > 0
        dom_t = t[ok]
        model = WarpedModel(spec, Profile.constant(1.0, (dom_t[0], dom_t[-1])),
                            Profile.sampled(dom_t, w[ok], dw[ok], ddw[ok]), link="none",
                            check_origin=False)
        return Target(csv_path, model, dom_t[1:-1], checks=("qe", "mu"))
    raise UnknownId(f"trajectory kind {kind!r} cannot be verified from files")


def _run_check(name: str, target: Target) -> list[CheckReport]:
    model, ts, tid = target.model, target.samples, target.id
    fail = lambda key: key in target.expect_fail
    if name == "qe":
        return check_qe_residual(model, ts, target=tid, expect_fail=fail("qe"))
    if name == "mu":
        return check_mu(model, ts, target=tid, expect_fail=fail("mu"))
    if name == "weighted":
        if isinstance(model, DoublyWarpedModel):
            raise UnsupportedLink("radial identities need a warped model")
        return check_weighted_identities(model, ts, tol=target.stencil_tol, target=tid)
    if name == "div":
        if isinstance(model, DoublyWarpedModel):
            raise UnsupportedLink("divergence identities need a warped model")
        return check_div_identities(model, ts, target=tid)
    if name == "weyl":
        reps = check_weyl_structure(model, ts, target=tid)
        for r in reps:
            r.expect_fail = r.name in target.expect_fail
        return reps
    if name == "integrals":
        return check_integrals(target.entry if target.entry is not None else model, name=tid)
    if name == "total-space":
        if isinstance(model, DoublyWarpedModel) or model.spec.mu is None:
            raise NonIntegerM("total space check needs a warped model with known mu")
        return check_total_space(model, ts, tol=max(target.stencil_tol, TOL_DIFFERENTIAL), target=tid)
    raise UnknownId(f"unknown check {name!r}")


@dataclass
class SuiteResult:
    """Reports in deterministic order, skipped (target, check, reason) triples."""

    reports: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.as_expected for r in self.reports)

    def summary(self) -> dict:
        return {
            "checks": len(self.reports),
            "passed": sum(r.passed for r in self.reports),
            "expected_failures": sum((not r.passed) and r.expect_fail for r in self.reports),
            "unexpected": sum(not r.as_expected for r in self.reports),
            "skipped": len(self.skipped),
            "ok": self.ok,
        }

    def to_json(self) -> dict:
        return {
            "summary": self.summary(),
            "reports": [dict(r.to_json(), expect_fail=r.expect_fail) for r in self.reports],
            "skipped": [{"target": t, "check": c, "reason": why} for t, c, why in self.skipped],
        }


def default_targets() -> list[str]:
    return [i for i in catalog.catalog_ids() if i != "gaussian-family"] + list(EXTRA_TARGETS)


def run_suite(targets: Iterable = (), checks: Iterable[str] | None = None,
              samples: int = 25) -> SuiteResult:
    """Run checks on targets in order; inapplicable checks are recorded as skipped.

    ``targets`` holds ids or :class:`Target` objects. ``checks`` defaults to
    every check the target declares.
    """
    result = SuiteResult()
    wanted = None if checks is None else list(checks)
    for item in targets:
        target = item if isinstance(item, Target) else resolve_target(item, samples)
        for name in (wanted if wanted is not None else target.checks):
            if name not in CHECKS:
                raise UnknownId(f"unknown check {name!r}")
            if wanted is not None and name not in target.checks:
                result.skipped.append((target.id, name, "not applicable to this target"))
                continue
            try:
                result.reports.extend(_run_check(name, target))
            except QEError as exc:
                result.skipped.append((target.id, name, f"{type(exc).__name__}: {exc}"))
    return result
