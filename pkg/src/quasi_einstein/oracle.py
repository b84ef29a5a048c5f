"""Finite-difference curvature oracle on explicit coordinate charts.

This module shares no formulas with :mod:`quasi_einstein.curvature`. A metric
is given as a function ``x -> g(x)`` returning the coordinate matrix; its
first and second partial derivatives are taken with centered differences
(step ``h``) combined with one Richardson extrapolation against step ``2h``,
which leaves a truncation error of ``O(h^4)`` and a rounding error of roughly
``eps/h^2``. Christoffel symbols, the Riemann tensor, Ricci tensor, scalar
curvature and the Hessian of a potential follow from the standard
coordinate formulas. Results are reported in the orthonormal frame obtained
by Gram-Schmidt on the coordinate basis, so the first frame vector is
parallel to the first coordinate direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SingularChart, UnsupportedLink
from .model import DoublyWarpedModel, WarpedModel

DEFAULT_H = 1e-4
DET_FLOOR = 1e-12


def _check(g: np.ndarray):
    if abs(np.linalg.det(g)) < DET_FLOOR:
        raise SingularChart("metric determinant below 1e-12 at a stencil point")


def _richardson(d_h, d_2h):
    return (4.0 * d_h - d_2h) / 3.0


def _first(f, x, h):
    """Centered first partials ``D[k] = d f / d x_k`` with Richardson."""
    d = x.size
    out = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        dh = (f(x + h * e) - f(x - h * e)) / (2 * h)
        d2h = (f(x + 2 * h * e) - f(x - 2 * h * e)) / (4 * h)
        out.append(_richardson(dh, d2h))
    return np.array(out)


def _second(f, x, h):
    """Centered second partials ``D[k, l]`` with Richardson."""
    d = x.size
    f0 = f(x)
    out = np.empty((d, d) + np.shape(f0))
    for k in range(d):
        ek = np.zeros(d)
        ek[k] = 1.0
        for l in range(k, d):
            el = np.zeros(d)
            el[l] = 1.0

            def mixed(s):
                if k == l:
                    return (f(x + s * ek) - 2 * f0 + f(x - s * ek)) / (s * s)
                return (f(x + s * ek + s * el) - f(x + s * ek - s * el)
                        - f(x - s * ek + s * el) + f(x - s * ek - s * el)) / (4 * s * s)

            val = _richardson(mixed(h), mixed(2 * h))
            out[k, l] = val
            out[l, k] = val
    return out


@dataclass(frozen=True)
class Connection:
    """Metric data and Christoffel symbols at a point."""

    x: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray   # gamma[l, i, j] = Gamma^l_ij
    dgamma: np.ndarray  # dgamma[m, l, i, j] = d_m Gamma^l_ij
    frame: np.ndarray   # columns are orthonormal vectors


def connection(metric: Callable, x, h: float = DEFAULT_H) -> Connection:
    x = np.asarray(x, float)

    def gm(y):
        G = np.asarray(metric(y), float)
        _check(G)
        return G

    g = gm(x)
    dg = _first(gm, x, h)          # dg[k, i, j]
    ddg = _second(gm, x, h)        # ddg[k, l, i, j]
    ginv = np.linalg.inv(g)
    # first kind: G1[k, i, j] = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij)
    G1 = 0.5 * (np.einsum("ijk->kij", dg) + np.einsum("jik->kij", dg) - dg)
    gamma = np.einsum("lk,kij->lij", ginv, G1)
    dG1 = 0.5 * (np.einsum("mijk->mkij", ddg) + np.einsum("mjik->mkij", ddg) - ddg)
    dginv = -np.einsum("ab,mbc,cd->mad", ginv, dg, ginv)
    dgamma = np.einsum("mlk,kij->mlij", dginv, G1) + np.einsum("lk,mkij->mlij", ginv, dG1)
    L = np.linalg.cholesky(g)
    frame = np.linalg.inv(L).T
    return Connection(x, g, ginv, gamma, dgamma, frame)


def riemann_coordinates(conn: Connection) -> np.ndarray:
    """``R_ijkl = g(R(d_i, d_j) d_k, d_l)`` with ``R(X,Y) = [nabla_X, nabla_Y]``."""
    G, dG = conn.gamma, conn.dgamma
    # R_ijk^l = d_i G^l_jk - d_j G^l_ik + G^l_ip G^p_jk - G^l_jp G^p_ik
    Rup = (np.einsum("iljk->ijkl", dG) - np.einsum("jlik->ijkl", dG)
           + np.einsum("lip,pjk->ijkl", G, G) - np.einsum("ljp,pik->ijkl", G, G))
    return np.einsum("ijkp,pl->ijkl", Rup, conn.g)


def to_frame(T: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Evaluate a covariant tensor on the frame vectors (columns of ``E``)."""
    for axis in range(T.ndim):
        T = np.moveaxis(np.tensordot(T, E, axes=([axis], [0])), -1, axis)
    return T


@dataclass(frozen=True)
class OracleResult:
    """Curvature data in the Gram-Schmidt frame."""

    R: np.ndarray
    ric: np.ndarray
    scal: float
    hess: np.ndarray | None
    frame: np.ndarray
    connection: Connection


def fd_curvature_oracle(metric: Callable, point, w: Callable | None = None,
                        h: float = DEFAULT_H) -> OracleResult:
    """Riemann, Ricci, scalar curvature and ``Hess w`` by finite differences.

    Parameters
    ----------
    metric : callable
        ``x -> (d, d)`` coordinate metric.
    point : array_like
        Evaluation point, away from chart degeneracies.
    w : callable, optional
        Scalar potential on the chart.
    h : float
        Base difference step.

    Raises
    ------
    SingularChart
        Metric determinant below ``1e-12`` at a stencil point.
    """
    conn = connection(metric, point, h)
    Rc = riemann_coordinates(conn)
    E = conn.frame
    R = to_frame(Rc, E)
    ric = np.einsum("aiib->ab", R)
    ric = 0.5 * (ric + ric.T)
    hess = None
    if w is not None:
        x = conn.x
        dw = _first(w, x, h)
        ddw = _second(w, x, h)
        hc = ddw - np.einsum("kij,k->ij", conn.gamma, dw)
        hess = to_frame(0.5 * (hc + hc.T), E)
    return OracleResult(R, ric, float(np.trace(ric)), hess, E, conn)


# ---------------------------------------------------------------------------
# charts

def space_form_chart(K: float, dim: int) -> Callable:
    """Conformally flat chart ``4/(1 + K|y|^2)^2 delta`` of curvature ``K``.

    Stereographic for ``K > 0``, Cartesian (times 4) for ``K = 0`` and the
    Poincare ball for ``K < 0``. A one-dimensional chart is always ``delta``.
    """
    if dim == 1:
        return lambda y: np.eye(1)

    def h(y):
        y = np.asarray(y, float)
        return (4.0 / (1.0 + K * float(y @ y)) ** 2) * np.eye(dim)

    return h


def link_curvature(model: WarpedModel) -> float:
    n = model.n
    if n <= 2:
        return 0.0
    if model.link not in ("sphere", "flat", "hyperbolic"):
        raise UnsupportedLink(f"no chart for link {model.link!r}")
    return model.kappa_L / (n - 2)


def default_link_point(dim: int) -> np.ndarray:
    return np.array([0.3, 0.2, -0.1, 0.15, 0.05][:dim]) if dim <= 5 else np.full(dim, 0.1)


def warped_chart(model: WarpedModel):
    """Return ``(metric, w)`` on coordinates ``(t, y_1, ..., y_{n-1})``."""
    n = model.n
    hL = space_form_chart(link_curvature(model), n - 1) if n > 1 else None

    def metric(x):
        G = np.zeros((n, n))
        G[0, 0] = 1.0
        if n > 1:
            psi = float(model.psi.value(x[0]))
            G[1:, 1:] = psi ** 2 * hL(x[1:])
        return G

    return metric, (lambda x: float(model.w.value(x[0])))


def warped_point(model: WarpedModel, t: float) -> np.ndarray:
    return np.concatenate([[t], default_link_point(model.n - 1)])


def oracle_for_model(model: WarpedModel, t: float, h: float = DEFAULT_H) -> OracleResult:
    metric, w = warped_chart(model)
    return fd_curvature_oracle(metric, warped_point(model, t), w, h)


def total_space_chart(model: WarpedModel, kappa_F: float):
    """Chart of ``g + w^2 g_F`` with ``g_F`` a space form of Einstein constant ``kappa_F``."""
    n, m = model.n, int(model.m)
    base, w = warped_chart(model)
    KF = kappa_F / (m - 1) if m > 1 else 0.0
    hF = space_form_chart(KF, m)

    def metric(x):
        G = np.zeros((n + m, n + m))
        G[:n, :n] = base(x[:n])
        G[n:, n:] = w(x[:n]) ** 2 * hF(x[n:])
        return G

    return metric


def total_space_ricci_fd(model: WarpedModel, t: float, kappa_F: float,
                         h: float = DEFAULT_H) -> np.ndarray:
    metric = total_space_chart(model, kappa_F)
    point = np.concatenate([warped_point(model, t), default_link_point(int(model.m))[::-1]])
    return fd_curvature_oracle(metric, point, None, h).ric


def conformal_curvature_fd(model: WarpedModel, t: float, h: float = DEFAULT_H) -> np.ndarray:
    """Frame components of the curvature of ``w^{-2} g`` at ``t``."""
    base, w = warped_chart(model)
    return fd_curvature_oracle(lambda x: base(x) / w(x) ** 2, warped_point(model, t), None, h).R


def doubly_warped_chart(model: DoublyWarpedModel):
    def metric(x):
        return np.diag([1.0, float(model.phi.value(x[0])) ** 2, float(model.psi.value(x[0])) ** 2])

    return metric, (lambda x: float(model.w.value(x[0])))


def schwarzschild_chart(m: int):
    """Base chart ``dr^2/f + f dth^2`` with ``f = 1 - r^(1-m)`` and total chart.

    Returns ``(base_metric, w, total_metric)``; the total space appends
    ``r^2 g_{S^m}`` with the unit round sphere.
    """
    hF = space_form_chart(1.0, m)

    def f(r):
        return 1.0 - r ** (1.0 - m)

    def base(x):
        return np.diag([1.0 / f(x[0]), f(x[0])])

    def total(x):
        G = np.zeros((2 + m, 2 + m))
        G[:2, :2] = base(x[:2])
        G[2:, 2:] = x[0] ** 2 * hF(x[2:])
        return G

    return base, (lambda x: float(x[0])), total


# ---------------------------------------------------------------------------
# covariant divergence

def fd_divergence(metric: Callable, tensor: Callable, point, h: float = DEFAULT_H) -> np.ndarray:
    """Coordinate components of ``div T``, contracting the last slot.

    ``tensor(x)`` returns the covariant coordinate components of ``T`` at
    ``x`` (any rank >= 1). The partial derivatives of ``T`` use the same
    Richardson stencil as the metric. The result is returned in the
    Gram-Schmidt frame.
    """
    conn = connection(metric, point, h)
    x = conn.x
    T = np.asarray(tensor(x), float)
    dT = _first(lambda y: np.asarray(tensor(y), float), x, h)  # dT[d, ...]
    r = T.ndim
    nablaT = dT.copy()  # nablaT[d, i1..ir]
    for slot in range(r):
        # subtract Gamma^p_{d i_slot} T_{.. p ..}
        moved = np.moveaxis(T, slot, 0)  # p first
        term = np.tensordot(conn.gamma, moved, axes=([0], [0]))  # [d, i_slot, rest...]
        term = np.moveaxis(term, 1, slot + 1)
        nablaT = nablaT - term
    div = np.einsum("de,d...e->...", conn.ginv, nablaT)
    return to_frame(div, conn.frame)


def frame_to_coordinates(T_frame: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Coordinate components of a tensor given in the frame with columns ``E``."""
    return to_frame(T_frame, np.linalg.inv(E))
