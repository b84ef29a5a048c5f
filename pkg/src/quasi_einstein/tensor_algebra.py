"""Pointwise tensor algebra in an orthonormal frame.

Symmetric 2-tensors are ``(n, n)`` arrays and algebraic curvature tensors are
``(n, n, n, n)`` arrays of components ``T(e_i, e_j, e_k, e_l)``. Because the
frame is orthonormal the metric is the identity and traces are plain sums.

Conventions: ``R(X, Y, Y, X)`` is the sectional curvature of the plane
``X ^ Y`` and ``Ric(X, Y) = sum_i R(X, e_i, e_i, Y)``. The Kulkarni-Nomizu
product carries a factor 1/2, so ``(g o g)(X, Y, Y, X) = 1`` for orthonormal
``X, Y`` and the unit sphere has ``R = g o g``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DimensionTooLow, MEqualsOne
from .model import ModelSpec


def _dim2(s) -> int:
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {s.shape}")
    return s.shape[0]


def _dim4(T) -> int:
    T = np.asarray(T)
    if T.ndim != 4 or len(set(T.shape)) != 1:
        raise DimensionMismatch(f"expected an (n,n,n,n) array, got shape {T.shape}")
    return T.shape[0]


def kulkarni_nomizu(s, r) -> np.ndarray:
    """Kulkarni-Nomizu product of two symmetric 2-tensors.

    ``(s o r)(X,Y,Z,W) = 1/2 (r(X,W)s(Y,Z) + r(Y,Z)s(X,W)
    - r(X,Z)s(Y,W) - r(Y,W)s(X,Z))``.
    """
    s, r = np.asarray(s, float), np.asarray(r, float)
    if _dim2(s) != _dim2(r):
        raise DimensionMismatch(f"dimensions differ: {s.shape} vs {r.shape}")
    # pair the two products so that swapping s and r gives bitwise equal output
    a = np.einsum("il,jk->ijkl", r, s) + np.einsum("il,jk->ijkl", s, r)
    b = np.einsum("ik,jl->ijkl", r, s) + np.einsum("ik,jl->ijkl", s, r)
    return 0.5 * (a - b)


def ricci_contraction(T, g=None) -> np.ndarray:
    """``(X, Y) -> sum_i T(X, e_i, e_i, Y)`` in an orthonormal frame."""
    T = np.asarray(T, float)
    n = _dim4(T)
    if g is not None:
        if _dim2(g) != n:
            raise DimensionMismatch(f"metric has dimension {np.shape(g)[0]}, tensor {n}")
        if not np.allclose(g, np.eye(n), atol=1e-12):
            raise DimensionMismatch("contraction requires an orthonormal frame (g = identity)")
    out = np.einsum("aiib->ab", T)
    return 0.5 * (out + out.T)


def full_trace(T) -> float:
    """Double trace ``sum_ij T(e_i, e_j, e_j, e_i)``."""
    return float(np.trace(ricci_contraction(T)))


def p_tensor(ric, scal: float, spec: ModelSpec) -> tuple[float, np.ndarray]:
    """Return ``rho = ((n-1) lam - scal)/(m-1)`` and ``P = Ric - rho g``."""
    ric = np.asarray(ric, float)
    n = _dim2(ric)
    if n != spec.n:
        raise DimensionMismatch(f"Ricci has dimension {n}, spec says n={spec.n}")
    if spec.m == 1:
        raise MEqualsOne("rho and P are undefined for m = 1")
    rho = ((spec.n - 1) * spec.lam - scal) / (spec.m - 1)
    return rho, ric - rho * np.eye(n)


def q_tensor(R, ric, g, rho: float, spec: ModelSpec) -> np.ndarray:
    """``Q = R + (2/m) Ric o g - ((lam + rho)/m) g o g``."""
    R, ric, g = np.asarray(R, float), np.asarray(ric, float), np.asarray(g, float)
    n = _dim4(R)
    if _dim2(ric) != n or _dim2(g) != n:
        raise DimensionMismatch("R, Ric and g must share one dimension")
    m, lam = spec.m, spec.lam
    return R + (2.0 / m) * kulkarni_nomizu(ric, g) - ((lam + rho) / m) * kulkarni_nomizu(g, g)


def q_tensor_from_p(R, P, g, rho: float, spec: ModelSpec) -> np.ndarray:
    """Equivalent form ``Q = R + (2/m) P o g + ((rho - lam)/m) g o g``."""
    m, lam = spec.m, spec.lam
    return R + (2.0 / m) * kulkarni_nomizu(P, g) + ((rho - lam) / m) * kulkarni_nomizu(g, g)


@dataclass(frozen=True)
class WeylSchouten:
    """Weyl tensor, Schouten tensor and whether ``W`` must vanish (``n = 3``)."""

    W: np.ndarray
    S: np.ndarray
    should_vanish: bool

    def __iter__(self):
        return iter((self.W, self.S))


def weyl_schouten(R, ric, scal: float, g) -> WeylSchouten:
    """Weyl tensor and Schouten tensor ``S = Ric - scal/(2(n-1)) g``.

    ``W = R - (2/(n-2)) Ric o g + scal/((n-1)(n-2)) g o g``. In dimension 3 the
    same formula is used and ``should_vanish`` is set.
    """
    R, ric, g = np.asarray(R, float), np.asarray(ric, float), np.asarray(g, float)
    n = _dim4(R)
    if _dim2(ric) != n or _dim2(g) != n:
        raise DimensionMismatch("R, Ric and g must share one dimension")
    if n < 3:
        raise DimensionTooLow(f"Weyl tensor needs n >= 3, got {n}")
    W = (R - (2.0 / (n - 2)) * kulkarni_nomizu(ric, g)
         + scal / ((n - 1) * (n - 2)) * kulkarni_nomizu(g, g))
    S = ric - scal / (2.0 * (n - 1)) * g
    return WeylSchouten(W=W, S=S, should_vanish=(n == 3))


@dataclass(frozen=True)
class EigenStructure:
    """Sorted eigenvalues grouped into clusters of (mean value, multiplicity)."""

    values: np.ndarray
    clusters: tuple[tuple[float, int], ...]

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(k for _, k in self.clusters)

    @property
    def min_gap(self) -> float:
        """Smallest gap between distinct clusters (inf for a single cluster)."""
        if len(self.clusters) < 2:
            return np.inf
        c = np.array([v for v, _ in self.clusters])
        return float(np.min(np.diff(c)))


def sym_eigen(T, rel_gap: float = 1e-6, abs_floor: float = 1e-12) -> EigenStructure:
    """Eigenvalues of a symmetric matrix with multiplicity clustering.

    Consecutive sorted eigenvalues closer than ``rel_gap * spectral_radius``
    (or ``abs_floor``, whichever is larger) are merged into one cluster.
    """
    T = np.asarray(T, float)
    _dim2(T)
    vals = np.linalg.eigvalsh(0.5 * (T + T.T))
    radius = float(np.max(np.abs(vals))) if vals.size else 0.0
    thresh = max(rel_gap * radius, abs_floor)
    clusters: list[list[float]] = [[vals[0]]]
    for v in vals[1:]:
        if v - clusters[-1][-1] <= thresh:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    return EigenStructure(values=vals,
                          clusters=tuple((float(np.mean(c)), len(c)) for c in clusters))


def curvature_from_sectional(K) -> np.ndarray:
    """Curvature tensor diagonal in the frame, from sectional curvatures.

    ``K[i, j]`` is the curvature of the plane ``e_i ^ e_j``. Only the
    components ``R(e_i, e_j, e_j, e_i) = K_ij`` and their symmetric images are
    nonzero. Every metric handled here (warped and doubly warped with
    constant-curvature factors) has a curvature operator of this form.
    """
    K = np.asarray(K, float)
    n = _dim2(K)
    R = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                R[i, j, j, i] = K[i, j]
                R[i, j, i, j] = -K[i, j]
    return R


def is_algebraic_curvature(T, tol: float = 0.0) -> float:
    """Max violation of the four curvature-tensor symmetries.

    Returns the largest absolute defect among antisymmetry in (1,2) and
    (3,4), pair symmetry and the first Bianchi identity.
    """
    T = np.asarray(T, float)
    d1 = np.abs(T + T.transpose(1, 0, 2, 3)).max()
    d2 = np.abs(T + T.transpose(0, 1, 3, 2)).max()
    d3 = np.abs(T - T.transpose(2, 3, 0, 1)).max()
    bianchi = T + T.transpose(1, 2, 0, 3) + T.transpose(2, 0, 1, 3)
    return float(max(d1, d2, d3, np.abs(bianchi).max()))


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (a + a.T)


def random_curvature(rng: np.random.Generator, n: int, terms: int = 3) -> np.ndarray:
    """Random algebraic curvature tensor as a sum of ``s o s`` products."""
    R = np.zeros((n, n, n, n))
    for _ in range(terms):
        s = random_symmetric(rng, n)
        R += rng.normal() * kulkarni_nomizu(s, s)
    return R
