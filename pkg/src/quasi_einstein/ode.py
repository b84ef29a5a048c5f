"""ODE reductions of the quasi-Einstein equation and their integrators.

Every solver returns a :class:`Trajectory`: accepted integrator steps, the
state at each step, logged first integrals (``mu`` and, for surfaces, the
constant ``C``), the termination reason and a dense evaluator. Integration
uses scipy's explicit Runge-Kutta ``DOP853`` with tight tolerances; events
locate zeros of ``w`` and of the warping function.

Reductions
----------
* one-dimensional base: ``w'' = -(lam/m) w``;
* surfaces: ``2 w w'' + (m-1) w'^2 + lam w^2 = mu``;
* rotationally symmetric bases ``dt^2 + psi^2 g_L``: a second-order system in
  ``(psi, w)``;
* doubly warped three-dimensional bases ``dr^2 + phi^2 dth1^2 + psi^2 dth2^2``;
* the planar system in ``x = psi'/psi`` and ``y = w'/w`` for ``lam = 0`` and a
  flat link.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, least_squares

from .errors import (
    BlowUp,
    DegenerateData,
    InconsistentMu,
    InvalidM,
    MaxIterations,
    NoBracket,
    PoleSingularity,
    SmoothnessViolation,
    UnsupportedLink,
)
from .model import (
    DoublyWarpedModel,
    ModelSpec,
    Profile,
    WarpedModel,
    link_kappa,
    validate_spec,
)

RTOL = 1e-12
ATOL = 1e-14
BLOWUP = 1e12
# samples outside these bounds belong to a singular end (collapse or escape)
STATE_BOUND = 1e4
WARP_FLOOR = 0.1
# relative size of psi or w at which an escaping rotsym run counts as collapsed
COLLAPSE = 1e-4
TERMINATIONS = ("w-zero", "psi-zero", "t-max", "blow-up", "stationary")


# ---------------------------------------------------------------------------
# trajectory record

class _Piecewise:
    """Dense evaluator assembled from pieces ``(lo, hi, fn)``."""

    def __init__(self, pieces):
        self.pieces = sorted(pieces, key=lambda p: p[0])

    @property
    def lo(self):
        return self.pieces[0][0]

    @property
    def hi(self):
        return self.pieces[-1][1]

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, float))
        out = None
        for i, (lo, hi, fn) in enumerate(self.pieces):
            last = i == len(self.pieces) - 1
            mask = (t >= lo) & ((t < hi) | (last & (t <= hi + 1e-12 * max(1, abs(hi)))))
            if i == 0:
                mask |= t < lo
            if last:
                mask |= t > hi
            if not np.any(mask):
                continue
            val = np.asarray(fn(t[mask]), float)
            if out is None:
                out = np.empty((val.shape[0], t.size))
            out[:, mask] = val
        return out


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Trajectory:
    """Adaptive-grid ODE solution.

    Attributes
    ----------
    spec : ModelSpec
        Parameters the solve used.
    kind : str
        Which reduction produced it.
    t : ndarray
        Increasing sample times (accepted steps).
    states : ndarray
        ``(len(t), k)`` state vectors.
    state_names : tuple of str
        Column names of ``states``.
    invariants : dict
        Per-sample logged first integrals, e.g. ``mu`` and ``C``.
    termination : str
        One of ``w-zero``, ``psi-zero``, ``t-max``, ``blow-up``, ``stationary``.
    events : dict
        Event name to ``(t, state)`` at the located event.
    """

    spec: ModelSpec
    kind: str
    t: np.ndarray
    states: np.ndarray
    state_names: tuple
    invariants: dict = field(default_factory=dict)
    termination: str = "t-max"
    events: dict = field(default_factory=dict)
    dense: Callable | None = None
    second: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.state_names.index(name)]

    def __call__(self, t) -> np.ndarray:
        """Dense state at ``t``; shape ``(k, len(t))``."""
        if self.dense is None:
            raise ValueError("trajectory has no dense output")
        return self.dense(t)

    def drift(self, name: str = "mu") -> float:
        """Max relative deviation of a logged first integral from its start."""
        v = np.asarray(self.invariants[name], float)
        v = v[np.isfinite(v)]
        if v.size == 0:
            return 0.0
        return float(np.max(np.abs(v - v[0])) / (1.0 + abs(v[0])))

    def regular_mask(self) -> np.ndarray:
        """Samples away from a singular end.

        See :func:`regular_mask`.
        """
        return regular_mask({k: self.column(k) for k in self.state_names})

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    def profile(self, name: str) -> Profile:
        """Profile of a state variable with its first two derivatives."""
        i = self.state_names.index(name)
        d = self.state_names.index("d" + name)
        if self.second is None:
            raise ValueError("trajectory has no second-derivative evaluator")

        def func(t):
            shape = np.shape(t)
            s = np.atleast_1d(np.asarray(t, float)).ravel()
            y = self.dense(s)
            dd = self.second(s, y)
            return (y[i].reshape(shape), y[d].reshape(shape), dd[name].reshape(shape))

        return Profile(func, (self.t_start, self.t_end), kind="sampled", label=f"{self.kind}:{name}")

    # serialization --------------------------------------------------------
    def csv_text(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", *self.state_names, "mu", "C"])
        mu = self.invariants.get("mu", np.full(self.t.size, np.nan))
        C = self.invariants.get("C", np.full(self.t.size, np.nan))
        for k in range(self.t.size):
            wr.writerow([_fmt(self.t[k]), *(_fmt(v) for v in self.states[k]), _fmt(mu[k]), _fmt(C[k])])
        return buf.getvalue()

    def to_csv(self, path: str) -> None:
        atomic_write(path, self.csv_text())

    def to_json(self) -> dict:
        mu = np.asarray(self.invariants.get("mu", []), float)
        mu = mu[np.isfinite(mu)]
        return {
            "kind": self.kind,
            "spec": self.spec.to_json(),
            "state": list(self.state_names),
            "samples": int(self.t.size),
            "t_start": self.t_start,
            "t_end": self.t_end,
            "termination": self.termination,
            "events": {k: {"t": float(v[0]), "state": [float(x) for x in v[1]]}
                       for k, v in self.events.items()},
            "mu_mean": float(mu.mean()) if mu.size else None,
            "mu_drift": self.drift("mu") if mu.size else None,
            "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool))},
        }


def regular_mask(columns: dict) -> np.ndarray:
    """Mask of samples away from a singular end.

    A sample is regular when every state component is finite and bounded by
    ``STATE_BOUND``, and, past the maximum of each warping function (``psi``,
    ``phi``), that function is still at least ``WARP_FLOOR`` times its
    maximum. The second rule cuts the collapse towards a singular axis,
    where the reduced equations lose precision; a smooth pole at the start
    is unaffected.
    """
    vals = np.asarray([np.asarray(v, float) for v in columns.values()])
    ok = np.all(np.isfinite(vals), axis=0) & (np.max(np.abs(vals), axis=0) <= STATE_BOUND)
    for name in ("psi", "phi"):
        if name in columns:
            warp = np.where(ok, np.asarray(columns[name], float), -np.inf)
            if not ok.any():
                break
            peak = int(np.argmax(warp))
            tail = np.arange(warp.size) > peak
            ok &= ~tail | (warp >= WARP_FLOOR * warp[peak])
    return ok


# ---------------------------------------------------------------------------
# integration core

def _event(fn, terminal=True, direction=-1.0):
    fn.terminal = terminal
    fn.direction = direction
    return fn


def _blowup_event(t, y):
    return float(np.max(np.abs(y))) - BLOWUP


_blowup_event.terminal = True
_blowup_event.direction = 1.0


@dataclass
class _Run:
    t: np.ndarray
    y: np.ndarray  # (k, N)
    sol: Callable
    termination: str
    events: dict


def _integrate(rhs, t0, y0, t1, events: dict | None = None, rtol=RTOL, atol=ATOL,
               max_step=np.inf) -> _Run:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``events`` maps a termination label to an event function. A non-finite
    right-hand side is treated as blow-up.
    """
    events = dict(events or {})
    names = list(events) + ["blow-up"]
    funcs = [events[k] for k in events] + [_blowup_event]

    def safe(t, y):
        with np.errstate(all="ignore"):
            out = np.asarray(rhs(t, y), float)
        if not np.all(np.isfinite(out)):
            return np.full_like(out, BLOWUP * 10)
        return out

    res = solve_ivp(safe, (t0, t1), np.asarray(y0, float), method="DOP853", rtol=rtol,
                    atol=atol, events=funcs, dense_output=True, max_step=max_step)
    found = {}
    termination = "t-max"
    for name, te, ye in zip(names, res.t_events, res.y_events):
        if len(te):
            found[name] = (float(te[0]), np.asarray(ye[0], float))
    if res.status == 1:
        hit = [(abs(v[0] - t0), k) for k, v in found.items()
               if getattr(funcs[names.index(k)], "terminal", False)]
        termination = min(hit)[1] if hit else "t-max"
    elif res.status == -1:
        termination = "blow-up"
    return _Run(res.t, res.y, res.sol, termination, found)


# ---------------------------------------------------------------------------
# one-dimensional base

def mu_1d(spec: ModelSpec, w, dw):
    """``mu = (m-1)(w'^2 + k w^2)`` with ``k = lam/m`` on a one-dimensional base."""
    k = spec.lam / spec.m
    return (spec.m - 1) * (dw ** 2 + k * w ** 2)


def solve_1d(spec: ModelSpec, w0: float, dw0: float, t_range=(-10.0, 10.0)) -> Trajectory:
    """Solve ``w'' = -(lam/m) w`` from ``t = 0`` in both directions.

    Integration stops at ``w = 0``. When ``w0 = 0`` the start is a boundary and
    only the side where ``w > 0`` is integrated.

    Raises
    ------
    DegenerateData
        ``(w0, dw0) = (0, 0)`` or ``w0 < 0``.
    """
    spec = validate_spec(spec)
    if w0 == 0 and dw0 == 0:
        raise DegenerateData("w0 and dw0 both vanish")
    if w0 < 0:
        raise DegenerateData("w must be positive")
    k = spec.lam / spec.m

    def rhs(t, y):
        return [y[1], -k * y[0]]

    wzero = _event(lambda t, y: y[0])
    sides = []
    lo, hi = t_range
    if w0 > 0 or dw0 > 0:
        if hi > 0:
            sides.append(_integrate(rhs, 0.0, [w0, dw0], hi, {"w-zero": wzero}))
    if w0 > 0 or dw0 < 0:
        if lo < 0:
            sides.append(_integrate(rhs, 0.0, [w0, dw0], lo, {"w-zero": wzero}))
    return _assemble(spec, "1d", sides, ("w", "dw"), rhs,
                     lambda y: {"mu": mu_1d(spec, y[0], y[1])},
                     second=lambda t, y: {"w": -k * y[0]})


def _assemble(spec, kind, runs: Sequence[_Run], names, rhs, invariants, second=None,
              meta=None) -> Trajectory:
    """Merge runs that start at a common point into one increasing trajectory."""
    pieces, ts, ys, events = [], [], [], {}
    terms = []
    for run in runs:
        t, y = run.t, run.y
        if t[-1] < t[0]:
            t, y = t[::-1], y[:, ::-1]
        ts.append(t)
        ys.append(y)
        pieces.append((float(t[0]), float(t[-1]), run.sol))
        for k, v in run.events.items():
            key = k if k not in events else k + "-2"
            events[key] = v
        terms.append(run.termination)
    order = np.argsort([t[0] for t in ts])
    t_all = np.concatenate([ts[i] for i in order])
    y_all = np.concatenate([ys[i] for i in order], axis=1)
    t_all, idx = np.unique(t_all, return_index=True)
    y_all = y_all[:, idx]
    inv = invariants(y_all)
    inv = {k: np.broadcast_to(np.asarray(v, float), t_all.shape).copy() for k, v in inv.items()}
    priority = ["blow-up", "w-zero", "psi-zero", "stationary", "t-max"]
    termination = min(terms, key=priority.index) if terms else "t-max"
    dense = _Piecewise(pieces)

    def second_eval(t, y):
        return {k: np.asarray(v, float) for k, v in second(t, y).items()}

    return Trajectory(spec, kind, t_all, y_all.T.copy(), tuple(names), inv, termination, events,
                      dense, second_eval if second else None, dict(meta or {}))


# ---------------------------------------------------------------------------
# surfaces

def surface_first_integral(spec: ModelSpec, w, dw):
    """Constant ``C`` of the surface equation.

    ``C = (w'^2 - mu/(m-1) + lam w^2/(m+1)) w^(m-1)`` for ``m > 1``; for
    ``m = 1`` the conserved quantity is ``w'^2 + (lam/2) w^2``.
    """
    m, lam, mu = spec.m, spec.lam, spec.mu
    if m == 1:
        return dw ** 2 + 0.5 * lam * w ** 2
    return (dw ** 2 - mu / (m - 1) + lam * w ** 2 / (m + 1)) * np.exp((m - 1) * np.log(w))


def surface_velocity_squared(spec: ModelSpec, C: float, w):
    """Right side of ``w'^2 = mu/(m-1) - lam w^2/(m+1) + C w^(1-m)``."""
    m = spec.m
    return spec.mu / (m - 1) - spec.lam * w ** 2 / (m + 1) + C * np.exp((1 - m) * np.log(w))


def polar_w0(spec: ModelSpec) -> float:
    """Positive root of ``lam w0^2 + 2 w0 = mu`` (smooth axis with ``w''(0) = 1``)."""
    lam, mu = spec.lam, spec.mu
    if lam == 0:
        roots = [mu / 2.0]
    else:
        disc = 1.0 + lam * mu
        if disc < 0:
            raise SmoothnessViolation("no real w(0) solves the axis condition")
        roots = [(-1.0 + s * math.sqrt(disc)) / lam for s in (1.0, -1.0)]
    roots = [r for r in roots if r > 0]
    if not roots:
        raise SmoothnessViolation("no positive w(0) solves the axis condition")
    return min(roots)


def solve_surface(spec: ModelSpec, initial: dict, mode: str = "cartesian",
                  t_max: float = 10.0) -> Trajectory:
    """Integrate ``2 w w'' + (m-1) w'^2 + lam w^2 = mu`` on a surface.

    Parameters
    ----------
    spec : ModelSpec
        ``n`` is ignored (always 2). ``mu`` is required in cartesian mode; in
        polar mode it is set by the axis condition when absent.
    initial : dict
        Cartesian mode: ``{"t0", "w0", "dw0"}``. Polar mode: ``{"w0"}`` (the
        start is ``t = 0`` with ``w'(0) = 0``).
    mode : {"cartesian", "polar"}
    t_max : float
        End of the integration interval.

    Raises
    ------
    SmoothnessViolation
        Polar axis condition ``lam w0^2 + 2 w0 = mu`` unsatisfiable or violated.
    BlowUp
        The solution escapes before ``t_max``.
    """
    spec = spec.replace(n=2)
    m, lam = spec.m, spec.lam
    if mode == "polar":
        w0 = initial.get("w0")
        if w0 is None:
            if spec.mu is None:
                raise SmoothnessViolation("polar mode needs w0 or mu")
            w0 = polar_w0(spec)
        if w0 <= 0:
            raise SmoothnessViolation("polar mode needs w(0) > 0")
        mu_axis = lam * w0 ** 2 + 2 * w0
        if spec.mu is not None and not math.isclose(spec.mu, mu_axis, rel_tol=1e-10, abs_tol=1e-12):
            raise SmoothnessViolation(f"axis condition gives mu={mu_axis}, spec has {spec.mu}")
        spec = spec.replace(mu=mu_axis, mu_source="formula-derived")
        t0, y0 = 0.0, [w0, 0.0]
    elif mode == "cartesian":
        if spec.mu is None:
            raise InconsistentMu("cartesian surface mode needs mu")
        t0, y0 = float(initial.get("t0", 0.0)), [float(initial["w0"]), float(initial["dw0"])]
        if y0[0] <= 0:
            raise DegenerateData("w must be positive")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if m == 1 and spec.mu != 0:
        raise InconsistentMu("m = 1 surfaces have mu = 0")
    spec = validate_spec(spec)
    mu = spec.mu

    def ddw(w, dw):
        return (mu - (m - 1) * dw ** 2 - lam * w ** 2) / (2 * w)

    def rhs(t, y):
        return [y[1], ddw(y[0], y[1])]

    events = {"w-zero": _event(lambda t, y: y[0])}
    if mode == "polar":
        # the axis at t = 0 is the start; a second zero of w' is another axis
        events["psi-zero"] = _event(lambda t, y: y[1] if t > t0 + 1e-9 else 1.0)
    else:
        sgn = 1.0 if y0[1] >= 0 else -1.0
        events["psi-zero"] = _event(lambda t, y: sgn * y[1])
    run = _integrate(rhs, t0, y0, t_max, events)
    if run.termination == "blow-up":
        raise BlowUp(f"surface solution escaped near t={run.t[-1]:.6g}")

    def inv(y):
        w, dw = y
        out = {"mu": 2 * w * ddw(w, dw) + (m - 1) * dw ** 2 + lam * w ** 2}
        out["C"] = surface_first_integral(spec, w, dw)
        return out

    traj = _assemble(spec, f"surface-{mode}", [run], ("w", "dw"), rhs, inv,
                     second=lambda t, y: {"w": ddw(y[0], y[1])})
    traj.meta["mode"] = mode
    traj.meta["psi_scale"] = 1.0 if mode == "polar" else float(y0[1]) if y0[1] != 0 else 1.0
    return traj


def surface_model(traj: Trajectory) -> WarpedModel:
    """Warped model ``dt^2 + psi^2 dth^2`` with ``psi = w'/const`` from a surface solve."""
    w = traj.profile("w")
    c = traj.meta.get("psi_scale", 1.0)
    if traj.meta.get("mode") == "polar":
        c = float(traj.second(np.array([0.0]), traj(np.array([0.0])))["w"][0])

    def psi(t):
        _, d1, d2 = w.func(t)
        d3 = _surface_third(traj.spec, *w.func(t))
        return d1 / c, d2 / c, d3 / c

    origin = "pole" if traj.meta.get("mode") == "polar" else "interior-level-set"
    return WarpedModel(traj.spec, Profile(psi, w.domain, "sampled"), w, link="sphere",
                       origin_type=origin, label=traj.kind)


def _surface_third(spec, w, dw, ddw):
    """``w''' = -m w' w''/w - lam w'`` obtained by differentiating the surface equation."""
    return -spec.m * dw * ddw / w - spec.lam * dw


def rescale_surface(spec: ModelSpec, w0: float, a: float) -> dict:
    """Normalize a ``lam < 0`` surface solution to ``lam~ = -(m+1)``.

    With ``s = k t``, ``k^2 = -lam/(m+1)`` and ``w~(s) = l w(t)``,
    ``l = a/w0``, the equation becomes
    ``2 w~ w~'' + (m-1) w~'^2 - (m+1) w~^2 = mu~`` with ``mu~ = mu l^2/k^2``,
    so ``w~(0) = a``. For a polar start the constant of the first integral is
    ``C~ = -(a^(m+1) + mu~ a^(m-1)/(m-1))``.
    """
    if spec.lam >= 0:
        raise ValueError("rescaling applies to lam < 0")
    m = spec.m
    k = math.sqrt(-spec.lam / (m + 1))
    l = a / w0
    mu_t = spec.mu * l * l / (k * k)
    C_t = -(a ** (m + 1) + mu_t * a ** (m - 1) / (m - 1)) if m != 1 else float("nan")
    return {"k": k, "l": l, "lam": -(m + 1.0), "mu": mu_t, "C": C_t}


def completeness_integrals(spec: ModelSpec, C: float, w_range: tuple[float, float],
                           w_mid: float | None = None) -> tuple[float, float]:
    """The two integrals of ``dw / sqrt(F(w))`` deciding completeness.

    ``F(w) = mu/(m-1) - lam w^2/(m+1) + C w^(1-m)``. The metric with
    ``w' > 0`` on the range ``(a, b)`` is complete iff both integrals from
    ``a`` to ``w_mid`` and from ``w_mid`` to ``b`` diverge. Divergent
    integrals are returned as ``inf``; an end is divergent when ``b = inf``
    with ``F`` growing at most quadratically, or when ``F`` has a zero of order
    at least two at a finite end.
    """
    a, b = w_range
    if w_mid is None:
        w_mid = 2.0 * a if not math.isfinite(b) else 0.5 * (a + b)

    def F(w):
        return surface_velocity_squared(spec, C, w)

    def dF(w):
        m = spec.m
        return -2 * spec.lam * w / (m + 1) + C * (1 - m) * w ** (-m)

    def end_integral(lo, hi, end_is_lo):
        end = lo if end_is_lo else hi
        if not math.isfinite(end):
            return math.inf  # F grows at most like w^2
        if end > 0 and abs(F(end)) < 1e-12 and abs(dF(end)) < 1e-9:
            return math.inf
        val, _ = quad(lambda w: 1.0 / math.sqrt(max(F(w), 1e-300)), lo, hi, limit=200)
        return val

    return end_integral(a, w_mid, True), end_integral(w_mid, b, False)


# ---------------------------------------------------------------------------
# Schwarzschild-type surface

def schwarzschild_series(m: float, t):
    """Leading Taylor terms of the solution at its axis: ``1 + (m-1) t^2/4``."""
    t = np.asarray(t, float)
    c2 = (m - 1) / 4.0
    c4 = -m * (m - 1) ** 2 / 48.0
    return 1 + c2 * t ** 2 + c4 * t ** 4, 2 * c2 * t + 4 * c4 * t ** 3


def schwarzschild_solve(m: float, t_range=(0.0, 10.0)) -> Trajectory:
    """Solve ``w'^2 = 1 - w^(1-m)`` with ``w(0) = 1``, ``w' >= 0``.

    The first-order equation is degenerate at ``t = 0`` (``w' = 0``), so the
    equivalent second-order form ``w'' = ((m-1)/2) w^(-m)`` is integrated. It
    is regular at the axis and picks out the nonnegative-slope branch.
    """
    if m <= 1:
        raise InvalidM("Schwarzschild-type solutions need m > 1")
    spec = validate_spec(ModelSpec(n=2, m=float(m), lam=0.0, mu=m - 1.0,
                                   fiber_kind="sphere", kappa_F=m - 1.0))

    def ddw(w):
        return 0.5 * (m - 1) * np.exp(-m * np.log(w))

    def rhs(t, y):
        return [y[1], ddw(y[0])]

    run = _integrate(rhs, t_range[0], schwarzschild_initial(m, t_range[0]), t_range[1])

    def inv(y):
        w, dw = y
        return {"mu": 2 * w * ddw(w) + (m - 1) * dw ** 2,
                "C": surface_first_integral(spec, w, dw)}

    traj = _assemble(spec, "schwarzschild", [run], ("w", "dw"), rhs, inv,
                     second=lambda t, y: {"w": ddw(y[0])})
    traj.meta["mode"] = "polar"
    return traj


def schwarzschild_initial(m: float, t0: float = 0.0):
    if t0 == 0:
        return [1.0, 0.0]
    w, dw = schwarzschild_series(m, t0)
    return [float(w), float(dw)]


# ---------------------------------------------------------------------------
# rotationally symmetric bases

def rotsym_accel(spec: ModelSpec, kappa_L: float, psi, dpsi, w, dw):
    """``(psi'', w'')`` for the warped quasi-Einstein system."""
    n, m, lam = spec.n, spec.m, spec.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        x = dpsi / psi
        y = dw / w
        a = (kappa_L - (n - 2) * dpsi ** 2) / psi ** 2 - lam - m * x * y
        ddpsi = psi * a
        ddw = w / m * (-(n - 1) * a - lam)
    return ddpsi, ddw


def rotsym_mu(spec: ModelSpec, kappa_L: float, psi, dpsi, w, dw):
    """``w Lap w + (m-1) w'^2 + lam w^2`` along the system."""
    n, m, lam = spec.n, spec.m, spec.lam
    _, ddw = rotsym_accel(spec, kappa_L, psi, dpsi, w, dw)
    with np.errstate(divide="ignore", invalid="ignore"):
        return w * (ddw + (n - 1) * dpsi / psi * dw) + (m - 1) * dw ** 2 + lam * w ** 2


def pole_series(spec: ModelSpec, w0: float, mu: float):
    """Taylor coefficients at a smooth axis with a round unit link.

    ``psi = t + a t^3 + d t^5`` and ``w = w0 + b t^2 + c t^4``.
    """
    n, m, lam = spec.n, spec.m, spec.lam
    b = (mu - lam * w0 ** 2) / (2 * n * w0)
    a = (-2 * b * m - lam * w0) / (6 * w0 * (n - 1))
    c = -b * (4 * b * m + 3 * b * n - 6 * b + 2 * lam * w0) / (6 * w0 * (n + 2))
    d = (52 * b**2 * m**2 * n - 40 * b**2 * m**2 + 48 * b**2 * m * n**2 - 96 * b**2 * m * n
         + 48 * b**2 * m + 28 * b * lam * m * n * w0 - 16 * b * lam * m * w0
         + lam**2 * n * w0**2 + 2 * lam**2 * w0**2) / (120 * w0**2 * (n - 1)**2 * (n + 2))
    return {"a": a, "b": b, "c": c, "d": d}


def _pole_state(co, w0, t):
    t = np.asarray(t, float)
    a, b, c, d = co["a"], co["b"], co["c"], co["d"]
    return np.array([t + a * t**3 + d * t**5, 1 + 3 * a * t**2 + 5 * d * t**4,
                     w0 + b * t**2 + c * t**4, 2 * b * t + 4 * c * t**3])


def boundary_series(spec: ModelSpec, kappa_L: float, beta: float, psi_b: float):
    """Taylor coefficients at a boundary ``w = 0`` in the distance ``tau`` to it.

    ``w = beta tau + w3 tau^3 + w5 tau^5`` and ``psi = psi_b + p2 tau^2 + p4 tau^4``.
    """
    n, m, lam = spec.n, spec.m, spec.lam
    k, P = kappa_L, psi_b
    w3 = -beta * (k * n - k + lam * m * P**2 - lam * n * P**2 + 2 * lam * P**2) / (6 * m * P**2 * (m + 1))
    p2 = (k - lam * P**2) / (2 * P * (m + 1))
    p4 = -(k - lam * P**2) * (3 * k * m + 4 * k * n - 7 * k + lam * m * P**2 - 4 * lam * n * P**2
                              + 11 * lam * P**2) / (24 * P**3 * (m + 1)**2 * (m + 3))
    w5 = beta * (12 * k**2 * m**2 * n - 12 * k**2 * m**2 + 13 * k**2 * m * n**2 - 26 * k**2 * m * n
                 + 13 * k**2 * m + 3 * k**2 * n**2 - 6 * k**2 * n + 3 * k**2
                 - 10 * k * lam * m**2 * n * P**2 + 10 * k * lam * m**2 * P**2
                 - 26 * k * lam * m * n**2 * P**2 + 72 * k * lam * m * n * P**2
                 - 46 * k * lam * m * P**2 - 6 * k * lam * n**2 * P**2 + 18 * k * lam * n * P**2
                 - 12 * k * lam * P**2 + lam**2 * m**3 * P**4 - 2 * lam**2 * m**2 * n * P**4
                 + 7 * lam**2 * m**2 * P**4 + 13 * lam**2 * m * n**2 * P**4
                 - 46 * lam**2 * m * n * P**4 + 40 * lam**2 * m * P**4 + 3 * lam**2 * n**2 * P**4
                 - 12 * lam**2 * n * P**4 + 12 * lam**2 * P**4) / (
        120 * m**2 * P**4 * (m + 1)**2 * (m + 3))
    return {"beta": beta, "psi_b": psi_b, "w3": w3, "w5": w5, "p2": p2, "p4": p4}


def _boundary_state(co, t_b, t, side):
    """State at ``t`` near a boundary at ``t_b``; ``side = -1`` if the interior is ``t < t_b``."""
    tau = side * (np.asarray(t, float) - t_b)
    B, w3, w5 = co["beta"], co["w3"], co["w5"]
    P, p2, p4 = co["psi_b"], co["p2"], co["p4"]
    return np.array([P + p2 * tau**2 + p4 * tau**4, side * (2 * p2 * tau + 4 * p4 * tau**3),
                     B * tau + w3 * tau**3 + w5 * tau**5, side * (B + 3 * w3 * tau**2 + 5 * w5 * tau**4)])


ROTSYM_NAMES = ("psi", "dpsi", "w", "dw")


def _rotsym_rhs(spec, kappa_L):
    def rhs(t, y):
        ddpsi, ddw = rotsym_accel(spec, kappa_L, y[0], y[1], y[2], y[3])
        return [y[1], ddpsi, y[3], ddw]
    return rhs


def solve_rotsym(spec: ModelSpec, link: str = "sphere", initial: dict | None = None,
                 t_range=(0.0, 10.0), series_step: float = 1e-3) -> Trajectory:
    """Integrate the warped system for ``g = dt^2 + psi^2 g_L`` and ``w(t)``.

    Parameters
    ----------
    spec : ModelSpec
        Needs ``mu`` for pole and boundary starts.
    link : {"sphere", "flat", "hyperbolic"}
        Unit space form of dimension ``n - 1``; fixes ``kappa_L``.
    initial : dict
        Either a regular start ``{"psi", "dpsi", "w", "dw"}`` at ``t_range[0]``,
        a pole start ``{"pole": True, "w0": w0}`` or a boundary start
        ``{"boundary": True, "psi_b": psi_b}`` (slope from ``mu``).
    t_range : tuple
        ``(t0, t1)``; ``t1 < t0`` integrates backwards.
    series_step : float
        Offset at which the Taylor start hands over to the integrator.

    Raises
    ------
    PoleSingularity
        ``psi = 0`` in regular data that is not a smooth axis.
    BlowUp
        Only through the termination label, never raised.
    """
    spec = validate_spec(spec)
    if spec.n < 2:
        raise UnsupportedLink("rotationally symmetric bases need n >= 2")
    kappa_L = link_kappa(link, spec.n)
    initial = dict(initial or {})
    t0, t1 = map(float, t_range)
    side = 1.0 if t1 > t0 else -1.0
    rhs = _rotsym_rhs(spec, kappa_L)
    pieces = []
    if initial.get("pole") or initial.get("psi", 1.0) == 0.0:
        if not initial.get("pole"):
            if initial.get("dpsi") != 1.0 or initial.get("dw") != 0.0:
                raise PoleSingularity("psi = 0 needs psi' = 1 and w' = 0")
        if link != "sphere":
            raise PoleSingularity("a smooth axis needs a round link")
        if spec.mu is None:
            raise InconsistentMu("pole start needs mu")
        w0 = float(initial["w0"])
        co = pole_series(spec, w0, spec.mu)
        ts = t0 + side * series_step
        y0 = _pole_state(co, w0, side * series_step)
        if side < 0:
            y0 = y0 * np.array([-1, -1, 1, 1])
        start_piece = (min(t0, ts), max(t0, ts),
                       lambda s: _pole_state(co, w0, s - t0) * (np.array([[1], [1], [1], [1]]) if side > 0
                                                                else np.array([[-1], [-1], [1], [1]])))
        origin = "pole"
    elif initial.get("boundary"):
        if spec.mu is None or spec.m <= 1 or spec.mu <= 0:
            raise InconsistentMu("boundary start needs m > 1 and mu > 0")
        beta = math.sqrt(spec.mu / (spec.m - 1))
        co = boundary_series(spec, kappa_L, beta, float(initial["psi_b"]))
        bside = side  # interior lies in the integration direction
        ts = t0 + side * series_step
        y0 = _boundary_state(co, t0, ts, bside)
        start_piece = (min(t0, ts), max(t0, ts), lambda s: _boundary_state(co, t0, s, bside))
        origin = "boundary"
    else:
        ts = t0
        y0 = np.array([initial["psi"], initial["dpsi"], initial["w"], initial["dw"]], float)
        if y0[0] <= 0 or y0[2] <= 0:
            raise DegenerateData("regular start needs psi > 0 and w > 0")
        start_piece = None
        origin = "interior-level-set"
    events = {"w-zero": _event(lambda t, y: y[2]), "psi-zero": _event(lambda t, y: y[0])}
    run = _integrate(rhs, ts, y0, t1, events)
    runs = [run]
    if start_piece is not None:
        lo, hi, fn = start_piece
        grid = np.array([lo, hi])
        runs.append(_Run(grid if side > 0 else grid[::-1], fn(grid) if side > 0 else fn(grid[::-1]),
                         fn, "t-max", {}))
    axis_ddw = 2.0 * co["b"] if origin == "pole" else None

    def inv(y):
        with np.errstate(all="ignore"):
            mu = rotsym_mu(spec, kappa_L, *y)
        if axis_ddw is not None:
            mu = np.where(y[0] == 0.0, spec.mu, mu)
        return {"mu": mu}

    def second(t, y):
        with np.errstate(all="ignore"):
            ddpsi, ddw = rotsym_accel(spec, kappa_L, *y)
        if axis_ddw is not None:
            on_axis = np.abs(y[0]) < 1e-300
            ddpsi = np.where(on_axis, 0.0, ddpsi)
            ddw = np.where(on_axis, axis_ddw, ddw)
        return {"psi": ddpsi, "w": ddw}

    traj = _assemble(spec, "rotsym", runs, ROTSYM_NAMES, rhs, inv, second=second)
    traj.termination = run.termination
    if run.termination == "blow-up":
        # psi -> 0 or w -> 0 while slopes diverge: a singular end at finite t
        for row, label in ((0, "psi-zero"), (2, "w-zero")):
            end, peak = abs(float(run.y[row, -1])), float(np.max(np.abs(run.y[row])))
            if end <= COLLAPSE * peak and label not in traj.events:
                traj.termination = label
                traj.events[label] = (float(run.t[-1]), run.y[:, -1].copy())
                break
    traj.meta.update(link=link, kappa_L=kappa_L, origin=origin, t0=t0)
    return traj


def rotsym_model(traj: Trajectory, label: str = "") -> WarpedModel:
    """Warped model built from a rotationally symmetric trajectory."""
    origin = traj.meta.get("origin", "interior-level-set")
    return WarpedModel(traj.spec, traj.profile("psi"), traj.profile("w"), link=traj.meta["link"],
                       origin_type=origin if origin in ("pole", "boundary") else "interior-level-set",
                       label=label or traj.kind)


def pole_outcome(spec: ModelSpec, w0: float, t_max: float = 50.0) -> tuple[float, Trajectory]:
    """Signed outcome of a pole start, used to bracket disk solutions.

    Generic trajectories end singularly: either ``psi`` reaches zero first
    (``-1``) or ``w`` reaches zero while ``psi'`` diverges, and then the sign
    of ``psi'`` is returned. A disk, where ``psi'`` stays finite at ``w = 0``,
    sits where the outcome flips. A flip can also come from a closed sphere,
    so candidates must be confirmed by :func:`solve_rotsym_disk`.
    """
    traj = solve_rotsym(spec, "sphere", {"pole": True, "w0": w0}, (0.0, t_max))
    if traj.termination == "psi-zero":
        return -1.0, traj
    last = traj.states[-1]
    if traj.termination == "blow-up" and last[0] < 1e-6 * np.max(traj.column("psi")):
        return -1.0, traj
    return (1.0 if last[1] > 0 else -1.0), traj


@dataclass
class ShootResult:
    param: float
    value: float
    iterations: int
    trajectory: Trajectory | None = None


def shoot(objective: Callable, lo: float, hi: float, tol: float = 1e-8,
          max_iter: int = 200, method: str = "brentq") -> ShootResult:
    """Find a parameter where ``objective`` changes sign.

    ``objective(p)`` returns a float or ``(float, Trajectory)``. ``brentq``
    suits continuous objectives; ``bisect`` suits sign-valued ones such as
    :func:`pole_outcome`.

    Raises
    ------
    NoBracket
        The objective has the same sign at both ends.
    MaxIterations
        Tolerance not reached within ``max_iter`` evaluations.
    """
    def call(p):
        out = objective(p)
        return (float(out[0]), out[1]) if isinstance(out, tuple) else (float(out), None)

    f_lo, _ = call(lo)
    f_hi, _ = call(hi)
    if f_lo == 0:
        return ShootResult(lo, 0.0, 0, call(lo)[1])
    if f_hi == 0:
        return ShootResult(hi, 0.0, 0, call(hi)[1])
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracket(f"objective has the same sign at {lo} and {hi}")
    if method == "brentq":
        try:
            p, info = brentq(lambda p: call(p)[0], lo, hi, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps,
                             maxiter=max_iter, full_output=True, disp=False)
        except RuntimeError as exc:
            raise MaxIterations(str(exc)) from exc
        if not info.converged:
            raise MaxIterations(f"brentq did not converge in {max_iter} iterations")
        val, traj = call(p)
        return ShootResult(p, val, info.iterations, traj)
    if method == "bisect":
        it = 0
        while hi - lo > tol * max(1.0, abs(lo)):
            it += 1
            if it > max_iter:
                raise MaxIterations(f"bisection did not reach {tol} in {max_iter} steps")
            mid = 0.5 * (lo + hi)
            f_mid, _ = call(mid)
            if np.sign(f_mid) == np.sign(f_lo):
                lo, f_lo = mid, f_mid
            else:
                hi, f_hi = mid, f_mid
        p = 0.5 * (lo + hi)
        val, traj = call(p)
        return ShootResult(p, val, it, traj)
    raise ValueError(f"unknown method {method!r}")


def solve_rotsym_disk(spec: ModelSpec, w0: float, t_b: float, psi_b: float,
                      t_match: float | None = None, series_step: float = 1e-3,
                      xtol: float = 1e-14) -> Trajectory:
    """Disk solution: smooth axis at ``t = 0`` and boundary ``w = 0`` at ``t_b``.

    The boundary is a regular singular point of the system with a mode that
    grows like ``(t_b - t)^(-m)``, so shooting from the axis alone cannot land
    on it. Instead the axis-side solution (parameter ``w0``) and the
    boundary-side solution (parameters ``t_b`` and ``psi_b``, slope fixed by
    ``mu``) are integrated to an interior matching point and the state
    mismatch is driven to zero by least squares. Arguments are initial
    guesses.
    """
    spec = validate_spec(spec.replace(boundary=True))
    kappa_L = link_kappa("sphere", spec.n)
    if t_match is None:
        t_match = 0.5 * t_b

    def sides(p):
        a0, tb, pb = p
        left = solve_rotsym(spec, "sphere", {"pole": True, "w0": a0}, (0.0, t_match), series_step)
        right = solve_rotsym(spec, "sphere", {"boundary": True, "psi_b": pb}, (tb, t_match), series_step)
        return left, right

    def mismatch(p):
        try:
            left, right = sides(p)
        except Exception:
            return np.full(4, 1e3)
        if left.termination != "t-max" or right.termination != "t-max":
            return np.full(4, 1e3)
        yl = left(np.array([t_match]))[:, 0]
        yr = right(np.array([t_match]))[:, 0]
        return yl - yr

    fit = least_squares(mismatch, [w0, t_b, psi_b], xtol=xtol, ftol=1e-15, gtol=1e-15,
                        method="lm", max_nfev=400)
    a0, tb, pb = fit.x
    left, right = sides(fit.x)
    residual = float(np.max(np.abs(mismatch(fit.x))))
    pieces = []
    for tr in (left, right):
        pieces.extend([(float(tr.t[0]), float(tr.t[-1]), tr.dense)])
    dense = _Piecewise(pieces)
    t_all = np.concatenate([left.t, right.t])
    y_all = np.concatenate([left.states, right.states])
    t_all, idx = np.unique(t_all, return_index=True)
    y_all = y_all[idx]
    mu = rotsym_mu(spec, kappa_L, *y_all.T)
    yb = np.array([pb, 0.0, 0.0, -math.sqrt(spec.mu / (spec.m - 1))])
    traj = Trajectory(spec, "rotsym-disk", t_all, y_all, ROTSYM_NAMES, {"mu": mu}, "w-zero",
                      {"w-zero": (float(tb), yb)}, dense, left.second,
                      {"link": "sphere", "kappa_L": kappa_L, "origin": "pole", "w0": float(a0),
                       "t_b": float(tb), "psi_b": float(pb), "match_residual": residual,
                       "t_match": float(t_match)})
    return traj


def find_disk(spec: ModelSpec, w0_bracket: tuple[float, float], t_max: float = 50.0,
              tol: float = 1e-9) -> Trajectory:
    """Locate a disk solution between two axis values with opposite outcomes.

    Bisection on :func:`pole_outcome` gives an axis value whose trajectory
    follows the disk closely; its near-boundary data seed
    :func:`solve_rotsym_disk`.
    """
    res = shoot(lambda a: pole_outcome(spec, a, t_max), *w0_bracket, tol=tol, method="bisect")
    traj = res.trajectory
    w = traj.column("w")
    dw = traj.column("dw")
    # approach to the boundary: last sample where w is still decreasing fastest
    beta = math.sqrt(spec.mu / (spec.m - 1))
    k = int(np.argmin(np.abs(dw + beta) + (w > 0.5 * res.param) * 1e3))
    t_b = float(traj.t[k] + w[k] / beta)
    psi_b = float(traj.column("psi")[k])
    return solve_rotsym_disk(spec, res.param, t_b, psi_b)


# ---------------------------------------------------------------------------
# doubly warped three-dimensional base

DOUBLY_NAMES = ("phi", "dphi", "psi", "dpsi", "w", "dw")


def doubly_accel(spec: ModelSpec, phi, dphi, psi, dpsi, w, dw):
    """Second derivatives ``(phi'', psi'', w'')`` of the three-dimensional system."""
    m, lam = spec.m, spec.lam
    y = dw / w
    cross = dphi * dpsi / (phi * psi)
    ddphi = phi * (-lam - cross - m * y * dphi / phi)
    ddpsi = psi * (-lam - cross - m * y * dpsi / psi)
    ddw = w / m * (-ddphi / phi - ddpsi / psi - lam)
    return ddphi, ddpsi, ddw


def solve_doubly_warped_3d(spec: ModelSpec, phi0: float, dphi0: float, psi0: float,
                           dpsi0: float, w0: float, t_range=(0.0, 0.5), dw0: float = 0.0
                           ) -> Trajectory:
    """Integrate ``dr^2 + phi^2 dth1^2 + psi^2 dth2^2`` with potential ``w(r)``.

    Raises
    ------
    DegenerateData
        Non-positive ``phi0``, ``psi0`` or ``w0``.
    """
    spec = validate_spec(spec.replace(n=3))
    if min(phi0, psi0, w0) <= 0:
        raise DegenerateData("phi0, psi0 and w0 must be positive")
    m, lam = spec.m, spec.lam

    def rhs(t, y):
        a, b, c = doubly_accel(spec, *y)
        return [y[1], a, y[3], b, y[5], c]

    def mu_of(y):
        phi, dphi, psi, dpsi, w, dw = y
        _, _, ddw = doubly_accel(spec, *y)
        lap = ddw + (dphi / phi + dpsi / psi) * dw
        return w * lap + (m - 1) * dw ** 2 + lam * w ** 2

    events = {"w-zero": _event(lambda t, y: y[4]), "psi-zero": _event(lambda t, y: min(y[0], y[2]))}
    run = _integrate(rhs, t_range[0], [phi0, dphi0, psi0, dpsi0, w0, dw0], t_range[1], events)
    traj = _assemble(spec, "doubly", [run], DOUBLY_NAMES, rhs, lambda y: {"mu": mu_of(y)},
                     second=lambda t, y: dict(zip(("phi", "psi", "w"), doubly_accel(spec, *y))))
    return traj


def doubly_model(traj: Trajectory) -> DoublyWarpedModel:
    return DoublyWarpedModel(traj.spec, traj.profile("phi"), traj.profile("psi"), traj.profile("w"),
                             label=traj.kind)


# ---------------------------------------------------------------------------
# phase plane

def phase_field(n: int, m: float, x, y):
    """``(x', y')`` with ``x' = -(n-1)x^2 - m x y`` and ``y' = -y^2 + ((n-1)/m)(m x y + (n-2) x^2)``."""
    dx = -(n - 1) * x * x - m * x * y
    dy = -y * y + (n - 1) / m * (m * x * y + (n - 2) * x * x)
    return dx, dy


def phase_plane_flow(n: int, m: float, x0: float, y0: float, t_range=(1.0, 10.0),
                     direction: str = "forward") -> Trajectory:
    """Flow of the planar system in ``x = psi'/psi`` and ``y = w'/w``.

    ``direction = "backward"`` integrates from ``t_range[1]`` down to
    ``t_range[0]``. Finite-time escape terminates with ``blow-up``.
    """
    spec = ModelSpec(n=int(n), m=float(m), lam=0.0)
    t_lo, t_hi = map(float, t_range)
    t0, t1 = (t_lo, t_hi) if direction == "forward" else (t_hi, t_lo)
    if x0 == 0 and y0 == 0:
        t = np.array([min(t0, t1), max(t0, t1)])
        zero = np.zeros((2, 2))
        const = _Piecewise([(t[0], t[1], lambda s: np.zeros((2, np.size(s))))])
        return Trajectory(spec, "phase", t, zero, ("x", "y"), {}, "stationary", {}, const, None,
                          {"direction": direction})

    def rhs(t, s):
        return list(phase_field(n, m, s[0], s[1]))

    run = _integrate(rhs, t0, [x0, y0], t1)
    traj = _assemble(spec, "phase", [run], ("x", "y"), rhs, lambda s: {})
    traj.meta["direction"] = direction
    traj.meta["steps"] = run.t.copy()
    traj.meta["step_states"] = run.y.T.copy()
    return traj
