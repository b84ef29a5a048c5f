"""Acceptance criteria, one test group per criterion.

Each group carries ``@pytest.mark.criterion``; the conftest prints one
PASS/FAIL line per criterion at the end of the run. Run on its own with
``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from quasi_einstein import catalog, ode, oracle, tensor_algebra as ta, verify
from quasi_einstein.curvature import (
    doubly_warped_mu_values,
    einstein_total_space,
    mu_values,
    qe_residual,
    warped_curvature,
)
from quasi_einstein.errors import EmptyCell
from quasi_einstein.model import ModelSpec, Profile, WarpedModel, validate_spec

SIGN_PAIRS = [(a, b) for a in (1, 0, -1) for b in (1, 0, -1)]


def _populated(table, pairs=SIGN_PAIRS, **kw):
    out = []
    for ls, ms in pairs:
        try:
            out.append(table(ls, ms, **kw))
        except EmptyCell:
            continue
    return out


# ---------------------------------------------------------------------------
# 1. one-dimensional table

TABLE1 = _populated(catalog.table1)


@pytest.mark.criterion(1, "one-dimensional solves match closed forms")
class TestOneDimensionalReproduction:
    def test_every_cell_is_covered(self):
        assert len(TABLE1) == 6

    @pytest.mark.parametrize("entry", TABLE1, ids=lambda e: e.id)
    def test_solve_matches_closed_form(self, entry, detail):
        model = entry.model
        lo, hi = model.domain
        start = lo if math.isfinite(lo) else 0.0
        if lo < 0 < hi:
            start = 0.0
        w0, dw0, _ = (float(v) for v in model.w(start))
        t_range = (-5.0, 5.0) if math.isinf(lo) and math.isinf(hi) else (-10.0, 10.0)
        clock = time.perf_counter()
        traj = ode.solve_1d(entry.spec, w0, dw0, t_range)
        elapsed = time.perf_counter() - clock
        ts = np.linspace(traj.t_start, traj.t_end, 801)
        exact = model.w.value(ts)
        err = np.max(np.abs(traj(ts)[0] - exact) / np.maximum(1.0, np.abs(exact)))
        assert err <= 1e-9
        assert elapsed < 1.0
        # boundary events at the finite tabulated endpoints
        event_ts = sorted(v[0] for k, v in traj.events.items() if k.startswith("w-zero"))
        finite_ends = [e for e in (lo, hi) if math.isfinite(e)]
        for e in finite_ends:
            if e == start:
                # the solve starts on the boundary itself
                assert traj.t_start == e
            else:
                assert min(abs(e - s) for s in event_ts) <= 1e-8
        detail(f"{entry.id} err={err:.1e} {elapsed * 1e3:.0f}ms")

    def test_cos_cell_events_at_quarter_periods(self):
        entry = catalog.table1(1, 1, lam=7.0)
        k = 7.0 / entry.spec.m
        traj = ode.solve_1d(entry.spec, float(entry.model.w.value(0.0)), 0.0)
        events = sorted(v[0] for v in traj.events.values())
        half = math.pi / (2 * math.sqrt(k))
        assert events == pytest.approx([-half, half], abs=1e-8)


# ---------------------------------------------------------------------------
# 2. rho-Einstein table

TABLE2_CASES = [(n, m, e) for n in (2, 3, 4) for m in (2.0, 3.0)
                for e in _populated(catalog.table2, n=n, m=m)]


@pytest.mark.criterion(2, "Einstein-base entries are rho-Einstein and quasi-Einstein")
class TestEinsteinBaseReproduction:
    def test_every_cell_is_covered(self):
        assert len(TABLE2_CASES) == 3 * 2 * 5

    @pytest.mark.parametrize("n,m,entry", TABLE2_CASES,
                             ids=[f"{e.id}-n{n}-m{m:g}" for n, m, e in TABLE2_CASES])
    def test_rho_einstein_and_residual(self, n, m, entry):
        model = entry.model
        ts = entry.samples(60)
        fr = warped_curvature(model, ts)
        rho = (n - 1) * model.lam / (m + n - 1)
        assert np.max(np.abs(fr.ric_tt - rho)) <= 1e-10
        assert np.max(np.abs(fr.ric_LL - rho)) <= 1e-10
        assert np.max(qe_residual(model, ts)) <= 1e-7


# ---------------------------------------------------------------------------
# 3. mu constancy

def _spread(values) -> float:
    v = np.concatenate([np.atleast_1d(np.asarray(x, float)) for x in values])
    return float(np.std(v, ddof=1) / max(1.0, abs(float(np.mean(v)))))


def _trajectory_runs():
    """Solver trajectories with the model built from each and its boundary slopes."""
    runs = []

    def add(name, traj, model, slope_index):
        mask = traj.regular_mask()
        ts = traj.t[mask][1:-1]
        # boundary slopes only at smooth ends; a w-zero reached by escape is singular
        escape = traj.events.get("blow-up", (None,))[0]
        slopes = [v[1][slope_index] for k, v in traj.events.items()
                  if k.startswith("w-zero") and v[0] != escape]
        runs.append(pytest.param(traj, model, ts, slopes, id=name))

    for lam, w0, dw0 in [(3.0, 1.0, 0.0), (3.0, 0.5, 1.0), (-3.0, 0.0, 1.0), (-3.0, 1.0, 0.0),
                         (0.0, 0.0, 2.0)]:
        spec = ModelSpec(n=1, m=3.0, lam=lam)
        traj = ode.solve_1d(spec, w0, dw0, (-5.0, 5.0))
        w = traj.profile("w")
        model = WarpedModel(traj.spec, Profile.constant(1.0, w.domain), w, link="none",
                            check_origin=False)
        add(f"1d-lam{lam:g}-w{w0:g}", traj, model, 1)
    for lam, m in [(0.0, 2.0), (-1.0, 2.0), (1.0, 3.0)]:
        traj = ode.solve_surface(ModelSpec(n=2, m=m, lam=lam), {"w0": 1.0}, "polar", t_max=8.0)
        add(f"surface-polar-lam{lam:g}", traj, ode.surface_model(traj), 1)
    traj = ode.solve_surface(ModelSpec(n=2, m=2.0, lam=1.0, mu=1.0),
                             {"t0": 0.0, "w0": 1.0, "dw0": 0.3}, "cartesian", t_max=8.0)
    add("surface-cartesian", traj, ode.surface_model(traj), 1)
    for m in (2.0, 3.0):
        traj = ode.schwarzschild_solve(m, (0.0, 10.0))
        add(f"schwarzschild-m{m:g}", traj, ode.surface_model(traj), 1)
    for n, m, lam, w0 in [(3, 2.0, 4.0, 0.3), (3, 2.0, 4.0, 0.5), (4, 3.0, 6.0, 1.0),
                          (3, 2.0, 0.0, 0.5), (3, 2.0, -1.0, 1.0)]:
        traj = ode.solve_rotsym(ModelSpec(n=n, m=m, lam=lam, mu=1.0), "sphere",
                                {"pole": True, "w0": w0}, (0.0, 10.0))
        add(f"rotsym-pole-n{n}-lam{lam:g}-w{w0:g}", traj, ode.rotsym_model(traj), 3)
    spec = validate_spec(ModelSpec(n=3, m=2.0, lam=4.0, mu=1.0, boundary=True))
    traj = ode.find_disk(spec, (0.2, 0.3))
    add("rotsym-disk", traj, ode.rotsym_model(traj), 3)
    traj = ode.solve_rotsym(ModelSpec(n=3, m=2.0, lam=1.0, mu=2.0), "sphere",
                            {"boundary": True, "psi_b": 0.7}, (0.0, 3.0))
    add("rotsym-boundary", traj, ode.rotsym_model(traj), 3)
    traj = ode.solve_doubly_warped_3d(ModelSpec(n=3, m=2.0, lam=-1.0), 1.0, 0.3, 1.0, -0.2, 1.0,
                                      (0.0, 0.5))
    add("doubly", traj, ode.doubly_model(traj), 5)
    return runs


CATALOG_MODELS = catalog.model_entries()


@pytest.mark.criterion(3, "mu formulas agree along catalog and solver trajectories")
class TestMuConstancy:
    @pytest.mark.parametrize("entry", CATALOG_MODELS, ids=lambda e: e.id)
    def test_catalog_entry(self, entry):
        model = entry.model
        ts = entry.samples(50)
        mu_a, mu_b = mu_values(model, ts)
        parts = [mu_a, mu_b]
        for end in verify._boundary_ends(model):
            slope = verify._boundary_limit(model, end, lambda t: model.w(t)[1])
            parts.append((model.m - 1) * slope ** 2)
        assert _spread(parts) <= 1e-8
        if entry.spec.mu is not None:
            assert float(np.mean(mu_a)) == pytest.approx(entry.spec.mu, rel=1e-8, abs=1e-8)

    @pytest.mark.parametrize("traj,model,ts,slopes", _trajectory_runs())
    def test_solver_trajectory(self, traj, model, ts, slopes, detail):
        assert ts.size >= 3
        if isinstance(model, WarpedModel):
            mu_a, mu_b = mu_values(model, ts)
        else:
            mu_a, mu_b = doubly_warped_mu_values(model, ts)
        parts = [mu_a, mu_b] + [(traj.spec.m - 1) * s * s for s in slopes]
        spread = _spread(parts)
        assert spread <= 1e-8
        # the solver's own logged invariant agrees with the pointwise formulas
        logged = np.asarray(traj.invariants["mu"])[traj.regular_mask()]
        logged = logged[np.isfinite(logged)]
        if logged.size:
            assert _spread([mu_a, logged]) <= 1e-8


# ---------------------------------------------------------------------------
# 4. Schwarzschild total space

@pytest.mark.criterion(4, "Schwarzschild m=2 total space is Ricci flat")
class TestSchwarzschild:
    @pytest.mark.parametrize("r", [1.5, 2.0, 5.0])
    def test_closed_form_and_oracle(self, r, detail):
        entry = catalog.schwarzschild(2)
        t = catalog.schwarzschild_t_of_r(2, r)
        assert float(entry.model.w.value(t)) == pytest.approx(r, rel=1e-12)
        closed = einstein_total_space(entry.model, t, kappa_F=1.0).matrix(2)
        assert np.max(np.abs(closed)) <= 1e-6
        _, _, total = oracle.schwarzschild_chart(2)
        fd = oracle.fd_curvature_oracle(total, np.array([r, 0.3, 0.2, -0.1])).ric
        assert np.max(np.abs(fd)) <= 1e-6
        detail(f"r={r:g}: closed {np.max(np.abs(closed)):.0e}, fd {np.max(np.abs(fd)):.0e}")

    def test_chart_coordinate_agrees_with_radial_parameter(self):
        # independent quadrature of dt = dr / sqrt(1 - 1/r)
        for r in (1.5, 2.0, 5.0):
            ref, _ = quad(lambda s: 1.0 / math.sqrt(1.0 - 1.0 / s), 1.0, r, limit=200)
            assert catalog.schwarzschild_t_of_r(2, r) == pytest.approx(ref, rel=1e-10)


# ---------------------------------------------------------------------------
# 5. algebraic identities

TRIALS = 1000


def _random_case(rng):
    n = int(rng.integers(3, 7))
    m = float(rng.uniform(1.1, 12.0))
    lam = float(rng.uniform(-5.0, 5.0))
    R = ta.random_curvature(rng, n)
    ric = ta.ricci_contraction(R)
    scal = float(np.trace(ric))
    spec = ModelSpec(n=n, m=m, lam=lam)
    rho, P = ta.p_tensor(ric, scal, spec)
    Q = ta.q_tensor(R, ric, np.eye(n), rho, spec)
    return n, m, lam, R, ric, scal, P, Q


@pytest.mark.criterion(5, "algebraic identity suite")
class TestAlgebraicIdentities:
    """Residuals are relative to ``max(1, largest input component)``."""

    def test_q_trace(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(TRIALS):
            n, m, _, _, _, _, P, Q = _random_case(rng)
            diff = ta.ricci_contraction(Q) - (m + n - 2) / m * P
            worst = max(worst, np.max(np.abs(diff)) / max(1.0, np.max(np.abs(P))))
        assert worst <= 1e-13

    def test_double_trace(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(TRIALS):
            n, m, lam, _, _, scal, _, Q = _random_case(rng)
            ref = (m + n - 2) / (m * (m - 1)) * ((m + n - 1) * scal - n * (n - 1) * lam)
            worst = max(worst, abs(ta.full_trace(Q) - ref) / max(1.0, abs(ref)))
        assert worst <= 1e-12

    def test_q_decomposition(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(TRIALS):
            n, m, _, R, ric, scal, P, Q = _random_case(rng)
            g = np.eye(n)
            W = ta.weyl_schouten(R, ric, scal, g).W
            rebuilt = (W + 2 * (n + m - 2) / (m * (n - 2)) * ta.kulkarni_nomizu(P, g)
                       - (n + m - 2) / (m * (n - 1) * (n - 2)) * np.trace(P)
                       * ta.kulkarni_nomizu(g, g))
            worst = max(worst, np.max(np.abs(Q - rebuilt)) / max(1.0, np.max(np.abs(Q))))
        assert worst <= 1e-12

    def test_weyl_trace_free(self):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(TRIALS):
            n, _, _, R, ric, scal, _, _ = _random_case(rng)
            W = ta.weyl_schouten(R, ric, scal, np.eye(n)).W
            traces = [np.einsum(s, W) for s in ("aiib->ab", "iaib->ab", "abii->ab", "aibi->ab")]
            worst = max(worst, max(np.max(np.abs(c)) for c in traces)
                        / max(1.0, np.max(np.abs(R))))
        assert worst <= 1e-12


# ---------------------------------------------------------------------------
# 6. divergence identities

DIV_CORPUS = [catalog.schwarzschild(2), catalog.schwarzschild(3)] + [
    e for n in (2, 3, 4) for e in _populated(catalog.table2, n=n, m=2.0)]


@pytest.mark.criterion(6, "divergence identities and the derivative of P")
class TestDivergenceIdentities:
    @pytest.mark.parametrize("entry", DIV_CORPUS,
                             ids=[f"{e.id}-n{e.spec.n}" for e in DIV_CORPUS])
    def test_divergences_vanish(self, entry):
        reports = verify.check_div_identities(entry.model, entry.samples(25), tol=1e-6)
        names = {r.name: r for r in reports}
        assert set(names) == {"div(w^(m+1) P)", "div(w^(m+1) Q)", "derivative of P"}
        for r in reports:
            assert r.residual <= 1e-6, r.line()


# ---------------------------------------------------------------------------
# 7. integral identities

@pytest.mark.criterion(7, "integral identities on the compact 1-D entry")
class TestIntegralIdentities:
    def test_mu_ratio_against_exact_integrals(self, detail):
        entry = catalog.table1(1, 1, lam=3.0, m=3.0)
        model = entry.model
        lo, hi = model.domain
        I3, _ = quad(lambda t: float(model.w.value(t)) ** 3, lo, hi, epsabs=1e-14, epsrel=1e-13)
        I1, _ = quad(lambda t: float(model.w.value(t)), lo, hi, epsabs=1e-14, epsrel=1e-13)
        assert I3 == pytest.approx(4.0 / 3.0, abs=1e-8)
        assert I1 == pytest.approx(2.0, abs=1e-8)
        assert 3.0 * I3 / I1 == pytest.approx(2.0, abs=1e-8)
        reports = {r.name: r for r in verify.check_integrals(entry)}
        assert reports["integral:mu ratio"].residual <= 1e-8
        assert reports["integral:scalar curvature"].residual <= 1e-8
        detail(f"int cos^3={I3:.12f} int cos={I1:.12f}")


# ---------------------------------------------------------------------------
# 8. Gaussian limit

@pytest.mark.criterion(8, "Gaussian limit of w^m")
class TestGaussianLimit:
    def test_sup_distance_decreases(self, detail):
        fam = catalog.gaussian_limit_family(lam=1.0)
        d = list(fam.sup_distance)
        assert d[0] > d[1] > d[2]
        assert d[2] <= 1e-3
        detail("sup=" + ", ".join(f"{v:.2e}" for v in d))


# ---------------------------------------------------------------------------
# 9. phase plane

@pytest.mark.criterion(9, "phase-plane invariances and repulsion")
class TestPhasePlane:
    @pytest.mark.parametrize("y0", [-2.0, 0.5, 1.0, 3.0])
    def test_axis_invariant(self, y0):
        traj = ode.phase_plane_flow(3, 2.0, 0.0, y0, (1.0, 10.0))
        assert np.all(traj.column("x") == 0.0)

    @pytest.mark.parametrize("n,m", [(3, 2.0), (4, 3.0), (5, 1.5)])
    def test_upper_half_plane_invariant(self, n, m):
        xs = np.linspace(-5.0, 5.0, 100)
        xs = xs[xs != 0.0]
        _, dy = ode.phase_field(n, m, xs, np.zeros_like(xs))
        assert xs.size == 100
        assert np.all(dy > 0)

    @pytest.mark.parametrize("x0", [1e-3, -1e-3])
    def test_backward_repulsion(self, x0):
        traj = ode.phase_plane_flow(3, 2.0, x0, 1.0, (1.0, 10.0), direction="backward")
        steps = traj.meta["step_states"][:11, 0]
        assert steps.size == 11
        assert np.all(np.diff(np.abs(steps)) > 0)


# ---------------------------------------------------------------------------
# 10. negative controls

@pytest.mark.criterion(10, "negative controls fail the right checks")
class TestNegativeControls:
    def test_nonconformal_doubly_warped(self):
        target = verify.resolve_target("doubly-noncf")
        qe = verify.check_qe_residual(target.model, target.samples)
        assert all(r.passed for r in qe)
        weyl = {r.name: r for r in verify.check_weyl_structure(target.model, target.samples)}
        assert not weyl["weyl:eigenstructure"].passed
        assert weyl["weyl:Q decomposition"].passed

    def test_perturbed_potential(self):
        target = verify.resolve_target("perturbed-w")
        reports = verify.check_qe_residual(target.model, target.samples)
        assert not any(r.passed for r in reports)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
