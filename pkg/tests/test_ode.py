import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasi_einstein import ode
from quasi_einstein.catalog import table2
from quasi_einstein.curvature import doubly_warped_cotton, doubly_warped_qe_residual
from quasi_einstein.errors import (
    BlowUp,
    DegenerateData,
    InconsistentMu,
    InvalidM,
    MaxIterations,
    NoBracket,
    PoleSingularity,
    SmoothnessViolation,
)
from quasi_einstein.model import ModelSpec, validate_spec
from quasi_einstein.oracle import doubly_warped_chart, fd_curvature_oracle


def spec(n, m, lam, mu=None):
    return validate_spec(ModelSpec(n=n, m=float(m), lam=float(lam), mu=mu))


class TestSolve1d:
    @pytest.mark.parametrize("lam,w0,dw0,closed", [
        (3.0, 1.0, 0.0, np.cos),
        (0.0, 1.0, 2.0, lambda t: 1.0 + 2.0 * t),
        (-3.0, 1.0, 1.0, lambda t: np.cosh(t) + np.sinh(t)),
    ])
    def test_closed_forms(self, lam, w0, dw0, closed):
        traj = ode.solve_1d(spec(1, 3, lam), w0, dw0, (-1.2, 1.2))
        t = np.linspace(traj.t_start, traj.t_end, 101)
        assert np.abs(traj(t)[0] - closed(t)).max() <= 1e-9

    def test_boundary_start(self):
        traj = ode.solve_1d(spec(1, 3, -3.0), 0.0, 1.0, (-2.0, 2.0))
        assert traj.t_start == 0.0
        assert float(traj(np.array([1.0]))[0, 0]) == pytest.approx(math.sinh(1.0), abs=1e-9)

    def test_zero_event(self):
        traj = ode.solve_1d(spec(1, 3, 3.0), 1.0, 0.0, (-5.0, 5.0))
        assert traj.termination == "w-zero"
        for key in ("w-zero", "w-zero-2"):
            t_ev, y_ev = traj.events[key]
            assert abs(y_ev[0]) <= 1e-10
            assert abs(t_ev) == pytest.approx(math.pi / 2, abs=1e-9)

    def test_mu_drift(self):
        traj = ode.solve_1d(spec(1, 2.5, 1.0), 1.0, 0.3, (-1.0, 1.0))
        assert traj.drift("mu") <= 100 * ode.RTOL

    @settings(max_examples=15, deadline=None)
    @given(lam=st.floats(-2, 2), w0=st.floats(0.5, 2.0), dw0=st.floats(-1, 1))
    def test_time_reversal(self, lam, w0, dw0):
        s = spec(1, 2.0, lam)
        a = ode.solve_1d(s, w0, dw0, (-1.0, 1.0))
        b = ode.solve_1d(s, w0, -dw0, (-1.0, 1.0))
        lo = max(a.t_start, -b.t_end)
        hi = min(a.t_end, -b.t_start)
        t = np.linspace(lo, hi, 21)
        assert np.abs(a(t)[0] - b(-t)[0]).max() <= 1e-8 * (1 + np.abs(a(t)[0]).max())

    @pytest.mark.parametrize("w0,dw0", [(0.0, 0.0), (-1.0, 0.0)])
    def test_degenerate(self, w0, dw0):
        with pytest.raises(DegenerateData):
            ode.solve_1d(spec(1, 2, 0.0), w0, dw0)


class TestSurface:
    def test_polar_flat_axis(self):
        traj = ode.solve_surface(ModelSpec(n=2, m=3.0, lam=0.0), {"w0": 1.0}, "polar", t_max=3.0)
        assert traj.spec.mu == 2.0
        assert traj.drift("mu") <= 1e-8
        assert traj.drift("C") <= 1e-8

    def test_polar_axis_condition(self):
        with pytest.raises(SmoothnessViolation):
            ode.solve_surface(ModelSpec(n=2, m=3.0, lam=0.0, mu=5.0), {"w0": 1.0}, "polar")

    def test_polar_w0_root(self):
        s = ModelSpec(n=2, m=2.0, lam=1.0, mu=3.0)
        w0 = ode.polar_w0(s)
        assert s.lam * w0 ** 2 + 2 * w0 == pytest.approx(3.0, abs=1e-14)

    def test_constant_solution(self):
        # lam w^2 = mu with w' = 0 is an equilibrium
        s = ModelSpec(n=2, m=2.0, lam=1.0, mu=4.0)
        traj = ode.solve_surface(s, {"t0": 0.0, "w0": 2.0, "dw0": 1e-300}, t_max=2.0)
        assert np.abs(traj.column("w") - 2.0).max() <= 1e-12

    def test_m_one_conserved_quantity(self):
        s = ModelSpec(n=2, m=1.0, lam=-2.0, mu=0.0)
        traj = ode.solve_surface(s, {"t0": 0.0, "w0": 1.0, "dw0": 0.5}, t_max=1.0)
        assert traj.drift("C") <= 1e-10
        assert traj.invariants["C"][0] == pytest.approx(0.25 - 1.0)

    def test_m_one_needs_zero_mu(self):
        with pytest.raises(InconsistentMu):
            ode.solve_surface(ModelSpec(n=2, m=1.0, lam=0.0, mu=1.0),
                              {"t0": 0.0, "w0": 1.0, "dw0": 0.0})

    def test_cartesian_needs_mu(self):
        with pytest.raises(InconsistentMu):
            ode.solve_surface(ModelSpec(n=2, m=2.0, lam=0.0), {"t0": 0, "w0": 1, "dw0": 0})

    def test_blow_up_raised(self):
        s = ModelSpec(n=2, m=2.0, lam=-50.0, mu=1.0)
        with pytest.raises(BlowUp):
            ode.solve_surface(s, {"t0": 0.0, "w0": 1.0, "dw0": 5.0}, t_max=50.0)

    def test_first_integral_formula(self):
        s = ModelSpec(n=2, m=3.0, lam=1.0, mu=2.0)
        C = ode.surface_first_integral(s, 2.0, 0.5)
        assert C == pytest.approx((0.25 - 1.0 + 1.0) * 4.0)
        assert ode.surface_velocity_squared(s, C, 2.0) == pytest.approx(0.25)

    def test_rescaling(self):
        s = ModelSpec(n=2, m=3.0, lam=-2.0, mu=1.5)
        out = ode.rescale_surface(s, 0.5, 1.0)
        assert out["lam"] == -4.0
        assert out["mu"] == pytest.approx(1.5 * 4.0 / 0.5)
        with pytest.raises(ValueError):
            ode.rescale_surface(s.replace(lam=1.0), 0.5, 1.0)


class TestSchwarzschild:
    def test_m2_slope_tends_to_one(self):
        traj = ode.schwarzschild_solve(2, (0.0, 1e3))
        assert abs(traj.column("dw")[-1] - 1.0) <= 1e-3
        assert traj.drift("mu") <= 1e-8

    def test_m3_monotone_below_one(self):
        traj = ode.schwarzschild_solve(3, (0.0, 50.0))
        dw = traj.column("dw")
        assert np.all(dw < 1.0) and np.all(np.diff(traj.column("w")) > 0)

    def test_matches_first_order_form(self):
        traj = ode.schwarzschild_solve(2, (0.0, 5.0))
        w, dw = traj.column("w"), traj.column("dw")
        assert np.abs(dw ** 2 - (1 - 1 / w)).max() <= 1e-10

    def test_series_start(self):
        w, dw = ode.schwarzschild_initial(3, 1e-3)
        assert w == pytest.approx(1 + 0.5e-6, abs=1e-12)

    def test_invalid_m(self):
        with pytest.raises(InvalidM):
            ode.schwarzschild_solve(1)


class TestRotsym:
    def test_einstein_disk_closed_form(self):
        entry = table2(1, 1, n=3, m=2)
        C = float(entry.model.w.value(0.0))
        traj = ode.solve_rotsym(entry.spec, "sphere", {"pole": True, "w0": C}, (0.0, 1.5))
        t = np.linspace(0.01, 1.5, 50)
        y = traj(t)
        assert np.abs(y[0] - np.sin(t)).max() <= 1e-8
        assert np.abs(y[2] - C * np.cos(t)).max() <= 1e-8

    def test_flat_link_product(self):
        s = spec(3, 2, 0.0)
        traj = ode.solve_rotsym(s, "flat", {"psi": 1.0, "dpsi": 0.0, "w": 1.0, "dw": 0.5},
                                (0.0, 4.0))
        t = np.linspace(0.0, 4.0, 9)
        y = traj(t)
        assert np.abs(y[0] - 1.0).max() <= 1e-12
        assert np.abs(y[2] - (1.0 + 0.5 * t)).max() <= 1e-12

    def test_bohm_run_reaches_boundary(self):
        s = spec(3, 2, 4.0, mu=1.0)
        traj = ode.find_disk(s.replace(boundary=True), (0.2, 0.3))
        t_b, y_b = traj.events["w-zero"]
        assert y_b[0] > 0 and traj.meta["match_residual"] <= 1e-8
        assert traj.t_end == pytest.approx(t_b)

    @pytest.mark.parametrize("initial,link", [
        ({"psi": 0.0, "dpsi": 0.5, "w": 1.0, "dw": 0.0}, "sphere"),
        ({"pole": True, "w0": 1.0}, "flat"),
    ])
    def test_pole_singularity(self, initial, link):
        with pytest.raises(PoleSingularity):
            ode.solve_rotsym(spec(3, 2, 1.0, mu=1.0), link, initial)

    @pytest.mark.parametrize("w0", [0.1, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("direction", [1, -1])
    def test_positive_lambda_runs_end_singularly(self, w0, direction):
        s = spec(3, 2, 4.0, mu=1.0)
        traj = ode.solve_rotsym(s, "sphere", {"pole": True, "w0": w0}, (0.0, 50.0 * direction))
        assert traj.termination in ("w-zero", "psi-zero")

    def test_pole_series_order(self):
        s = spec(4, 3, 1.0, mu=2.0)
        co = ode.pole_series(s, 1.5, 2.0)
        a, b, c, d = co["a"], co["b"], co["c"], co["d"]
        errs = []
        for t in (0.1, 0.05, 0.025):
            y = ode._pole_state(co, 1.5, t)
            ddpsi, ddw = ode.rotsym_accel(s, 2.0, *y)
            errs.append((abs(ddpsi - (6 * a * t + 20 * d * t ** 3)),
                         abs(ddw - (2 * b + 12 * c * t ** 2))))
        # truncation leaves O(t^5) in psi'' and O(t^4) in w''
        for (p0, w0), (p1, w1) in zip(errs, errs[1:]):
            assert p1 < p0 / 24 and w1 < w0 / 12

    def test_backward_pole_start_mirrors_forward(self):
        s = spec(3, 2, 4.0, mu=1.0)
        fwd = ode.solve_rotsym(s, "sphere", {"pole": True, "w0": 0.3}, (0.0, 1.0))
        bwd = ode.solve_rotsym(s, "sphere", {"pole": True, "w0": 0.3}, (0.0, -1.0))
        t = np.linspace(0.0, 1.0, 11)
        flip = np.array([[1], [-1], [1], [-1]])
        assert np.abs(fwd(t) * flip - bwd(-t)).max() <= 1e-12

    def test_mu_needed(self):
        with pytest.raises(InconsistentMu):
            ode.solve_rotsym(spec(3, 2, 1.0), "sphere", {"pole": True, "w0": 1.0})


def _cotton_fd(model, r, h=1e-3):
    """``C(e_1, e_0, e_1)`` from oracle Schouten tensors and a centered difference."""
    metric, _ = doubly_warped_chart(model)

    def schouten(s):
        fd = fd_curvature_oracle(metric, np.array([s, 0.3, 0.2]), None, h)
        return np.diag(fd.ric) - fd.scal / 4.0

    f, df, _ = model.phi(r)
    S0 = schouten(r)
    dS1 = (schouten(r + h)[1] - schouten(r - h)[1]) / (2 * h)
    return float(df / f * (S0[0] - S0[1]) - dS1)


class TestDoubly:
    def test_equal_warping_matches_flat_rotsym(self):
        s = spec(3, 2, -1.0)
        dbl = ode.solve_doubly_warped_3d(s, 1.0, 0.2, 1.0, 0.2, 1.0, (0.0, 0.8), dw0=0.1)
        rot = ode.solve_rotsym(s, "flat", {"psi": 1.0, "dpsi": 0.2, "w": 1.0, "dw": 0.1},
                               (0.0, 0.8))
        t = np.linspace(0.0, 0.8, 17)
        a, b = dbl(t), rot(t)
        assert np.abs(a[0] - b[0]).max() <= 1e-10
        assert np.abs(a[4] - b[2]).max() <= 1e-10

    def test_small_slope_split(self):
        s = spec(3, 2, 0.0)
        traj = ode.solve_doubly_warped_3d(s, 1.0, 0.1, 1.0, -0.1, 1.0, (0.0, 0.5))
        assert traj.termination == "t-max" and not traj.events
        model = ode.doubly_model(traj)
        r = np.linspace(0.05, 0.45, 9)
        assert doubly_warped_qe_residual(model, r).max() <= 1e-8
        # the obstruction is small here but well above the oracle's noise
        c1, _ = doubly_warped_cotton(model, 0.25)
        assert abs(float(c1)) > 1e-6
        assert float(c1) == pytest.approx(_cotton_fd(model, 0.25), rel=0.05)

    def test_not_conformally_flat(self):
        s = spec(3, 2, -1.0)
        traj = ode.solve_doubly_warped_3d(s, 1.0, 0.3, 1.0, -0.2, 1.0, (0.0, 0.5))
        model = ode.doubly_model(traj)
        c1, c2 = doubly_warped_cotton(model, np.linspace(0.05, 0.45, 9))
        assert np.abs(c1).max() > 1e-3 and np.abs(c2).max() > 1e-3
        assert float(doubly_warped_cotton(model, 0.25)[0]) == pytest.approx(
            _cotton_fd(model, 0.25), rel=1e-3)

    def test_degenerate(self):
        with pytest.raises(DegenerateData):
            ode.solve_doubly_warped_3d(spec(3, 2, 0.0), 0.0, 0.1, 1.0, 0.0, 1.0)


class TestPhasePlane:
    def test_origin_is_stationary(self):
        traj = ode.phase_plane_flow(3, 2.0, 0.0, 0.0)
        assert traj.termination == "stationary"

    def test_x_axis_family(self):
        traj = ode.phase_plane_flow(3, 2.0, 0.0, 1.0, (1.0, 10.0))
        assert np.all(traj.column("x") == 0.0)
        assert np.abs(traj.column("y") - 1.0 / traj.t).max() <= 1e-12

    def test_field_formula(self):
        dx, dy = ode.phase_field(4, 3.0, 0.5, -0.25)
        assert dx == pytest.approx(-3 * 0.25 + 3 * 0.5 * 0.25)
        assert dy == pytest.approx(-0.0625 + 1.0 * (3 * 0.5 * -0.25 + 2 * 0.25))

    def test_backward(self):
        traj = ode.phase_plane_flow(3, 2.0, 0.1, 0.1, (1.0, 3.0), direction="backward")
        assert traj.meta["steps"][0] == 3.0 and traj.meta["direction"] == "backward"


class TestShoot:
    def test_brentq(self):
        res = ode.shoot(lambda p: p * p - 3.0, 0.0, 3.0, tol=1e-12)
        assert res.param == pytest.approx(math.sqrt(3.0), abs=1e-12)

    def test_bisect_sign_objective(self):
        res = ode.shoot(lambda p: 1.0 if p > 0.7 else -1.0, 0.0, 1.0, tol=1e-10, method="bisect")
        assert res.param == pytest.approx(0.7, abs=1e-9)

    def test_no_bracket(self):
        with pytest.raises(NoBracket):
            ode.shoot(lambda p: p * p + 1.0, -1.0, 2.0)

    def test_max_iterations(self):
        with pytest.raises(MaxIterations):
            ode.shoot(lambda p: p - 0.3, 0.0, 1.0, tol=1e-12, max_iter=3, method="bisect")

    def test_returns_trajectory(self):
        traj = ode.solve_1d(spec(1, 2, 0.0), 1.0, 0.0, (0.0, 1.0))
        res = ode.shoot(lambda p: (p - 0.5, traj), 0.0, 1.0)
        assert res.trajectory is traj


class TestRegularMask:
    def test_cuts_collapse_after_peak(self):
        psi = np.array([0.0, 0.5, 1.0, 0.5, 0.09, 0.01])
        mask = ode.regular_mask({"psi": psi, "w": np.ones(6)})
        assert mask.tolist() == [True, True, True, True, False, False]

    def test_drops_nonfinite_and_large(self):
        mask = ode.regular_mask({"w": np.array([1.0, np.nan, 2e4, 3.0])})
        assert mask.tolist() == [True, False, False, True]


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        traj = ode.solve_1d(spec(1, 3, 3.0), 1.0, 0.2, (-1.0, 1.0))
        path = tmp_path / "traj.csv"
        traj.to_csv(str(path))
        rows = list(csv.reader(io.StringIO(path.read_text())))
        assert rows[0] == ["t", "w", "dw", "mu", "C"]
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        assert np.array_equal(data[:, 0], traj.t)
        assert np.array_equal(data[:, 1:3], traj.states)
        assert np.array_equal(data[:, 3], traj.invariants["mu"])
        assert np.all(np.isnan(data[:, 4]))

    def test_json_summary(self):
        traj = ode.solve_1d(spec(1, 3, 3.0), 1.0, 0.0, (-3.0, 3.0))
        doc = json.loads(json.dumps(traj.to_json()))
        assert doc["termination"] == "w-zero" and doc["samples"] == traj.t.size
        assert doc["spec"]["n"] == 1 and "w-zero" in doc["events"]
        assert doc["mu_mean"] == pytest.approx(2.0 * 1.0, rel=1e-10)

    def test_unknown_termination(self):
        with pytest.raises(ValueError):
            ode.Trajectory(spec(1, 2, 0.0), "x", np.zeros(1), np.zeros((1, 1)), ("w",),
                           termination="lost")
