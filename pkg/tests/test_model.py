import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasi_einstein.errors import (
    BoundaryEvaluation,
    DomainError,
    InconsistentMu,
    InvalidDimension,
    InvalidM,
    NonIntegerM,
    SmoothnessViolation,
    UnsupportedLink,
)
from quasi_einstein.model import (
    CheckReport,
    ModelSpec,
    Profile,
    WarpedModel,
    link_kappa,
    validate_spec,
)


def cos_profile():
    return Profile.closed(lambda t: (np.cos(t), -np.sin(t), -np.cos(t)),
                          (-math.pi / 2, math.pi / 2))


class TestValidateSpec:
    def test_boundary_slope_gives_mu(self):
        spec = validate_spec(ModelSpec(n=2, m=3.0, lam=0.0, boundary=True, boundary_slope=1.0))
        assert spec.mu == 2.0
        assert spec.mu_source == "boundary-derived"

    def test_constant_potential_gives_lam_w_squared(self):
        spec = validate_spec(ModelSpec(n=3, m=2.0, lam=1.0, w_constant=1.0))
        assert spec.mu == 1.0
        spec = validate_spec(ModelSpec(n=3, m=2.0, lam=1.5, w_constant=2.0))
        assert spec.mu == 6.0
        assert spec.mu_source == "formula-derived"

    def test_boundary_with_negative_mu_rejected(self):
        with pytest.raises(InconsistentMu):
            validate_spec(ModelSpec(n=2, m=2.0, lam=0.0, boundary=True, mu=-1.0))

    def test_boundary_allows_any_mu_when_m_is_one(self):
        assert validate_spec(ModelSpec(n=2, m=1.0, lam=1.0, boundary=True, mu=0.0)).mu == 0.0

    def test_contradicting_mu_rejected(self):
        with pytest.raises(InconsistentMu):
            validate_spec(ModelSpec(n=2, m=3.0, lam=0.0, mu=5.0, boundary_slope=1.0))

    @pytest.mark.parametrize("n", [0, -1, 2.5])
    def test_bad_dimension(self, n):
        with pytest.raises(InvalidDimension):
            validate_spec(ModelSpec(n=n, m=2.0, lam=0.0))

    @pytest.mark.parametrize("m", [0.0, -1.0, math.inf, math.nan])
    def test_bad_m(self, m):
        with pytest.raises(InvalidM):
            validate_spec(ModelSpec(n=2, m=m, lam=0.0))

    def test_total_space_needs_integer_m(self):
        with pytest.raises(NonIntegerM):
            validate_spec(ModelSpec(n=2, m=2.5, lam=0.0, total_space=True))

    def test_m_one_total_space_needs_explicit_path(self):
        with pytest.raises(InvalidM):
            validate_spec(ModelSpec(n=2, m=1.0, lam=0.0, total_space=True))
        spec = validate_spec(ModelSpec(n=2, m=1.0, lam=0.0, total_space=True, m_one_path=True))
        assert spec.auxiliary_condition_active

    def test_unknown_fiber(self):
        with pytest.raises(UnsupportedLink):
            validate_spec(ModelSpec(n=2, m=2.0, lam=0.0, fiber_kind="torus"))

    def test_given_mu_tagged(self):
        assert validate_spec(ModelSpec(n=2, m=2.0, lam=0.0, mu=1.0)).mu_source == "given"

    @given(n=st.integers(1, 8), m=st.floats(0.1, 50.0), lam=st.floats(-10, 10),
           slope=st.one_of(st.none(), st.floats(0.01, 10.0)))
    def test_idempotent(self, n, m, lam, slope):
        spec = ModelSpec(n=n, m=m, lam=lam, boundary=slope is not None, boundary_slope=slope)
        once = validate_spec(spec)
        assert validate_spec(once) == once

    @given(m=st.floats(1.01, 20.0), slope=st.floats(1e-3, 10.0))
    def test_boundary_specs_have_positive_mu(self, m, slope):
        spec = validate_spec(ModelSpec(n=3, m=m, lam=1.0, boundary=True, boundary_slope=slope))
        assert spec.mu > 0


class TestModelSpecJson:
    def test_round_trip(self):
        spec = ModelSpec(n=3, m=2.0, lam=-1.0, mu=0.5, fiber_kind="sphere", kappa_F=0.5)
        doc = spec.to_json()
        assert list(doc) == ["n", "m", "lambda", "mu", "fiber"]
        back = ModelSpec.from_json(json.dumps(doc))
        assert (back.n, back.m, back.lam, back.mu) == (3, 2.0, -1.0, 0.5)
        assert back.fiber_kind == "sphere" and back.kappa_F == 0.5

    def test_fiber_as_string(self):
        spec = ModelSpec.from_json({"n": 2, "m": 3, "lambda": 0, "fiber": "flat"})
        assert spec.fiber_kind == "flat" and spec.mu is None


class TestProfile:
    def test_closed_evaluates_three_values(self):
        v, d1, d2 = cos_profile()(np.array([0.0, 0.5]))
        assert v == pytest.approx(np.cos([0.0, 0.5]))
        assert d1 == pytest.approx(-np.sin([0.0, 0.5]))
        assert d2 == pytest.approx(-np.cos([0.0, 0.5]))

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            cos_profile()(2.0)

    def test_constant_broadcasts(self):
        v, d1, d2 = Profile.constant(2.0)(np.zeros(4))
        assert v.shape == (4,) and np.all(v == 2.0) and np.all(d1 == 0) and np.all(d2 == 0)

    def test_sampled_derivative_consistency(self):
        t = np.linspace(0.0, 2.0, 400)
        prof = Profile.sampled(t, np.sin(t), np.cos(t), -np.sin(t))
        assert prof.kind == "sampled"
        assert prof.derivative_consistency(h=1e-4) < 1e-5

    def test_sampled_rejects_unsorted_grid(self):
        with pytest.raises(DomainError):
            Profile.sampled([0.0, 0.0, 1.0], [1, 1, 1], [0, 0, 0])

    def test_inconsistent_profile_detected(self):
        bad = Profile.closed(lambda t: (np.sin(t), np.sin(t), -np.sin(t)), (0.0, 1.0))
        assert bad.derivative_consistency() > 0.1

    def test_combinators(self):
        p = cos_profile()
        two = p.plus(p.scaled(1.0))
        assert two.value(0.3) == pytest.approx(2 * math.cos(0.3))
        assert p.restricted(0.0, 1.0).domain == (0.0, 1.0)
        v, d1, _ = p.derivative_profile()(0.2)
        assert (v, d1) == pytest.approx((-math.sin(0.2), -math.cos(0.2)))

    @given(c=st.floats(-5, 5), t=st.floats(-1.5, 1.5))
    def test_scaling_is_linear(self, c, t):
        p = cos_profile()
        assert np.allclose(p.scaled(c)(t), c * np.asarray(p(t)))


class TestWarpedModel:
    def sphere_psi(self):
        return Profile.closed(lambda t: (np.sin(t), np.cos(t), -np.sin(t)), (0.0, math.pi / 2))

    def test_pole_accepted(self):
        w = Profile.closed(lambda t: (np.cos(t), -np.sin(t), -np.cos(t)), (0.0, math.pi / 2))
        model = WarpedModel(ModelSpec(n=3, m=2.0, lam=4.0), self.sphere_psi(), w,
                            origin_type="pole")
        assert model.kappa_L == 1.0
        assert model.domain == (0.0, math.pi / 2)

    def test_pole_needs_flat_potential(self):
        w = Profile.closed(lambda t: (1 + t, np.ones_like(t), 0 * t), (0.0, 1.0))
        with pytest.raises(SmoothnessViolation):
            WarpedModel(ModelSpec(n=3, m=2.0, lam=0.0), self.sphere_psi(), w, origin_type="pole")

    def test_boundary_needs_nonzero_slope(self):
        w = Profile.closed(lambda t: (t * t, 2 * t, 2 + 0 * t), (0.0, 1.0))
        with pytest.raises(BoundaryEvaluation):
            WarpedModel(ModelSpec(n=2, m=2.0, lam=0.0), Profile.constant(1.0), w,
                        link="flat", origin_type="boundary")

    def test_unknown_link(self):
        with pytest.raises(UnsupportedLink):
            WarpedModel(ModelSpec(n=2, m=2.0, lam=0.0), Profile.constant(1.0),
                        Profile.constant(1.0), link="torus")

    def test_one_dimensional_base_has_no_link(self):
        model = WarpedModel(ModelSpec(n=1, m=2.0, lam=0.0), Profile.constant(1.0),
                            Profile.constant(1.0))
        assert model.link == "none" and model.kappa_L == 0.0

    @pytest.mark.parametrize("link,n,expected", [("sphere", 4, 2.0), ("flat", 4, 0.0),
                                                 ("hyperbolic", 3, -1.0), ("sphere", 2, 0.0)])
    def test_link_kappa(self, link, n, expected):
        assert link_kappa(link, n) == expected

    def test_interior_grid_stays_inside(self):
        model = WarpedModel(ModelSpec(n=2, m=2.0, lam=0.0), Profile.constant(1.0, (0.0, 2.0)),
                            Profile.constant(1.0, (0.0, 2.0)), link="flat")
        grid = model.interior_grid(11)
        assert grid[0] > 0.0 and grid[-1] < 2.0 and grid.size == 11


class TestCheckReport:
    def test_passed_follows_residual(self):
        assert CheckReport("x", 1e-9, 1e-8).passed
        assert not CheckReport("x", 1e-7, 1e-8).passed

    def test_nonfinite_residual_fails(self):
        report = CheckReport("x", math.nan, 1.0)
        assert report.residual == math.inf and not report.passed

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError):
            CheckReport("x", 0.0, 0.0)

    def test_expected_failure(self):
        report = CheckReport("x", 1.0, 1e-3, expect_fail=True)
        assert report.as_expected and "expected FAIL" in report.line()

    def test_json_fields(self):
        doc = CheckReport("x", 0.5, 1.0, 3, "note", "tgt").to_json()
        assert list(doc) == ["check", "target", "residual", "tolerance", "passed", "samples",
                             "notes"]

    @settings(max_examples=50)
    @given(r=st.floats(0, 10), tol=st.floats(1e-12, 10))
    def test_passed_iff_within_tolerance(self, r, tol):
        assert CheckReport("x", r, tol).passed == (r <= tol)
