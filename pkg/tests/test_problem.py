import numpy as np
import pytest

from nitsche_iga import builtin_case, case_names, coefficient_audit, inflow_indicator
from nitsche_iga.errors import UnknownCase
from nitsche_iga.problem import consistency_residual, scaled_diffusion


def sec8_forcing_oracle(x, y, t):
    """Forcing rebuilt in the test by differentiating the closed-form
    solution u = sin(pi x) sin(pi y) exp((x+y-1) t) by hand:
    f = u_t - Laplace(u) + (u_x + u_y) + u."""
    sx, sy = np.sin(np.pi * x), np.sin(np.pi * y)
    cx, cy = np.cos(np.pi * x), np.cos(np.pi * y)
    ex = np.exp((x + y - 1) * t)
    u = sx * sy * ex
    u_t = (x + y - 1) * u
    u_x = (np.pi * cx * sy + t * sx * sy) * ex
    u_y = (np.pi * sx * cy + t * sx * sy) * ex
    u_xx = -np.pi**2 * u + 2 * np.pi * t * cx * sy * ex + t**2 * u
    u_yy = -np.pi**2 * u + 2 * np.pi * t * sx * cy * ex + t**2 * u
    return u_t - (u_xx + u_yy) + (u_x + u_y) + u


class TestBuiltinCases:
    def test_registry(self):
        assert set(case_names()) >= {"paper_sec8", "zero", "steady_reaction"}
        with pytest.raises(UnknownCase):
            builtin_case("nonexistent")

    def test_sec8_basics(self):
        case = builtin_case("paper_sec8")
        p = case.problem
        assert p.T == 4.0
        assert (p.mu0, p.mu1, p.c0) == (1.0, 1.0, 1.0)
        x = np.array([0.5])
        assert case.u(x, x, 0.0)[0] == pytest.approx(1.0)
        assert np.allclose(p.u0(x, x), 1.0)

    def test_sec8_forcing_matches_hand_derivation(self, rng):
        case = builtin_case("paper_sec8")
        x, y = rng.random(200), rng.random(200)
        t = 4.0 * rng.random()
        f_lib = case.problem.f(x, y, t)
        f_ref = sec8_forcing_oracle(x, y, t)
        assert np.max(np.abs(f_lib - f_ref)) < 1e-10 * max(1.0, np.abs(f_ref).max())

    def test_sec8_gradient_matches_differences(self, rng):
        case = builtin_case("paper_sec8")
        x, y = 0.1 + 0.8 * rng.random(100), 0.1 + 0.8 * rng.random(100)
        t = 1.7
        d = 1e-6
        gx = (case.u(x + d, y, t) - case.u(x - d, y, t)) / (2 * d)
        gy = (case.u(x, y + d, t) - case.u(x, y - d, t)) / (2 * d)
        g = case.grad_u(x, y, t)
        assert np.max(np.abs(g[:, 0] - gx)) < 1e-4
        assert np.max(np.abs(g[:, 1] - gy)) < 1e-4

    def test_sec8_boundary_datum_vanishes(self, rng):
        case = builtin_case("paper_sec8")
        s = rng.random(100)
        zeros = np.zeros_like(s)
        ones = np.ones_like(s)
        for t in (0.0, 1.0, 4.0):
            for bx, by in ((s, zeros), (s, ones), (zeros, s), (ones, s)):
                assert np.max(np.abs(case.u(bx, by, t))) < 1e-13
                assert np.max(np.abs(case.problem.g(bx, by, t))) < 1e-13

    @pytest.mark.parametrize("name", ["paper_sec8", "zero", "steady_reaction"])
    def test_consistency_residual(self, name, rng):
        case = builtin_case(name)
        x, y = rng.random(100), rng.random(100)
        for t in rng.random(3) * case.problem.T:
            r = consistency_residual(case, x, y, float(t))
            assert np.max(np.abs(r)) < 1e-8

    def test_zero_case_trivial(self, rng):
        case = builtin_case("zero")
        x, y = rng.random(10), rng.random(10)
        assert np.all(case.u(x, y, 0.3) == 0)
        assert np.all(case.problem.f(x, y, 0.3) == 0)

    def test_steady_reaction_is_time_independent_biquadratic(self, rng):
        case = builtin_case("steady_reaction")
        x, y = rng.random(50), rng.random(50)
        assert np.allclose(case.u(x, y, 0.0), case.u(x, y, 0.77))
        # u is quadratic in x: the second x-difference is exactly
        # d^2 * (d^2 u / dx^2) = d^2 * (2 - y + y^2)
        d = 0.05
        second = case.u(x + d, y, 0.0) - 2 * case.u(x, y, 0.0) + case.u(x - d, y, 0.0)
        assert np.allclose(second, d * d * (2 - y + y**2))

    def test_steady_reaction_has_nonzero_boundary_data(self):
        case = builtin_case("steady_reaction")
        s = np.linspace(0, 1, 11)
        assert np.min(np.abs(case.problem.g(s, np.zeros_like(s), 0.0))) > 0.1


class TestInflow:
    def test_spec_examples(self):
        p = builtin_case("paper_sec8").problem
        assert inflow_indicator(p, [0.0, 0.5], [-1.0, 0.0], 0.0) is True
        assert inflow_indicator(p, [0.5, 1.0], [0.0, 1.0], 0.0) is False
        p0 = builtin_case("zero").problem
        for n in ([1, 0], [-1, 0], [0, 1], [0, -1]):
            assert inflow_indicator(p0, [0.5, 0.5], n, 0.0) is False

    def test_vectorized(self):
        p = builtin_case("paper_sec8").problem
        pts = np.array([[0.0, 0.2], [1.0, 0.2]])
        ns = np.array([[-1.0, 0.0], [1.0, 0.0]])
        assert inflow_indicator(p, pts, ns, 0.0).tolist() == [True, False]

    def test_sign_change_along_left_boundary(self):
        # the steady case's field crosses zero at y = 1/2 on the side x = 0:
        # b . n = -(y - 1/2), negative (inflow) only above the midpoint
        p = builtin_case("steady_reaction").problem
        n = [-1.0, 0.0]
        assert inflow_indicator(p, [0.0, 0.8], n, 0.0) is True
        assert inflow_indicator(p, [0.0, 0.2], n, 0.0) is False
        assert inflow_indicator(p, [0.0, 0.5], n, 0.0) is False  # strict


class TestAudit:
    def test_sec8_audit_clean(self):
        report = coefficient_audit(builtin_case("paper_sec8").problem)
        assert all(report.values())

    def test_steady_reaction_audit_clean(self):
        report = coefficient_audit(builtin_case("steady_reaction").problem)
        assert all(report.values())

    def test_violated_bounds_warn(self):
        case = scaled_diffusion(builtin_case("paper_sec8"), 2.0)
        bad = case.problem
        object.__setattr__(bad, "mu1", 1.0)  # claim a wrong upper bound
        with pytest.warns(UserWarning, match="rayleigh"):
            coefficient_audit(bad)

    def test_scaled_diffusion_metadata(self):
        case = scaled_diffusion(builtin_case("steady_reaction"), 2.0)
        p = case.problem
        assert (p.mu0, p.mu1) == (2.0, 2.0)
        assert p.alpha == 2.0  # min(mu0=2, c0=2)
        x = np.array([0.3])
        assert np.allclose(p.mu(x, x, 0.0)[0], 2 * np.eye(2))
