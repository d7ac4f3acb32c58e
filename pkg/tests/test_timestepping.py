import numpy as np
import pytest

from nitsche_iga import (
    AssembledForms,
    LinearSystem,
    TimeGrid,
    builtin_case,
    march,
    project_initial,
    solve_sparse,
    step_residuals,
)
from nitsche_iga.analysis import boundary_trace_sq
from nitsche_iga.assembly import assemble_functional
from nitsche_iga.splines import eval_basis

from conftest import make_disc


class TestTimeGrid:
    def test_nodes_end_at_T(self):
        grid = TimeGrid(7, 4.0)
        assert grid.tau == pytest.approx(4.0 / 7)
        assert abs(grid.nodes[-1] - 4.0) < 1e-12
        assert len(grid.nodes) == 8

    def test_invalid(self):
        with pytest.raises(ValueError):
            TimeGrid(0, 1.0)
        with pytest.raises(ValueError):
            TimeGrid(4, 0.0)


class TestProjection:
    def test_zero_datum(self, square_gm):
        disc = make_disc(square_gm, 1, 3)
        c = project_initial(disc, lambda x, y: np.zeros_like(x))
        assert np.max(np.abs(c)) < 1e-14

    def test_reproduces_members_of_the_space(self, square_gm):
        # projecting a single basis function returns its unit coefficient
        disc = make_disc(square_gm, 2, 3)
        space = disc.space
        j = space.global_index(2, 1)

        def basis_j(x, y):
            out = np.zeros_like(x)
            for i, (xi, yi) in enumerate(zip(x, y)):
                e1 = eval_basis(space.kv1, xi, 0)
                e2 = eval_basis(space.kv2, yi, 0)
                i1, i2 = space.multi_index(j)
                if e1.first_index <= i1 <= e1.first_index + space.kv1.degree:
                    if e2.first_index <= i2 <= e2.first_index + space.kv2.degree:
                        out[i] = (
                            e1.values[i1 - e1.first_index]
                            * e2.values[i2 - e2.first_index]
                        )
            return out

        c = project_initial(disc, basis_j)
        expected = np.zeros(space.dimension)
        expected[j] = 1.0
        assert np.max(np.abs(c - expected)) < 1e-12

    def test_beats_greville_interpolation(self, square_gm):
        # L2 projection is L2-optimal; the collocation interpolant is not
        case = builtin_case("paper_sec8")
        disc = make_disc(square_gm, 2, 8)
        space = disc.space
        u0 = case.problem.u0

        c_proj = project_initial(disc, u0)

        grev = space.greville_grid()
        n = space.dimension
        B = np.zeros((n, n))
        for r, (gx, gy) in enumerate(grev):
            e1 = eval_basis(space.kv1, gx, 0)
            e2 = eval_basis(space.kv2, gy, 0)
            for l1 in range(space.kv1.degree + 1):
                for l2 in range(space.kv2.degree + 1):
                    g = (e1.first_index + l1) + space.shape[0] * (e2.first_index + l2)
                    B[r, g] = e1.values[l1] * e2.values[l2]
        c_interp = np.linalg.solve(B, u0(grev[:, 0], grev[:, 1]))

        def l2_error(coef):
            ec = disc.elements
            vals = ec.field_values(coef)
            exact = u0(ec.x[..., 0].ravel(), ec.x[..., 1].ravel()).reshape(vals.shape)
            return np.sqrt(np.sum(ec.w * (exact - vals) ** 2))

        assert l2_error(c_proj) < l2_error(c_interp)


class TestMarch:
    def test_zero_case_stays_zero(self, square_gm):
        case = builtin_case("zero")
        disc = make_disc(square_gm, 1, 3)
        forms = AssembledForms(disc, case.problem)
        u0 = project_initial(disc, case.problem.u0)
        traj = march(forms, TimeGrid(5, case.problem.T), u0)
        assert np.max(np.abs(traj.coefs)) < 1e-14

    def test_step_residuals_small(self, square_gm):
        case = builtin_case("paper_sec8")
        disc = make_disc(square_gm, 1, 4)
        forms = AssembledForms(disc, case.problem)
        u0 = project_initial(disc, case.problem.u0)
        traj = march(forms, TimeGrid(8, case.problem.T), u0)
        assert np.max(step_residuals(forms, traj)) < 1e-9

    def test_frozen_operator_matches_rebuilt_for_autonomous_case(self, square_gm):
        case = builtin_case("paper_sec8")  # time-independent coefficients
        disc = make_disc(square_gm, 1, 3)
        forms = AssembledForms(disc, case.problem)
        u0 = project_initial(disc, case.problem.u0)
        grid = TimeGrid(6, case.problem.T)
        a = march(forms, grid, u0, freeze_operator=False)
        b = march(forms, grid, u0, freeze_operator=True)
        assert np.max(np.abs(a.coefs - b.coefs)) < 1e-12

    def test_converges_to_stationary_solution(self, square_gm):
        # autonomous data: backward Euler contracts toward A u = F;
        # run on a horizon longer than the case T to watch the contraction
        from nitsche_iga.linalg import SparseFactor

        case = builtin_case("steady_reaction")
        disc = make_disc(square_gm, 1, 4)
        forms = AssembledForms(disc, case.problem)
        A = forms.stiffness(0.0)
        F = forms.load(0.0)
        u_inf = solve_sparse(LinearSystem(A, F))

        grid = TimeGrid(40, 8.0)
        M = forms.mass
        factor = SparseFactor((M + grid.tau * A).tocsr())
        u = np.zeros(disc.dimension)  # start far from the steady state
        resids = []
        for _ in range(grid.num_steps):
            u = factor.solve(M @ u + grid.tau * F)
            resids.append(np.linalg.norm(A @ u - F))
        resids = np.array(resids)
        assert np.all(np.diff(resids) < 1e-12)  # monotone decrease
        assert resids[-1] < 1e-6 * resids[0]
        assert np.max(np.abs(u - u_inf)) < 1e-7

    def test_piecewise_constant_extension_indexing(self, square_gm):
        case = builtin_case("zero")
        disc = make_disc(square_gm, 1, 2)
        forms = AssembledForms(disc, case.problem)
        grid = TimeGrid(4, 1.0)
        coefs = np.arange(5)[:, None] * np.ones((5, disc.dimension))
        from nitsche_iga.timestepping import SolutionTrajectory

        traj = SolutionTrajectory(coefs, grid, disc, forms.eps)
        assert traj.at_time(0.0)[0] == 0
        assert traj.at_time(0.1)[0] == 1  # t in (0, 0.25] -> u^1
        assert traj.at_time(0.25)[0] == 1
        assert traj.at_time(0.2500001)[0] == 2
        assert traj.at_time(1.0)[0] == 4

    @pytest.mark.parametrize("tau", [4.0, 0.4, 0.004])
    def test_unconditional_solvability(self, square_gm, tau):
        # any step size must factor and produce bounded coefficients once
        # the penalty sits above the floor
        case = builtin_case("paper_sec8")
        disc = make_disc(square_gm, 1, 4)
        forms = AssembledForms(disc, case.problem, epsilon_factor=1.0)
        u0 = project_initial(disc, case.problem.u0)
        n = max(1, round(case.problem.T / tau))
        traj = march(forms, TimeGrid(n, case.problem.T), u0, freeze_operator=True)
        assert np.isfinite(traj.coefs).all()
        assert np.max(np.abs(traj.coefs)) < 1e6

    def test_boundary_weakness_shrinks_under_refinement(self, square_gm):
        case = builtin_case("paper_sec8")
        values = []
        for spans in (4, 8, 16):
            disc = make_disc(square_gm, 1, spans)
            forms = AssembledForms(disc, case.problem, epsilon_factor=1.25)
            u0 = project_initial(disc, case.problem.u0)
            n = 16 * spans // 4
            traj = march(forms, TimeGrid(n, case.problem.T), u0, freeze_operator=True)
            values.append(boundary_trace_sq(traj.final, disc))
        assert values[0] > values[1] > values[2]
        assert values[0] / values[2] >= 4.0
