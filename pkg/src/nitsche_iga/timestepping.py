"""Backward-Euler march from the L2-projected initial datum.

Each step solves (M + tau A(t_n)) u^n = M u^{n-1} + tau F(t_n), with the
stiffness and load evaluated at the implicit endpoint t_n.  Operators are
rebuilt every step by default because both the coefficients and the inflow
region may depend on time; ``freeze_operator=True`` reuses the first
stiffness matrix and its factorization when the caller asserts the
operator is autonomous (the load is always rebuilt).
"""

from dataclasses import dataclass

import numpy as np

from .assembly import assemble_functional, assemble_mass
from .linalg import LinearSystem, SparseFactor, solve_sparse


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of N backward-Euler steps on [0, T]."""

    num_steps: int
    T: float

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError("need at least one time step")
        if self.T <= 0:
            raise ValueError("final time must be positive")

    @property
    def tau(self):
        return self.T / self.num_steps

    @property
    def nodes(self):
        return np.linspace(0.0, self.T, self.num_steps + 1)


class SolutionTrajectory:
    """Coefficient vectors u^0 .. u^N with their grid and discretization.

    ``at_time(t)`` follows the piecewise-constant-in-time extension:
    u(t) = u^{n+1} for t in (t_n, t_{n+1}], u(0) = u^0.
    """

    def __init__(self, coefs, grid, disc, eps):
        self.coefs = np.asarray(coefs)
        self.grid = grid
        self.disc = disc
        self.eps = eps

    def interval_index(self, t):
        """Step index n >= 1 whose interval (t_{n-1}, t_n] contains t."""
        n = int(np.ceil(t / self.grid.tau - 1e-12))
        return min(max(n, 1), self.grid.num_steps)

    def at_time(self, t):
        if t <= 0.0:
            return self.coefs[0]
        return self.coefs[self.interval_index(t)]

    @property
    def final(self):
        return self.coefs[-1]


def project_initial(disc, u0):
    """L2 projection of the initial datum: solve M c = (u0, N_i)."""
    M = assemble_mass(disc)
    rhs = assemble_functional(disc, u0)
    return solve_sparse(LinearSystem(M, rhs))


def march(forms, grid, u0coef, freeze_operator=False, solver_tol=1e-12):
    """Run the implicit Euler march and return the trajectory."""
    tau = grid.tau
    M = forms.mass
    n = M.shape[0]
    coefs = np.empty((grid.num_steps + 1, n))
    coefs[0] = u0coef

    factor = None
    for step in range(1, grid.num_steps + 1):
        t = grid.nodes[step]
        if factor is None or not freeze_operator:
            A = forms.stiffness(t)
            factor = SparseFactor((M + tau * A).tocsr(), tol=solver_tol)
        rhs = M @ coefs[step - 1] + tau * forms.load(t)
        coefs[step] = factor.solve(rhs)
    return SolutionTrajectory(coefs, grid, forms.disc, forms.eps)


def step_residuals(forms, traj, freeze_operator=False):
    """Max-norm residual of each discrete step equation (a wiring check)."""
    grid = traj.grid
    tau = grid.tau
    M = forms.mass
    out = np.empty(grid.num_steps)
    A = None
    for step in range(1, grid.num_steps + 1):
        t = grid.nodes[step]
        if A is None or not freeze_operator:
            A = forms.stiffness(t)
        lhs = (M + tau * A) @ traj.coefs[step]
        rhs = M @ traj.coefs[step - 1] + tau * forms.load(t)
        out[step - 1] = np.abs(lhs - rhs).max()
    return out
