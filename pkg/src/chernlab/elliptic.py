"""Linear radial solves of ``(-L + c) u = f`` and nonlinear residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError
from .geometry import (
    Grid,
    GridFunction,
    RadialModel,
    as_profile,
    chern_laplacian_at,
    chern_laplacian_radial,
    laplacian_coefficients,
)
from .tridiag import solve_tridiagonal

MIN_NODES = 16


@dataclass(frozen=True)
class LinearRadialProblem:
    """``(-L + c_coeff) u = rhs`` on ``(0, R)``, symmetric at the pole, pinned at R."""

    model: RadialModel
    c_coeff: float
    rhs: GridFunction
    R: float
    boundary_value: float

    def __post_init__(self):
        if self.c_coeff < 0:
            raise InvalidParameterError("zeroth-order coefficient must be nonnegative")
        if self.R > self.model.r_max * (1 + 1e-12):
            raise DomainError("R exceeds the model domain")
        if abs(self.rhs.grid.r_max - self.R) > 1e-9 * self.R:
            raise DomainError("rhs grid must span exactly (0, R]")


class ShiftedOperator:
    """Assembled ``-L + c`` with the last row pinned; reusable across solves."""

    def __init__(self, model: RadialModel, grid: Grid, c):
        model.check_grid(grid)
        if grid.N < MIN_NODES:
            raise DomainError(f"need at least {MIN_NODES} nodes, got {grid.N}")
        lo, di, up = laplacian_coefficients(model, grid)
        c = np.broadcast_to(np.asarray(c, dtype=float), (grid.N,))
        self.grid = grid
        self.lower = -lo
        self.upper = -up
        self.diag = -di + c
        self.lower[-1] = 0.0
        self.upper[-1] = 0.0
        self.diag[-1] = 1.0

    @property
    def monotone(self) -> bool:
        """True when off-diagonals are nonpositive (discrete maximum principle)."""
        return bool(np.all(self.lower <= 0) and np.all(self.upper <= 0))

    def solve(self, rhs: np.ndarray, boundary_value: float, check: bool = True) -> np.ndarray:
        b = np.array(rhs, dtype=float)
        b[-1] = boundary_value
        return solve_tridiagonal(self.lower, self.diag, self.upper, b, check=check)


def solve_linear(problem: LinearRadialProblem) -> GridFunction:
    op = ShiftedOperator(problem.model, problem.rhs.grid, problem.c_coeff)
    return GridFunction(problem.rhs.grid, op.solve(problem.rhs.values, problem.boundary_value))


def _profile_values(S, grid: Grid) -> np.ndarray:
    if isinstance(S, GridFunction):
        if S.grid.N < grid.N or not S.grid.same_spacing(grid):
            raise DomainError("profile grid does not cover the solution grid")
        return S.values[: grid.N]
    return as_profile(S)(grid.nodes)


def nonlinear_residual(model: RadialModel, u: GridFunction, S, s=None) -> GridFunction:
    """``-Δ^Ch u + s - S e^{(2/n) u}`` at every node.

    ``s`` defaults to the model's background Chern scalar curvature.
    """
    grid = u.grid
    s_vals = model.s(grid.nodes) if s is None else _profile_values(s, grid)
    S_vals = _profile_values(S, grid)
    lap = chern_laplacian_radial(model, u).values
    return GridFunction(grid, -lap + s_vals - S_vals * np.exp(2.0 / model.n * u.values))


def pointwise_residual(model: RadialModel, func, S, r, rel_step: float = 1e-4) -> np.ndarray:
    """Nonlinear residual of a callable ``u(r)`` at arbitrary radii.

    If ``func`` exposes exact derivatives as ``d1`` and ``d2`` they are used;
    otherwise a centered stencil with spacing ``rel_step * r`` is applied,
    for checks on log-spaced samples where a uniform grid is impractical.
    """
    r = np.asarray(r, dtype=float)
    if hasattr(func, "d1") and hasattr(func, "d2"):
        lap = func.d2(r) + model.chern_drift(r) * func.d1(r)
    else:
        lap = chern_laplacian_at(model, func, r, rel_step * r)
    return -lap + model.s(r) - as_profile(S)(r) * np.exp(2.0 / model.n * func(r))
