"""Radial model manifolds, the radial Chern Laplacian and comparison bounds.

A model is described at the operator level: for a radial function ``u`` the
Chern Laplacian reduces to ``u'' + (d(r) - tau(r)) u'`` where ``d`` is the
Laplace-Beltrami drift and ``tau`` the radial Lee-form component.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import DomainError, InvalidHypothesisError, InvalidParameterError, SingularMetricError

Profile = Callable[[np.ndarray], np.ndarray]

EXPONENT_TOL = 1e-12


def as_profile(spec) -> Profile:
    """Turn a constant, a callable or an ``(r, values)`` table into a profile.

    Tables are linearly interpolated and held constant past their ends.
    """
    if callable(spec):
        def wrapped(r, _f=spec):
            r = np.asarray(r, dtype=float)
            return np.broadcast_to(np.asarray(_f(r), dtype=float), r.shape).astype(float)
        return wrapped
    if np.isscalar(spec):
        value = float(spec)

        def constant(r, _v=value):
            return np.full(np.shape(r), _v, dtype=float)
        return constant
    r_tab, v_tab = (np.asarray(x, dtype=float) for x in spec)
    if r_tab.ndim != 1 or r_tab.shape != v_tab.shape or r_tab.size < 2:
        raise InvalidParameterError("tabulated profile needs two 1-D arrays of equal length >= 2")
    if np.any(np.diff(r_tab) <= 0):
        raise InvalidParameterError("tabulated radii must be strictly increasing")

    def tabulated(r, _x=r_tab, _y=v_tab):
        return np.interp(np.asarray(r, dtype=float), _x, _y)
    return tabulated


@dataclass(frozen=True)
class Grid:
    """Staggered radial grid: nodes at ``(i + 1/2) h`` for ``i < N``."""

    r_max: float
    N: int

    def __post_init__(self):
        if not (self.r_max > 0 and np.isfinite(self.r_max)):
            raise InvalidParameterError(f"r_max must be positive, got {self.r_max}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameterError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.r_max / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        r = (np.arange(self.N) + 0.5) * self.h
        r.setflags(write=False)
        return r

    def ball(self, R: float) -> "Grid":
        """Sub-grid made of the first ``round(R / h)`` nodes (same spacing)."""
        m = int(round(R / self.h))
        if m < 1 or m > self.N:
            raise DomainError(f"ball radius {R} does not fit grid with r_max={self.r_max}")
        if m == self.N:
            return self
        return Grid(m * self.h, m)

    def same_spacing(self, other: "Grid") -> bool:
        return abs(self.h - other.h) <= 1e-12 * self.h


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise InvalidParameterError(
                f"expected {self.grid.N} values, got array of shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def restrict(self, grid: Grid) -> "GridFunction":
        """Restrict to a sub-grid sharing the first nodes of this one."""
        if not grid.same_spacing(self.grid) or grid.N > self.grid.N:
            raise DomainError("restriction target is not a leading sub-grid")
        return GridFunction(grid, self.values[: grid.N])


@dataclass(frozen=True)
class RadialModel:
    """A model Hermitian manifold reduced to radial data."""

    n: int
    drift: Profile
    lee_drift: Profile
    s_profile: Profile
    r_max: float
    r_D: float = 0.0
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"complex dimension must be >= 1, got {self.n}")
        if not self.r_max > 0:
            raise InvalidParameterError(f"r_max must be positive, got {self.r_max}")
        if not 0 <= self.r_D < self.r_max:
            raise InvalidParameterError("need 0 <= r_D < r_max")
        object.__setattr__(self, "n", int(self.n))

    def chern_drift(self, r) -> np.ndarray:
        """Coefficient of ``u'`` in the radial Chern Laplacian, equal to Δ^Ch r."""
        r = np.asarray(r, dtype=float)
        return self.drift(r) - self.lee_drift(r)

    def s(self, r) -> np.ndarray:
        return self.s_profile(np.asarray(r, dtype=float))

    def pole_regular(self, r_probe: float = 1e-4, tol: float = 1e-6) -> bool:
        return abs(r_probe * float(self.drift(np.array([r_probe]))[0]) - (2 * self.n - 1)) <= tol

    def check_grid(self, grid: Grid):
        if grid.r_max > self.r_max * (1 + 1e-12):
            raise DomainError(
                f"grid extends to {grid.r_max} beyond the model domain r_max={self.r_max}"
            )


def _check_dims(n, r_max):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"complex dimension must be a positive integer, got {n}")
    if not (np.isfinite(r_max) and r_max > 0):
        raise InvalidParameterError(f"r_max must be positive, got {r_max}")


def _zero(r):
    return np.zeros(np.shape(r))


def make_hyperbolic_model(n: int, r_max: float, s_profile=-1.0, r_D: float = 0.0) -> RadialModel:
    """Curvature -1 space form of real dimension 2n in geodesic polar coordinates."""
    _check_dims(n, r_max)
    k = 2 * int(n) - 1

    def drift(r):
        return k / np.tanh(np.asarray(r, dtype=float))

    return RadialModel(int(n), drift, _zero, as_profile(s_profile), float(r_max), r_D, "hyperbolic")


def make_euclidean_model(n: int, r_max: float, s_profile=0.0, r_D: float = 0.0) -> RadialModel:
    _check_dims(n, r_max)
    k = 2 * int(n) - 1

    def drift(r):
        return k / np.asarray(r, dtype=float)

    return RadialModel(int(n), drift, _zero, as_profile(s_profile), float(r_max), r_D, "euclidean")


def make_tabulated_model(n, r, d, tau, s, r_D: float = 0.0, r_max: float | None = None) -> RadialModel:
    """Model from tables of (r, d, tau, s), linearly interpolated."""
    r = np.asarray(r, dtype=float)
    r_max = float(r[-1]) if r_max is None else r_max
    _check_dims(n, r_max)
    return RadialModel(
        int(n), as_profile((r, d)), as_profile((r, tau)), as_profile((r, s)), r_max, r_D, "tabulated"
    )


def exact_distance_laplacian(model: RadialModel, r) -> np.ndarray:
    """Δ^Ch r for the model, i.e. its Chern drift."""
    return model.chern_drift(r)


def laplacian_coefficients(model: RadialModel, grid: Grid):
    """Tridiagonal coefficients of the discrete L on rows ``0 .. N-2``.

    Returns ``(lower, diag, upper)`` arrays of length N; row ``N-1`` is left
    zero (the last node uses a one-sided stencil or is pinned by callers).
    """
    h = grid.h
    p = model.chern_drift(grid.nodes)
    lower = 1.0 / h**2 - p / (2 * h)
    upper = 1.0 / h**2 + p / (2 * h)
    diag = np.full(grid.N, -2.0 / h**2)
    # ghost node u[-1] = u[0]: the lower coefficient folds onto the diagonal
    diag[0] += lower[0]
    lower[0] = 0.0
    lower[-1] = upper[-1] = diag[-1] = 0.0
    return lower, diag, upper


def chern_laplacian_radial(model: RadialModel, u: GridFunction) -> GridFunction:
    """Second-order finite-difference ``u'' + (d - tau) u'`` on a staggered grid."""
    grid = u.grid
    model.check_grid(grid)
    if grid.N < 4:
        raise DomainError("need at least 4 nodes")
    h = grid.h
    v = u.values
    p = model.chern_drift(grid.nodes)
    fwd = np.diff(v)  # fwd[i] = v[i+1] - v[i]
    out = np.empty(grid.N)
    out[1:-1] = (fwd[1:] - fwd[:-1]) / h**2 + p[1:-1] * (fwd[1:] + fwd[:-1]) / (2 * h)
    out[0] = fwd[0] / h**2 + p[0] * fwd[0] / (2 * h)
    b1, b2, b3 = fwd[-1], fwd[-2], fwd[-3]
    d2 = (2 * b1 - 3 * b2 + b3) / h**2
    d1 = (3 * b1 - b2) / (2 * h)
    out[-1] = d2 + p[-1] * d1
    return GridFunction(grid, out)


def chern_laplacian_at(model: RadialModel, func: Callable, r, step) -> np.ndarray:
    """Centered three-point Chern Laplacian of a callable at arbitrary radii."""
    r = np.asarray(r, dtype=float)
    step = np.broadcast_to(np.asarray(step, dtype=float), r.shape)
    up, mid, dn = func(r + step), func(r), func(r - step)
    d2 = ((up - mid) - (mid - dn)) / step**2
    d1 = (up - dn) / (2 * step)
    return d2 + model.chern_drift(r) * d1


# -- comparison bounds -------------------------------------------------------

def _simpson(f, t, m):
    x = np.linspace(0.0, t, m + 1)
    y = f(x)
    return (t / m) / 3.0 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def integrate_sqrt_F(F, t, rtol=1e-8, m0=16, m_max=2**22):
    """Composite Simpson for ∫_0^t sqrt(F), halving the step until converged."""
    g = lambda x: np.sqrt(F(x))
    m = m0
    prev = _simpson(g, t, m)
    while m < m_max:
        m *= 2
        cur = _simpson(g, t, m)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise DomainError(f"Simpson quadrature did not reach rtol={rtol} on [0, {t}]")


def comparison_bound_general(C1, C2, alpha, beta, n, t) -> float:
    """Upper bound ``4n h'(t)/h(t)`` on Δ^Ch r from curvature/torsion growth."""
    if not t > 0:
        raise DomainError(f"comparison bound needs t > 0, got {t}")
    if C1 < 0 or C2 < 0 or alpha < 0 or beta < 0:
        raise InvalidParameterError("constants and exponents must be nonnegative")

    def F(s):
        return C1 / (4 * n) * (1 + s) ** alpha + n * C2**2 / 2 * (1 + s) ** (2 * beta)

    if F(0.0) <= 0:
        raise InvalidParameterError("F(0) must be positive")
    integral = integrate_sqrt_F(F, float(t))
    # h'/h = sqrt(F(t)) e^I / (e^I - 1), written to survive large I
    return 4 * n * np.sqrt(F(float(t))) / -np.expm1(-integral)


def comparison_bound_matched(hyp, n, r):
    """Δ^Ch r <= 2n(α+2)/r + 4n sqrt(C3) (1+r)^(α/2) when β = α/2."""
    if abs(hyp.beta - hyp.alpha / 2) > EXPONENT_TOL:
        raise InvalidHypothesisError(
            f"matched bound requires beta = alpha/2, got alpha={hyp.alpha}, beta={hyp.beta}"
        )
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("matched comparison bound needs r > 0")
    C3 = hyp.C1 / (4 * n) + n * hyp.C2**2 / 2
    out = 2 * n * (hyp.alpha + 2) / r + 4 * n * np.sqrt(C3) * (1 + r) ** (hyp.alpha / 2)
    return float(out) if out.ndim == 0 else out


# -- disk oracle (n = 1) -----------------------------------------------------

@dataclass(frozen=True)
class DiskCurvatureProfile:
    radii: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def polar_grid(n_r: int, n_phi: int, r_max: float):
    """Staggered radii ``(i+1/2) r_max/n_r`` and angles ``2πj/n_phi``."""
    radii = (np.arange(n_r) + 0.5) * (r_max / n_r)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    return radii, phi


def chern_scalar_disk_oracle(f, radii) -> DiskCurvatureProfile:
    """Chern scalar curvature of ``e^{2f}|dz|^2`` on a polar grid of the unit disk.

    Evaluates ``tr_ω i∂̄∂ log ρ`` literally: ρ = e^{2f} is the volume density,
    ``i∂̄∂ψ = -(Δ₀ψ/4) i dz∧dz̄`` and ``ω = i g dz∧dz̄`` with ``g = e^{2f}/2``.
    ``f`` has shape ``(len(radii), n_phi)``; radii must be a staggered grid
    ``(i+1/2)dr`` and ``n_phi`` even (the pole is crossed by reflection).
    The outermost ring is dropped since it lacks an outer neighbour.
    """
    f = np.asarray(f, dtype=float)
    radii = np.asarray(radii, dtype=float)
    n_r, n_phi = f.shape
    if radii.shape != (n_r,) or n_r < 3:
        raise InvalidParameterError("radii must match the first axis of f (>= 3 rings)")
    if n_phi % 2 or n_phi < 4:
        raise InvalidParameterError("n_phi must be even and >= 4")
    dr = radii[1] - radii[0]
    if not np.allclose(radii, (np.arange(n_r) + 0.5) * dr, rtol=1e-10, atol=0):
        raise InvalidParameterError("radii must be the staggered grid (i + 1/2) dr")
    if radii[-1] + dr / 2 >= 1.0 or not np.all(np.isfinite(f)):
        raise SingularMetricError("polar grid reaches the boundary circle |z| = 1")
    dphi = 2 * np.pi / n_phi

    psi = 2 * f  # log of the volume density e^{2f}
    ghost = np.roll(psi[0], n_phi // 2)  # value at (-r0, φ) = (r0, φ + π)
    ext = np.vstack([ghost, psi])
    r = radii[:-1, None]
    c, up, dn = ext[1:-1], ext[2:], ext[:-2]
    lap = (
        (up - 2 * c + dn) / dr**2
        + (up - dn) / (2 * dr * r)
        + (np.roll(c, -1, axis=1) - 2 * c + np.roll(c, 1, axis=1)) / (r**2 * dphi**2)
    )
    g = np.exp(2 * f[:-1]) / 2
    curvature = -lap / 4 / g
    return DiskCurvatureProfile(radii[:-1].copy(), curvature.mean(axis=1), curvature.std(axis=1))
