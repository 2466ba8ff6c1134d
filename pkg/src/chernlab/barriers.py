"""Lower and upper solutions: log barrier, inner Dirichlet barrier, gluing,
constant-plus-bump construction and the constant upper solution."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elliptic import ShiftedOperator, nonlinear_residual
from .errors import (
    ConstructionError,
    ContinuityError,
    DomainError,
    InvalidGluingError,
    InvalidParameterError,
    SignError,
)
from .geometry import Grid, GridFunction, RadialModel, as_profile, chern_laplacian_radial

JUMP_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class BarrierKind(str, enum.Enum):
    LOG = "LogBarrier"
    INNER = "InnerDirichlet"
    GLUED = "Glued"
    CONSTANT_BUMP = "ConstantBump"
    CONSTANT_UPPER = "ConstantUpper"


@dataclass
class Barrier:
    values: GridFunction
    kind: BarrierKind
    a: float | None = None
    r0: float | None = None
    r_glue: float | None = None
    weak_residual_ok: bool = False
    jump: float | None = None
    max_residual: float | None = None  # over smooth-region nodes
    kink_residual: float | None = None  # at the gluing node itself
    phi: GridFunction | None = None  # bump added to the constant (ConstantBump)
    meta: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {
            "kind": self.kind.value,
            "a": self.a,
            "r0": self.r0,
            "r_glue": self.r_glue,
            "weak_residual_ok": self.weak_residual_ok,
            "jump": self.jump,
            "max_residual": self.max_residual,
            "kink_residual": self.kink_residual,
            **self.meta,
        }

    def export(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.csv`` (r, value) and a ``<prefix>.json`` metadata sidecar."""
        prefix = Path(prefix)
        csv_path = prefix.with_name(prefix.name + ".csv")
        json_path = prefix.with_name(prefix.name + ".json")
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "value"])
            for r, v in zip(self.values.r, self.values.values):
                w.writerow([f"{r:.17g}", f"{v:.17g}"])
        meta = {k: (float(v) if isinstance(v, np.floating) else v) for k, v in self.metadata().items()}
        json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def log_barrier(n: int, a: float, grid: Grid) -> GridFunction:
    """``-(n/2) log(r^2 + a)`` at the grid nodes."""
    if not a > 0:
        raise InvalidParameterError(f"log barrier offset must be positive, got {a}")
    return GridFunction(grid, -n / 2 * np.log(grid.nodes**2 + a))


@dataclass(frozen=True)
class LogBarrierProfile:
    """``-(n/2) log(r^2 + a)`` as a callable with exact derivatives."""

    n: int
    a: float

    def __call__(self, r):
        return -self.n / 2 * np.log(np.asarray(r, dtype=float) ** 2 + self.a)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return -self.n * r / (r**2 + self.a)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        return -self.n * (self.a - r**2) / (r**2 + self.a) ** 2


def _inner_grid(grid: Grid, r_omega: float) -> Grid:
    r = grid.nodes
    m = int(np.searchsorted(r, r_omega * (1 + 1e-12) + 1e-12, side="right"))
    if m < 16:
        raise DomainError(f"r_omega={r_omega} leaves fewer than 16 inner nodes")
    return Grid(m * grid.h, m)


def inner_dirichlet_constant(S, n: int, r_omega: float, a: float, radii=None) -> float:
    """``(-min S) e^{(2/n) u1(r_omega)} = (-min S)/(r_omega^2 + a)``."""
    radii = np.array([r_omega]) if radii is None else np.append(radii, r_omega)
    S_vals = as_profile(S)(radii)
    if np.any(S_vals >= 0):
        raise SignError("target curvature must be negative on the inner domain")
    return float(-S_vals.min() * np.exp(2.0 / n * (-n / 2 * np.log(r_omega**2 + a))))


def inner_dirichlet_barrier(model: RadialModel, S, r_omega: float, a: float, grid: Grid,
                            keep_s: bool = False) -> GridFunction:
    """Inner barrier on the nodes ``r <= r_omega`` with log-barrier boundary data.

    With ``keep_s=False`` this solves ``L u2 = C``, C the constant above, so
    the maximum sits on the boundary.  With ``keep_s=True`` it solves
    ``L u2 = s + C`` and C is the smallest constant with
    ``C >= max(-S e^{(2/n) u2})``; the background curvature then bends u2
    downward at the boundary, which is what makes a convex junction with the
    log barrier possible.
    """
    sub = _inner_grid(grid, r_omega)
    model.check_grid(sub)
    r = sub.nodes
    r_b = r[-1]
    n = model.n
    boundary = -n / 2 * np.log(r_b**2 + a)
    S_vals = as_profile(S)(r)
    if np.any(S_vals >= 0):
        raise SignError("target curvature must be negative on the inner domain")
    op = ShiftedOperator(model, sub, 0.0)

    if not keep_s:
        C = inner_dirichlet_constant(S, n, r_b, a, r)
        return GridFunction(sub, op.solve(np.full(sub.N, -C), boundary))

    s_vals = model.s(r)
    w_s = op.solve(-s_vals, boundary)
    w_1 = op.solve(-np.ones(sub.N), 0.0)

    def gap(C):
        return C - np.max(-S_vals * np.exp(2.0 / n * (w_s + C * w_1)))

    lo, hi = 0.0, max(1e-3, float(-S_vals.min()))
    while gap(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e12:
            raise ConstructionError("inner barrier constant diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    C = hi * (1 + 1e-10)
    return GridFunction(sub, op.solve(-(s_vals + C), boundary))


def _one_sided_slope(v: np.ndarray, h: float, forward: bool) -> float:
    # fourth-order one-sided first derivative at v[0] (forward) or v[-1] (backward)
    w = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * h)
    if forward:
        return float(w @ v[:5])
    return float(-(w @ v[::-1][:5]))


def glue_barrier(u1: GridFunction, u2: GridFunction, r_glue: float,
                 model: RadialModel | None = None, S=None) -> Barrier:
    """Glue the inner barrier ``u2`` (r <= r_glue) to ``u1`` (r > r_glue).

    The derivative jump ``J = u1'(r_glue+) - u2'(r_glue-)`` must be
    nonnegative: a convex corner only adds a favourable singular part to
    the distributional Laplacian.  When ``model`` and ``S`` are given the
    discrete lower-solution residual is also checked.
    """
    grid = u1.grid
    if not u2.grid.same_spacing(grid):
        raise DomainError("u1 and u2 must share the grid spacing")
    r = grid.nodes
    m = int(np.argmin(np.abs(r - r_glue)))
    if abs(r[m] - r_glue) > 1e-9 * grid.h + 1e-12 or m >= u2.grid.N:
        raise DomainError(f"r_glue={r_glue} is not a node covered by u2")
    if m < 4 or m > grid.N - 5:
        raise DomainError("gluing node too close to the grid ends")
    mismatch = abs(u2.values[m] - u1.values[m])
    if mismatch > JUMP_TOL:
        raise ContinuityError(f"barriers differ by {mismatch:.3e} at r_glue={r_glue}")
    h = grid.h
    jump = _one_sided_slope(u1.values[m:], h, True) - _one_sided_slope(u2.values[: m + 1], h, False)
    if jump < -JUMP_TOL:
        raise InvalidGluingError(
            f"derivative jump {jump:.6g} < 0 at r_glue={r_glue}: concave corner; "
            "enlarge r_glue or use an inner barrier that bends down"
        )
    values = np.concatenate([u2.values[: m + 1], u1.values[m + 1:]])
    barrier = Barrier(GridFunction(grid, values), BarrierKind.GLUED, r_glue=float(r[m]),
                      jump=jump, weak_residual_ok=True)
    if model is not None and S is not None:
        check_lower_solution(barrier, model, S)
    return barrier


def check_lower_solution(barrier: Barrier, model: RadialModel, S, tol: float = RESIDUAL_TOL) -> Barrier:
    """Record discrete residuals and update ``weak_residual_ok`` in place.

    The last node is excluded: it carries the Dirichlet data in every solve.
    """
    res = nonlinear_residual(model, barrier.values, S).values[:-1]
    if barrier.r_glue is not None:
        r = barrier.values.grid.nodes[:-1]
        kink = np.abs(r - barrier.r_glue) < 0.5 * barrier.values.grid.h
        barrier.kink_residual = float(res[kink].max()) if kink.any() else None
        smooth = res[~kink]
    else:
        smooth = res
    barrier.max_residual = float(smooth.max())
    ok = barrier.max_residual <= tol
    if barrier.jump is not None:
        ok = ok and barrier.jump >= -JUMP_TOL
    barrier.weak_residual_ok = bool(ok)
    return barrier


def build_glued_barrier(model: RadialModel, S, grid: Grid, a: float, r0: float,
                        keep_s: bool = True, growth: float = 1.1, max_tries: int = 60) -> Barrier:
    """Search outward from ``r0`` for a gluing radius that yields a valid barrier."""
    r = grid.nodes
    u1 = log_barrier(model.n, a, grid)
    start = int(np.searchsorted(r, r0 + 2 * grid.h))
    idx = max(start, 16)
    last_err = None
    for _ in range(max_tries):
        if idx > grid.N - 6:
            break
        r_glue = float(r[idx])
        u2 = inner_dirichlet_barrier(model, S, r_glue, a, grid, keep_s=keep_s)
        try:
            barrier = glue_barrier(u1, u2, r_glue, model, S)
        except InvalidGluingError as exc:
            last_err = exc
        else:
            kink_ok = barrier.kink_residual is None or barrier.kink_residual <= RESIDUAL_TOL
            if barrier.weak_residual_ok and kink_ok:
                barrier.a, barrier.r0 = float(a), float(r0)
                barrier.meta["inner_keeps_s"] = keep_s
                return barrier
            last_err = InvalidGluingError(
                f"discrete residual {barrier.max_residual:.3e} (kink {barrier.kink_residual}) "
                f"at r_glue={r_glue}"
            )
        idx = max(idx + 1, int(np.searchsorted(r, r_glue * growth)))
    raise InvalidGluingError(f"no admissible gluing radius beyond r0={r0}: {last_err}")


@dataclass
class BumpConstruction:
    phi: GridFunction
    shifted_s: GridFunction
    a: float
    epsilon: float
    delta: float
    scale: float

    def barrier(self) -> Barrier:
        """Lower solution ``a + φ`` for the equation written against ω."""
        vals = GridFunction(self.phi.grid, self.a + self.phi.values)
        return Barrier(vals, BarrierKind.CONSTANT_BUMP, a=self.a, weak_residual_ok=True,
                       phi=self.phi, meta={"epsilon": self.epsilon, "delta": self.delta})


def smoothstep_cutoff(r, r_in: float, r_out: float) -> np.ndarray:
    """C² radial cutoff: 1 on [0, r_in], 0 beyond r_out, quintic blend between."""
    t = np.clip((np.asarray(r, dtype=float) - r_in) / (r_out - r_in), 0.0, 1.0)
    return 1.0 - t**3 * (10 - 15 * t + 6 * t**2)


def constant_bump_barrier(model: RadialModel, S, b: float, c: float, grid: Grid,
                          r_D1: float | None = None, r_D2: float | None = None,
                          delta1: float = 1.0, delta2: float = 1.0) -> BumpConstruction:
    """Bump φ making the background curvature uniformly negative, and constant a.

    After the conformal change by ``e^{(2/n)φ}`` the background curvature
    ``s1 = e^{-(2/n)φ}(-Lφ + s)`` is at most ``-ε`` and the constant ``a``
    is a lower solution against it.
    """
    model.check_grid(grid)
    if not (b > 0 and c > 0):
        raise InvalidParameterError("b and c must be positive")
    n = model.n
    r = grid.nodes
    s = model.s(r)
    S_vals = as_profile(S)(r)
    if np.any(S_vals >= 0) or np.any(S_vals < -c**2 * (1 + 1e-12)):
        raise SignError("target must satisfy -c^2 <= S < 0")
    if np.any(s > 1e-12):
        raise SignError("background curvature must be nonpositive")
    outside = r > model.r_D
    if np.any(s[outside] > -b**2 * (1 - 1e-12)):
        bad = r[outside][np.argmax(s[outside])]
        raise SignError(f"background curvature exceeds -b^2 outside D (r={bad:.4g})")

    if model.r_D == 0:
        zero = GridFunction(grid, np.zeros(grid.N))
        eps = b**2
        return BumpConstruction(zero, GridFunction(grid, s), n / 2 * np.log(eps / c**2) - 1,
                                eps, 0.0, 0.0)

    r_D1 = 1.5 * model.r_D if r_D1 is None else r_D1
    r_D2 = 3.0 * model.r_D if r_D2 is None else r_D2
    if not model.r_D < r_D1 < r_D2 <= grid.r_max:
        raise InvalidParameterError("need r_D < r_D1 < r_D2 <= r_max")
    if r_D1 - model.r_D <= grid.h:
        raise InvalidParameterError("grid too coarse to separate D from the cutoff region")

    sub = grid.ball(r_D2)
    phi0 = ShiftedOperator(model, sub, 0.0).solve(np.full(sub.N, -delta1), delta2)
    phi1 = np.zeros(grid.N)
    phi1[: sub.N] = smoothstep_cutoff(sub.nodes, r_D1, r_D2) * phi0
    lap1 = chern_laplacian_radial(model, GridFunction(grid, phi1)).values
    C = max(0.0, -float(lap1.min()))
    scale = b**2 / (2 * C) if C > 0 else 1.0
    phi = scale * phi1
    lap = scale * lap1
    if lap.min() < -b**2 / 2 - 1e-8:
        raise ConstructionError(f"Lφ < -b^2/2 at r={r[np.argmin(lap)]:.4g}")
    delta = scale * delta1
    eps = float(np.exp(-2.0 / n * np.max(np.abs(phi))) * min(delta, b**2 / 2))
    s1 = np.exp(-2.0 / n * phi) * (-lap + s)
    if s1.max() > -eps + 1e-8:
        raise ConstructionError(
            f"shifted curvature {s1.max():.4g} > -ε={-eps:.4g} at r={r[np.argmax(s1)]:.4g}"
        )
    a = n / 2 * np.log(eps / c**2) - 1.0
    return BumpConstruction(GridFunction(grid, phi), GridFunction(grid, s1), float(a), eps, delta, scale)


def upper_constant(model: RadialModel, S, R: float, u_minus) -> float:
    """Constant upper solution ``b_k`` on the ball of radius R."""
    u_vals = u_minus.values if isinstance(u_minus, Barrier) else u_minus
    ball = u_vals.grid.ball(R)
    r = ball.nodes
    C_k = -float(model.s(r).min()) + 1.0
    S_max = float(as_profile(S)(r).max())
    if S_max >= 0:
        raise SignError("target curvature must be negative on the ball")
    log_term = model.n / 2 * np.log(C_k / -S_max)
    return float(max(log_term, float(u_vals.values[: ball.N].max())) + 1.0)
