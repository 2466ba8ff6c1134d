"""Monotone iteration on a ball and the exhaustion driver over nested balls."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .barriers import Barrier, upper_constant
from .elliptic import ShiftedOperator, _profile_values, nonlinear_residual
from .errors import (
    ChernLabError,
    DomainError,
    InvalidBarrierError,
    InvalidParameterError,
    NonConvergenceError,
    SignError,
)
from .geometry import GridFunction, RadialModel

MONOTONE_SLACK = 1e-12


@dataclass
class Solution:
    u: GridFunction
    iterations: int
    residual_sup: float
    trace: list
    residual_trace: list
    bounds: tuple  # (max(u_minus - u), max(u - b_k))
    b_k: float
    c_it: float
    max_increase: float  # largest pointwise w_{j+1} - w_j over the run
    min_lower_gap: float  # smallest pointwise w_j - u_minus over the run
    R: float
    meta: dict = field(default_factory=dict)

    @property
    def monotone_ok(self) -> bool:
        return self.max_increase <= MONOTONE_SLACK and self.min_lower_gap >= -MONOTONE_SLACK

    @property
    def trace_nonincreasing(self) -> bool:
        t = np.asarray(self.trace[1:])
        return bool(np.all(np.diff(t) <= MONOTONE_SLACK)) if t.size > 1 else True

    def summary(self) -> dict:
        return {
            "R": self.R,
            "N": self.u.grid.N,
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "b_k": self.b_k,
            "c_it": self.c_it,
            "bounds": {"lower": self.bounds[0], "upper": self.bounds[1]},
            "max_increase": self.max_increase,
            "min_lower_gap": self.min_lower_gap,
            "monotone_ok": self.monotone_ok,
            "trace_nonincreasing": self.trace_nonincreasing,
        }

    def write_trace(self, path) -> Path:
        """CSV with columns ``iteration,sup_change,residual``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "sup_change", "residual"])
            for j, (d, res) in enumerate(zip(self.trace, self.residual_trace), start=1):
                w.writerow([j, repr(float(d)), repr(float(res))])
        return path


def _lower_values(u_minus) -> GridFunction:
    if isinstance(u_minus, Barrier):
        if not u_minus.weak_residual_ok:
            raise InvalidBarrierError("lower solution was not verified (weak_residual_ok is false)")
        return u_minus.values
    if isinstance(u_minus, GridFunction):
        return u_minus
    raise InvalidParameterError("u_minus must be a Barrier or a GridFunction")


def monotone_solve(model: RadialModel, S, R: float, u_minus, tol: float = 1e-8,
                   max_iter: int = 500) -> Solution:
    """Decreasing monotone iteration from the constant upper solution b_k.

    Each step solves ``(-L + c) w_{j+1} = c w_j + S e^{(2/n) w_j} - s`` with
    Dirichlet value b_k.  Stops once the sup-change drops below ``tol`` and
    the interior residual below ``10 tol``.
    """
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    if max_iter < 0:
        raise InvalidParameterError("max_iter must be nonnegative")
    lower = _lower_values(u_minus)
    if R > lower.grid.r_max * (1 + 1e-12):
        raise DomainError(f"ball radius {R} exceeds the lower solution grid")
    ball = lower.grid.ball(R)
    model.check_grid(ball)
    n = model.n
    S_v = _profile_values(S, ball)
    if np.any(S_v >= 0):
        raise SignError("target curvature must be negative on the ball")
    s_v = model.s(ball.nodes)
    um = lower.values[: ball.N]

    b_k = upper_constant(model, S, R, lower)
    c = 2.0 / n * float(np.max(-S_v)) * np.exp(2.0 / n * b_k)
    op = ShiftedOperator(model, ball, c)

    w = np.full(ball.N, b_k)
    ew = np.exp(2.0 / n * w)
    trace, res_trace = [], []
    max_inc, min_gap = -np.inf, float(np.min(w - um))
    converged = False
    for j in range(max_iter):
        w_new = op.solve(c * w + S_v * ew - s_v, b_k, check=False)
        ew_new = np.exp(2.0 / n * w_new)
        diff = w_new - w
        # interior rows: -L w_new + s - S e^{w_new} follows from the linear equation
        res = c * (w - w_new) + S_v * (ew - ew_new)
        change = float(np.max(np.abs(diff)))
        res_sup = float(np.max(np.abs(res[:-1])))
        max_inc = max(max_inc, float(diff.max()))
        gap = float(np.min(w_new - um))
        min_gap = min(min_gap, gap)
        trace.append(change)
        res_trace.append(res_sup)
        if gap < -10 * tol:
            idx = int(np.argmin(w_new - um))
            raise InvalidBarrierError(
                f"iterate {j + 1} fell below the lower solution by {-gap:.3e} at r={ball.nodes[idx]:.4g}",
                index=idx,
            )
        w, ew = w_new, ew_new
        if change < tol and res_sup < 10 * tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"monotone iteration did not converge in {max_iter} steps on R={R}", trace=trace
        )
    u = GridFunction(ball, w)
    residual_sup = float(np.max(np.abs(nonlinear_residual(model, u, GridFunction(ball, S_v)).values[:-1])))
    bounds = (float(np.max(um - w)), float(np.max(w - b_k)))
    return Solution(u, len(trace), residual_sup, trace, res_trace, bounds, float(b_k), float(c),
                    float(max_inc), float(min_gap), float(ball.r_max))


def exhaustion_solve(model: RadialModel, S, radii, u_minus, tol: float = 1e-8,
                     max_iter: int = 500, compact_tol: float | None = None):
    """Solve on nested balls and track convergence on the innermost one.

    ``compact_trace[k]`` is the sup over ``r <= radii[0]`` of
    ``|u_{k+1} - u_k|``.  The returned solution lives on the last ball; its
    ``meta`` records the family and whether the trace is nonincreasing and
    below ``compact_tol`` (default ``tol``).  Those are reported, not raised.
    """
    radii = [float(x) for x in radii]
    if len(radii) < 2:
        raise InvalidParameterError("need at least two radii")
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise InvalidParameterError("radii must be nondecreasing")
    if radii[-1] > model.r_max * (1 + 1e-12):
        raise DomainError("largest radius exceeds the model domain")
    compact_tol = tol if compact_tol is None else compact_tol
    lower = _lower_values(u_minus)
    m = lower.grid.ball(radii[0]).N

    family, compact_trace = [], []
    last = None
    for k, R in enumerate(radii):
        try:
            sol = monotone_solve(model, S, R, u_minus, tol=tol, max_iter=max_iter)
        except ChernLabError as exc:
            exc.index = k
            raise
        if last is not None:
            compact_trace.append(float(np.max(np.abs(sol.u.values[:m] - last.u.values[:m]))))
        family.append(sol)
        last = sol

    ct = np.asarray(compact_trace)
    nonincreasing = bool(np.all(np.diff(ct[1:]) <= MONOTONE_SLACK)) if ct.size > 2 else True
    last.meta.update(
        family=family,
        compact_trace=compact_trace,
        compact_nonincreasing=nonincreasing,
        compact_final_below_tol=bool(ct[-1] < compact_tol),
        compact_tol=compact_tol,
        radii=radii,
        monotone_ok=all(s.monotone_ok for s in family),
    )
    return last, compact_trace


def local_bound_report(solutions, r_compact: float, r_l2: float | None = None) -> dict:
    """Sup-norm on ``[0, r_compact]`` against ``max(L² norm, 1)`` on a larger ball.

    The ratio should stay bounded along an exhaustion family; the slope of a
    linear fit against the family index is reported and must be <= 0.01.
    """
    funcs = [s.u if isinstance(s, Solution) else s for s in solutions]
    if not funcs:
        raise InvalidParameterError("empty family")
    extent = min(f.grid.r_max for f in funcs)
    if r_compact > extent * (1 + 1e-12):
        raise DomainError("r_compact exceeds a solution's domain")
    r_l2 = min(2 * r_compact, extent) if r_l2 is None else min(r_l2, extent)
    sups, l2s = [], []
    for f in funcs:
        r = f.grid.nodes
        sups.append(float(np.max(np.abs(f.values[r <= r_compact * (1 + 1e-12)]))))
        mask = r <= r_l2 * (1 + 1e-12)
        l2s.append(float(np.sqrt(np.sum(f.values[mask] ** 2) * f.grid.h)))
    ratios = [s / max(q, 1.0) for s, q in zip(sups, l2s)]
    slope = float(np.polyfit(np.arange(len(ratios)), ratios, 1)[0]) if len(ratios) > 1 else 0.0
    return {
        "r_compact": float(r_compact),
        "r_l2": float(r_l2),
        "sup_norms": sups,
        "l2_norms": l2s,
        "ratios": ratios,
        "C_loc": max(sups),
        "max_sup": max(sups),
        "max_l2": max(l2s),
        "ratio": max(sups) / max(max(l2s), 1.0),
        "slope": slope,
        "bounded": slope <= 0.01,
    }
