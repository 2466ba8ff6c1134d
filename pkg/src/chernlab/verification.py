"""Post-solve checks (achieved curvature, completeness) and solution export."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .barriers import Barrier, BarrierKind
from .elliptic import _profile_values
from .errors import InvalidParameterError
from .geometry import GridFunction, RadialModel, chern_laplacian_radial

BOUNDARY_MARGIN = 0.05


@dataclass
class PrescribedReport:
    sup_error: float
    l2_error: float
    tol: float
    passed: bool
    r_interior: float
    # full-grid arrays, kept for export
    r: np.ndarray = field(repr=False)
    S_achieved: np.ndarray = field(repr=False)
    S_target: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"sup_error": self.sup_error, "l2_error": self.l2_error, "tol": self.tol,
                "passed": self.passed, "r_interior": self.r_interior}


def achieved_curvature(model: RadialModel, u: GridFunction) -> np.ndarray:
    """``e^{-(2/n) u} (-L u + s)``: Chern scalar curvature of the conformal metric."""
    lap = chern_laplacian_radial(model, u).values
    return np.exp(-2.0 / model.n * u.values) * (-lap + model.s(u.r))


def verify_prescribed(model: RadialModel, u: GridFunction, S, tol: float,
                      margin: float = BOUNDARY_MARGIN) -> PrescribedReport:
    """Compare achieved and target curvature away from the Dirichlet layer."""
    r = u.r
    S_hat = achieved_curvature(model, u)
    S_t = _profile_values(S, u.grid)
    err = S_hat - S_t
    r_in = (1 - margin) * u.grid.r_max
    mask = r <= r_in
    mask[-1] = False
    sup = float(np.max(np.abs(err[mask])))
    l2 = float(np.sqrt(np.sum(err[mask] ** 2) * u.grid.h))
    residual = np.exp(2.0 / model.n * u.values) * err
    return PrescribedReport(sup, l2, float(tol), bool(sup < tol), float(r_in),
                            r, S_hat, np.asarray(S_t, dtype=float), residual)


@dataclass
class CompletenessReport:
    passed: bool
    r_start: float
    min_margin: float  # min over checked nodes of e^{(2/n)u} - 1/(2r²)
    worst_r: float | None
    length: float  # Σ e^{u/n} h beyond r_start
    minorant: float  # Σ h / (√2 r) beyond r_start
    nodes_checked: int
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "passed", "r_start", "min_margin", "worst_r", "length", "minorant",
            "nodes_checked", "notes")}


def verify_completeness(u: GridFunction, u_minus, a: float | None, r0: float,
                        n: int = 1, slack: float = 1e-10) -> CompletenessReport:
    """Certify completeness through ``e^{(2/n)u} >= 1/(2r²)`` for large r.

    For log-type lower solutions the check starts at ``max(r0, √a)``.  For a
    constant-type lower solution (bump path, or a plain GridFunction) the
    bound ``e^{(2/n)u} >= C := e^{(2/n) min u_minus}`` already gives
    ``metric >= C·ω``, and the pointwise test starts at ``1/√(2C)``.
    """
    kind = u_minus.kind if isinstance(u_minus, Barrier) else None
    lower = u_minus.values if isinstance(u_minus, Barrier) else u_minus
    if not isinstance(lower, GridFunction):
        raise InvalidParameterError("u_minus must be a Barrier or a GridFunction")
    if lower.grid.N < u.grid.N or not lower.grid.same_spacing(u.grid):
        raise InvalidParameterError("lower solution does not cover the solution grid")
    um = lower.values[: u.grid.N]
    gap = float(np.min(u.values - um))
    if gap < -slack:
        raise InvalidParameterError(f"ordering u >= u_minus violated by {-gap:.3e}")

    notes = []
    r = u.r
    if kind in (BarrierKind.LOG, BarrierKind.GLUED, BarrierKind.INNER):
        if a is None or not a > 0:
            raise InvalidParameterError("log-type lower solutions need a positive a")
        r_start = max(r0, math.sqrt(a))
    else:
        C = float(np.exp(2.0 / n * um.min()))
        r_start = max(r0, 1.0 / math.sqrt(2 * C))
        notes.append(f"metric >= C·omega with C = {C:.6g}")
    sel = r >= r_start
    e = np.exp(2.0 / n * u.values[sel])
    bound = 1.0 / (2 * r[sel] ** 2)
    margins = e - bound
    h = u.grid.h
    length = float(np.sum(np.exp(u.values[sel] / n)) * h)
    minorant = float(np.sum(h / (math.sqrt(2) * r[sel])))
    if not sel.any():
        notes.append("no nodes beyond the threshold radius; nothing certified")
        return CompletenessReport(False, float(r_start), float("nan"), None, 0.0, 0.0, 0, notes)
    ok = bool(np.all(e >= bound * (1 - 1e-12)))
    i = int(np.argmin(margins))
    return CompletenessReport(ok, float(r_start), float(margins[i]), float(r[sel][i]),
                              length, minorant, int(sel.sum()), notes)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _svg(r, series, width=640, height=400, pad=40) -> str:
    ys = np.concatenate([v for _, v, _ in series])
    y0, y1 = float(ys.min()), float(ys.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1, y1 + 1
    x0, x1 = float(r[0]), float(r[-1])

    def pts(v):
        px = pad + (r - x0) / (x1 - x0) * (width - 2 * pad)
        py = height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="#999"/>',
    ]
    for k, (name, v, colour) in enumerate(series):
        lines.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts(v)}"/>')
        lines.append(f'<text x="{pad + 5}" y="{pad + 15 + 15 * k}" fill="{colour}" '
                     f'font-size="12">{name}</text>')
    lines.append(f'<text x="{pad}" y="{height - 10}" font-size="11">r in [{x0:.3g}, {x1:.3g}], '
                 f'value in [{y0:.3g}, {y1:.3g}]</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_solution(solution, barrier, reports: dict, prefix, plot: bool = True,
                    trace: bool = False) -> list:
    """Write ``<prefix>.csv``, ``<prefix>.json`` and optionally ``.svg``/``_trace.csv``.

    ``reports`` must hold a ``"prescribed"`` PrescribedReport for the same
    grid; any other entries are copied into the JSON summary.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    u = solution.u
    pres = reports["prescribed"]
    lower = barrier.values if isinstance(barrier, Barrier) else barrier
    um = lower.values[: u.grid.N]
    paths = []

    csv_path = prefix.with_name(prefix.name + ".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "u", "u_minus", "S_achieved", "S_target", "residual"])
        cols = (u.r, u.values, um, pres.S_achieved, pres.S_target, pres.residual)
        for row in zip(*cols):
            w.writerow([f"{float(x):.17g}" for x in row])
    paths.append(csv_path)

    summary = {
        "a": barrier.a if isinstance(barrier, Barrier) else None,
        "r0": barrier.r0 if isinstance(barrier, Barrier) else None,
        "barrier": barrier.metadata() if isinstance(barrier, Barrier) else None,
        "solution": solution.summary(),
        "reports": {k: v for k, v in reports.items()},
    }
    json_path = prefix.with_name(prefix.name + ".json")
    json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    paths.append(json_path)

    if plot:
        svg_path = prefix.with_name(prefix.name + ".svg")
        svg_path.write_text(_svg(u.r, [("u", u.values, "#1f77b4"), ("u_minus", um, "#d62728")]))
        paths.append(svg_path)
    if trace:
        paths.append(solution.write_trace(prefix.with_name(prefix.name + "_trace.csv")))
    return paths
