"""Command-line front end driven by a JSON experiment config.

Exit codes: 0 success, 2 unreadable or invalid config, 3 solver failure,
4 verification failure (including "no case matched").
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .barriers import build_glued_barrier, constant_bump_barrier
from .errors import ChernLabError
from .geometry import (
    Grid,
    comparison_bound_matched,
    exact_distance_laplacian,
    make_euclidean_model,
    make_hyperbolic_model,
    make_tabulated_model,
)
from .hypotheses import HypothesisSet, classify, find_r0
from .iteration import exhaustion_solve
from .verification import _jsonable, export_solution, verify_completeness, verify_prescribed

log = logging.getLogger("chernlab")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_N = 2048
DEFAULT_RADII = [4.0, 8.0, 12.0, 16.0]
DEFAULT_TOL = 1e-8

_number = {"type": "number"}
_table = {
    "type": "object",
    "required": ["r", "values"],
    "properties": {"r": {"type": "array", "items": _number, "minItems": 2},
                   "values": {"type": "array", "items": _number, "minItems": 2}},
    "additionalProperties": False,
}
_profile = {
    "oneOf": [
        _number,
        _table,
        {
            "type": "object",
            "required": ["kind", "value"],
            "properties": {
                "kind": {"enum": ["constant", "rational", "clamped_power"]},
                "value": _number,
                "power": _number,
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model", "hypotheses", "target_S"],
    "properties": {
        "model": {
            "type": "object",
            "required": ["preset"],
            "properties": {
                "preset": {"enum": ["hyperbolic", "euclidean", "tabulated"]},
                "n": {"type": "integer", "minimum": 1},
                "r_max": {"type": "number", "exclusiveMinimum": 0},
                "r_D": {"type": "number", "minimum": 0},
                "s": _profile,
                "table": {
                    "type": "object",
                    "required": ["r", "d", "tau", "s"],
                    "properties": {k: {"type": "array", "items": _number, "minItems": 2}
                                   for k in ("r", "d", "tau", "s")},
                },
            },
            "additionalProperties": False,
        },
        "hypotheses": {
            "type": "object",
            "required": ["C1", "C2", "alpha", "b", "l", "c", "k"],
            "properties": {k: _number for k in ("C1", "C2", "alpha", "beta", "b", "l", "c", "k")},
            "additionalProperties": False,
        },
        "target_S": _profile,
        "grid": {
            "type": "object",
            "properties": {
                "N": {"type": "integer", "minimum": 16},
                "radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                          "minItems": 2},
            },
            "additionalProperties": False,
        },
        "barrier": {
            "type": "object",
            "properties": {
                "path": {"enum": ["log", "bump"]},
                "a": {"type": "number", "exclusiveMinimum": 0},
                "keep_s": {"type": "boolean"},
                "r_D1": {"type": "number", "exclusiveMinimum": 0},
                "r_D2": {"type": "number", "exclusiveMinimum": 0},
                "r_search_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "nonlinear": {"type": "number", "exclusiveMinimum": 0},
                "prescribed": {"type": "number", "exclusiveMinimum": 0},
                "compact": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "checks": {
            "type": "object",
            "properties": {k: {"type": "boolean"} for k in
                           ("prescribed", "completeness", "monotone", "exhaustion")},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        msgs = []
        for err in errors:
            field = "/".join(str(p) for p in err.path) or "<root>"
            key = next((str(p) for p in reversed(err.path) if isinstance(p, str)), None)
            line = _line_of(text, key) if key else None
            where = f"{path}:{line}" if line else str(path)
            msgs.append(f"{where}: field '{field}': {err.message}")
        raise ConfigError("\n".join(msgs))
    return cfg


def build_profile(spec):
    if isinstance(spec, (int, float)):
        return float(spec)
    if "r" in spec:
        r, v = np.asarray(spec["r"], float), np.asarray(spec["values"], float)
        return (r, v)
    value = float(spec["value"])
    kind = spec["kind"]
    if kind == "constant":
        return value
    p = float(spec.get("power", 2.0))
    if kind == "rational":
        return lambda r: value / (1.0 + np.asarray(r, float) ** p)
    rho = float(spec.get("radius", 1.0))
    return lambda r: value * np.minimum(1.0, (np.asarray(r, float) / rho) ** p)


def build_model(cfg: dict, r_needed: float):
    m = cfg["model"]
    n = int(m.get("n", 1))
    r_max = float(m.get("r_max", r_needed))
    r_D = float(m.get("r_D", 0.0))
    s = build_profile(m.get("s", -1.0 if m["preset"] == "hyperbolic" else 0.0))
    if m["preset"] == "hyperbolic":
        return make_hyperbolic_model(n, r_max, s, r_D)
    if m["preset"] == "euclidean":
        return make_euclidean_model(n, r_max, s, r_D)
    t = m.get("table")
    if t is None:
        raise ConfigError("field 'model/table': required for the tabulated preset")
    return make_tabulated_model(n, t["r"], t["d"], t["tau"], t["s"], r_D, r_max)


def build_hypotheses(cfg: dict, n: int) -> HypothesisSet:
    h = dict(cfg["hypotheses"])
    h.setdefault("beta", h["alpha"] / 2)
    return HypothesisSet(h["C1"], h["C2"], h["alpha"], h["beta"], h["b"], h["l"], h["c"], h["k"], n)


def _settings(cfg: dict, args) -> dict:
    grid = cfg.get("grid", {})
    tols = cfg.get("tolerances", {})
    radii = args.radii if getattr(args, "radii", None) else grid.get("radii", DEFAULT_RADII)
    tol = args.tol if getattr(args, "tol", None) else tols.get("nonlinear", DEFAULT_TOL)
    return {
        "N": args.grid if getattr(args, "grid", None) else grid.get("N", DEFAULT_N),
        "radii": [float(x) for x in radii],
        "tol": float(tol),
        "prescribed_tol": float(tols.get("prescribed", 1e-3)),
        "compact_tol": float(tols.get("compact", 1e-3)),
        "max_iter": int(tols.get("max_iter", 500)),
        "checks": {"prescribed": True, "completeness": True, "monotone": True, "exhaustion": True,
                   **cfg.get("checks", {})},
        "barrier": {"path": "log", "a": 1.0, "keep_s": True, "r_search_max": 1e4,
                    **cfg.get("barrier", {})},
    }


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _fail(out: Path, stage: str, code: int, message: str, extra=None) -> int:
    payload = {"status": "failed", "stage": stage, "exit_code": code, "error": message, **(extra or {})}
    _write_json(out.with_name(out.name + "_failure.json"), payload)
    print(json.dumps(_jsonable(payload)), file=sys.stderr)
    return code


def run_pipeline(cfg: dict, args, out: Path, verify: bool = True) -> int:
    st = _settings(cfg, args)
    model = build_model(cfg, max(st["radii"]))
    hyp = build_hypotheses(cfg, model.n)
    S = build_profile(cfg["target_S"])
    report = classify(hyp)
    bar = st["barrier"]
    grid = Grid(max(st["radii"]), st["N"])

    try:
        if bar["path"] == "log":
            if report.matched_case is None:
                return _fail(out, "classify", EXIT_VERIFY, "no case matched", {"case_report": report})
            a = float(bar["a"])
            r0 = find_r0(hyp, a, float(bar["r_search_max"]), r_floor=model.r_D)
            report.r0 = r0
            barrier = build_glued_barrier(model, S, grid, a, r0, keep_s=bool(bar["keep_s"]))
        else:
            bump = constant_bump_barrier(model, S, hyp.b, hyp.c, grid, bar.get("r_D1"), bar.get("r_D2"))
            barrier = bump.barrier()
            a, r0 = bump.a, 0.0
        log.info("barrier %s built", barrier.kind.value)
        sol, compact = exhaustion_solve(model, S, st["radii"], barrier, tol=st["tol"],
                                        max_iter=st["max_iter"], compact_tol=st["compact_tol"])
    except ChernLabError as exc:
        return _fail(out, "solve", EXIT_SOLVER, f"{type(exc).__name__}: {exc}",
                     {"case_report": report, "index": getattr(exc, "index", None)})

    pres = verify_prescribed(model, sol.u, S, st["prescribed_tol"])
    reports = {"case": report, "prescribed": pres, "compact_trace": compact,
               "settings": {k: v for k, v in st.items() if k != "checks"}}
    checks = {}
    if verify:
        chk = st["checks"]
        if chk["prescribed"]:
            checks["prescribed"] = pres.passed
        if chk["completeness"]:
            comp = verify_completeness(sol.u, barrier, a if a > 0 else None, r0, model.n)
            reports["completeness"] = comp
            checks["completeness"] = comp.passed
        if chk["monotone"]:
            checks["monotone"] = bool(sol.meta["monotone_ok"])
        if chk["exhaustion"]:
            checks["exhaustion"] = bool(sol.meta["compact_nonincreasing"]
                                        and sol.meta["compact_final_below_tol"])
    reports["checks"] = checks
    export_solution(sol, barrier, reports, out, plot=not args.no_plot, trace=True)
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        return _fail(out, "verify", EXIT_VERIFY, "checks failed: " + ", ".join(failed), {"checks": checks})
    print(json.dumps(_jsonable({"status": "ok", "checks": checks, "iterations": sol.iterations,
                                "compact_trace": compact})))
    return EXIT_OK


def cmd_classify(cfg: dict, args, out: Path) -> int:
    n = int(cfg["model"].get("n", 1))
    hyp = build_hypotheses(cfg, n)
    report = classify(hyp)
    if report.matched_case is not None:
        bar = _settings(cfg, args)["barrier"]
        try:
            report.r0 = find_r0(hyp, float(bar["a"]), float(bar["r_search_max"]),
                                r_floor=float(cfg["model"].get("r_D", 0.0)))
        except ChernLabError as exc:
            report.notes.append(f"find_r0: {exc}")
    print(json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True))
    return EXIT_OK if report.matched_case is not None else EXIT_VERIFY


def cmd_compare_laplacian(cfg: dict, args, out: Path) -> int:
    st = _settings(cfg, args)
    model = build_model(cfg, max(st["radii"]))
    hyp = build_hypotheses(cfg, model.n)
    r = Grid(model.r_max, st["N"]).nodes
    exact = exact_distance_laplacian(model, r)
    bound = comparison_bound_matched(hyp, model.n, r)
    path = out.with_name(out.name + "_laplacian.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("r,exact,bound,margin\n")
        for row in zip(r, exact, bound, bound - exact):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    ok = bool(np.all(bound - exact > 0))
    print(json.dumps({"csv": str(path), "rows": int(r.size), "min_margin": float(np.min(bound - exact)),
                      "passed": ok}))
    return EXIT_OK if ok else EXIT_VERIFY


def _radii(text: str):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad radii list {text!r}") from exc
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("need at least two radii")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chernlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "full pipeline: classify, barrier, exhaustion solve, verify, export",
        "classify": "print the case report for the hypotheses",
        "solve": "build the barrier and solve, exporting without running checks",
        "verify": "solve and run all enabled checks (same as run)",
        "compare-laplacian": "sweep the comparison bound against the model drift",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, default=Path("out/run"), help="output path prefix")
        sp.add_argument("--radii", type=_radii, help="comma-separated exhaustion radii")
        sp.add_argument("--grid", type=int, help="nodes on the largest ball")
        sp.add_argument("--tol", type=float, help="nonlinear tolerance")
        sp.add_argument("--no-plot", action="store_true", help="skip the SVG plot")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(out, "config", EXIT_CONFIG, str(exc))
    try:
        if args.command == "classify":
            return cmd_classify(cfg, args, out)
        if args.command == "compare-laplacian":
            return cmd_compare_laplacian(cfg, args, out)
        return run_pipeline(cfg, args, out, verify=args.command != "solve")
    except ConfigError as exc:
        return _fail(out, "config", EXIT_CONFIG, str(exc))
    except ChernLabError as exc:
        # construction errors outside the solve stage (model, hypotheses)
        return _fail(out, "setup", EXIT_CONFIG, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
