"""Hypothesis constants, case classification and the log-barrier feasibility test."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    InfeasibleError,
    InfeasibleWindowError,
    InvalidParameterError,
    PreconditionError,
)
from .geometry import EXPONENT_TOL, RadialModel, as_profile, comparison_bound_matched


class Case(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"


class Condition(str, enum.Enum):
    COND1 = "Cond1"
    COND2 = "Cond2"


@dataclass(frozen=True)
class HypothesisSet:
    """Growth/decay constants.  ``b`` and ``c`` are the roots of b², c²."""

    C1: float
    C2: float
    alpha: float
    beta: float
    b: float
    l: float
    c: float
    k: float
    n: int = 1

    def __post_init__(self):
        if self.C1 < 0 or self.C2 < 0:
            raise InvalidParameterError("C1 and C2 must be nonnegative")
        if self.C1 == 0 and self.C2 == 0:
            raise InvalidParameterError("C1 and C2 cannot both vanish (C3 must be positive)")
        for name in ("alpha", "beta", "l", "k"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"exponent {name} must be nonnegative")
        if not (self.b > 0 and self.c > 0):
            raise InvalidParameterError("b and c must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def matched(cls, C1, C2, alpha, b, l, c, k, n=1):
        return cls(C1, C2, alpha, alpha / 2, b, l, c, k, n)

    @property
    def C3(self) -> float:
        return self.C1 / (4 * self.n) + self.n * self.C2**2 / 2

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in ("C1", "C2", "alpha", "beta", "b", "l", "c", "k", "n")}


@dataclass
class CaseReport:
    matched_case: Case | None
    theorem45_condition: Condition | None
    C3: float
    margin: float
    r0: float | None = None
    # passes with 4n²√C3 (proof) but fails with 8n²√C3 (statement)
    statement_discrepancy: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "case": self.matched_case.value if self.matched_case else None,
            "theorem45_condition": self.theorem45_condition.value if self.theorem45_condition else None,
            "C3": self.C3,
            "margin": self.margin,
            "r0": self.r0,
            "statement_discrepancy": self.statement_discrepancy,
            "notes": list(self.notes),
        }


def _eq(x, y):
    return abs(x - y) <= EXPONENT_TOL


def _lt(x, y):
    return x < y and not _eq(x, y)


def _le(x, y):
    return x < y or _eq(x, y)


def _exponent_pattern(hyp: HypothesisSet) -> Case | None:
    """Case whose exponent conditions hold, ignoring the coefficient test."""
    a, l, k = hyp.alpha, hyp.l, hyp.k
    if _lt(a, 2) and _lt(l, 1 - a / 2):
        if _lt(k, 2 - l):
            return Case.CASE1
        if _eq(k, 2 - l):
            return Case.CASE2
        return None
    if _le(a, 2) and _eq(l, 1 - a / 2):
        if _eq(k, 1 + a / 2):
            return Case.CASE3
        if _lt(k, 1 + a / 2):
            return Case.CASE4
    return None


def _coefficient_margin(hyp: HypothesisSet, case: Case, factor: float = 4.0) -> float:
    b2, c2, n = hyp.b**2, hyp.c**2, hyp.n
    torsion = factor * n**2 * np.sqrt(hyp.C3)
    if case is Case.CASE1:
        return -b2
    if case is Case.CASE2:
        return -b2 + c2
    if case is Case.CASE3:
        return -b2 + c2 + torsion
    return -b2 + torsion


def _rhs_terms(hyp: HypothesisSet, a: float = 1.0):
    """(exponent, coefficient) pairs of the large-r expansion of the rhs."""
    n, al, b2, c2 = hyp.n, hyp.alpha, hyp.b**2, hyp.c**2
    t = 4 * n**2 * np.sqrt(hyp.C3)
    return [
        (4 - hyp.l, -b2),
        (2 - hyp.l, -2 * a * b2),
        (-hyp.l, -a * a * b2),
        (2 + hyp.k, c2),
        (hyp.k, a * c2),
        (3 + al / 2, t),
        (1 + al / 2, a * t),
        (2.0, 2 * n**2 * (al + 2) + c2 - n),
        (0.0, n * a + 2 * n**2 * (al + 2) * a + a * c2),
    ]


def asymptotic_margin(hyp: HypothesisSet) -> float:
    """Leading coefficient of the feasibility rhs as r → ∞."""
    terms = [(e, c) for e, c in _rhs_terms(hyp) if c != 0]
    top = max(e for e, _ in terms)
    return float(sum(c for e, c in terms if _eq(e, top)))


def classify(hyp: HypothesisSet) -> CaseReport:
    notes = []
    pattern = _exponent_pattern(hyp)
    matched = None
    discrepancy = False
    if pattern is not None and _coefficient_margin(hyp, pattern) < 0:
        matched = pattern
        if pattern in (Case.CASE3, Case.CASE4) and _coefficient_margin(hyp, pattern, 8.0) >= 0:
            discrepancy = True
            notes.append("passes with 4n^2 sqrt(C3) but fails with 8n^2 sqrt(C3)")
    if hyp.alpha > 2 and not _eq(hyp.alpha, 2):
        notes.append("alpha > 2 is outside every case")

    a, l, k = hyp.alpha, hyp.l, hyp.k
    cond = None
    if _lt(a, 2) and _lt(l, 1 - a / 2) and _le(k, 2 - l):
        cond = Condition.COND1
    elif (_le(a, 2) and _eq(l, 1 - a / 2) and _le(k, 1 + a / 2)
          and hyp.b**2 > 4 * hyp.n**2 * np.sqrt(hyp.C3)):
        cond = Condition.COND2

    margin = _coefficient_margin(hyp, matched) if matched else asymptotic_margin(hyp)
    return CaseReport(matched, cond, hyp.C3, float(margin), None, discrepancy, notes)


def inequality_rhs(hyp: HypothesisSet, a, r):
    """Right side of the log-barrier feasibility inequality (expanded form)."""
    r = np.asarray(r, dtype=float)
    n, al, b2, c2, l, k = hyp.n, hyp.alpha, hyp.b**2, hyp.c**2, hyp.l, hyp.k
    t = 4 * n**2 * np.sqrt(hyp.C3)
    out = (
        -b2 * r ** (4 - l)
        - 2 * a * b2 * r ** (2 - l)
        - a * a * b2 * r ** (-l)
        + c2 * r ** (2 + k)
        + a * c2 * r**k
        + t * (1 + r) ** (al / 2) * (r**3 + a * r)
        + (2 * n**2 * (al + 2) + c2 - n) * r**2
        + (n * a + 2 * n**2 * (al + 2) * a + a * c2)
    )
    return float(out) if out.ndim == 0 else out


def inequality_rhs_factored(hyp: HypothesisSet, a, r):
    """Same quantity before expansion; used to cross-check the expanded form."""
    r = np.asarray(r, dtype=float)
    n = hyp.n
    lap_r_times_r = 2 * n * (hyp.alpha + 2) + 4 * n * np.sqrt(hyp.C3) * r * (1 + r) ** (hyp.alpha / 2)
    out = (
        n * (a - r**2)
        + n * (r**2 + a) * lap_r_times_r
        - hyp.b**2 * r ** (-hyp.l) * (r**2 + a) ** 2
        + hyp.c**2 * (1 + r**hyp.k) * (r**2 + a)
    )
    return float(out) if out.ndim == 0 else out


def find_r0(hyp: HypothesisSet, a: float, r_search_max: float, r_floor: float = 0.0,
            samples: int = 10_000) -> float:
    """Smallest sampled radius beyond which the feasibility rhs stays <= 0."""
    if not a > 0:
        raise InvalidParameterError("barrier offset a must be positive")
    report = classify(hyp)
    if report.matched_case is None:
        pattern = _exponent_pattern(hyp)
        if pattern is not None:
            raise InfeasibleWindowError(
                f"exponents fit {pattern.value} but the asymptotic coefficient "
                f"{_coefficient_margin(hyp, pattern):.6g} is not negative"
            )
        raise PreconditionError("hypotheses match none of the four cases")
    lo = max(r_floor, 1e-6)
    if not r_search_max > lo:
        raise InvalidParameterError("r_search_max must exceed the radius floor")
    r = np.geomspace(lo, r_search_max, samples)
    vals = inequality_rhs(hyp, a, r)
    if vals[-1] > 0:
        raise InfeasibleWindowError(
            f"feasibility rhs still positive at r={r_search_max:g}; enlarge the window"
        )
    positive = np.nonzero(vals > 0)[0]
    if positive.size == 0:
        return float(r[0])
    return float(r[positive[-1] + 1])


def scaling_shift(S_target, hyp: HypothesisSet):
    """Shift ``a`` and rescaled target ``e^{(2/n)a} S̃`` for the boundary cases.

    Returns ``(a, S_shifted)`` where ``a`` sits one unit below the strict
    upper bound.  If u solves the problem for ``S_shifted`` then ``u + a``
    solves it for ``S_target``.
    """
    n, al, l, k = hyp.n, hyp.alpha, hyp.l, hyp.k
    b2, c2 = hyp.b**2, hyp.c**2
    if _lt(al, 2) and _lt(l, 1 - al / 2) and _eq(k, 2 - l):
        bound = n / 2 * np.log(b2 / c2)
    elif _le(al, 2) and _eq(l, 1 - al / 2) and _eq(k, 1 + al / 2):
        gap = b2 - 4 * n**2 * np.sqrt(hyp.C3)
        if gap <= 0:
            raise InfeasibleError("need b^2 > 4 n^2 sqrt(C3) for the scaling reduction")
        bound = n / 2 * np.log(gap / c2)
    else:
        raise PreconditionError("scaling shift applies only when k = 2 - l or k = 1 + alpha/2")
    a = float(bound - 1.0)
    S_tilde = as_profile(S_target)
    factor = np.exp(2.0 / n * a)

    def shifted(r, _S=S_tilde, _f=factor):
        return _f * _S(r)

    return a, shifted


def shifted_hypotheses(hyp: HypothesisSet, a: float) -> HypothesisSet:
    """Hypotheses after the target is multiplied by ``e^{(2/n)a}``."""
    return replace(hyp, c=float(hyp.c * np.exp(a / hyp.n)))


def extremal_model(hyp: HypothesisSet, r_max: float, r_D: float = 1.0) -> RadialModel:
    """Worst radial model the hypotheses allow outside the ball of radius r_D.

    The Chern drift equals the matched comparison bound and the background
    curvature is ``-b^2 max(r, r_D)^{-l}``.  Paired with the target
    ``-c^2 (1 + r^k)``, the log barrier's residual on this model is the
    feasibility rhs divided by ``(r^2 + a)^2``.
    """
    n, b2, l = hyp.n, hyp.b**2, hyp.l

    def drift(r):
        return comparison_bound_matched(hyp, n, np.maximum(np.asarray(r, dtype=float), 1e-300))

    def s(r):
        return -b2 * np.maximum(np.asarray(r, dtype=float), r_D) ** (-l)

    def zero(r):
        return np.zeros(np.shape(r))

    return RadialModel(n, drift, zero, s, float(r_max), float(r_D), "extremal")


def extremal_target(hyp: HypothesisSet):
    """Most negative target allowed: ``-c^2 (1 + r^k)``."""
    c2, k = hyp.c**2, hyp.k

    def S(r):
        return -c2 * (1.0 + np.asarray(r, dtype=float) ** k)

    return S
