import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chernlab.errors import InfeasibleError, InfeasibleWindowError, InvalidParameterError, PreconditionError
from chernlab.hypotheses import (
    Case,
    Condition,
    HypothesisSet,
    asymptotic_margin,
    classify,
    find_r0,
    inequality_rhs,
    inequality_rhs_factored,
    scaling_shift,
    shifted_hypotheses,
)

GOLDEN = json.loads((Path(__file__).parent / "data" / "classification_golden.json").read_text())


def H(**kw):
    kw.setdefault("n", 1)
    return HypothesisSet.matched(**kw)


def test_C3_and_validation():
    assert H(C1=4, C2=0, alpha=0, b=1, l=0, c=1, k=0).C3 == 1.0
    assert H(C1=8, C2=1, alpha=0, b=1, l=0, c=1, k=0, n=2).C3 == pytest.approx(8 / 8 + 2 * 1 / 2)
    with pytest.raises(InvalidParameterError):
        H(C1=0, C2=0, alpha=0, b=1, l=0, c=1, k=0)
    with pytest.raises(InvalidParameterError):
        H(C1=1, C2=0, alpha=-1, b=1, l=0, c=1, k=0)
    with pytest.raises(InvalidParameterError):
        H(C1=1, C2=0, alpha=0, b=0, l=0, c=1, k=0)


def test_classify_examples():
    assert classify(H(C1=1, C2=1, alpha=0, b=1, l=0, c=1, k=1)).matched_case is Case.CASE1
    rep = classify(H(C1=4, C2=0, alpha=2, b=3, l=0, c=1, k=0))
    assert rep.matched_case is Case.CASE4 and rep.margin == pytest.approx(-5.0)
    assert classify(H(C1=4, C2=0, alpha=2, b=3, l=0.5, c=1, k=0)).matched_case is None


def test_alpha_above_two_is_rejected_with_note():
    rep = classify(H(C1=4, C2=0, alpha=2.5, b=3, l=0, c=1, k=0))
    assert rep.matched_case is None and rep.theorem45_condition is None
    assert any("alpha > 2" in note for note in rep.notes)


@pytest.mark.parametrize("entry", GOLDEN, ids=[e["id"] for e in GOLDEN])
def test_golden_classification(entry):
    hyp = HypothesisSet(**entry["params"])
    rep = classify(hyp)
    assert rep.matched_case is not None and rep.matched_case.value == entry["expected_case"]
    assert rep.statement_discrepancy is entry["discrepancy"]
    assert rep.margin < 0
    assert json.loads(json.dumps(rep.to_dict()))["case"] == entry["expected_case"]


def test_golden_has_three_sets_per_case():
    counts = {}
    for e in GOLDEN:
        counts[e["expected_case"]] = counts.get(e["expected_case"], 0) + 1
    assert counts == {"Case1": 3, "Case2": 3, "Case3": 3, "Case4": 3}
    assert any(e["discrepancy"] for e in GOLDEN if e["expected_case"] == "Case3")


def test_weaker_shift_conditions():
    assert classify(H(C1=4, C2=0, alpha=0, b=1, l=0, c=2, k=2)).theorem45_condition is Condition.COND1
    rep = classify(H(C1=4, C2=0, alpha=0, b=3, l=1, c=5, k=1))
    assert rep.matched_case is None and rep.theorem45_condition is Condition.COND2


def _oracle_cases(al, l, k, b2, c2, t):
    """Independent vectorized statement of the four cases."""
    eq = lambda x, y: np.abs(x - y) <= 1e-12
    lt = lambda x, y: (x < y) & ~eq(x, y)
    le = lambda x, y: (x < y) | eq(x, y)
    c1 = lt(al, 2) & lt(l, 1 - al / 2) & lt(k, 2 - l) & (-b2 < 0)
    c2_ = lt(al, 2) & lt(l, 1 - al / 2) & eq(k, 2 - l) & (-b2 + c2 < 0)
    c3 = le(al, 2) & eq(l, 1 - al / 2) & eq(k, 1 + al / 2) & (-b2 + c2 + t < 0)
    c4 = le(al, 2) & eq(l, 1 - al / 2) & lt(k, 1 + al / 2) & (-b2 + t < 0)
    return np.stack([c1, c2_, c3, c4])


def test_case_exclusivity_sweep(rng):
    draws = 100_000
    al = np.where(rng.random(draws) < 0.5, rng.choice([0.0, 0.5, 1.0, 2.0], draws), rng.uniform(0, 2.5, draws))
    l = np.where(rng.random(draws) < 0.5, np.maximum(1 - al / 2, 0.0), rng.uniform(0, 1.5, draws))
    pick = rng.random(draws)
    k = np.where(pick < 0.3, 2 - l, np.where(pick < 0.6, 1 + al / 2, rng.uniform(0, 3, draws)))
    k = np.maximum(k, 0.0)
    b = rng.uniform(0.1, 4, draws)
    c = rng.uniform(0.1, 4, draws)
    C1 = rng.uniform(0, 4, draws)
    C2 = rng.uniform(0.01, 2, draws)
    n = rng.integers(1, 4, draws)
    C3 = C1 / (4 * n) + n * C2**2 / 2
    oracle = _oracle_cases(al, l, k, b**2, c**2, 4 * n**2 * np.sqrt(C3))
    assert oracle.sum(axis=0).max() <= 1
    labels = np.array([None, "Case1", "Case2", "Case3", "Case4"], dtype=object)
    expected = labels[np.where(oracle.any(axis=0), oracle.argmax(axis=0) + 1, 0)]
    # classify agrees with the oracle on a subsample (full loop is slow in pure python)
    idx = rng.choice(draws, 5000, replace=False)
    for i in idx:
        rep = classify(HypothesisSet(C1[i], C2[i], al[i], al[i] / 2, b[i], l[i], c[i], k[i], int(n[i])))
        got = rep.matched_case.value if rep.matched_case else None
        assert got == expected[i]
    assert len({e for e in expected if e}) == 4


def test_rhs_hand_arithmetic():
    hyp = H(C1=4, C2=0, alpha=0, b=2, l=0, c=1, k=0)
    assert inequality_rhs(hyp, 1.0, 10.0) == pytest.approx(-36257.0, rel=1e-14)
    assert inequality_rhs(hyp, 1.0, 1e-9) == pytest.approx(3.0, abs=1e-6)


def test_rhs_small_constants_limit_positive():
    hyp = H(C1=1e-20, C2=0, alpha=1, b=1e-9, l=0, c=1e-9, k=0)
    r = np.geomspace(1e-3, 10, 50)
    lim = (2 * (1 + 2) - 1) * r**2 + (1 + 2 * 3)
    np.testing.assert_allclose(inequality_rhs(hyp, 1.0, r), lim, rtol=1e-5)
    assert np.all(inequality_rhs(hyp, 1.0, r) > 0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.01, 5), st.floats(0, 3), st.floats(0, 2), st.floats(0.1, 3), st.floats(0, 2),
    st.floats(0.1, 3), st.floats(0, 3), st.integers(1, 3), st.floats(0.1, 5), st.floats(0.01, 100),
)
def test_expanded_matches_factored(C1, C2, alpha, b, l, c, k, n, a, r):
    hyp = HypothesisSet.matched(C1, C2, alpha, b, l, c, k, n)
    e = inequality_rhs(hyp, a, r)
    f = inequality_rhs_factored(hyp, a, r)
    scale = max(1.0, abs(r) ** 6, abs(e))
    assert abs(e - f) <= 1e-11 * scale


@pytest.mark.parametrize("entry", [e for e in GOLDEN if e["expected_case"] in ("Case3", "Case4")],
                         ids=lambda e: e["id"])
def test_asymptotic_margin_limit(entry):
    hyp = HypothesisSet(**entry["params"])
    n, t = hyp.n, 4 * hyp.n**2 * math.sqrt(hyp.C3)
    limit = -hyp.b**2 + t + (hyp.c**2 if entry["expected_case"] == "Case3" else 0.0)
    r = 1e6
    val = inequality_rhs(hyp, 1.0, r) / r ** (3 + hyp.alpha / 2)
    assert val == pytest.approx(limit, rel=0.01)
    assert asymptotic_margin(hyp) == pytest.approx(limit, rel=1e-12)


def test_find_r0_case1_example():
    hyp = H(C1=1, C2=1, alpha=0, b=1, l=0, c=1, k=1)
    r0 = find_r0(hyp, 1.0, 1e4)
    assert 0 < r0 < 1e4
    assert inequality_rhs(hyp, 1.0, r0 + 1) < 0


@pytest.mark.parametrize("entry", GOLDEN, ids=[e["id"] for e in GOLDEN])
def test_rhs_negative_beyond_r0(entry):
    hyp = HypothesisSet(**entry["params"])
    r0 = find_r0(hyp, 1.0, 1e4, r_floor=1.0)
    assert r0 >= 1.0
    r = np.geomspace(r0, 1e4, 4000)
    assert np.all(inequality_rhs(hyp, 1.0, r) <= 0)


def test_find_r0_errors():
    with pytest.raises(PreconditionError):
        find_r0(H(C1=4, C2=0, alpha=2, b=3, l=0.5, c=1, k=0), 1.0, 1e4)
    with pytest.raises(InfeasibleWindowError):
        find_r0(H(C1=4, C2=0, alpha=0, b=1e-6, l=1, c=1, k=0), 1.0, 1e4)
    with pytest.raises(InfeasibleWindowError):
        find_r0(H(C1=4, C2=0, alpha=0, b=1, l=0, c=1, k=0), 1.0, 2.0)


def test_find_r0_respects_floor():
    hyp = H(C1=4, C2=0, alpha=0, b=3, l=1, c=1, k=0)
    assert find_r0(hyp, 1.0, 1e4, r_floor=2.5) >= 2.5


def test_scaling_shift_examples():
    hyp = H(C1=4, C2=0, alpha=0, b=2, l=0, c=1, k=2)
    a, S = scaling_shift(-1.0, hyp)
    assert a == pytest.approx(math.log(2) - 1, rel=1e-14)
    assert S(np.array([3.0]))[0] == pytest.approx(-math.exp(2 * a))

    hyp2 = H(C1=4, C2=0, alpha=0, b=1.5, l=0, c=1.5, k=2, n=2)
    a2, S2 = scaling_shift(lambda r: -1 - r, hyp2)
    assert a2 == pytest.approx(-1.0)
    assert S2(np.array([1.0]))[0] == pytest.approx(math.exp(-1) * -2)

    # second case: b^2 = 4 n^2 sqrt(C3) exactly is excluded
    hyp3 = H(C1=4, C2=0, alpha=0, b=2, l=1, c=1, k=1)
    with pytest.raises(InfeasibleError):
        scaling_shift(-1.0, hyp3)
    with pytest.raises(PreconditionError):
        scaling_shift(-1.0, H(C1=4, C2=0, alpha=0, b=2, l=0, c=1, k=0.5))


def test_shifted_hypotheses_restore_case2():
    # c >= b fails Case2; after the shift the rescaled target satisfies it
    hyp = H(C1=4, C2=0, alpha=0, b=1, l=0, c=2, k=2)
    assert classify(hyp).matched_case is None
    a, _ = scaling_shift(-1.0, hyp)
    assert classify(shifted_hypotheses(hyp, a)).matched_case is Case.CASE2
