import pytest
from hypothesis import given, strategies as st

from opkernel.effects import (
    DIFF_STATUSES,
    EffectClaim,
    EffectDiff,
    Tolerances,
    assign_status,
    compute_diff,
    effects_equivalent,
)

from oracles import brute_force_diff

TRAY, BODY = "entity.tray", "entity.body"


def lat(q, verifier="v.pose", axis="x"):
    return EffectClaim("lateral-offset", (TRAY, BODY), axis, q, verifier)


def test_equivalence_examples():
    assert effects_equivalent(lat(0.0), lat(0.0004), Tolerances(0.001))
    assert not effects_equivalent(lat(0.0), lat(0.0004), Tolerances(0.0001))
    vert = EffectClaim("vertical-offset", (TRAY, BODY), "x", 0.0, "v.pose")
    assert not effects_equivalent(lat(0.0), vert)


def test_claim_construction_rules():
    with pytest.raises(ValueError):
        EffectClaim("attachment-flag", (TRAY,), quantity=1.0)
    with pytest.raises(ValueError):
        EffectClaim("clearance", (TRAY, BODY), quantity=float("inf"))
    with pytest.raises(ValueError):
        EffectClaim("lateral-offset", (TRAY, BODY))
    a = EffectClaim("clearance", (TRAY, BODY), quantity=0.01)
    b = EffectClaim("clearance", (BODY, TRAY), quantity=0.01)
    assert a == b and effects_equivalent(a, b)
    assert EffectClaim.from_dict(a.to_dict()) == a


def test_diff_examples():
    empty = compute_diff((), ())
    assert empty.status == "matched" and not (empty.matched or empty.unexpected or empty.unchecked or empty.missed)

    rot = EffectClaim("rotation-delta", (TRAY,), "z", 0.1, "v.pose")
    diff = compute_diff([lat(0.0)], [lat(0.0002), rot], Tolerances(0.001))
    assert diff.matched == (lat(0.0),) and diff.unexpected == (rot,) and diff.status == "review"
    assert diff.pairs == ((lat(0.0), lat(0.0002)),)

    clr = EffectClaim("clearance", (TRAY, BODY), quantity=0.005)
    diff = compute_diff([clr], [])
    assert diff.unchecked == (clr,) and diff.status == "review"


def test_missed_claims():
    diff = compute_diff([lat(0.0)], [lat(0.01)])
    assert diff.missed == (lat(0.0),) and diff.unexpected == (lat(0.01),)


def test_status_examples():
    perfect = compute_diff([lat(0.0)], [lat(0.0)])
    assert assign_status(perfect, [True, False], "passed") == "violated"
    assert assign_status(EffectDiff(), [], "absent") == "unchecked"
    one_extra = compute_diff([], [lat(0.002)])
    assert assign_status(one_extra, [True], "passed") == "review"
    assert assign_status(perfect, [True], "passed") == "matched"


def test_diff_round_trip():
    diff = compute_diff([lat(0.0), EffectClaim("attachment-flag", (TRAY, "frame.recv"))], [lat(0.0003)])
    again = EffectDiff.from_dict(diff.to_dict())
    assert again == diff


KINDS = ("lateral-offset", "vertical-offset", "rotation-delta", "clearance", "containment-flag", "attachment-flag")


@st.composite
def claims(draw):
    kind = draw(st.sampled_from(KINDS))
    subjects = tuple(draw(st.permutations([TRAY, BODY])))
    axis = draw(st.sampled_from(["", "x"]))
    q = None if kind.endswith("flag") else draw(st.sampled_from([0.0, 0.0005, 0.001, 0.0015, 0.003, -0.001]))
    verifier = draw(st.sampled_from([None, "v.pose"]))
    return EffectClaim(kind, subjects, axis, q, verifier)


claim_sets = st.lists(claims(), max_size=8)
tolerances = st.builds(Tolerances, st.sampled_from([1e-4, 1e-3, 2e-3]), st.sampled_from([1e-4, 1e-3]))


@given(claims(), claims(), tolerances)
def test_equivalence_is_symmetric(a, b, tol):
    assert effects_equivalent(a, b, tol) == effects_equivalent(b, a, tol)


@given(claim_sets, claim_sets, tolerances, st.floats(1.0, 10.0))
def test_larger_tolerance_never_loses_matches(pred, obs, tol, factor):
    small = compute_diff(pred, obs, tol)
    big = compute_diff(pred, obs, tol.scaled(factor))
    assert set(small.matched) <= set(big.matched)


@given(claim_sets, claim_sets, tolerances)
def test_diff_matches_brute_force(pred, obs, tol):
    diff = compute_diff(pred, obs, tol)
    ref = brute_force_diff(pred, obs, tol.length, tol.angle)
    for key in ("matched", "missed", "unchecked", "unexpected"):
        assert set(getattr(diff, key)) == ref[key]
    assert diff.status == ref["status"]
    # matched, missed and unchecked partition the predicted claims
    assert set(diff.matched) | set(diff.missed) | set(diff.unchecked) == set(pred)
    assert len(diff.matched) + len(diff.missed) + len(diff.unchecked) == len(set(pred))


@given(claim_sets, claim_sets, st.lists(st.booleans(), max_size=3), st.sampled_from(["passed", "failed", "absent"]))
def test_every_diff_gets_one_status(pred, obs, invariants, audit):
    status = assign_status(compute_diff(pred, obs), invariants, audit)
    assert status in DIFF_STATUSES
