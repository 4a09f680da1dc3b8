from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from opkernel.actuators import (
    ActuatorInvocation,
    SpatialMark,
    default_registry,
    derive_admissible,
    dumps_registry,
    gate_check,
    loads_registry,
    normalize_mark,
    refs_of_kind,
)
from opkernel.causal import CENTER_ON_PARENT, AlternativeLibrary
from opkernel.errors import SchemaMismatch, UnknownRef
from opkernel.graph import empty_snapshot
from opkernel.scenes import BODY, TRAY, repair_scene

SCENE = repair_scene("x", 0.01)
LIBRARY = AlternativeLibrary((CENTER_ON_PARENT,))


def _inv(actuator, level, args, **kw):
    return ActuatorInvocation("inv.t", actuator, kw.pop("origin", "model"), level, args, **kw)


def test_derive_admissible_examples():
    out = derive_admissible(SCENE, default_registry(), LIBRARY)
    frames = [dict(b.binding)["frame"] for b in out if b.actuator == "set_frame_offset"]
    assert "frame.recv" in frames
    recv = next(b for b in out if b.actuator == "set_frame_offset" and dict(b.binding)["frame"] == "frame.recv")
    assert recv.candidates == ("cand:alt.center_on_parent_body:frame.recv:x", "cand:alt.center_on_parent_body:frame.recv:y")

    assert derive_admissible(empty_snapshot(), default_registry(), LIBRARY) == []
    # no candidate source: the level-2 actuator drops out entirely
    bare = derive_admissible(SCENE, default_registry())
    assert not any(b.actuator == "set_frame_offset" for b in bare)


def test_derive_admissible_is_exhaustive_and_sorted():
    out = derive_admissible(SCENE, default_registry(), LIBRARY)
    keys = [(b.actuator, b.binding) for b in out]
    assert keys == sorted(keys)
    moves = {dict(b.binding)["entity"] for b in out if b.actuator == "move_entity"}
    assert moves == set(refs_of_kind(SCENE, "entity-ref"))


def test_gate_examples():
    assert gate_check(_inv("highlight", 0, {"target": TRAY}, origin="human"), SCENE)
    gated = gate_check(_inv("author_mark", 3, {"mark": {}}, review=True), SCENE)
    assert not gated and gated.reason == "missing evidence" and gated.gap == "missing-measurement"
    cand = "cand:alt.center_on_parent_body:frame.recv:x"
    assert gate_check(_inv("set_frame_offset", 2, {"frame": "frame.recv", "axis": "x", "value": 0.0}, backend_candidate=cand), SCENE)


def test_gate_level_rules():
    move = {"entity": TRAY, "axis": "x", "delta": 0.001}
    assert gate_check(_inv("move_entity", 1, move), SCENE).gap == "missing-verification"
    assert gate_check(_inv("move_entity", 1, move, review=True), SCENE)
    assert gate_check(_inv("move_entity", 1, move, validators=("val.protected",)), SCENE)
    # claimed level above the minimum raises the bar
    assert gate_check(_inv("move_entity", 3, move, review=True), SCENE).gap == "missing-measurement"
    assert gate_check(_inv("move_entity", 3, move, evidence=("ev.user.report",)), SCENE).gap == "missing-verification"
    art = {"artifact": "art.1"}
    assert gate_check(_inv("ingest_artifact", 4, art, review=True), SCENE).gap == "missing-verification"
    assert gate_check(_inv("ingest_artifact", 4, art, ingestion_record="ing.1", review=True), SCENE)


def test_gate_schema_errors():
    with pytest.raises(SchemaMismatch):
        gate_check(_inv("move_entity", 1, {"entity": TRAY, "axis": "w", "delta": 0.0}, review=True), SCENE)
    with pytest.raises(SchemaMismatch):
        gate_check(_inv("move_entity", 1, {"entity": TRAY, "axis": "x"}, review=True), SCENE)
    with pytest.raises(SchemaMismatch):
        gate_check(_inv("teleport", 1, {}), SCENE)


def test_normalize_mark_examples():
    human = SpatialMark("mark.h", "region", ((0.0, 0.0, 0.1), (0.1, 0.0, 0.1)), "inspection-concern", anchor="anchor.body_top")
    draft = normalize_mark(human, SCENE)
    assert draft.level == 1 and draft.arguments["anchor"] == "anchor.body_top" and draft.actuator == "author_mark"

    model = SpatialMark(
        "mark.m", "region", ((0.0, 0.0, 0.0),), "blocked-zone", origin="model", evidence=("ev.cad.import", "ev.user.report")
    )
    draft = normalize_mark(model, SCENE)
    assert draft.level == 3 and draft.evidence == ("ev.cad.import", "ev.user.report")

    with pytest.raises(ValueError):
        SpatialMark("mark.e", "point", (), "uncertainty-area")
    with pytest.raises(UnknownRef):
        normalize_mark(replace(human, anchor="anchor.nowhere"), SCENE)
    with pytest.raises(ValueError):
        normalize_mark(replace(human, samples=((float("nan"), 0.0, 0.0),)), SCENE)


def test_registry_round_trip():
    text = dumps_registry(default_registry())
    assert dumps_registry(loads_registry(text)) == text


supports = st.fixed_dictionaries(
    {
        "review": st.booleans(),
        "validators": st.sampled_from([(), ("val.protected",)]),
        "evidence": st.sampled_from([(), ("ev.user.report",), ("ev.user.report", "ev.cad.import")]),
        "backend_candidate": st.sampled_from([None, "cand:alt.center_on_parent_body:frame.recv:x"]),
        "ingestion_record": st.sampled_from([None, "ing.1"]),
    }
)
CASES = [
    ("highlight", {"target": TRAY}),
    ("move_entity", {"entity": TRAY, "axis": "x", "delta": 0.001}),
    ("set_frame_offset", {"frame": "frame.recv", "axis": "x", "value": 0.0}),
    ("ingest_artifact", {"artifact": "art.1"}),
]


def _superset(small, big):
    return (
        (big["review"] or not small["review"])
        and set(small["validators"]) <= set(big["validators"])
        and set(small["evidence"]) <= set(big["evidence"])
        and (big["backend_candidate"] or not small["backend_candidate"])
        and (big["ingestion_record"] or not small["ingestion_record"])
    )


@given(st.sampled_from(CASES), st.integers(0, 4), supports, supports)
def test_gate_is_monotone_in_supports(case, level, s1, s2):
    actuator, args = case
    small, big = (s1, s2) if _superset(s1, s2) else (s2, s1) if _superset(s2, s1) else (None, None)
    if small is None:
        return
    if gate_check(_inv(actuator, level, args, **small), SCENE):
        assert gate_check(_inv(actuator, level, args, **big), SCENE)


@given(st.sampled_from(CASES), st.integers(0, 4), supports, st.sampled_from(["human", "model", "backend", "import"]))
def test_gate_and_marks_leave_snapshot_alone(case, level, sup, origin):
    digest = SCENE.digest
    gate_check(_inv(case[0], level, case[1], origin=origin, **sup), SCENE)
    normalize_mark(SpatialMark("mark.p", "point", ((0.0, 0.0, 0.0),), "access-route", origin=origin), SCENE)
    assert SCENE.digest == digest


@given(st.sampled_from(["x", "y"]), st.floats(-0.05, 0.05))
def test_admissible_set_ignores_who_asks(axis, delta):
    snap = repair_scene(axis, delta)
    a = derive_admissible(snap, default_registry(), LIBRARY)
    b = derive_admissible(snap, default_registry(), LIBRARY)
    assert a == b
    # a human and a model invocation of the same binding get the same verdict
    for binding in a:
        args = dict(binding.binding)
        spec = default_registry()[binding.actuator]
        if any(p.kind not in ("entity-ref", "frame-ref", "any-ref") for p in spec.params):
            continue
        human = gate_check(_inv(binding.actuator, spec.level, args, origin="human", review=True), snap)
        model = gate_check(_inv(binding.actuator, spec.level, args, origin="model", review=True), snap)
        assert human == model
