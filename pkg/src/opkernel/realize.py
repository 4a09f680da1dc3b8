"""Lowerers, effect predictors, the pose auditor and the default runtime."""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from . import _canon
from .actuators import ActuatorInvocation
from .causal import AlternativeLibrary, trace_upstream
from .effects import EffectClaim, Tolerances
from .geometry import AXES, quat_angle, quat_conj, quat_mul, rotation_matrix
from .graph import (
    EvidenceRecord,
    InvariantResult,
    ProjectionRecord,
    Put,
    SceneSnapshot,
    SetField,
    check_all,
    entities_on_frames,
    entity_center,
    frame_subtree,
    get_entity,
    get_frame,
    owning_body,
    snapshot_commit,
    world_pose,
)
from .kernel import AuditResult, Runtime

POSE_VERIFIER = "audit.pose"
LATERAL = ("x", "y")


# ---------------------------------------------------------------- lowerers


def lower_set_frame_offset(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    a = inv.arguments
    return (SetField(a["frame"], f"translation.{a['axis']}", float(a["value"])),)


def lower_move_entity(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    a = inv.arguments
    frame = get_frame(snapshot, get_entity(snapshot, a["entity"]).pose_frame)
    current = frame.translation[AXES[a["axis"]]]
    return (SetField(frame.id, f"translation.{a['axis']}", current + float(a["delta"])),)


def lower_record_evidence(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    rec = EvidenceRecord.from_dict(inv.arguments["record"])
    return (Put(rec),)


def lower_highlight(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    return ()


def lower_author_mark(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    mark = inv.arguments["mark"]
    return (Put(ProjectionRecord(f"mark.{mark['id']}", "mark", _canon.digest(mark))),)


# ---------------------------------------------------------------- effects


def _offset(snapshot: SceneSnapshot, entity: str, body: str) -> np.ndarray:
    return entity_center(snapshot, entity) - entity_center(snapshot, body)


def _emit(entity: str, body: str, before: np.ndarray, after: np.ndarray, rot: float, tol: Tolerances) -> list[EffectClaim]:
    out = []
    for ax in LATERAL:
        i = AXES[ax]
        if abs(after[i]) > tol.length or abs(after[i] - before[i]) > tol.length:
            out.append(EffectClaim("lateral-offset", (entity, body), ax, float(after[i]), POSE_VERIFIER))
    if abs(after[2] - before[2]) > tol.length:
        out.append(EffectClaim("vertical-offset", (entity, body), "z", float(after[2]), POSE_VERIFIER))
    if rot > tol.angle:
        out.append(EffectClaim("rotation-delta", (entity,), "", float(rot), POSE_VERIFIER))
    return out


def watched_entities(before: SceneSnapshot, changed: Iterable[str]) -> list[str]:
    """Changed entities plus every entity implicated by an open alignment claim and its drivers."""
    watch = set(changed)
    for a in before.assertions.values():
        if a.claim != "alignment" or a.status == "supported":
            continue
        for step in trace_upstream(before, a.id):
            if step.driver in before.entities:
                watch.add(step.driver)
            elif step.driver in before.frames:
                watch.update(entities_on_frames(before, [step.driver]))
        watch.update(s for s in a.subjects if s in before.entities)
    return sorted(watch)


def audit_pose(before: SceneSnapshot, after: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> AuditResult:
    """Observe offsets of watched entities relative to their owning bodies on the realized snapshot."""
    changed = []
    for eid in sorted(after.entities):
        if eid not in before.entities:
            changed.append(eid)
            continue
        pa = world_pose(after, after.entities[eid].pose_frame)
        pb = world_pose(before, before.entities[eid].pose_frame)
        if np.max(np.abs(np.subtract(pa.translation, pb.translation))) > 1e-12 or quat_angle(quat_mul(quat_conj(pb.rotation), pa.rotation)) > 1e-12:
            changed.append(eid)
    observed: list[EffectClaim] = []
    for eid in watched_entities(before, changed):
        if eid not in after.entities or eid not in before.entities:
            continue
        body = owning_body(after, eid)
        if body is None:
            continue
        pa = world_pose(after, after.entities[eid].pose_frame).rotation
        pb = world_pose(before, before.entities[eid].pose_frame).rotation
        rot = quat_angle(quat_mul(quat_conj(pb), pa))
        observed += _emit(eid, body, _offset(before, eid, body), _offset(after, eid, body), rot, runtime.tolerances)
    return AuditResult("passed", tuple(observed), f"watched {len(observed)} effects")


def _predict_shift(snapshot: SceneSnapshot, frame_id: str, axis: str, new_value: float, runtime: Runtime) -> list[EffectClaim]:
    frame = get_frame(snapshot, frame_id)
    i = AXES[axis]
    local = np.zeros(3)
    local[i] = new_value - frame.translation[i]
    R = rotation_matrix(world_pose(snapshot, frame.parent).rotation) if frame.parent else np.eye(3)
    shift = R @ local
    moved = set(entities_on_frames(snapshot, frame_subtree(snapshot, frame_id)))
    out: list[EffectClaim] = []
    for eid in sorted(moved):
        body = owning_body(snapshot, eid)
        if body is None:
            continue
        before = _offset(snapshot, eid, body)
        after = before if body in moved else before + shift
        out += _emit(eid, body, before, after, 0.0, runtime.tolerances)
    return out


def predict_shift_subtree(snapshot: SceneSnapshot, inv: ActuatorInvocation, muts: tuple, runtime: Runtime) -> list[EffectClaim]:
    a = inv.arguments
    return _predict_shift(snapshot, a["frame"], a["axis"], float(a["value"]), runtime)


def predict_shift_entity(snapshot: SceneSnapshot, inv: ActuatorInvocation, muts: tuple, runtime: Runtime) -> list[EffectClaim]:
    a = inv.arguments
    frame = get_frame(snapshot, get_entity(snapshot, a["entity"]).pose_frame)
    return _predict_shift(snapshot, frame.id, a["axis"], frame.translation[AXES[a["axis"]]] + float(a["delta"]), runtime)


def audit_presentation(before: SceneSnapshot, after: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> AuditResult:
    """Presentation actions may add evidence or projections, never touch geometry or claims."""
    for name in ("entities", "frames", "anchors", "assertions", "protected_invariants"):
        if dict(before.collection(name)) != dict(after.collection(name)):
            return AuditResult("failed", (), f"presentation action changed {name}")
    return AuditResult("passed", (), "no geometric effect")


# ---------------------------------------------------------------- validators


def validate_protected(snapshot: SceneSnapshot) -> InvariantResult:
    bad = [(i, r) for i, r in check_all(snapshot, snapshot.protected_invariants.values()) if not r]
    if bad:
        return InvariantResult(False, "; ".join(f"{i}: {r.detail}" for i, r in bad))
    return InvariantResult(True)


# ---------------------------------------------------------------- runtime


def default_runtime(
    alternatives: Optional[AlternativeLibrary] = None,
    tolerances: Optional[Tolerances] = None,
    **extra,
) -> Runtime:
    rt = Runtime(
        lowerers={
            "set_frame_offset": lower_set_frame_offset,
            "move_entity": lower_move_entity,
            "record_evidence": lower_record_evidence,
            "highlight": lower_highlight,
            "author_mark": lower_author_mark,
        },
        predictors={"shift-subtree": predict_shift_subtree, "shift-entity": predict_shift_entity},
        auditors={
            "shift-subtree": audit_pose,
            "shift-entity": audit_pose,
            "record_evidence": audit_presentation,
            "highlight": audit_presentation,
        },
        validators={"val.protected": validate_protected},
        alternatives=alternatives or AlternativeLibrary(),
        tolerances=tolerances or Tolerances(),
        **extra,
    )
    return rt


def faulty_realizer(extra: tuple):
    """Realizer that applies *extra* mutations after the lowered ones (fault injection)."""

    def realize(snapshot: SceneSnapshot, mutations: tuple) -> SceneSnapshot:
        return snapshot_commit(snapshot, tuple(mutations) + tuple(extra))

    return realize

