"""Level-4 ingestion: a generated artifact enters the scene only as a reviewed transaction.

Every geometric node becomes a frame plus an entity tagged with model
provenance and its uncertainty. Every constraint or contact edge becomes an
assertion whose status reflects the geometric check, backed by a diagnostic
evidence record. The predictor states what the artifact claims about contact;
the auditor re-measures those claims on the realized snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from ..actuators import ActuatorInvocation
from ..effects import EffectClaim
from ..geometry import Pose
from ..graph import (
    COLLECTIONS,
    Assertion,
    EntityNode,
    EvidenceRecord,
    FrameNode,
    ProjectionRecord,
    ProvenanceTag,
    Put,
    SceneSnapshot,
    entity_gap,
)
from ..kernel import AuditResult, Kernel, Runtime, Submission
from .checks import DEFAULT_CHECKERS, EDGE_CHECKERS, Checker, GscReport, edge_as_constraint, gsc, node_boxes
from .model import ConstraintSpec, GeneratedSpatialArtifact

CONTACT_VERIFIER = "check.contact"
# constraint or edge kind -> scene assertion claim
CLAIM_OF = {"contact": "support", "clearance": "clearance", "alignment": "alignment", "containment": "containment"}


def artifact_ref(artifact_id: str) -> str:
    return f"artifact.{artifact_id}"


def entity_id(artifact_id: str, node: str) -> str:
    return f"entity.{artifact_id}.{node}"


def frame_id(artifact_id: str, node: str) -> str:
    return f"frame.{artifact_id}.{node}"


def _claims(artifact: GeneratedSpatialArtifact) -> list[ConstraintSpec]:
    return list(artifact.constraints) + [edge_as_constraint(e) for e in artifact.edges]


def _checker(kind: str, checkers: Mapping[str, Checker]) -> Optional[Checker]:
    return checkers.get(kind) or EDGE_CHECKERS.get(kind)


def _contact_pairs(artifact: GeneratedSpatialArtifact) -> list[tuple[str, str, float]]:
    return sorted({(c.subjects[0], c.subjects[1], c.epsilon) for c in _claims(artifact) if c.kind == "contact"})


# ---------------------------------------------------------------- gate hook


def ingest_gate(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> Optional[tuple[str, str]]:
    ref = inv.arguments.get("artifact")
    artifact = runtime.artifacts.get(ref)
    if artifact is None:
        return ("missing-legal-target", f"no artifact stored under {ref!r}")
    if inv.ingestion_record != artifact.digest:
        return ("missing-verification", "ingestion record does not match the artifact digest")
    unchecked = sorted({c.kind for c in _claims(artifact) if _checker(c.kind, runtime.checkers) is None})
    if unchecked:
        return ("missing-verification", f"no geometric checker for constraint kinds {unchecked}")
    taken = [
        i
        for n in artifact.nodes
        for i in (entity_id(artifact.artifact_id, n.node_id), frame_id(artifact.artifact_id, n.node_id))
        if any(i in snapshot.collection(c) for c in COLLECTIONS)
    ]
    if taken:
        return ("missing-legal-target", f"ids already in the scene: {taken}")
    return None


# ---------------------------------------------------------------- lowering


def lower_ingest(snapshot: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> tuple:
    artifact: GeneratedSpatialArtifact = runtime.artifacts[inv.arguments["artifact"]]
    aid = artifact.artifact_id
    seq = snapshot.max_evidence_seq() + 1
    source = f"ev.model.{aid}"
    muts: list = [
        Put(EvidenceRecord(source, "model-proposal", {"artifact": aid, "digest": artifact.digest}, 0.5, seq)),
    ]
    tag = ProvenanceTag("model", source_ref=source)
    parent_of = {n.node_id: n.parent for n in artifact.nodes}

    def placed(node: str) -> Pose:
        return artifact.geometry_of(node).pose

    # parents first so every frame's parent exists when validated
    order: list[str] = []
    pending = [n.node_id for n in artifact.nodes]
    while pending:
        ready = [n for n in pending if parent_of[n] is None or parent_of[n] in order]
        order += ready
        pending = [n for n in pending if n not in ready]
    nodes = {n.node_id: n for n in artifact.nodes}
    for nid in order:
        node, parent = nodes[nid], parent_of[nid]
        local = placed(parent).inverse().compose(placed(nid)) if parent else placed(nid)
        muts.append(
            Put(
                FrameNode(
                    frame_id(aid, nid),
                    tuple(float(c) for c in local.translation),  # type: ignore[arg-type]
                    tuple(float(c) for c in local.rotation),  # type: ignore[arg-type]
                    frame_id(aid, parent) if parent else None,
                    entity_id(aid, nid),
                    tag,
                )
            )
        )
        muts.append(
            Put(
                EntityNode(
                    entity_id(aid, nid),
                    node.kind,
                    frame_id(aid, nid),
                    artifact.geometry_of(nid).primitive,
                    entity_id(aid, parent) if parent else None,
                    float(artifact.uncertainty.get(nid, 1.0)),
                    tag,
                )
            )
        )
    boxes = node_boxes(artifact)
    for spec in _claims(artifact):
        seq += 1
        value = _checker(spec.kind, runtime.checkers)(spec, boxes)
        ev = f"ev.check.{aid}.{spec.constraint_id}"
        muts.append(Put(EvidenceRecord(ev, "diagnostic", {"constraint": spec.constraint_id, "value": float(value)}, 1.0, seq)))
        muts.append(
            Put(
                Assertion(
                    f"assert.{aid}.{spec.constraint_id}",
                    CLAIM_OF[spec.kind],
                    tuple(entity_id(aid, s) for s in spec.subjects),
                    "supported" if value <= 0.0 else "unresolved",
                    {},
                    (ev,),
                )
            )
        )
    for h in artifact.handles:
        muts.append(Put(ProjectionRecord(f"handle.{aid}.{h.handle_id}", "handle", artifact.digest)))
    return tuple(muts)


# ---------------------------------------------------------------- effects


def predict_claims(snapshot: SceneSnapshot, inv: ActuatorInvocation, muts: tuple, runtime: Runtime) -> list[EffectClaim]:
    artifact = runtime.artifacts[inv.arguments["artifact"]]
    aid = artifact.artifact_id
    return [
        EffectClaim("attachment-flag", (entity_id(aid, a), entity_id(aid, b)), "", None, CONTACT_VERIFIER)
        for a, b, _ in _contact_pairs(artifact)
    ]


def audit_claims(before: SceneSnapshot, after: SceneSnapshot, inv: ActuatorInvocation, runtime: Runtime) -> AuditResult:
    """Re-measure each claimed contact between the realized entities."""
    artifact = runtime.artifacts[inv.arguments["artifact"]]
    aid = artifact.artifact_id
    observed = []
    for a, b, eps in _contact_pairs(artifact):
        ea, eb = entity_id(aid, a), entity_id(aid, b)
        gap = entity_gap(after, ea, eb)
        if gap <= eps:
            observed.append(EffectClaim("attachment-flag", (ea, eb), "", None, CONTACT_VERIFIER))
        else:
            observed.append(EffectClaim("clearance", (ea, eb), "", float(gap), CONTACT_VERIFIER))
    return AuditResult("passed", tuple(observed), f"measured {len(observed)} contacts")


def artifact_runtime(runtime: Optional[Runtime] = None, checkers: Optional[Mapping[str, Checker]] = None) -> Runtime:
    """*runtime* (or a default one) extended with everything ingestion needs."""
    if runtime is None:
        from ..realize import default_runtime

        runtime = default_runtime()
    runtime.lowerers["ingest_artifact"] = lower_ingest
    runtime.predictors["artifact-claims"] = predict_claims
    runtime.auditors["artifact-claims"] = audit_claims
    runtime.gate_hooks["ingest_artifact"] = ingest_gate
    runtime.checkers.update(DEFAULT_CHECKERS if checkers is None else checkers)
    return runtime


@dataclass(frozen=True)
class IngestResult:
    outcome: str
    submission: Submission
    gsc: GscReport


def ingest(artifact: GeneratedSpatialArtifact, kernel: Kernel, txn_id: Optional[str] = None, review: bool = True) -> IngestResult:
    ref = artifact_ref(artifact.artifact_id)
    kernel.runtime.artifacts[ref] = artifact
    inv = ActuatorInvocation(
        invocation_id=f"inv.ingest.{artifact.artifact_id}",
        actuator="ingest_artifact",
        origin="model",
        level=4,
        arguments={"artifact": ref},
        review=review,
        ingestion_record=artifact.digest,
    )
    sub = kernel.run(inv, txn_id=txn_id or f"txn.ingest.{artifact.artifact_id}")
    return IngestResult(sub.outcome, sub, gsc(artifact, kernel.runtime.checkers))

