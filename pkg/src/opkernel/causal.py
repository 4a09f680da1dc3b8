"""Causal views over snapshots, geometric alternatives and scripted policies.

Views are recomputed from a snapshot on demand and hold nothing the snapshot
does not. Policies never see scenario ground truth: they receive a
``hylos-policy/1`` request record and answer with a response record.
"""

from __future__ import annotations

import json
import subprocess
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .actuators import ActuatorSpec, AdmissibleBinding, default_registry, derive_admissible
from .errors import MissingSource, UnknownPolicy, UnknownRef
from .geometry import AXES, rotation_matrix
from .graph import (
    CapabilityGap,
    EvidenceRecord,
    SceneSnapshot,
    anchor_world,
    entities_on_frames,
    entity_box,
    entity_center,
    frame_subtree,
    get_entity,
    get_frame,
    owning_body,
    resolve_ref,
    world_pose,
)

POLICY_FORMAT = "hylos-policy/1"
LATERAL_AXES = ("x", "y")
DEPENDENCY_CLAIMS = ("attachment", "support")

W_EVIDENCE, W_DEPTH, W_ALTERNATIVE = 0.6, 0.3, 0.1


# ---------------------------------------------------------------- views


@dataclass(frozen=True)
class DependencyEdge:
    driver: str
    dependent: str
    via: str

    def to_dict(self) -> dict:
        return {"driver": self.driver, "dependent": self.dependent, "via": self.via}


@dataclass(frozen=True)
class CausalView:
    view_id: str
    variables: tuple[str, ...]
    edges: tuple[DependencyEdge, ...]
    unresolved: tuple[str, ...]
    symptoms: tuple[str, ...]

    def drivers_of(self, ref: str) -> list[DependencyEdge]:
        return [e for e in self.edges if e.dependent == ref]


def build_view(
    snapshot: SceneSnapshot,
    registry: Optional[Mapping[str, ActuatorSpec]] = None,
    candidates=None,
) -> CausalView:
    registry = default_registry() if registry is None else registry
    variables = sorted(
        {ref for b in derive_admissible(snapshot, registry, candidates) if registry[b.actuator].mutating for _, ref in b.binding}
    )
    edges = []
    unresolved, symptoms = [], []
    for aid in sorted(snapshot.assertions):
        a = snapshot.assertions[aid]
        if a.claim in DEPENDENCY_CLAIMS and a.status == "supported":
            edges.append(DependencyEdge(driver=a.subjects[1], dependent=a.subjects[0], via=aid))
        if a.status == "unresolved":
            unresolved.append(aid)
        elif a.status == "violated":
            symptoms.append(aid)
    return CausalView(
        view_id=f"view.{snapshot.snapshot_id}",
        variables=tuple(variables),
        edges=tuple(edges),
        unresolved=tuple(unresolved),
        symptoms=tuple(symptoms),
    )


@dataclass(frozen=True)
class TraceStep:
    driver: str
    path: tuple[DependencyEdge, ...]

    @property
    def depth(self) -> int:
        return len(self.path)


def trace_upstream(snapshot: SceneSnapshot, symptom: str, view: Optional[CausalView] = None) -> list[TraceStep]:
    """Drivers of the symptom's first subject, by path length then id."""
    assertion = snapshot.assertions.get(symptom)
    if assertion is None:
        raise UnknownRef(symptom, "expected an assertion")
    view = view or build_view(snapshot)
    start = assertion.subjects[0]
    best: dict[str, tuple[DependencyEdge, ...]] = {start: ()}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for edge in sorted(view.drivers_of(node), key=lambda e: (e.driver, e.via)):
            if edge.driver not in best:
                best[edge.driver] = best[node] + (edge,)
                queue.append(edge.driver)
    return [TraceStep(d, p) for d, p in sorted(best.items(), key=lambda kv: (len(kv[1]), kv[0]))]


# ---------------------------------------------------------------- alternatives


@dataclass(frozen=True)
class GeometricAlternative:
    alt_id: str
    kind: str  # center-on-parent-body | align-to-reference-anchor
    inputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("center-on-parent-body", "align-to-reference-anchor"):
            raise ValueError(f"unknown alternative kind {self.kind!r}")

    def input_refs(self, snapshot: SceneSnapshot, target: str) -> tuple[str, ...]:
        if self.kind == "align-to-reference-anchor":
            return self.inputs
        owner = get_frame(snapshot, target).owner
        if owner is None or owner not in snapshot.entities:
            return ()
        body = owning_body(snapshot, owner)
        return (body,) if body else ()

    def to_dict(self) -> dict:
        return {"id": self.alt_id, "kind": self.kind, "inputs": list(self.inputs)}


CENTER_ON_PARENT = GeometricAlternative("alt.center_on_parent_body", "center-on-parent-body")


def align_to_anchor(anchor: str) -> GeometricAlternative:
    return GeometricAlternative(f"alt.align_to.{anchor}", "align-to-reference-anchor", (anchor,))


def _local_delta(snapshot: SceneSnapshot, frame_id: str, axis: str, world_shift: float) -> float:
    frame = get_frame(snapshot, frame_id)
    R = rotation_matrix(world_pose(snapshot, frame.parent).rotation) if frame.parent else np.eye(3)
    d = np.zeros(3)
    d[AXES[axis]] = world_shift
    return float((R.T @ d)[AXES[axis]])


def subtree_center(snapshot: SceneSnapshot, frame_id: str) -> Optional[np.ndarray]:
    ents = entities_on_frames(snapshot, frame_subtree(snapshot, frame_id))
    if not ents:
        return None
    boxes = [entity_box(snapshot, e).aabb() for e in ents]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    return (lo + hi) / 2.0


def evaluate_alternative(snapshot: SceneSnapshot, alt: GeometricAlternative, target: str, axis: str = "x") -> Optional[float]:
    """Target translation component the alternative asks for, or None when unsupported."""
    frame = get_frame(snapshot, target)
    i = AXES[axis]
    if alt.kind == "center-on-parent-body":
        inputs = alt.input_refs(snapshot, target)
        if not inputs:
            return None
        c = subtree_center(snapshot, target)
        if c is None:
            return None
        b = entity_center(snapshot, inputs[0])
        return frame.translation[i] + _local_delta(snapshot, target, axis, float(b[i] - c[i]))
    anchor_id = alt.inputs[0] if alt.inputs else None
    if anchor_id is None or anchor_id not in snapshot.anchors:
        return None
    host = resolve_ref(snapshot, snapshot.anchors[anchor_id].host)
    host_frame = host.element.pose_frame if host.kind == "entity" else host.element.id
    if host_frame in frame_subtree(snapshot, target):
        # the anchor would move with the target; alignment is degenerate
        return None
    a = anchor_world(snapshot, anchor_id)
    here = world_pose(snapshot, target).translation
    return frame.translation[i] + _local_delta(snapshot, target, axis, a[i] - here[i])


def candidate_ref(alt_id: str, frame: str, axis: str) -> str:
    return f"cand:{alt_id}:{frame}:{axis}"


@dataclass(frozen=True)
class BackendCandidate:
    ref: str
    alternative: GeometricAlternative
    frame: str
    axis: str
    value: float


class AlternativeLibrary:
    """Reusable geometric alternatives acting as the level-2 candidate generator."""

    def __init__(self, alternatives: Iterable[GeometricAlternative] = (), axes: Sequence[str] = LATERAL_AXES):
        self.alternatives = tuple(sorted(alternatives, key=lambda a: a.alt_id))
        self.axes = tuple(axes)

    def __len__(self) -> int:
        return len(self.alternatives)

    def ids(self) -> list[str]:
        return [a.alt_id for a in self.alternatives]

    def get(self, alt_id: str) -> Optional[GeometricAlternative]:
        return next((a for a in self.alternatives if a.alt_id == alt_id), None)

    def candidates_for(self, snapshot: SceneSnapshot, frame: str) -> list[BackendCandidate]:
        if frame not in snapshot.frames:
            return []
        out = []
        for alt in self.alternatives:
            for axis in self.axes:
                v = evaluate_alternative(snapshot, alt, frame, axis)
                if v is not None:
                    out.append(BackendCandidate(candidate_ref(alt.alt_id, frame, axis), alt, frame, axis, v))
        return out

    def resolve(self, snapshot: SceneSnapshot, ref: str) -> Optional[BackendCandidate]:
        parts = ref.split(":")
        if len(parts) != 4 or parts[0] != "cand":
            return None
        _, alt_id, frame, axis = parts
        alt = self.get(alt_id)
        if alt is None or frame not in snapshot.frames or axis not in self.axes:
            return None
        v = evaluate_alternative(snapshot, alt, frame, axis)
        return None if v is None else BackendCandidate(ref, alt, frame, axis, v)

    def __call__(self, snapshot: SceneSnapshot, spec: ActuatorSpec, binding: tuple) -> list[str]:
        frames = [ref for name, ref in binding if spec.param(name) and spec.param(name).kind == "frame-ref"]
        return [c.ref for f in frames for c in self.candidates_for(snapshot, f)]


# ---------------------------------------------------------------- candidates


@dataclass(frozen=True)
class CandidateInterpretation:
    candidate_id: str
    implicated: tuple[str, ...]
    target: str
    actuator: str
    arguments: Mapping[str, Any]
    depth: int
    alternative: Optional[str] = None
    backend_candidate: Optional[str] = None
    supported: bool = False
    grounded: bool = False
    evidence: tuple[str, ...] = ()
    risk_notes: tuple[str, ...] = ()
    review_triggers: tuple[str, ...] = ()
    score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.candidate_id,
            "implicated": list(self.implicated),
            "target": self.target,
            "actuator": self.actuator,
            "arguments": dict(self.arguments),
            "depth": self.depth,
            "alternative": self.alternative,
            "backend_candidate": self.backend_candidate,
            "supported": self.supported,
            "grounded": self.grounded,
            "evidence": list(self.evidence),
            "risk_notes": list(self.risk_notes),
            "review_triggers": list(self.review_triggers),
            "score": self.score,
        }


def lateral_offsets(snapshot: SceneSnapshot, subject: str, reference: str) -> dict[str, float]:
    c = entity_center(snapshot, subject)
    r = entity_center(snapshot, reference)
    return {ax: float(c[AXES[ax]] - r[AXES[ax]]) for ax in LATERAL_AXES}


def _evidence_mentioning(snapshot: SceneSnapshot, refs: set[str]) -> set[str]:
    out = set()
    for ev in snapshot.evidence.values():
        vals = ev.payload.values()
        if any(isinstance(v, str) and v in refs for v in vals):
            out.add(ev.id)
    return out


def _supporting_evidence(snapshot: SceneSnapshot, symptom: str, step: TraceStep) -> tuple[str, ...]:
    refs = {snapshot.assertions[symptom].subjects[0], step.driver}
    refs.update(e.driver for e in step.path)
    found = set(snapshot.assertions[symptom].evidence)
    for edge in step.path:
        found.update(snapshot.assertions[edge.via].evidence)
    found |= _evidence_mentioning(snapshot, refs)
    return tuple(sorted(found))


def generate_candidates(
    snapshot: SceneSnapshot,
    view: CausalView,
    symptom: str,
    library: Optional[AlternativeLibrary] = None,
    registry: Optional[Mapping[str, ActuatorSpec]] = None,
    tol: float = 1e-3,
) -> list[CandidateInterpretation]:
    """Candidate interpretations for every upstream driver of *symptom*.

    Raw candidates carry a visible-offset nudge and no alternative;
    alternative-backed candidates exist only for admissible level-2 bindings.
    """
    registry = default_registry() if registry is None else registry
    library = library or AlternativeLibrary()
    sym = snapshot.assertions[symptom]
    subject = sym.subjects[0]
    reference = sym.subjects[1] if len(sym.subjects) > 1 else None
    if reference is None or subject not in snapshot.entities or reference not in snapshot.entities:
        return []
    offsets = lateral_offsets(snapshot, subject, reference)
    axes = [ax for ax in LATERAL_AXES if abs(offsets[ax]) > tol]
    admissible = {(b.actuator, b.binding): b for b in derive_admissible(snapshot, registry, library)}
    steps = trace_upstream(snapshot, symptom, view)
    # refs an alternative may lean on: the symptom's subjects and anything evidence names
    grounding = set(sym.subjects) | {
        v for ev in snapshot.evidence.values() for v in ev.payload.values() if isinstance(v, str)
    }

    out: list[CandidateInterpretation] = []
    for step in steps:
        kind = resolve_ref(snapshot, step.driver).kind
        evidence = _supporting_evidence(snapshot, symptom, step)
        frame = get_entity(snapshot, step.driver).pose_frame if kind == "entity" else step.driver if kind == "frame" else None
        implicated = tuple(sorted({subject, reference} | ({step.driver} if kind == "entity" else set())))
        for axis in axes:
            if kind == "entity" and "move_entity" in registry:
                out.append(
                    CandidateInterpretation(
                        candidate_id=f"c.move.{step.driver}.{axis}",
                        implicated=implicated,
                        target=frame,
                        actuator="move_entity",
                        arguments={"entity": step.driver, "axis": axis, "delta": -offsets[axis]},
                        depth=step.depth,
                        evidence=evidence,
                        risk_notes=("raw numeric nudge of the visible component",),
                        review_triggers=("unsupported-value",),
                    )
                )
            if frame is None or "set_frame_offset" not in registry:
                continue
            current = get_frame(snapshot, frame).translation[AXES[axis]]
            out.append(
                CandidateInterpretation(
                    candidate_id=f"c.raw.{frame}.{axis}",
                    implicated=implicated,
                    target=frame,
                    actuator="set_frame_offset",
                    arguments={"frame": frame, "axis": axis, "value": current - offsets[axis]},
                    depth=step.depth,
                    evidence=evidence,
                    risk_notes=("value not backed by a geometric alternative",),
                    review_triggers=("unsupported-value",),
                )
            )
            adm = admissible.get(("set_frame_offset", (("frame", frame),)))
            if adm is None:
                continue
            for bc in library.candidates_for(snapshot, frame):
                if bc.axis != axis or bc.ref not in adm.candidates:
                    continue
                out.append(
                    CandidateInterpretation(
                        candidate_id=f"c.alt.{frame}.{axis}.{bc.alternative.alt_id}",
                        implicated=implicated,
                        target=frame,
                        actuator="set_frame_offset",
                        arguments={"frame": frame, "axis": axis, "value": bc.value},
                        depth=step.depth,
                        alternative=bc.alternative.alt_id,
                        backend_candidate=bc.ref,
                        supported=True,
                        grounded=bool(set(bc.alternative.input_refs(snapshot, frame)) & grounding),
                        evidence=evidence,
                        review_triggers=() if evidence else ("missing-evidence",),
                    )
                )
    return score_candidates(out)


def score_candidates(candidates: Sequence[CandidateInterpretation]) -> list[CandidateInterpretation]:
    """Attach scores and sort by score descending, then candidate id.

    The alternative bonus needs an alternative that both evaluates and leans
    on refs the symptom or the evidence actually names.
    """
    if not candidates:
        return []
    max_depth = max(c.depth for c in candidates)
    scored = []
    for c in candidates:
        n = len(c.evidence)
        e = n / (n + 1.0)
        d = c.depth / max_depth if max_depth else 0.0
        a = 1.0 if c.supported and c.grounded else 0.0
        s = round(W_EVIDENCE * e + W_DEPTH * d + W_ALTERNATIVE * a, 12)
        scored.append(_with(c, score=s))
    return sorted(scored, key=lambda c: (-c.score, c.candidate_id))


def _with(c: CandidateInterpretation, **kw) -> CandidateInterpretation:
    d = {f: getattr(c, f) for f in c.__dataclass_fields__}
    d.update(kw)
    return CandidateInterpretation(**d)


# ---------------------------------------------------------------- policy protocol


def build_request(
    snapshot: SceneSnapshot,
    view: CausalView,
    instruction: Mapping[str, Any],
    candidates: Sequence[CandidateInterpretation],
    legal_targets: Sequence[AdmissibleBinding] = (),
    task_id: str = "",
) -> dict:
    """Policy-visible exposure record. Only snapshot-derived facts go in."""
    symptoms = []
    for sid in view.symptoms:
        a = snapshot.assertions[sid]
        fact: dict[str, Any] = {"assertion": sid, "claim": a.claim, "subjects": list(a.subjects)}
        if a.claim == "alignment" and all(s in snapshot.entities for s in a.subjects):
            fact["visible_offset"] = lateral_offsets(snapshot, a.subjects[0], a.subjects[1])
        symptoms.append(fact)
    return {
        "format": POLICY_FORMAT,
        "type": "request",
        "task": task_id,
        "instruction": {k: instruction[k] for k in sorted(instruction) if k in ("text", "hint")},
        "facts": {
            "snapshot": snapshot.snapshot_id,
            "symptoms": symptoms,
            "edges": [e.to_dict() for e in view.edges],
            "unresolved": list(view.unresolved),
            "evidence": sorted(snapshot.evidence),
        },
        "legal_targets": [{"actuator": b.actuator, "binding": [list(p) for p in b.binding]} for b in legal_targets],
        "candidates": [c.to_dict() for c in candidates],
    }


def response(select: Optional[str], ranking: Sequence[str], reason: str = "") -> dict:
    return {
        "format": POLICY_FORMAT,
        "type": "response",
        "select": select,
        "defer": select is None,
        "ranking": list(ranking),
        "reason": reason,
    }


class ScriptedPolicy:
    policy_id = ""
    contract_bounded = False

    def decide(self, request: Mapping[str, Any]) -> dict:
        raise NotImplementedError


class DirectEditPolicy(ScriptedPolicy):
    """Moves the visible symptom directly by its visible offset."""

    policy_id = "direct-edit"

    def decide(self, request):
        cands = [c for c in request["candidates"] if c["actuator"] == "move_entity" and c["depth"] == 0]
        ranking = [c["id"] for c in cands]
        if not cands:
            return response(None, ranking, "no visible component to move")
        return response(cands[0]["id"], ranking, "edit the visible component")


class PromptHeuristicPolicy(ScriptedPolicy):
    """Follows the placement hint carried in the instruction prose."""

    policy_id = "prompt-heuristic"

    def decide(self, request):
        hint = str(request["instruction"].get("hint", "")).lower()
        cands = [c for c in request["candidates"] if c["actuator"] == "move_entity" and c["depth"] == 0]
        ranking = [c["id"] for c in cands]
        if not cands or "center" not in hint:
            return response(None, ranking, "hint gives no usable placement")
        return response(cands[0]["id"], ranking, f"hint: {hint}")


class StructureOnlyPolicy(ScriptedPolicy):
    """Finds the nearest upstream frame driver but proposes a raw numeric value."""

    policy_id = "structure-only"

    def decide(self, request):
        cands = [c for c in request["candidates"] if c["actuator"] == "set_frame_offset" and c["alternative"] is None]
        cands.sort(key=lambda c: (c["depth"] == 0, c["depth"], c["id"]))
        ranking = [c["id"] for c in cands]
        if not cands:
            return response(None, ranking, "no frame driver")
        return response(cands[0]["id"], ranking, "nearest upstream frame driver")


class ContractBoundedPolicy(ScriptedPolicy):
    """Acts only through alternative-backed candidates; defers otherwise."""

    policy_id = "contract-bounded"
    contract_bounded = True

    def decide(self, request):
        cands = [c for c in request["candidates"] if c["alternative"] is not None]
        ranking = [c["id"] for c in cands]  # arrives sorted by score
        if not request["facts"]["symptoms"]:
            return response(None, ranking, "no symptom to repair")
        if not cands:
            return response(None, ranking, "no supported geometric alternative")
        top = cands[0]
        if not top["evidence"]:
            return response(None, ranking, "top candidate lacks supporting evidence")
        if not top["supported"]:
            return response(None, ranking, "top candidate's alternative is unsupported")
        return response(top["id"], ranking, "supported upstream interaction")


class AcquisitionPolicy(ContractBoundedPolicy):
    policy_id = "contract-bounded+acquisition"
    acquires = True


class AlternativesPolicy(ContractBoundedPolicy):
    policy_id = "contract-bounded+alternatives"
    acquires = True


POLICIES: dict[str, type[ScriptedPolicy]] = {
    p.policy_id: p
    for p in (DirectEditPolicy, PromptHeuristicPolicy, StructureOnlyPolicy, ContractBoundedPolicy, AcquisitionPolicy, AlternativesPolicy)
}


def get_policy(policy_id: str) -> ScriptedPolicy:
    if policy_id.startswith("external:"):
        return ExternalPolicy(policy_id.split(":", 1)[1])
    cls = POLICIES.get(policy_id)
    if cls is None:
        raise UnknownPolicy(policy_id)
    return cls()


class ExternalPolicy(ScriptedPolicy):
    """Newline-delimited JSON request/response over a child process's stdio."""

    contract_bounded = True

    def __init__(self, command: str):
        self.policy_id = f"external:{command}"
        self.command = command
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        return self._proc

    def decide(self, request):
        proc = self._ensure()
        proc.stdin.write(json.dumps(request, sort_keys=True) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise RuntimeError(f"external policy {self.command!r} closed its output")
        resp = json.loads(line)
        if resp.get("type") != "response":
            raise ValueError("external policy answered with a non-response record")
        return response(resp.get("select"), resp.get("ranking", ()), resp.get("reason", ""))

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None


@dataclass(frozen=True)
class Ranking:
    candidates: tuple[CandidateInterpretation, ...]
    decision: str  # select | defer
    selected: Optional[CandidateInterpretation]
    reason: str
    request: Mapping[str, Any] = field(default_factory=dict, compare=False)
    response: Mapping[str, Any] = field(default_factory=dict, compare=False)


def rank_candidates(
    snapshot: SceneSnapshot,
    view: CausalView,
    instruction: Mapping[str, Any],
    policy: "str | ScriptedPolicy",
    library: Optional[AlternativeLibrary] = None,
    registry: Optional[Mapping[str, ActuatorSpec]] = None,
    task_id: str = "",
    tol: float = 1e-3,
) -> Ranking:
    pol = get_policy(policy) if isinstance(policy, str) else policy
    registry = default_registry() if registry is None else registry
    library = library or AlternativeLibrary()
    cands: list[CandidateInterpretation] = []
    if view.symptoms:
        cands = generate_candidates(snapshot, view, view.symptoms[0], library, registry, tol)
    legal = derive_admissible(snapshot, registry, library)
    req = build_request(snapshot, view, instruction, cands, legal, task_id)
    resp = pol.decide(req)
    by_id = {c.candidate_id: c for c in cands}
    order = [by_id[i] for i in resp["ranking"] if i in by_id]
    selected = by_id.get(resp["select"]) if resp["select"] else None
    return Ranking(
        candidates=tuple(order),
        decision="select" if selected else "defer",
        selected=selected,
        reason=resp.get("reason", ""),
        request=req,
        response=resp,
    )


# ---------------------------------------------------------------- acquisition


@dataclass(frozen=True)
class ProbeSpec:
    probe_id: str
    source: str
    subject: str
    reference: str
    kind: str = "lateral-offset"

    def to_dict(self) -> dict:
        return {"id": self.probe_id, "source": self.source, "subject": self.subject, "reference": self.reference, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProbeSpec":
        return cls(d["id"], d["source"], d["subject"], d["reference"], d.get("kind", "lateral-offset"))


def acquire_diagnostic(
    snapshot: SceneSnapshot,
    probe: ProbeSpec,
    sources: Iterable[str],
    sigma: float = 0.0,
    seed: int = 0,
    evidence_id: Optional[str] = None,
) -> list[EvidenceRecord]:
    """Measure the probe's lateral offset from the snapshot poses (plus seeded noise).

    Returns new evidence records only; the snapshot is not modified.
    """
    if probe.source not in set(sources):
        raise MissingSource(f"no registered observation source {probe.source!r}")
    offsets = lateral_offsets(snapshot, probe.subject, probe.reference)
    if sigma > 0.0:
        noise = np.random.default_rng(seed).normal(0.0, sigma, size=len(LATERAL_AXES))
        offsets = {ax: offsets[ax] + float(n) for ax, n in zip(LATERAL_AXES, noise)}
    payload = {
        "probe": probe.probe_id,
        "kind": probe.kind,
        "subject": probe.subject,
        "reference": probe.reference,
        **{f"offset_{ax}": offsets[ax] for ax in LATERAL_AXES},
    }
    return [
        EvidenceRecord(
            evidence_id=evidence_id or f"ev.diag.{probe.probe_id}",
            source="diagnostic",
            payload=payload,
            confidence=0.9,
            seq=snapshot.max_evidence_seq() + 1,
        )
    ]


def acquisition_gap(probe: ProbeSpec, txn_id: str = "", detail: str = "") -> CapabilityGap:
    """The typed gap recorded when a probe's observation source is not registered."""
    return CapabilityGap(
        f"gap.acquire.{probe.probe_id}",
        "missing-value-acquisition",
        txn_id,
        detail or f"no registered observation source {probe.source!r}",
    )
