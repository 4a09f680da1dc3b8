"""Scene operability state: typed elements, immutable snapshots, mutations.

A :class:`SceneSnapshot` is a persistent value. :func:`snapshot_commit` never
touches its input; it copies the id->element maps (elements themselves are
frozen and shared) and returns a new snapshot whose parent link points back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Union

import numpy as np

from . import _canon
from .errors import CyclicFrames, InvariantBreakingStructure, SceneFormatError, UnknownRef
from .geometry import (
    AXES,
    IDENTITY_Q,
    OrientedBox,
    Pose,
    Primitive,
    Quat,
    Vec3,
    aabb_gap,
    obb_penetration,
    primitive_from_dict,
    quat_norm,
    validate_primitive,
    world_box,
)

SCENE_FORMAT = "hylos-scene/1"

ORIGINS = ("human", "model", "backend", "import", "derived")
ENTITY_KINDS = ("body", "assembly", "component", "tray", "region", "boundary")
ANCHOR_KINDS = ("surface", "opening", "reference")
CLAIM_ARITY = {
    "support": (2,),
    "attachment": (2,),
    "alignment": (2,),
    "clearance": (2,),
    "containment": (2,),
    "obstruction": (2,),
    "occlusion": (2,),
    "access": (1, 2),
}
ASSERTION_STATUS = ("supported", "unresolved", "violated")
EVIDENCE_SOURCES = ("measurement", "user-declaration", "sensor", "model-proposal", "import", "diagnostic")
GAP_KINDS = (
    "missing-measurement",
    "missing-legal-target",
    "missing-value-acquisition",
    "missing-candidate",
    "missing-lowerer",
    "missing-backend-operation",
    "missing-verification",
)
PREDICATES = ("frame-forest", "attachment-preserved", "clearance-min", "containment", "no-overlap")
QUAT_TOL = 1e-9
CONTACT_TOL = 1e-9


# ---------------------------------------------------------------- element types


@dataclass(frozen=True)
class ProvenanceTag:
    origin: str
    source_ref: Optional[str] = None
    created_at: int = 0

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown provenance origin {self.origin!r}")
        if self.origin == "derived" and not self.source_ref:
            raise ValueError("derived provenance needs a source ref")

    def to_dict(self) -> dict:
        return {"origin": self.origin, "source_ref": self.source_ref, "created_at": self.created_at}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProvenanceTag":
        return cls(d["origin"], d.get("source_ref"), int(d.get("created_at", 0)))


HUMAN = ProvenanceTag("human")


@dataclass(frozen=True)
class EntityNode:
    entity_id: str
    kind: str
    pose_frame: str
    geometry: Primitive
    parent: Optional[str] = None
    uncertainty: float = 0.0
    provenance: ProvenanceTag = HUMAN

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")
        validate_primitive(self.geometry)
        if not 0.0 <= self.uncertainty <= 1.0:
            raise ValueError("entity uncertainty must lie in [0, 1]")

    @property
    def id(self) -> str:
        return self.entity_id

    def refs(self) -> Iterable[str]:
        yield self.pose_frame
        if self.parent:
            yield self.parent
        if self.provenance.source_ref:
            yield self.provenance.source_ref

    def to_dict(self) -> dict:
        return {
            "id": self.entity_id,
            "kind": self.kind,
            "parent": self.parent,
            "pose_frame": self.pose_frame,
            "geometry": self.geometry.to_dict(),
            "uncertainty": float(self.uncertainty),
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EntityNode":
        return cls(
            entity_id=d["id"],
            kind=d["kind"],
            pose_frame=d["pose_frame"],
            geometry=primitive_from_dict(d["geometry"]),
            parent=d.get("parent"),
            uncertainty=float(d.get("uncertainty", 0.0)),
            provenance=ProvenanceTag.from_dict(d.get("provenance", {"origin": "human"})),
        )


@dataclass(frozen=True)
class FrameNode:
    frame_id: str
    translation: Vec3 = (0.0, 0.0, 0.0)
    rotation: Quat = IDENTITY_Q
    parent: Optional[str] = None
    owner: Optional[str] = None
    provenance: ProvenanceTag = HUMAN

    def __post_init__(self):
        if len(self.translation) != 3 or not all(math.isfinite(c) for c in self.translation):
            raise ValueError(f"frame {self.frame_id}: translation must be 3 finite numbers")
        if len(self.rotation) != 4 or abs(quat_norm(self.rotation) - 1.0) > QUAT_TOL:
            raise ValueError(f"frame {self.frame_id}: rotation must be a unit quaternion")

    @property
    def id(self) -> str:
        return self.frame_id

    @property
    def local_pose(self) -> Pose:
        return Pose(self.translation, self.rotation)

    def refs(self) -> Iterable[str]:
        if self.parent:
            yield self.parent
        if self.owner:
            yield self.owner
        if self.provenance.source_ref:
            yield self.provenance.source_ref

    def to_dict(self) -> dict:
        return {
            "id": self.frame_id,
            "parent": self.parent,
            "owner": self.owner,
            "translation": [float(c) for c in self.translation],
            "rotation": [float(c) for c in self.rotation],
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FrameNode":
        return cls(
            frame_id=d["id"],
            translation=tuple(float(c) for c in d.get("translation", (0.0, 0.0, 0.0))),  # type: ignore[arg-type]
            rotation=tuple(float(c) for c in d.get("rotation", IDENTITY_Q)),  # type: ignore[arg-type]
            parent=d.get("parent"),
            owner=d.get("owner"),
            provenance=ProvenanceTag.from_dict(d.get("provenance", {"origin": "human"})),
        )


@dataclass(frozen=True)
class AnchorNode:
    anchor_id: str
    host: str
    offset: Vec3 = (0.0, 0.0, 0.0)
    kind: str = "reference"

    def __post_init__(self):
        if self.kind not in ANCHOR_KINDS:
            raise ValueError(f"unknown anchor kind {self.kind!r}")
        if not all(math.isfinite(c) for c in self.offset):
            raise ValueError("anchor offset must be finite")

    @property
    def id(self) -> str:
        return self.anchor_id

    def refs(self) -> Iterable[str]:
        yield self.host

    def to_dict(self) -> dict:
        return {"id": self.anchor_id, "host": self.host, "offset": [float(c) for c in self.offset], "kind": self.kind}

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnchorNode":
        return cls(d["id"], d["host"], tuple(float(c) for c in d.get("offset", (0, 0, 0))), d.get("kind", "reference"))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Assertion:
    assertion_id: str
    claim: str
    subjects: tuple[str, ...]
    status: str = "unresolved"
    parameters: Mapping[str, tuple[float, str]] = field(default_factory=dict)
    evidence: tuple[str, ...] = ()

    def __post_init__(self):
        if self.claim not in CLAIM_ARITY:
            raise ValueError(f"unknown claim kind {self.claim!r}")
        if len(self.subjects) not in CLAIM_ARITY[self.claim]:
            raise ValueError(f"{self.claim} takes {CLAIM_ARITY[self.claim]} subjects, got {len(self.subjects)}")
        if self.status not in ASSERTION_STATUS:
            raise ValueError(f"unknown assertion status {self.status!r}")
        if self.status == "supported" and not self.evidence:
            raise ValueError(f"assertion {self.assertion_id}: supported status needs evidence refs")

    @property
    def id(self) -> str:
        return self.assertion_id

    def refs(self) -> Iterable[str]:
        yield from self.subjects
        yield from self.evidence

    def to_dict(self) -> dict:
        return {
            "id": self.assertion_id,
            "claim": self.claim,
            "subjects": list(self.subjects),
            "status": self.status,
            "parameters": {k: {"value": float(v), "unit": u} for k, (v, u) in self.parameters.items()},
            "evidence": sorted(self.evidence),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Assertion":
        params = {k: (float(v["value"]), v["unit"]) for k, v in d.get("parameters", {}).items()}
        return cls(d["id"], d["claim"], tuple(d["subjects"]), d.get("status", "unresolved"), params, tuple(d.get("evidence", ())))


@dataclass(frozen=True)
class EvidenceRecord:
    evidence_id: str
    source: str
    payload: Mapping[str, Any] = field(default_factory=dict)
    confidence: float = 1.0
    seq: int = 0

    def __post_init__(self):
        if self.source not in EVIDENCE_SOURCES:
            raise ValueError(f"unknown evidence source {self.source!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("evidence confidence must lie in [0, 1]")

    @property
    def id(self) -> str:
        return self.evidence_id

    def refs(self) -> Iterable[str]:
        return ()

    def to_dict(self) -> dict:
        return {
            "id": self.evidence_id,
            "source": self.source,
            "payload": dict(self.payload),
            "confidence": float(self.confidence),
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvidenceRecord":
        return cls(d["id"], d["source"], dict(d.get("payload", {})), float(d.get("confidence", 1.0)), int(d.get("seq", 0)))


@dataclass(frozen=True)
class CapabilityGap:
    gap_id: str
    kind: str
    txn_id: str = ""
    detail: str = ""

    def __post_init__(self):
        if self.kind not in GAP_KINDS:
            raise ValueError(f"unknown capability gap kind {self.kind!r}")

    @property
    def id(self) -> str:
        return self.gap_id

    def refs(self) -> Iterable[str]:
        return ()

    def to_dict(self) -> dict:
        return {"id": self.gap_id, "kind": self.kind, "txn_id": self.txn_id, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CapabilityGap":
        return cls(d["id"], d["kind"], d.get("txn_id", ""), d.get("detail", ""))


@dataclass(frozen=True)
class InvariantSpec:
    invariant_id: str
    predicate: str
    scope: tuple[str, ...] = ()
    parameters: Mapping[str, Union[float, str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise ValueError(f"unknown invariant predicate {self.predicate!r}")

    @property
    def id(self) -> str:
        return self.invariant_id

    def refs(self) -> Iterable[str]:
        return self.scope

    def to_dict(self) -> dict:
        return {
            "id": self.invariant_id,
            "predicate": self.predicate,
            "scope": list(self.scope),
            "parameters": dict(self.parameters),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "InvariantSpec":
        return cls(d["id"], d["predicate"], tuple(d.get("scope", ())), dict(d.get("parameters", {})))


@dataclass(frozen=True)
class ProjectionRecord:
    projection_id: str
    view_kind: str
    payload_digest: str

    @property
    def id(self) -> str:
        return self.projection_id

    def refs(self) -> Iterable[str]:
        return ()

    def to_dict(self) -> dict:
        return {"id": self.projection_id, "view_kind": self.view_kind, "payload_digest": self.payload_digest}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProjectionRecord":
        return cls(d["id"], d["view_kind"], d["payload_digest"])


Element = Union[EntityNode, FrameNode, AnchorNode, Assertion, EvidenceRecord, CapabilityGap, InvariantSpec, ProjectionRecord]

# collection name -> element class; order fixes the serialization layout
COLLECTIONS: dict[str, type] = {
    "entities": EntityNode,
    "frames": FrameNode,
    "anchors": AnchorNode,
    "assertions": Assertion,
    "evidence": EvidenceRecord,
    "capability_gaps": CapabilityGap,
    "protected_invariants": InvariantSpec,
    "projections": ProjectionRecord,
}
_COLLECTION_OF = {cls: name for name, cls in COLLECTIONS.items()}
TYPE_TAGS = {
    "entities": "entity",
    "frames": "frame",
    "anchors": "anchor",
    "assertions": "assertion",
    "evidence": "evidence",
    "capability_gaps": "capability-gap",
    "protected_invariants": "invariant",
    "projections": "projection",
}


def collection_of(element: Element) -> str:
    return _COLLECTION_OF[type(element)]


# ---------------------------------------------------------------- snapshot


def _frozen(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True, eq=False)
class SceneSnapshot:
    snapshot_id: str
    entities: Mapping[str, EntityNode]
    frames: Mapping[str, FrameNode]
    anchors: Mapping[str, AnchorNode]
    assertions: Mapping[str, Assertion]
    evidence: Mapping[str, EvidenceRecord]
    capability_gaps: Mapping[str, CapabilityGap]
    protected_invariants: Mapping[str, InvariantSpec]
    projections: Mapping[str, ProjectionRecord]
    registry_fingerprint: str = ""
    parent_snapshot: Optional[str] = None

    def collection(self, name: str) -> Mapping[str, Element]:
        return getattr(self, name)

    def content(self, exclude: Iterable[str] = ()) -> dict:
        skip = set(exclude)
        out: dict[str, Any] = {}
        for name in COLLECTIONS:
            if name in skip:
                continue
            out[name] = [self.collection(name)[k].to_dict() for k in sorted(self.collection(name))]
        if "registry_fingerprint" not in skip:
            out["registry_fingerprint"] = self.registry_fingerprint
        return out

    @property
    def digest(self) -> str:
        return content_digest(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SceneSnapshot):
            return NotImplemented
        return self.content() == other.content()

    __hash__ = None  # type: ignore[assignment]

    def max_evidence_seq(self) -> int:
        return max((e.seq for e in self.evidence.values()), default=-1)


def content_digest(snapshot: SceneSnapshot, exclude: Iterable[str] = ()) -> str:
    """Digest over contents only; snapshot id and parent link are not part of it."""
    return _canon.digest(snapshot.content(exclude))


def scene_digest(snapshot: SceneSnapshot) -> str:
    """Content digest with the evidence set excluded (geometry and claims only)."""
    return content_digest(snapshot, exclude=("evidence",))


def _snapshot_id(parent_id: Optional[str], digest: str) -> str:
    return "snap." + _canon.digest_text(f"{parent_id or ''}:{digest}")[:16]


def make_snapshot(
    elements: Iterable[Element] = (),
    registry_fingerprint: str = "",
    parent: Optional[str] = None,
    snapshot_id: Optional[str] = None,
    validate: bool = True,
) -> SceneSnapshot:
    maps: dict[str, dict[str, Element]] = {name: {} for name in COLLECTIONS}
    for el in elements:
        coll = maps[collection_of(el)]
        if el.id in coll:
            raise SceneFormatError(f"duplicate id {el.id!r}")
        coll[el.id] = el
    return _build(maps, registry_fingerprint, parent, snapshot_id, validate)


def _build(maps, registry_fingerprint, parent, snapshot_id, validate) -> SceneSnapshot:
    snap = SceneSnapshot(
        snapshot_id="",
        registry_fingerprint=registry_fingerprint,
        parent_snapshot=parent,
        **{name: _frozen(maps[name]) for name in COLLECTIONS},
    )
    if validate:
        problems = validate_snapshot(snap)
        if problems:
            raise SceneFormatError(problems[0])
    sid = snapshot_id or _snapshot_id(parent, content_digest(snap))
    object.__setattr__(snap, "snapshot_id", sid)
    return snap


def empty_snapshot(registry_fingerprint: str = "") -> SceneSnapshot:
    return make_snapshot((), registry_fingerprint)


# ---------------------------------------------------------------- validation


def validate_snapshot(snap: SceneSnapshot) -> list[str]:
    """Every violated structural invariant, in a deterministic order (empty when valid)."""
    problems: list[str] = []
    owner: dict[str, str] = {}
    for name in COLLECTIONS:
        for key, el in snap.collection(name).items():
            if key != el.id:
                problems.append(f"{name}: key {key!r} does not match element id {el.id!r}")
            if el.id in owner:
                problems.append(f"id {el.id!r} used by both {owner[el.id]} and {name}")
            owner[el.id] = name
            if not el.id:
                problems.append(f"{name}: empty id")

    def expect(ref: str, where: str, kinds: tuple[str, ...]) -> None:
        if owner.get(ref) not in kinds:
            problems.append(f"{where}: reference {ref!r} does not resolve to {'/'.join(TYPE_TAGS[k] for k in kinds)}")

    for e in _sorted(snap.entities):
        expect(e.pose_frame, f"entity {e.id} pose_frame", ("frames",))
        if e.parent:
            expect(e.parent, f"entity {e.id} parent", ("entities",))
        if e.provenance.source_ref:
            expect(e.provenance.source_ref, f"entity {e.id} provenance", ("evidence",))
    for f in _sorted(snap.frames):
        if f.parent:
            expect(f.parent, f"frame {f.id} parent", ("frames",))
        if f.owner:
            expect(f.owner, f"frame {f.id} owner", ("entities",))
        if f.provenance.source_ref:
            expect(f.provenance.source_ref, f"frame {f.id} provenance", ("evidence",))
    for a in _sorted(snap.anchors):
        expect(a.host, f"anchor {a.id} host", ("entities", "frames"))
    for s in _sorted(snap.assertions):
        for ref in s.subjects:
            expect(ref, f"assertion {s.id} subject", ("entities", "frames", "anchors"))
        for ref in s.evidence:
            expect(ref, f"assertion {s.id} evidence", ("evidence",))
    for inv in _sorted(snap.protected_invariants):
        for ref in inv.scope:
            if ref not in owner:
                problems.append(f"invariant {inv.id}: scope reference {ref!r} does not resolve")

    problems.extend(_cycle_problems(snap.frames, lambda f: f.parent, "frame"))
    problems.extend(_cycle_problems(snap.entities, lambda e: e.parent, "entity"))

    seqs = [e.seq for e in snap.evidence.values()]
    if len(seqs) != len(set(seqs)):
        problems.append("evidence sequence numbers must be unique")
    return problems


def _sorted(coll: Mapping) -> list:
    return [coll[k] for k in sorted(coll)]


def _cycle_problems(coll: Mapping, parent_of, label: str) -> list[str]:
    problems = []
    state: dict[str, int] = {}
    for start in sorted(coll):
        path = []
        node: Optional[str] = start
        while node is not None and node in coll and state.get(node, 0) == 0:
            state[node] = 1
            path.append(node)
            node = parent_of(coll[node])
        if node is not None and state.get(node) == 1:
            problems.append(f"{label} parent links form a cycle through {node!r}")
        for p in path:
            state[p] = 2
    return problems


# ---------------------------------------------------------------- queries


class Resolved(NamedTuple):
    kind: str
    element: Element


def resolve_ref(snapshot: SceneSnapshot, ref: str) -> Resolved:
    if ref:
        for name in COLLECTIONS:
            el = snapshot.collection(name).get(ref)
            if el is not None:
                return Resolved(TYPE_TAGS[name], el)
    raise UnknownRef(ref)


def get_frame(snapshot: SceneSnapshot, ref: str) -> FrameNode:
    frame = snapshot.frames.get(ref)
    if frame is None:
        raise UnknownRef(ref, "expected a frame")
    return frame


def get_entity(snapshot: SceneSnapshot, ref: str) -> EntityNode:
    ent = snapshot.entities.get(ref)
    if ent is None:
        raise UnknownRef(ref, "expected an entity")
    return ent


def frame_chain(snapshot: SceneSnapshot, frame_id: str) -> list[FrameNode]:
    """Frames from the root down to *frame_id* inclusive."""
    chain = []
    seen = set()
    node: Optional[str] = frame_id
    while node is not None:
        if node in seen:
            raise CyclicFrames(f"frame parent links loop at {node!r}")
        seen.add(node)
        chain.append(get_frame(snapshot, node))
        node = chain[-1].parent
    chain.reverse()
    return chain


def world_pose(snapshot: SceneSnapshot, frame_id: str) -> Pose:
    """Compose local poses left to right from the root frame to *frame_id*."""
    pose = Pose()
    for f in frame_chain(snapshot, frame_id):
        pose = pose.compose(f.local_pose)
    return pose


class PoseCache:
    """Incremental world poses: each frame composes its parent's cached pose."""

    def __init__(self, snapshot: SceneSnapshot):
        self.snapshot = snapshot
        self._cache: dict[str, Pose] = {}
        self._active: set[str] = set()

    def __call__(self, frame_id: str) -> Pose:
        hit = self._cache.get(frame_id)
        if hit is not None:
            return hit
        if frame_id in self._active:
            raise CyclicFrames(f"frame parent links loop at {frame_id!r}")
        frame = get_frame(self.snapshot, frame_id)
        self._active.add(frame_id)
        try:
            base = self(frame.parent) if frame.parent else Pose()
        finally:
            self._active.discard(frame_id)
        pose = base.compose(frame.local_pose)
        self._cache[frame_id] = pose
        return pose


def entity_box(snapshot: SceneSnapshot, entity_id: str, poses: Optional[PoseCache] = None) -> OrientedBox:
    ent = get_entity(snapshot, entity_id)
    pose = poses(ent.pose_frame) if poses else world_pose(snapshot, ent.pose_frame)
    return world_box(ent.geometry, pose)


def entity_center(snapshot: SceneSnapshot, entity_id: str, poses: Optional[PoseCache] = None) -> np.ndarray:
    lo, hi = entity_box(snapshot, entity_id, poses).aabb()
    return (lo + hi) / 2.0


def anchor_world(snapshot: SceneSnapshot, anchor_id: str) -> Vec3:
    anchor = snapshot.anchors.get(anchor_id)
    if anchor is None:
        raise UnknownRef(anchor_id, "expected an anchor")
    host = resolve_ref(snapshot, anchor.host)
    frame = host.element.pose_frame if host.kind == "entity" else anchor.host
    return world_pose(snapshot, frame).apply(anchor.offset)


def frame_subtree(snapshot: SceneSnapshot, frame_id: str) -> list[str]:
    """*frame_id* and all its descendant frames, sorted."""
    get_frame(snapshot, frame_id)
    children: dict[str, list[str]] = {}
    for f in snapshot.frames.values():
        if f.parent:
            children.setdefault(f.parent, []).append(f.id)
    out, stack = [], [frame_id]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(children.get(node, ()))
    return sorted(out)


def entities_on_frames(snapshot: SceneSnapshot, frames: Iterable[str]) -> list[str]:
    fs = set(frames)
    return sorted(e.id for e in snapshot.entities.values() if e.pose_frame in fs)


def owning_body(snapshot: SceneSnapshot, entity_id: str) -> Optional[str]:
    """Nearest strict ancestor entity of kind ``body``."""
    ent = get_entity(snapshot, entity_id)
    node = ent.parent
    while node is not None:
        anc = get_entity(snapshot, node)
        if anc.kind == "body":
            return anc.id
        node = anc.parent
    return None


# ---------------------------------------------------------------- invariants


class InvariantResult(NamedTuple):
    holds: bool
    detail: str = ""

    def __bool__(self) -> bool:
        return self.holds


def check_invariant(snapshot: SceneSnapshot, spec: InvariantSpec) -> InvariantResult:
    for ref in spec.scope:
        resolve_ref(snapshot, ref)
    p = spec.predicate
    if p == "frame-forest":
        bad = _cycle_problems(snapshot.frames, lambda f: f.parent, "frame")
        dangling = [f.id for f in _sorted(snapshot.frames) if f.parent and f.parent not in snapshot.frames]
        if bad or dangling:
            return InvariantResult(False, "; ".join(bad + [f"frame {d} has a dangling parent" for d in dangling]))
        return InvariantResult(True)
    if p == "attachment-preserved":
        dependent, baseline = _pair(spec)
        frame = get_frame(snapshot, dependent)
        if frame.parent != baseline:
            return InvariantResult(False, f"{dependent} parent is {frame.parent!r}, expected {baseline!r}")
        return InvariantResult(True)
    if p == "clearance-min":
        a, b = _pair(spec)
        minimum = float(spec.parameters.get("min", 0.0))
        gap = entity_gap(snapshot, a, b)
        if gap < minimum:
            return InvariantResult(False, f"gap {a}/{b} = {gap:.6g} m < {minimum:.6g} m")
        return InvariantResult(True)
    if p == "containment":
        inner, outer = _pair(spec)
        axes = str(spec.parameters.get("axes", "xyz"))
        tol = float(spec.parameters.get("tol", CONTACT_TOL))
        ilo, ihi = entity_box(snapshot, inner).aabb()
        olo, ohi = entity_box(snapshot, outer).aabb()
        for ax in axes:
            i = AXES[ax]
            if ilo[i] < olo[i] - tol or ihi[i] > ohi[i] + tol:
                return InvariantResult(False, f"{inner} leaves {outer} along {ax}")
        return InvariantResult(True)
    if p == "no-overlap":
        a, b = _pair(spec)
        depth = obb_penetration(entity_box(snapshot, a), entity_box(snapshot, b))
        if depth > CONTACT_TOL:
            return InvariantResult(False, f"{a} and {b} overlap by {depth:.6g} m")
        return InvariantResult(True)
    raise ValueError(f"unknown predicate {p!r}")


def _pair(spec: InvariantSpec) -> tuple[str, str]:
    if len(spec.scope) != 2:
        raise ValueError(f"invariant {spec.id}: {spec.predicate} needs exactly two scope refs")
    return spec.scope[0], spec.scope[1]


def entity_gap(snapshot: SceneSnapshot, a: str, b: str) -> float:
    alo, ahi = entity_box(snapshot, a).aabb()
    blo, bhi = entity_box(snapshot, b).aabb()
    return aabb_gap(alo, ahi, blo, bhi)


def check_all(snapshot: SceneSnapshot, specs: Iterable[InvariantSpec]) -> list[tuple[str, InvariantResult]]:
    return [(s.id, check_invariant(snapshot, s)) for s in specs]


# ---------------------------------------------------------------- mutations


@dataclass(frozen=True)
class SetField:
    target: str
    field: str
    value: Any

    def to_dict(self) -> dict:
        v = self.value
        if isinstance(v, tuple):
            v = list(v)
        return {"op": "set", "target": self.target, "field": self.field, "value": v}


@dataclass(frozen=True)
class Put:
    element: Element

    @property
    def target(self) -> str:
        return self.element.id

    def to_dict(self) -> dict:
        return {"op": "put", "collection": collection_of(self.element), "element": self.element.to_dict()}


@dataclass(frozen=True)
class Remove:
    target: str

    def to_dict(self) -> dict:
        return {"op": "remove", "target": self.target}


Mutation = Union[SetField, Put, Remove]
MutationSet = tuple  # tuple[Mutation, ...]


def mutation_from_dict(d: Mapping) -> Mutation:
    op = d["op"]
    if op == "set":
        v = d["value"]
        if isinstance(v, list):
            v = tuple(v)
        return SetField(d["target"], d["field"], v)
    if op == "put":
        cls = COLLECTIONS[d["collection"]]
        return Put(cls.from_dict(d["element"]))
    if op == "remove":
        return Remove(d["target"])
    raise ValueError(f"unknown mutation op {op!r}")


def mutations_to_list(mutations: Iterable[Mutation]) -> list[dict]:
    return [m.to_dict() for m in mutations]


_FRAME_FIELDS = {"translation", "rotation", "parent", "owner"}
_ENTITY_FIELDS = {"pose_frame", "parent", "uncertainty", "kind"}
_ASSERTION_FIELDS = {"status", "evidence"}


def _apply_set(el: Element, fld: str, value: Any) -> Element:
    if isinstance(el, FrameNode):
        if fld.startswith("translation."):
            idx = AXES[fld.split(".", 1)[1]]
            t = list(el.translation)
            t[idx] = float(value)
            return replace(el, translation=tuple(t))
        if fld in _FRAME_FIELDS:
            if fld in ("translation", "rotation"):
                value = tuple(float(c) for c in value)
            return replace(el, **{fld: value})
    elif isinstance(el, EntityNode) and fld in _ENTITY_FIELDS:
        return replace(el, **{fld: value})
    elif isinstance(el, Assertion) and fld in _ASSERTION_FIELDS:
        if fld == "evidence":
            value = tuple(value)
        return replace(el, **{fld: value})
    raise InvariantBreakingStructure(f"field {fld!r} cannot be set on {el.id}")


def snapshot_commit(parent: SceneSnapshot, mutations: Iterable[Mutation]) -> SceneSnapshot:
    """Apply *mutations* to a copy of *parent* and return the validated child snapshot."""
    maps = {name: dict(parent.collection(name)) for name in COLLECTIONS}
    where = {el_id: name for name in COLLECTIONS for el_id in maps[name]}
    fingerprint = parent.registry_fingerprint
    parent_max_seq = parent.max_evidence_seq()
    for m in mutations:
        if isinstance(m, SetField):
            if m.target == "registry" and m.field == "fingerprint":
                fingerprint = str(m.value)
                continue
            name = where.get(m.target)
            if name is None:
                raise UnknownRef(m.target, "mutation target")
            try:
                maps[name][m.target] = _apply_set(maps[name][m.target], m.field, m.value)
            except ValueError as exc:
                raise InvariantBreakingStructure(str(exc)) from exc
        elif isinstance(m, Put):
            name = collection_of(m.element)
            prior = where.get(m.element.id)
            if prior is not None and prior != name:
                raise InvariantBreakingStructure(f"id {m.element.id!r} already names a {TYPE_TAGS[prior]}")
            if isinstance(m.element, EvidenceRecord) and m.element.id not in maps[name]:
                if m.element.seq <= parent_max_seq:
                    raise InvariantBreakingStructure(
                        f"evidence {m.element.id} seq {m.element.seq} does not follow lineage max {parent_max_seq}"
                    )
            maps[name][m.element.id] = m.element
            where[m.element.id] = name
        elif isinstance(m, Remove):
            name = where.pop(m.target, None)
            if name is None:
                raise UnknownRef(m.target, "mutation target")
            del maps[name][m.target]
        else:
            raise TypeError(f"not a mutation: {m!r}")
    child = _build(maps, fingerprint, parent.snapshot_id, None, validate=False)
    problems = validate_snapshot(child)
    if problems:
        raise InvariantBreakingStructure(problems[0])
    return child


# ---------------------------------------------------------------- scene files


def snapshot_to_dict(snap: SceneSnapshot) -> dict:
    out = snap.content()
    out["version"] = SCENE_FORMAT
    out["snapshot_id"] = snap.snapshot_id
    out["parent_snapshot"] = snap.parent_snapshot
    return out


def snapshot_from_dict(data: Mapping) -> SceneSnapshot:
    if data.get("version") != SCENE_FORMAT:
        raise SceneFormatError(f"expected version {SCENE_FORMAT!r}, got {data.get('version')!r}")
    elements: list[Element] = []
    try:
        for name, cls in COLLECTIONS.items():
            for item in data.get(name, []):
                elements.append(cls.from_dict(item))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"malformed element: {exc}") from exc
    return make_snapshot(
        elements,
        registry_fingerprint=data.get("registry_fingerprint", ""),
        parent=data.get("parent_snapshot"),
        snapshot_id=data.get("snapshot_id") or None,
    )


def dumps_scene(snap: SceneSnapshot) -> str:
    return _canon.dumps(snapshot_to_dict(snap)) + "\n"


def loads_scene(text: str) -> SceneSnapshot:
    try:
        data = _canon.loads(text)
    except ValueError as exc:
        raise SceneFormatError(f"not valid scene JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneFormatError("scene file must hold a JSON object")
    return snapshot_from_dict(data)


def canonicalize_scene_text(text: str) -> str:
    """Canonical spelling of a scene file without going through the typed model."""
    return _canon.dumps(_canon.loads(text)) + "\n"
