"""Generated spatial artifacts: geometry, symbolic graph, constraints, handles, provenance, uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .. import _canon
from ..errors import MalformedArtifact
from ..geometry import IDENTITY_Q, Box, Pose, Primitive, primitive_from_dict
from ..graph import ENTITY_KINDS, ProvenanceTag

ARTIFACT_FORMAT = "hylos-artifact/1"
CONSTRAINT_KINDS = ("contact", "clearance", "alignment")
EDGE_KINDS = ("contact", "containment")
# tolerance on each checked constraint, meters
EPSILON = {"contact": 1e-3, "alignment": 1e-3, "clearance": 0.0}


@dataclass(frozen=True)
class PosedPrimitive:
    geometry_id: str
    primitive: Primitive
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation: tuple[float, float, float, float] = IDENTITY_Q

    @property
    def pose(self) -> Pose:
        return Pose(self.translation, self.rotation)

    def to_dict(self) -> dict:
        return {
            "id": self.geometry_id,
            "primitive": self.primitive.to_dict(),
            "translation": list(self.translation),
            "rotation": list(self.rotation),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PosedPrimitive":
        return cls(
            d["id"],
            primitive_from_dict(d["primitive"]),
            tuple(float(c) for c in d.get("translation", (0, 0, 0))),  # type: ignore[arg-type]
            tuple(float(c) for c in d.get("rotation", IDENTITY_Q)),  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class SymbolicNode:
    node_id: str
    kind: str
    geometry: str
    parent: Optional[str] = None

    def to_dict(self) -> dict:
        return {"id": self.node_id, "kind": self.kind, "geometry": self.geometry, "parent": self.parent}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SymbolicNode":
        return cls(d["id"], d["kind"], d["geometry"], d.get("parent"))


@dataclass(frozen=True)
class SymbolicEdge:
    edge_id: str
    kind: str
    subjects: tuple[str, str]

    def to_dict(self) -> dict:
        return {"id": self.edge_id, "kind": self.kind, "subjects": list(self.subjects)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SymbolicEdge":
        return cls(d["id"], d["kind"], tuple(d["subjects"]))  # type: ignore[arg-type]


@dataclass(frozen=True)
class ConstraintSpec:
    """``contact``: gap <= epsilon; ``clearance``: gap >= min; ``alignment``: |center offset| <= epsilon on axis."""

    constraint_id: str
    kind: str
    subjects: tuple[str, str]
    parameters: Mapping[str, Any] = field(default_factory=dict)

    @property
    def epsilon(self) -> float:
        return float(self.parameters.get("epsilon", EPSILON.get(self.kind, 0.0)))

    def to_dict(self) -> dict:
        return {"id": self.constraint_id, "kind": self.kind, "subjects": list(self.subjects), "parameters": dict(self.parameters)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConstraintSpec":
        return cls(d["id"], d["kind"], tuple(d["subjects"]), dict(d.get("parameters", {})))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Handle:
    handle_id: str
    latent_slice: tuple[int, int]
    local_constraints: tuple[str, ...] = ()
    steps: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return self.latent_slice[1] - self.latent_slice[0]

    def step(self, k: int) -> float:
        return self.steps[k] if k < len(self.steps) else 0.0

    def to_dict(self) -> dict:
        return {
            "id": self.handle_id,
            "slice": list(self.latent_slice),
            "constraints": list(self.local_constraints),
            "steps": list(self.steps),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Handle":
        return cls(d["id"], tuple(d["slice"]), tuple(d.get("constraints", ())), tuple(float(s) for s in d.get("steps", ())))  # type: ignore[arg-type]


@dataclass(frozen=True)
class GeneratedSpatialArtifact:
    artifact_id: str
    geometry: tuple[PosedPrimitive, ...]
    nodes: tuple[SymbolicNode, ...]
    edges: tuple[SymbolicEdge, ...] = ()
    constraints: tuple[ConstraintSpec, ...] = ()
    handles: tuple[Handle, ...] = ()
    provenance: Mapping[str, ProvenanceTag] = field(default_factory=dict)
    uncertainty: Mapping[str, float] = field(default_factory=dict)

    def geometry_of(self, node_id: str) -> PosedPrimitive:
        node = next(n for n in self.nodes if n.node_id == node_id)
        return next(g for g in self.geometry if g.geometry_id == node.geometry)

    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]

    def to_dict(self) -> dict:
        return {
            "version": ARTIFACT_FORMAT,
            "id": self.artifact_id,
            "geometry": [g.to_dict() for g in self.geometry],
            "symbolic": {"nodes": [n.to_dict() for n in self.nodes], "edges": [e.to_dict() for e in self.edges]},
            "constraints": [c.to_dict() for c in self.constraints],
            "handles": [h.to_dict() for h in self.handles],
            "provenance": {k: v.to_dict() for k, v in sorted(self.provenance.items())},
            "uncertainty": {k: float(v) for k, v in sorted(self.uncertainty.items())},
        }

    @property
    def digest(self) -> str:
        return _canon.digest(self.to_dict())


def validate_artifact(a: GeneratedSpatialArtifact) -> list[str]:
    problems = []
    geo = {g.geometry_id for g in a.geometry}
    nodes = {n.node_id for n in a.nodes}
    if len(geo) != len(a.geometry):
        problems.append("duplicate geometry ids")
    if len(nodes) != len(a.nodes):
        problems.append("duplicate node ids")
    for n in a.nodes:
        if n.kind not in ENTITY_KINDS:
            problems.append(f"node {n.node_id}: unknown kind {n.kind!r}")
        if n.geometry not in geo:
            problems.append(f"node {n.node_id} names missing geometry {n.geometry!r}")
        if n.parent is not None and n.parent not in nodes:
            problems.append(f"node {n.node_id} has unknown parent {n.parent!r}")
    for e in a.edges:
        if e.kind not in EDGE_KINDS:
            problems.append(f"edge {e.edge_id}: unknown kind {e.kind!r}")
        problems += [f"edge {e.edge_id} references unknown node {s!r}" for s in e.subjects if s not in nodes]
    for c in a.constraints:
        if len(c.subjects) != 2:
            problems.append(f"constraint {c.constraint_id} needs two subjects")
        problems += [f"constraint {c.constraint_id} references unknown node {s!r}" for s in c.subjects if s not in nodes]
    cids = {c.constraint_id for c in a.constraints}
    for h in a.handles:
        if h.dim <= 0:
            problems.append(f"handle {h.handle_id} has an empty latent slice")
        problems += [f"handle {h.handle_id} names unknown constraint {c!r}" for c in h.local_constraints if c not in cids]
    for k, u in a.uncertainty.items():
        if not (math.isfinite(u) and 0.0 <= u <= 1.0):
            problems.append(f"uncertainty of {k} must lie in [0, 1]")
    return problems


def check_artifact(a: GeneratedSpatialArtifact) -> GeneratedSpatialArtifact:
    problems = validate_artifact(a)
    if problems:
        raise MalformedArtifact(problems[0])
    return a


def artifact_from_dict(d: Mapping) -> GeneratedSpatialArtifact:
    if d.get("version") != ARTIFACT_FORMAT:
        raise MalformedArtifact(f"expected version {ARTIFACT_FORMAT!r}, got {d.get('version')!r}")
    try:
        sym = d.get("symbolic", {})
        a = GeneratedSpatialArtifact(
            artifact_id=d["id"],
            geometry=tuple(PosedPrimitive.from_dict(g) for g in d.get("geometry", ())),
            nodes=tuple(SymbolicNode.from_dict(n) for n in sym.get("nodes", ())),
            edges=tuple(SymbolicEdge.from_dict(e) for e in sym.get("edges", ())),
            constraints=tuple(ConstraintSpec.from_dict(c) for c in d.get("constraints", ())),
            handles=tuple(Handle.from_dict(h) for h in d.get("handles", ())),
            provenance={k: ProvenanceTag.from_dict(v) for k, v in d.get("provenance", {}).items()},
            uncertainty={k: float(v) for k, v in d.get("uncertainty", {}).items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedArtifact(f"malformed artifact: {exc}") from exc
    return check_artifact(a)


def dumps_artifact(a: GeneratedSpatialArtifact) -> str:
    return _canon.dumps(a.to_dict()) + "\n"


def loads_artifact(text: str) -> GeneratedSpatialArtifact:
    try:
        data = _canon.loads(text)
    except ValueError as exc:
        raise MalformedArtifact(f"not valid artifact JSON: {exc}") from exc
    return artifact_from_dict(data)


def box_part(geometry_id: str, w: float, h: float, d: float, at=(0.0, 0.0, 0.0)) -> PosedPrimitive:
    return PosedPrimitive(geometry_id, Box(w, h, d), tuple(float(c) for c in at))  # type: ignore[arg-type]
