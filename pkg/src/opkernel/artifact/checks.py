"""Geometric checks for artifact constraints, consistency and cycle disagreement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from ..geometry import AXES, Pose, aabb_gap, world_box
from .model import EPSILON, ConstraintSpec, GeneratedSpatialArtifact

Boxes = Mapping[str, tuple[np.ndarray, np.ndarray]]
Checker = Callable[[ConstraintSpec, Boxes], float]


def node_boxes(artifact: GeneratedSpatialArtifact) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    out = {}
    for n in artifact.nodes:
        g = artifact.geometry_of(n.node_id)
        out[n.node_id] = world_box(g.primitive, g.pose).aabb()
    return out


def _gap(spec: ConstraintSpec, boxes: Boxes) -> float:
    a, b = spec.subjects
    return aabb_gap(*boxes[a], *boxes[b])


def check_contact(spec: ConstraintSpec, boxes: Boxes) -> float:
    return _gap(spec, boxes) - spec.epsilon


def check_clearance(spec: ConstraintSpec, boxes: Boxes) -> float:
    return float(spec.parameters.get("min", 0.0)) - _gap(spec, boxes) - spec.epsilon


def check_alignment(spec: ConstraintSpec, boxes: Boxes) -> float:
    a, b = spec.subjects
    i = AXES[str(spec.parameters.get("axis", "x"))]
    ca = (boxes[a][0][i] + boxes[a][1][i]) / 2.0
    cb = (boxes[b][0][i] + boxes[b][1][i]) / 2.0
    return abs(ca - cb) - spec.epsilon


def check_containment(spec: ConstraintSpec, boxes: Boxes) -> float:
    inner, outer = spec.subjects
    (ilo, ihi), (olo, ohi) = boxes[inner], boxes[outer]
    return float(max(np.max(olo - ilo), np.max(ihi - ohi))) - spec.epsilon


# value <= 0 means the constraint holds
DEFAULT_CHECKERS: dict[str, Checker] = {
    "contact": check_contact,
    "clearance": check_clearance,
    "alignment": check_alignment,
}
EDGE_CHECKERS: dict[str, Checker] = {"contact": check_contact, "containment": check_containment}


def edge_as_constraint(edge) -> ConstraintSpec:
    return ConstraintSpec(edge.edge_id, edge.kind, edge.subjects, {"epsilon": EPSILON.get(edge.kind, 1e-9)})


@dataclass(frozen=True)
class GscReport:
    value: Optional[float]  # None when no constraint could be checked
    satisfied: tuple[str, ...] = ()
    violated: tuple[str, ...] = ()
    excluded: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "value": "undefined" if self.value is None else self.value,
            "satisfied": list(self.satisfied),
            "violated": list(self.violated),
            "excluded": list(self.excluded),
        }


def gsc(artifact: GeneratedSpatialArtifact, checkers: Mapping[str, Checker] = DEFAULT_CHECKERS) -> GscReport:
    """Fraction of checkable constraints whose geometric check holds; unchecked kinds are excluded."""
    boxes = node_boxes(artifact)
    ok, bad, skipped = [], [], []
    for c in artifact.constraints:
        fn = checkers.get(c.kind)
        if fn is None:
            skipped.append(c.constraint_id)
        elif fn(c, boxes) <= 0.0:
            ok.append(c.constraint_id)
        else:
            bad.append(c.constraint_id)
    n = len(ok) + len(bad)
    return GscReport(len(ok) / n if n else None, tuple(ok), tuple(bad), tuple(skipped))


# ---------------------------------------------------------------- cycle consistency


@dataclass(frozen=True)
class Structure:
    entities: Mapping[str, str]
    edges: frozenset = frozenset()
    frames: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.entities) + len(self.edges) + len(self.frames)


def _edge_key(kind: str, subjects: Sequence[str]) -> tuple:
    a, b = subjects
    return (kind, *sorted((a, b))) if kind == "contact" else (kind, a, b)


def intended_structure(artifact: GeneratedSpatialArtifact) -> Structure:
    return Structure(
        entities={n.node_id: n.kind for n in artifact.nodes},
        edges=frozenset(_edge_key(e.kind, e.subjects) for e in artifact.edges),
        frames={n.node_id: tuple(artifact.geometry_of(n.node_id).translation) for n in artifact.nodes},
    )


def project_display(artifact: GeneratedSpatialArtifact) -> dict:
    prims = []
    for n in artifact.nodes:
        g = artifact.geometry_of(n.node_id)
        prims.append({"id": n.node_id, "kind": n.kind, "primitive": g.primitive, "translation": g.translation, "rotation": g.rotation})
    return {"primitives": prims}


def recover_display(view: Mapping) -> Structure:
    """Entities and frames from the posed primitives; contact and containment edges from geometry alone."""
    prims = view["primitives"]
    boxes = {p["id"]: world_box(p["primitive"], Pose(p["translation"], p["rotation"])).aabb() for p in prims}
    ids = sorted(boxes)
    edges = set()
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            spec = ConstraintSpec("probe", "containment", (a, b), {"epsilon": 1e-9})
            if check_containment(spec, boxes) <= 0.0:
                edges.add(("containment", a, b))
                continue
            spec = ConstraintSpec("probe", "containment", (b, a), {"epsilon": 1e-9})
            if check_containment(spec, boxes) <= 0.0:
                edges.add(("containment", b, a))
                continue
            if aabb_gap(*boxes[a], *boxes[b]) <= EPSILON["contact"]:
                edges.add(("contact", a, b))
    return Structure(
        entities={p["id"]: p["kind"] for p in prims},
        edges=frozenset(edges),
        frames={p["id"]: tuple(p["translation"]) for p in prims},
    )


def project_sim(artifact: GeneratedSpatialArtifact) -> dict:
    return {
        "bodies": [
            {"id": n.node_id, "kind": n.kind, "translation": artifact.geometry_of(n.node_id).translation} for n in artifact.nodes
        ],
        "contacts": [list(e.subjects) for e in artifact.edges if e.kind == "contact"],
    }


def recover_sim(view: Mapping) -> Structure:
    return Structure(
        entities={b["id"]: b["kind"] for b in view["bodies"]},
        edges=frozenset(_edge_key("contact", c) for c in view["contacts"]),
        frames={b["id"]: tuple(b["translation"]) for b in view["bodies"]},
    )


ADAPTERS: dict[str, tuple[Callable, Callable]] = {
    "display": (project_display, recover_display),
    "sim-contact": (project_sim, recover_sim),
}


def structure_mismatch(intended: Structure, recovered: Structure, tol: float = 1e-3) -> int:
    ents = set(intended.entities) | set(recovered.entities)
    n = sum(1 for e in ents if intended.entities.get(e) != recovered.entities.get(e))
    n += len(intended.edges ^ recovered.edges)
    for f in set(intended.frames) | set(recovered.frames):
        a, b = intended.frames.get(f), recovered.frames.get(f)
        if a is None or b is None or np.max(np.abs(np.subtract(a, b))) > tol:
            n += 1
    return n


def cycle_disagreement(
    artifact: GeneratedSpatialArtifact,
    adapters: Iterable[str] = ("display", "sim-contact"),
    registry: Mapping[str, tuple[Callable, Callable]] = ADAPTERS,
    tol: float = 1e-3,
) -> dict[str, Optional[float]]:
    """Per adapter: mismatches between recovered and intended structure over the intended size."""
    intended = intended_structure(artifact)
    out: dict[str, Optional[float]] = {}
    for name in adapters:
        project, recover = registry[name]
        mismatches = structure_mismatch(intended, recover(project(artifact)), tol)
        out[name] = mismatches / intended.size if intended.size else None
    return out
