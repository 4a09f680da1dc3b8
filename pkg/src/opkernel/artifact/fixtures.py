"""Small hand-built artifacts and decoders used by the demos, tests and CLI."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..graph import ProvenanceTag
from .decoder import NP, PartTemplate, ToyDecoder
from .model import ConstraintSpec, GeneratedSpatialArtifact, Handle, SymbolicEdge, SymbolicNode, box_part

CONTRADICTED_GAP = 0.05


def tray_on_body_artifact(gap: float = 0.0, extra_kind: Optional[str] = None, artifact_id: str = "tray_on_body") -> GeneratedSpatialArtifact:
    """A tray resting on a body; *gap* lifts the tray, *extra_kind* adds a constraint of that kind."""
    body = box_part("g.body", 0.4, 0.3, 0.2, (0.0, 0.0, 0.15))
    tray = box_part("g.tray", 0.1, 0.03, 0.08, (0.0, 0.0, 0.315 + gap))
    constraints = [
        ConstraintSpec("c.contact", "contact", ("tray", "body")),
        ConstraintSpec("c.align", "alignment", ("tray", "body"), {"axis": "x"}),
    ]
    if extra_kind:
        constraints.append(ConstraintSpec(f"c.{extra_kind}", extra_kind, ("tray", "body")))
    tag = ProvenanceTag("model", source_ref="decoder.fixture")
    return GeneratedSpatialArtifact(
        artifact_id=artifact_id,
        geometry=(body, tray),
        nodes=(SymbolicNode("body", "body", "g.body"), SymbolicNode("tray", "tray", "g.tray", "body")),
        edges=(SymbolicEdge("e.rest", "contact", ("tray", "body")),),
        constraints=tuple(constraints),
        provenance={"body": tag, "tray": tag},
        uncertainty={"body": 0.05, "tray": 0.1},
    )


def consistent_artifact() -> GeneratedSpatialArtifact:
    return tray_on_body_artifact()


def checkerless_artifact() -> GeneratedSpatialArtifact:
    return tray_on_body_artifact(extra_kind="symmetry", artifact_id="tray_symmetry")


def contradicted_artifact() -> GeneratedSpatialArtifact:
    return tray_on_body_artifact(gap=CONTRADICTED_GAP, artifact_id="tray_floating")


def _row(part: int, name: str) -> int:
    return NP * part + "cx cy cz sx sy sz".split().index(name)


def handle_decoder() -> ToyDecoder:
    """Body, tray and a stop block 1.5 mm from the tray's +x face.

    Latents: 0, 1 slide the tray in x and y; 2 widens it; 3 raises its height
    through a saturating map whose center term keeps the tray's bottom fixed.
    """
    parts = (PartTemplate("body", "body"), PartTemplate("tray", "tray", "body"), PartTemplate("stop", "component", "body"))
    b = np.array(
        [
            0.0, 0.0, 0.05, 0.4, 0.2, 0.1,
            0.0, 0.0, 0.115, 0.1, 0.08, 0.03,
            0.0615, 0.0, 0.115, 0.02, 0.08, 0.03,
        ]
    )
    A = np.zeros((NP * len(parts), 4))
    A[_row(1, "cx"), 0] = 1.0
    A[_row(1, "cy"), 1] = 1.0
    A[_row(1, "sx"), 2] = 1.0
    A[_row(1, "sz"), 3] = 1.0
    A[_row(1, "cz"), 3] = 0.5
    saturation = {_row(1, "sz"): 0.02, _row(1, "cz"): 0.01}
    constraints = (
        ConstraintSpec("c.contact", "contact", ("tray", "body")),
        ConstraintSpec("c.clear", "clearance", ("tray", "stop"), {"min": 0.001}),
        ConstraintSpec("c.align", "alignment", ("tray", "body"), {"axis": "y"}),
    )
    handles = (
        Handle("h.slide", (0, 2), ("c.contact", "c.clear", "c.align"), (0.0016, 0.0016)),
        Handle("h.width", (2, 3), ("c.clear",), (0.004,)),
        Handle("h.height", (3, 4), ("c.contact",), (0.005,)),
    )
    edges = (SymbolicEdge("e.rest", "contact", ("tray", "body")),)
    return ToyDecoder(parts, A, b, saturation, edges, constraints, handles, name="handles")


CLEARANCE_MIN = 0.01
CLEARANCE_Z0 = 0.009


def clearance_decoder() -> ToyDecoder:
    """One latent: the block's near face sits at x = z, the wall's face at x = 0."""
    parts = (PartTemplate("wall", "boundary"), PartTemplate("block", "component"))
    b = np.array([-0.05, 0.0, 0.05, 0.1, 0.2, 0.1, 0.02, 0.0, 0.05, 0.04, 0.04, 0.04])
    A = np.zeros((2 * NP, 1))
    A[_row(1, "cx"), 0] = 1.0
    constraints = (ConstraintSpec("c.clear", "clearance", ("block", "wall"), {"min": CLEARANCE_MIN}),)
    return ToyDecoder(parts, A, b, constraints=constraints, name="clearance")
