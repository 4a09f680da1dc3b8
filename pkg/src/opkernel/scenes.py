"""The canonical repair fixture: a body with a receiving assembly carrying a tray.

Dimensions are in meters. The receiving assembly's frame is the placement
driver; perturbing it shifts the tray with it.
"""

from __future__ import annotations

from .geometry import Box
from .graph import (
    AnchorNode,
    Assertion,
    EntityNode,
    EvidenceRecord,
    FrameNode,
    InvariantSpec,
    SceneSnapshot,
    make_snapshot,
)

BODY_W, BODY_H, BODY_D = 0.4, 0.2, 0.3
RECV_W, RECV_H, RECV_D = 0.1, 0.02, 0.1
TRAY_W, TRAY_H, TRAY_D = 0.1, 0.03, 0.08
RECV_Z = BODY_H / 2 + RECV_H / 2
TRAY_Z = RECV_H / 2 + TRAY_H / 2
OPENING_AT = (0.02, BODY_D / 2 - 0.0025, 0.0)

SYMPTOM = "assert.tray_align"
DRIVER_FRAME = "frame.recv"
TRAY, BODY, RECV = "entity.tray", "entity.body", "entity.recv"


def repair_scene(axis: str = "x", delta: float = 0.0, registry_fingerprint: str = "") -> SceneSnapshot:
    """Build the fixture with ``frame.recv`` displaced by *delta* along *axis*.

    A nonzero displacement adds the user's report and the violated alignment
    claim that marks the symptom.
    """
    recv_t = [0.0, 0.0, RECV_Z]
    recv_t["xy".index(axis)] = float(delta)
    elements = [
        FrameNode("frame.body", owner=BODY),
        FrameNode(DRIVER_FRAME, tuple(recv_t), parent="frame.body", owner=RECV),
        FrameNode("frame.tray", (0.0, 0.0, TRAY_Z), parent=DRIVER_FRAME, owner=TRAY),
        FrameNode("frame.opening", OPENING_AT, parent="frame.body", owner="entity.opening"),
        EntityNode(BODY, "body", "frame.body", Box(BODY_W, BODY_H, BODY_D)),
        EntityNode(RECV, "assembly", DRIVER_FRAME, Box(RECV_W, RECV_H, RECV_D), parent=BODY),
        EntityNode(TRAY, "tray", "frame.tray", Box(TRAY_W, TRAY_H, TRAY_D), parent=RECV),
        EntityNode("entity.opening", "region", "frame.opening", Box(0.12, 0.08, 0.005), parent=BODY),
        AnchorNode("anchor.opening", "entity.opening", kind="opening"),
        AnchorNode("anchor.body_top", BODY, (0.0, 0.0, BODY_H / 2), kind="surface"),
        EvidenceRecord("ev.cad.import", "import", {"document": "cad/receiver-assembly"}, 1.0, 0),
        Assertion("assert.tray_attach", "attachment", (TRAY, DRIVER_FRAME), "supported", evidence=("ev.cad.import",)),
        Assertion("assert.recv_mount", "attachment", (DRIVER_FRAME, "frame.body"), "supported", evidence=("ev.cad.import",)),
        Assertion("assert.recv_support", "support", (RECV, BODY), "supported", evidence=("ev.cad.import",)),
        InvariantSpec("inv.frames", "frame-forest"),
        InvariantSpec("inv.attach.tray", "attachment-preserved", ("frame.tray", DRIVER_FRAME)),
        InvariantSpec("inv.attach.recv", "attachment-preserved", (DRIVER_FRAME, "frame.body")),
        InvariantSpec("inv.overlap.tray", "no-overlap", (TRAY, BODY)),
        InvariantSpec("inv.overlap.recv", "no-overlap", (RECV, BODY)),
        InvariantSpec("inv.contain.recv", "containment", (RECV, BODY), {"axes": "xy"}),
        InvariantSpec("inv.contain.tray", "containment", (TRAY, BODY), {"axes": "xy"}),
    ]
    if delta != 0.0:
        elements += [
            EvidenceRecord(
                "ev.user.report",
                "user-declaration",
                {"note": "tray sits off-center", "subject": TRAY, "reference": BODY},
                0.8,
                1,
            ),
            Assertion(SYMPTOM, "alignment", (TRAY, BODY), "violated", evidence=("ev.user.report",)),
        ]
    return make_snapshot(elements, registry_fingerprint)
