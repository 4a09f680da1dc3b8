import math
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opkernel import _canon
from opkernel.errors import InvariantBreakingStructure, SceneFormatError, UnknownRef
from opkernel.geometry import Box
from opkernel.graph import (
    EntityNode,
    EvidenceRecord,
    FrameNode,
    InvariantSpec,
    PoseCache,
    Put,
    Remove,
    SetField,
    check_invariant,
    dumps_scene,
    loads_scene,
    make_snapshot,
    canonicalize_scene_text,
    resolve_ref,
    scene_digest,
    snapshot_commit,
    snapshot_to_dict,
    world_pose,
)
from opkernel.scenes import TRAY, repair_scene

from oracles import chain_matrix, pose_matrix

FIXTURES = Path(__file__).parent / "fixtures"
Z90 = (math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4))


def test_resolve_ref_examples():
    snap = repair_scene("x", 0.01)
    hit = resolve_ref(snap, "frame.recv")
    assert hit.kind == "frame" and hit.element.frame_id == "frame.recv"
    with pytest.raises(UnknownRef):
        resolve_ref(snap, "")
    # drop the tray and everything that names it
    gone = snapshot_commit(
        snap,
        [Remove(k) for k in ("inv.overlap.tray", "inv.contain.tray", "assert.tray_attach", "assert.tray_align")]
        + [Remove(TRAY), SetField("frame.tray", "owner", None)],
    )
    with pytest.raises(UnknownRef):
        resolve_ref(gone, TRAY)


def test_world_pose_examples():
    snap = make_snapshot(
        [
            FrameNode("f.root"),
            FrameNode("f.a", (1.0, 0.0, 0.0), parent="f.root"),
            FrameNode("f.b", (0.0, 2.0, 0.0), parent="f.a"),
            FrameNode("f.rot", rotation=Z90),
            FrameNode("f.rt", (1.0, 0.0, 0.0), parent="f.rot"),
        ]
    )
    root = world_pose(snap, "f.root")
    assert root.translation == (0.0, 0.0, 0.0) and root.rotation == (1.0, 0.0, 0.0, 0.0)
    assert world_pose(snap, "f.b").translation == pytest.approx((1.0, 2.0, 0.0))
    rt = world_pose(snap, "f.rt")
    assert rt.translation == pytest.approx((0.0, 1.0, 0.0), abs=1e-15)
    assert rt.rotation == pytest.approx(Z90)


def _two_boxes(gap):
    return make_snapshot(
        [
            FrameNode("f.a"),
            FrameNode("f.b", (0.1 + gap, 0.0, 0.0)),
            EntityNode("e.a", "assembly", "f.a", Box(0.1, 0.1, 0.1)),
            EntityNode("e.b", "assembly", "f.b", Box(0.1, 0.1, 0.1)),
        ]
    )


def test_check_invariant_examples():
    apart = _two_boxes(0.005)
    assert check_invariant(apart, InvariantSpec("i", "clearance-min", ("e.a", "e.b"), {"min": 0.001}))
    coincident = _two_boxes(-0.1)
    res = check_invariant(coincident, InvariantSpec("i", "no-overlap", ("e.a", "e.b")))
    assert not res and "overlap" in res.detail

    snap = repair_scene("x", 0.01)
    spec = snap.protected_invariants["inv.attach.tray"]
    moved = snapshot_commit(snap, [SetField("frame.recv", "translation.x", 0.0)])
    assert snap.frames["frame.tray"].parent == moved.frames["frame.tray"].parent == "frame.recv"
    assert check_invariant(moved, spec)
    with pytest.raises(UnknownRef):
        check_invariant(snap, InvariantSpec("i", "no-overlap", ("e.nope", TRAY)))


def test_snapshot_commit_examples():
    snap = repair_scene("x", 0.01)
    same = snapshot_commit(snap, [])
    assert same.digest == snap.digest
    assert same.parent_snapshot == snap.snapshot_id and same.snapshot_id != snap.snapshot_id

    fixed = snapshot_commit(snap, [SetField("frame.recv", "translation.x", 0.0)])
    tray = world_pose(fixed, "frame.tray").translation
    body = world_pose(fixed, "frame.body").translation
    assert tray[0] - body[0] == 0.0 and tray[1] - body[1] == 0.0

    with pytest.raises(InvariantBreakingStructure):
        snapshot_commit(snap, [SetField("frame.body", "parent", "frame.tray")])
    with pytest.raises(UnknownRef):
        snapshot_commit(snap, [SetField("frame.nope", "parent", None)])


def test_parent_unchanged_after_commit():
    snap = repair_scene("y", -0.02)
    text, digest = dumps_scene(snap), snap.digest
    pose = world_pose(snap, "frame.tray")
    snapshot_commit(snap, [SetField("frame.recv", "translation.y", 0.0)])
    assert dumps_scene(snap) == text and snap.digest == digest
    assert world_pose(snap, "frame.tray") == pose
    with pytest.raises(TypeError):
        snap.frames["frame.x"] = FrameNode("frame.x")


@pytest.mark.parametrize("axis,delta", [("x", 0.0), ("x", 0.01), ("y", -0.0037)])
def test_round_trip_is_canonical(axis, delta):
    text = dumps_scene(repair_scene(axis, delta))
    assert dumps_scene(loads_scene(text)) == text
    assert canonicalize_scene_text(text) == text


def test_fixture_file_round_trip():
    text = (FIXTURES / "repair_scene.json").read_text()
    assert dumps_scene(loads_scene(text)) == canonicalize_scene_text(text)


def test_numbers_keep_seventeen_digits():
    snap = repair_scene("x", 0.1 + 0.2)
    back = loads_scene(dumps_scene(snap))
    assert back.frames["frame.recv"].translation[0] == 0.1 + 0.2


def test_loader_rejects_bad_scenes():
    data = snapshot_to_dict(repair_scene())
    with pytest.raises(SceneFormatError):
        loads_scene("{not json")
    for mutate in (
        lambda d: d.update(version="hylos-scene/0"),
        lambda d: d["frames"][0].update(parent="frame.tray"),  # frame.body under its own descendant
        lambda d: d["entities"][0]["geometry"].update(w=0.0),
        lambda d: d["assertions"][0].update(evidence=[]),
    ):
        bad = snapshot_to_dict(repair_scene())
        mutate(bad)
        with pytest.raises(SceneFormatError):
            loads_scene(_canon.dumps(bad))
    assert data["version"] == "hylos-scene/1"


def test_scene_digest_ignores_evidence_only():
    a = repair_scene("x", 0.01)
    b = snapshot_commit(a, [Put(EvidenceRecord("ev.more", "sensor", {}, 0.5, 7))])
    assert scene_digest(a) == scene_digest(b) and a.digest != b.digest


@given(st.integers(0, 2**32 - 1), st.sampled_from(["x", "y"]), st.floats(-0.05, 0.05))
def test_digest_ignores_element_order(seed, axis, delta):
    snap = repair_scene(axis, delta)
    elements = [el for name in ("entities", "frames", "anchors", "assertions", "evidence", "protected_invariants") for el in snap.collection(name).values()]
    random.Random(seed).shuffle(elements)
    shuffled = make_snapshot(elements)
    assert shuffled.digest == snap.digest and shuffled == snap


@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
def test_digest_separates_different_content(d1, d2):
    a, b = repair_scene("x", d1), repair_scene("x", d2)
    assert (a.digest == b.digest) == (a == b)


unit = st.floats(-1.0, 1.0, allow_nan=False)


@st.composite
def links(draw):
    n = draw(st.integers(1, 6))
    out = []
    for _ in range(n):
        t = tuple(draw(st.floats(-2.0, 2.0)) for _ in range(3))
        q = np.array([draw(unit) for _ in range(4)])
        if np.linalg.norm(q) < 1e-3:
            q = np.array([1.0, 0.0, 0.0, 0.0])
        q = tuple(float(c) for c in q / np.linalg.norm(q))
        out.append((t, q))
    return out


@given(links())
def test_incremental_pose_matches_full_chain(chain):
    frames = []
    for i, (t, q) in enumerate(chain):
        frames.append(FrameNode(f"f.{i}", t, q, parent=f"f.{i - 1}" if i else None))
    snap = make_snapshot(frames)
    cache = PoseCache(snap)
    for i in range(len(chain)):
        cache(f"f.{i}")
    leaf = f"f.{len(chain) - 1}"
    inc, full = cache(leaf), world_pose(snap, leaf)
    assert np.allclose(inc.translation, full.translation, rtol=0, atol=1e-12)
    assert np.allclose(inc.rotation, full.rotation, rtol=0, atol=1e-12)
    M = chain_matrix(chain)
    assert np.allclose(M[:3, 3], full.translation, atol=1e-9)
    assert np.allclose(pose_matrix(full.translation, full.rotation), M, atol=1e-9)
