from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opkernel.artifact import fixtures
from opkernel.artifact.checks import ADAPTERS, DEFAULT_CHECKERS, cycle_disagreement, gsc, intended_structure
from opkernel.artifact.decoder import (
    edit_grid,
    fd_handle_jacobian,
    gamma_hip,
    handle_jacobian,
    handle_valid,
    preserves,
)
from opkernel.artifact.ingest import artifact_runtime, ingest
from opkernel.artifact.model import (
    ConstraintSpec,
    Handle,
    check_artifact,
    dumps_artifact,
    loads_artifact,
)
from opkernel.artifact.repair import latent_repair
from opkernel.errors import MalformedArtifact, NonFinite
from opkernel.kernel import Kernel
from opkernel.scenes import repair_scene

from oracles import proximal_clearance, second_order_envelope

DEC = fixtures.handle_decoder()
Z0 = np.zeros(DEC.latent_dim)


def _kernel():
    return Kernel(repair_scene(), artifact_runtime())


# ---------------------------------------------------------------- consistency score


def test_gsc_examples():
    assert gsc(fixtures.consistent_artifact()).value == 1.0
    floating = gsc(fixtures.contradicted_artifact())
    assert floating.value == 0.5 and floating.violated == ("c.contact",)
    skipped = gsc(fixtures.checkerless_artifact())
    assert skipped.value == 1.0 and skipped.excluded == ("c.symmetry",)
    assert gsc(fixtures.consistent_artifact(), {}).value is None


def test_gsc_four_constraints():
    art = fixtures.consistent_artifact()
    extra = (
        ConstraintSpec("c.align_y", "alignment", ("tray", "body"), {"axis": "y"}),
        ConstraintSpec("c.clear", "clearance", ("tray", "body"), {"min": 0.0}),
    )
    assert gsc(replace(art, constraints=art.constraints + extra)).value == 1.0
    # the tray sits 2 cm off center in y: one of four fails
    tray = art.geometry[1]
    shifted = replace(tray, translation=(0.0, 0.02, tray.translation[2]))
    assert gsc(replace(art, geometry=(art.geometry[0], shifted), constraints=art.constraints + extra)).value == 0.75


# ---------------------------------------------------------------- ingestion


def test_ingest_examples():
    k = _kernel()
    ok = ingest(fixtures.consistent_artifact(), k)
    assert ok.outcome == "committed" and ok.gsc.value == 1.0
    assert {"entity.tray_on_body.body", "entity.tray_on_body.tray"} <= set(k.head.entities)
    contact = k.head.assertions["assert.tray_on_body.c.contact"]
    assert contact.status == "supported" and contact.evidence

    gap = ingest(fixtures.checkerless_artifact(), _kernel())
    assert gap.outcome == "capability-gap" and gap.submission.txn.gap == "missing-verification"

    k = _kernel()
    before = k.head
    bad = ingest(fixtures.contradicted_artifact(), k)
    assert bad.outcome == "review" and k.head is before


def test_unreviewed_ingestion_is_refused():
    k = _kernel()
    res = ingest(fixtures.consistent_artifact(), k, review=False)
    assert res.outcome != "committed" and k.head.digest == k.initial.digest


@pytest.mark.parametrize("make", [fixtures.consistent_artifact, fixtures.checkerless_artifact, fixtures.contradicted_artifact])
def test_only_committed_ingestion_changes_the_scene(make):
    k = _kernel()
    res = ingest(make(), k)
    added = set(k.head.entities) - set(k.initial.entities)
    if res.outcome == "committed":
        assert added
    else:
        assert not added and k.head.digest == k.initial.digest


# ---------------------------------------------------------------- handles


def test_handle_jacobian_examples():
    corner = (1.0, 1.0, 1.0)
    slide = handle_jacobian(DEC, Z0, DEC.handle("h.slide"), "tray", corner)
    np.testing.assert_array_equal(slide, [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    width = DEC.handle("h.width")
    np.testing.assert_array_equal(handle_jacobian(DEC, Z0, width, "tray", corner), [[0.5], [0.0], [0.0]])
    np.testing.assert_array_equal(handle_jacobian(DEC, Z0, width, "tray", (-1.0, 0.0, 0.0)), [[-0.5], [0.0], [0.0]])
    # the stop block is not driven by any latent
    np.testing.assert_array_equal(handle_jacobian(DEC, Z0, width, "stop", corner), np.zeros((3, 1)))
    # at z = 0 both saturating rows have unit slope: 0.5 from the center, 0.5 from the top face
    np.testing.assert_allclose(handle_jacobian(DEC, Z0, DEC.handle("h.height"), "tray", corner), [[0.0], [0.0], [1.0]])


def test_zero_step_handle_has_trivial_grid():
    still = Handle("h.still", (0, 1))
    assert all(not dh.any() for dh in edit_grid(still))


def test_handle_valid_examples():
    width = DEC.handle("h.width")
    slide = DEC.handle("h.slide")
    assert handle_valid(DEC, Z0, width, [0.0])
    # half a meter wider pushes the +x face straight through the stop
    assert not handle_valid(DEC, Z0, width, [0.5])
    # 1.5 mm from the stop with 1 mm required: 0.4 mm is fine, 1 mm is not
    assert handle_valid(DEC, Z0, slide, [0.0004, 0.0])
    assert not handle_valid(DEC, Z0, slide, [0.001, 0.0])
    assert handle_valid(DEC, Z0, slide, [-0.001, 0.0])


def test_gamma_examples():
    rep = gamma_hip(DEC, Z0)
    # slide x: only the two moves away from the stop keep 1 mm; slide y: the 0.8 mm moves stay aligned
    # width: only narrowing keeps clearance; height: the compensated center keeps contact at every size
    assert rep.per_handle == {"h.slide": (4, 8), "h.width": (2, 4), "h.height": (4, 4)}
    assert rep.value == pytest.approx(10 / 16)
    assert gamma_hip(DEC, Z0, ()).value is None


def test_first_order_and_full_check_agree_on_affine_handles():
    for hid in ("h.slide", "h.width"):
        h = DEC.handle(hid)
        for dh in edit_grid(h):
            assert handle_valid(DEC, Z0, h, dh) == preserves(DEC, Z0, h, dh)


latents = st.lists(st.floats(-0.03, 0.03), min_size=4, max_size=4).map(np.array)
corners = st.tuples(*[st.sampled_from([-1.0, 0.0, 1.0])] * 3)


@given(latents, st.sampled_from(["h.slide", "h.width", "h.height"]), corners)
def test_analytic_jacobian_matches_finite_differences(z, hid, u):
    h = DEC.handle(hid)
    J = handle_jacobian(DEC, z, h, "tray", u)
    np.testing.assert_allclose(J, fd_handle_jacobian(DEC, z, h, "tray", u, 1e-6), atol=1e-7)


@given(latents, corners, st.floats(-1.0, 1.0), st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_linearization_error_within_curvature_envelope(z, u, direction, s):
    h = DEC.handle("h.height")
    d = np.zeros(DEC.latent_dim)
    d[3] = direction
    x0 = DEC.surface_point(z, "tray", u)
    x1 = DEC.surface_point(z + s * d, "tray", u)
    lin = handle_jacobian(DEC, z, h, "tray", u) @ d[3:4]
    residual = float(np.linalg.norm(x1 - x0 - s * lin))
    bound = second_order_envelope(DEC.A, DEC.saturation, DEC.index["tray"], u, d) * s * s
    assert residual <= bound + 1e-15


# ---------------------------------------------------------------- latent repair


def test_repair_leaves_feasible_latent_alone():
    dec = fixtures.clearance_decoder()
    res = latent_repair(dec, np.array([0.02]))
    assert res.z[0] == 0.02 and res.iterations == 0 and res.max_violation == 0.0


def test_repair_one_dimensional_clearance():
    dec = fixtures.clearance_decoder()
    res = latent_repair(dec, np.array([fixtures.CLEARANCE_Z0]), lam=10.0, beta=0.1)
    assert res.max_violation <= 1e-6
    iterates = proximal_clearance(fixtures.CLEARANCE_Z0, fixtures.CLEARANCE_MIN, 10.0, 0.1, tol=1e-6)
    assert float(res.z[0]) == pytest.approx(iterates[-1], abs=1e-6)
    assert fixtures.CLEARANCE_Z0 < float(res.z[0]) <= fixtures.CLEARANCE_MIN


def test_repair_without_constraint_weight_does_nothing():
    dec = fixtures.clearance_decoder()
    res = latent_repair(dec, np.array([fixtures.CLEARANCE_Z0]), lam=0.0)
    assert res.z[0] == fixtures.CLEARANCE_Z0
    assert res.max_violation == pytest.approx(fixtures.CLEARANCE_MIN - fixtures.CLEARANCE_Z0)


def test_repair_rejects_non_finite_input():
    with pytest.raises(NonFinite):
        latent_repair(fixtures.clearance_decoder(), np.array([np.nan]))


@given(st.floats(-0.02, 0.0095), st.sampled_from([1.0, 10.0, 100.0]), st.sampled_from([0.01, 0.1, 1.0]))
def test_repair_objective_never_increases(z0, lam, beta):
    res = latent_repair(fixtures.clearance_decoder(), np.array([z0]), lam=lam, beta=beta)
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


# ---------------------------------------------------------------- cycle consistency


def test_cycle_disagreement_examples():
    assert cycle_disagreement(fixtures.consistent_artifact()) == {"display": 0.0, "sim-contact": 0.0}

    # the boxes touch but the symbolic graph forgot to say so
    art = replace(fixtures.consistent_artifact(), edges=())
    size = intended_structure(art).size
    assert size == 4
    assert cycle_disagreement(art) == {"display": 1 / size, "sim-contact": 0.0}

    # the graph claims contact the geometry does not show
    floating = fixtures.contradicted_artifact()
    d = cycle_disagreement(floating)
    assert d["display"] > 0.0 and d["sim-contact"] == 0.0


def test_cycle_disagreement_counts_lossy_adapter():
    project, recover = ADAPTERS["sim-contact"]
    lossy = {"lossy": (lambda a: {**project(a), "contacts": []}, recover)}
    art = fixtures.consistent_artifact()
    assert cycle_disagreement(art, ("lossy",), lossy) == {"lossy": 1 / intended_structure(art).size}


# ---------------------------------------------------------------- format


def test_artifact_round_trip():
    for make in (fixtures.consistent_artifact, fixtures.checkerless_artifact):
        art = make()
        text = dumps_artifact(art)
        assert loads_artifact(text) == art and dumps_artifact(loads_artifact(text)) == text
    decoded = DEC.decode(Z0)
    assert loads_artifact(dumps_artifact(decoded)).digest == decoded.digest


def test_malformed_artifacts():
    art = fixtures.consistent_artifact()
    with pytest.raises(MalformedArtifact):
        check_artifact(replace(art, constraints=(ConstraintSpec("c.bad", "contact", ("tray", "lid")),)))
    with pytest.raises(MalformedArtifact):
        check_artifact(replace(art, uncertainty={"tray": 1.5}))
    with pytest.raises(MalformedArtifact):
        loads_artifact("{not json")
    with pytest.raises(MalformedArtifact):
        loads_artifact(dumps_artifact(art).replace("hylos-artifact/1", "hylos-artifact/9"))


def test_default_checkers_cover_constraint_kinds():
    assert {"contact", "clearance", "alignment"} <= set(DEFAULT_CHECKERS)
