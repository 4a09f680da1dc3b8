from dataclasses import replace

import pytest

from opkernel.bench.metrics import condition_metrics, fmt, format_report, score
from opkernel.bench.replay import CONDITIONS, CRITERIA, ReplayResult, replay, run_family
from opkernel.bench.scenarios import CENTER_ALT, build_scenarios
from opkernel.config import Config
from opkernel.kernel import EXIT_CODES
from opkernel.scenes import DRIVER_FRAME

FAMILY = build_scenarios()
BY_ID = {s.scenario_id: s for s in FAMILY}


def _pick(axis="x", delta=0.03, alts=True, probe=False):
    return next(
        s
        for s in FAMILY
        if s.axis == axis and s.delta == delta and bool(s.alternatives) == alts and bool(s.probes) == probe and not s.control
    )


def test_golden_family_shape():
    assert len(FAMILY) == 50
    controls = [s for s in FAMILY if s.control]
    assert len(controls) == 2 and all(s.delta == 0.0 for s in controls)
    assert len({s.scenario_id for s in FAMILY}) == 50
    assert sorted({s.delta for s in FAMILY if not s.control}) == [-0.05, -0.03, -0.01, 0.01, 0.03, 0.05]
    assert build_scenarios() == FAMILY


def test_under_supported_means_no_center_alternative():
    for s in FAMILY:
        assert s.under_supported == (not s.control and CENTER_ALT not in s.alternatives)
    assert sum(s.under_supported for s in FAMILY) == 24


def test_scenario_records_carry_labels_but_requests_do_not():
    sc = _pick(alts=False)
    assert "under_supported" in sc.to_dict()
    run = replay(sc, "contract-bounded")
    for text in run.result.exposure:
        for leak in ("under_supported", "expected_actuator", "expected_target", sc.scenario_id.split(".")[-2]):
            assert leak not in text


# ---------------------------------------------------------------- replay


def test_supported_scenario_with_alternatives_commits():
    sc = _pick("y", -0.05)
    res = replay(sc, "contract-bounded+alternatives").result
    assert res.outcome == "committed" and res.success and all(res.criteria)
    assert res.actuator == "set_frame_offset" and res.target == DRIVER_FRAME
    assert all(abs(v) <= 1e-3 for v in res.post_offset.values())


def test_scenario_without_alternatives_defers():
    sc = _pick(alts=False)
    for cond in ("contract-bounded", "contract-bounded+alternatives"):
        res = replay(sc, cond).result
        assert res.deferred and res.outcome == "deferred" and res.exit_code == 2 and not res.success


def test_direct_edit_patches_the_symptom():
    res = replay(_pick(), "direct-edit").result
    assert res.actuator == "move_entity" and not res.criteria[0] and not res.success


def test_acquisition_condition_records_evidence():
    sc = _pick(probe=True)
    run = replay(sc, "contract-bounded+acquisition")
    assert run.result.acquisitions == 1 and run.gaps == []
    assert replay(_pick(probe=False), "contract-bounded+acquisition").result.acquisitions == 0


def test_unknown_condition():
    with pytest.raises(ValueError):
        replay(_pick(), "vibes")


def test_result_round_trip():
    res = replay(_pick(), "contract-bounded+alternatives").result
    assert ReplayResult.from_dict(res.to_dict()) == res


def test_family_replay_is_deterministic():
    subset = FAMILY[:6]
    a = run_family(subset, seed=3)
    b = run_family(subset, seed=3)
    assert a == b
    assert len(a[0]) == len(subset) * len(CONDITIONS)


# ---------------------------------------------------------------- scoring


def _result(sid, condition="contract-bounded", **kw):
    base = dict(
        scenario_id=sid,
        condition=condition,
        deferred=False,
        selected="cand",
        actuator="set_frame_offset",
        target=DRIVER_FRAME,
        outcome="committed",
        status="matched",
        gap=None,
        criteria=(True,) * len(CRITERIA),
        success=True,
        post_offset={},
        effect_counts={"matched": 1},
    )
    base.update(kw)
    if base["deferred"]:
        base.update(outcome="deferred", success=False, effect_counts={})
    return ReplayResult(**base)


def test_score_examples():
    sup = [s.scenario_id for s in FAMILY if s.supported]
    uns = [s.scenario_id for s in FAMILY if s.under_supported]
    ctl = [s.scenario_id for s in FAMILY if s.control]
    results = [
        _result(sup[0]),
        _result(sup[1]),
        _result(sup[2], outcome="review", success=False, effect_counts={"matched": 1, "unexpected": 1}),
        _result(uns[0], deferred=True),
        _result(uns[1], outcome="committed", success=False),
        _result(uns[2], outcome="committed", success=False),
        _result(ctl[0], deferred=True),
    ]
    m = condition_metrics(results, BY_ID)
    assert m.n == 6 and m.cra == pytest.approx(2 / 6)
    # the only scored deferral is under-supported; the control deferral does not count
    assert m.dp == 1.0 and m.deferral_rate == pytest.approx(1 / 6)
    assert m.tcs == pytest.approx(4 / 5)
    assert m.precision == pytest.approx(5 / 6) and m.recall == 1.0

    supported_only = condition_metrics(results[:3], BY_ID)
    assert supported_only.cra == pytest.approx(2 / 3) and supported_only.dp is None


def test_undefined_denominators():
    m = condition_metrics([], BY_ID)
    assert m.cra is None and m.dp is None and m.tcs is None and m.precision is None
    assert fmt(None) == "undefined" and m.to_dict()["cra"] is None


def test_report_text_is_stable():
    results, _ = run_family(FAMILY[:4], ("contract-bounded", "contract-bounded+alternatives"))
    rep = score(results, FAMILY, header={"seed": "0"})
    text = format_report(rep)
    assert text == format_report(score(results, FAMILY, header={"seed": "0"}))
    assert text.startswith("format: hylos-metrics/1\n") and "seed: 0" in text
    assert set(rep.per_condition) == {"contract-bounded", "contract-bounded+alternatives"}


def test_outcome_exit_codes():
    assert EXIT_CODES == {"committed": 0, "review": 2, "capability-gap": 3, "rolled-back": 4}
    assert _result("s").exit_code == 0 and _result("s", deferred=True).exit_code == 2


def test_config_changes_family():
    small = build_scenarios(replace(Config(), deltas=(0.01,), controls=False))
    assert len(small) == 8
