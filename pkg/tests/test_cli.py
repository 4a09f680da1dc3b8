import json
from dataclasses import replace

import pytest

from opkernel import _canon
from opkernel.actuators import ActuatorInvocation
from opkernel.causal import CENTER_ON_PARENT, candidate_ref
from opkernel.cli import main
from opkernel.config import Config, dumps_config, load_config
from opkernel.errors import SceneFormatError
from opkernel.graph import dumps_scene, loads_scene
from opkernel.scenes import DRIVER_FRAME, TRAY, repair_scene


def _scene_file(tmp_path, snap=None, edit=None):
    d = json.loads(dumps_scene(snap or repair_scene("x", 0.03)))
    if edit:
        edit(d)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(d))
    return str(path)


def _frame(d, fid):
    return next(f for f in d["frames"] if f["id"] == fid)


def _request(tmp_path, inv, **extra):
    path = tmp_path / "request.json"
    path.write_text(_canon.dumps({"invocation": inv.to_dict(), **extra}))
    return str(path)


def _upstream(value=0.0):
    return ActuatorInvocation(
        "inv.cli",
        "set_frame_offset",
        "model",
        2,
        {"frame": DRIVER_FRAME, "axis": "x", "value": value},
        evidence=("ev.user.report",),
        backend_candidate=candidate_ref(CENTER_ON_PARENT.alt_id, DRIVER_FRAME, "x"),
        value_alternative=CENTER_ON_PARENT.alt_id,
        review=True,
    )


def test_scene_validate(tmp_path, capsys):
    assert main(["scene", "validate", _scene_file(tmp_path)]) == 0
    assert '"valid":true' in capsys.readouterr().out


@pytest.mark.parametrize(
    "edit, named",
    [
        (lambda d: _frame(d, "frame.tray").update(parent="frame.ghost"), "frame.ghost"),
        (lambda d: _frame(d, "frame.body").update(parent="frame.tray"), "cycle"),
        (lambda d: d.update(version="hylos-scene/0"), "version"),
    ],
)
def test_scene_validate_names_the_broken_invariant(tmp_path, capsys, edit, named):
    assert main(["scene", "validate", _scene_file(tmp_path, edit=edit)]) == 1
    assert named in capsys.readouterr().err


def test_scene_validate_rejects_garbage(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{")
    assert main(["scene", "validate", str(path)]) == 1
    assert main(["scene", "validate", str(tmp_path / "missing.json")]) == 1


def test_scene_show_canonical_round_trip(capsys):
    assert main(["scene", "show", "--axis", "y", "--delta", "0.01", "--canonical"]) == 0
    assert capsys.readouterr().out == dumps_scene(repair_scene("y", 0.01))


def test_txn_run_commits_and_writes_scene(tmp_path, capsys):
    out = tmp_path / "after.json"
    req = _request(tmp_path, _upstream())
    assert main(["txn", "run", req, "--scene", _scene_file(tmp_path), "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["outcome"] == "committed"
    assert loads_scene(out.read_text()).frames[DRIVER_FRAME].translation[0] == 0.0


def test_txn_exit_codes(tmp_path):
    scene = _scene_file(tmp_path)
    no_candidate = replace(_upstream(), backend_candidate=None)
    assert main(["txn", "propose", _request(tmp_path, no_candidate), "--scene", scene]) == 3
    assert main(["txn", "run", _request(tmp_path, no_candidate), "--scene", scene]) == 3
    far = ActuatorInvocation("inv.far", "move_entity", "model", 1, {"entity": TRAY, "axis": "x", "delta": 1.0}, review=True)
    assert main(["txn", "run", _request(tmp_path, far), "--scene", scene]) == 4
    assert main(["txn", "propose", _request(tmp_path, _upstream()), "--scene", scene]) == 0


def test_replay_single_scenario_exit_codes(capsys):
    assert main(["replay", "run", "--scenario", "s.x.+030.alt.noprobe", "--condition", "contract-bounded+alternatives"]) == 0
    assert main(["replay", "run", "--scenario", "s.x.+030.noalt.noprobe", "--condition", "contract-bounded"]) == 2
    assert main(["replay", "run", "--scenario", "s.nowhere"]) == 1
    capsys.readouterr()


def test_log_verify_and_metrics(tmp_path, capsys):
    log, metrics = tmp_path / "run.jsonl", tmp_path / "m.txt"
    args = ["replay", "run", "--scenario", "s.y.-010.alt.probe", "--condition", "contract-bounded+alternatives"]
    assert main(args + ["--log", str(log), "--metrics", str(metrics)]) == 0
    assert main(["log", "verify", str(log)]) == 0
    capsys.readouterr()
    assert main(["metrics", "report", str(log)]) == 0
    assert "condition.contract-bounded+alternatives.n: 1" in capsys.readouterr().out

    lines = log.read_text().splitlines(keepends=True)
    lines[1] = lines[1].replace('"kind":"request"', '"kind":"requests"')
    bad = tmp_path / "bad.jsonl"
    bad.write_text("".join(lines))
    assert main(["log", "verify", str(bad)]) == 1
    assert '"ok":false' in capsys.readouterr().out
    assert main(["metrics", "report", str(bad)]) == 1


def test_model_native_commands(capsys):
    assert main(["repair", "optimize"]) == 0
    assert main(["guardrail", "decode"]) == 0
    assert main(["guardrail", "decode", "--world", "conflict", "--strategy", "halt"]) == 2
    assert main(["guardrail", "decode", "--world", "conflict", "--strategy", "capability-gap"]) == 3
    assert main(["guardrail", "decode", "--cap", "0"]) == 2
    assert main(["artifact", "ingest", "--fixture", "consistent"]) == 0
    assert main(["artifact", "ingest", "--fixture", "checkerless"]) == 3
    assert main(["artifact", "ingest", "--fixture", "contradicted"]) == 2
    capsys.readouterr()


def test_artifact_export_then_ingest_file(tmp_path, capsys):
    assert main(["artifact", "export", "consistent"]) == 0
    path = tmp_path / "art.json"
    path.write_text(capsys.readouterr().out)
    assert main(["artifact", "ingest", "--file", str(path)]) == 0
    path.write_text("{}")
    assert main(["artifact", "ingest", "--file", str(path)]) == 1


# ---------------------------------------------------------------- config


def test_config_round_trip(tmp_path):
    cfg = replace(Config(), seed=11, deltas=(0.02,), probe_noise=0.001)
    path = tmp_path / "c.json"
    path.write_text(dumps_config(cfg))
    again = load_config(path)
    assert again == cfg and again.digest == cfg.digest
    assert Config().digest != cfg.digest


@pytest.mark.parametrize("bad", [{"dead_end_strategy": "pray"}, {"deltas": (0.0,)}, {"axes": ("z",)}])
def test_config_rejects_bad_values(bad):
    with pytest.raises(SceneFormatError):
        replace(Config(), **bad)


def test_config_file_errors(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text("not json")
    with pytest.raises(SceneFormatError):
        load_config(path)
    assert main(["replay", "run", "--config", str(path)]) == 1
    assert "error" in capsys.readouterr().err
