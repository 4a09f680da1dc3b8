"""Command-line entry point.

Exit codes follow the transaction outcomes: 0 committed (or success), 1 error
or verification failure, 2 review or deferral, 3 capability gap, 4 rolled back.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _canon
from .actuators import ActuatorInvocation
from .artifact import fixtures
from .artifact.checks import cycle_disagreement, gsc
from .artifact.decoder import gamma_hip
from .artifact.ingest import artifact_runtime, ingest
from .artifact.model import GeneratedSpatialArtifact, dumps_artifact, loads_artifact
from .artifact.repair import latent_repair
from .bench import CONDITIONS, build_scenarios, format_report, run_family, score
from .bench.replay import FULL_LIBRARY, ReplayResult, replay_log_text
from .causal import AlternativeLibrary
from .config import Config, load_config
from .errors import KernelError
from .graph import InvariantSpec, dumps_scene, loads_scene, validate_snapshot
from .guardrail import conflict_world, decode, tower_p0, tower_world, uniform_p0
from .kernel import EXIT_CODES, Kernel, admit, verify_replay_text
from .realize import default_runtime
from .scenes import repair_scene

WORLDS = {"tower": (tower_world, tower_p0), "conflict": (conflict_world, lambda: uniform_p0)}
ARTIFACTS = {
    "consistent": fixtures.consistent_artifact,
    "checkerless": fixtures.checkerless_artifact,
    "contradicted": fixtures.contradicted_artifact,
}
DECODE_EXIT = {"complete": 0, "length-capped": 2, "capability-gap": 3}


def _out(obj) -> None:
    print(_canon.dumps(obj))


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _scene(path: Optional[str]):
    return repair_scene() if path is None else loads_scene(_read(path))


def _config(path: Optional[str]) -> Config:
    return Config() if path is None else load_config(path)


# ---------------------------------------------------------------- scene


def cmd_scene_validate(args) -> int:
    snap = loads_scene(_read(args.file))  # structural problems raise with the first one named
    problems = validate_snapshot(snap)
    if problems:
        print(problems[0], file=sys.stderr)
        return 1
    _out({"valid": True, "snapshot": snap.snapshot_id})
    return 0


def cmd_scene_show(args) -> int:
    if args.file:
        snap = loads_scene(_read(args.file))
    else:
        snap = repair_scene(args.axis, args.delta)
    if args.canonical:
        sys.stdout.write(dumps_scene(snap))
        return 0
    _out({name: sorted(snap.collection(name)) for name in ("entities", "frames", "anchors", "assertions", "evidence", "protected_invariants")})
    return 0


# ---------------------------------------------------------------- transactions


def _txn_request(path: str):
    data = _canon.loads(_read(path))
    inv = ActuatorInvocation.from_dict(data["invocation"])
    pre = tuple(InvariantSpec.from_dict(p) for p in data.get("preconditions", ()))
    protected = data.get("protected")
    return inv, pre, None if protected is None else tuple(protected), tuple(data.get("validators", ()))


def _kernel(scene_path: Optional[str]) -> Kernel:
    runtime = artifact_runtime(default_runtime(alternatives=AlternativeLibrary(FULL_LIBRARY)))
    return Kernel(_scene(scene_path), runtime)


def cmd_txn_propose(args) -> int:
    kernel = _kernel(args.scene)
    inv, pre, protected, validators = _txn_request(args.request)
    txn = kernel.propose(inv, pre, protected, validators)
    adm = admit(txn, kernel.head, kernel.runtime)
    _out({"admitted": adm.admitted, "predicate": adm.predicate, "gap": adm.gap, "detail": adm.detail})
    if adm.admitted:
        return 0
    return EXIT_CODES["capability-gap"] if adm.gap else EXIT_CODES["review" if adm.predicate == "Pre" else "rolled-back"]


def cmd_txn_run(args) -> int:
    kernel = _kernel(args.scene)
    inv, pre, protected, validators = _txn_request(args.request)
    sub = kernel.run(inv, preconditions=pre, protected=protected, validators=validators)
    _out({"outcome": sub.outcome, "txn": sub.txn.to_dict(), "entry": sub.entry.to_dict()})
    if args.out and sub.outcome == "committed":
        Path(args.out).write_text(dumps_scene(kernel.head))
    return sub.exit_code


# ---------------------------------------------------------------- replay and metrics


def _artifact_summaries():
    art = {k: f() for k, f in ARTIFACTS.items()}
    gsc_values = {k: gsc(a).value for k, a in art.items()}
    gamma = {"handles": gamma_hip(fixtures.handle_decoder(), np.zeros(4)).value}
    cycle = {f"{k}.{adapter}": d for k in ("consistent", "contradicted") for adapter, d in cycle_disagreement(art[k]).items()}
    return gsc_values, gamma, cycle


def _report(results, scenarios, config: Config, seed: int) -> str:
    gsc_values, gamma, cycle = _artifact_summaries()
    header = {
        "config": config.digest,
        "seed": str(seed),
        "valid": "committed",
        "cycle_measure": "count of mismatched entities, edges and frames over intended size",
    }
    return format_report(score(results, scenarios, gsc_values, gamma, cycle, header))


def cmd_replay_run(args) -> int:
    config = _config(args.config)
    seed = config.seed if args.seed is None else args.seed
    scenarios = build_scenarios(config, seed)
    if args.scenario != "all":
        scenarios = [s for s in scenarios if s.scenario_id == args.scenario]
        if not scenarios:
            print(f"unknown scenario {args.scenario!r}", file=sys.stderr)
            return 1
    conditions = CONDITIONS if args.condition == "all" else (args.condition,)
    results, records = run_family(scenarios, conditions, config, args.policy, seed)
    text = replay_log_text(records, config, seed, {"policy": args.policy or "per-condition"})
    if args.log:
        Path(args.log).write_text(text)
    report = _report(results, scenarios, config, seed)
    if args.metrics:
        Path(args.metrics).write_text(report)
    for r in results:
        _out(r.to_dict())
    if len(results) == 1:
        return results[0].exit_code
    return 0


def cmd_metrics_report(args) -> int:
    text = _read(args.log)
    verdict = verify_replay_text(text)
    if not verdict:
        print(f"replay log broken at line {verdict.broken_at}: {verdict.detail}", file=sys.stderr)
        return 1
    lines = [_canon.loads(line) for line in text.splitlines()]
    config = _config(args.config)
    seed = int(lines[0].get("seed", config.seed))
    results = [ReplayResult.from_dict(r["result"]) for r in lines if r.get("kind") == "result"]
    scenarios = build_scenarios(config, seed)
    sys.stdout.write(_report(results, scenarios, config, seed))
    return 0


def cmd_log_verify(args) -> int:
    verdict = verify_replay_text(_read(args.file))
    if verdict:
        _out({"ok": True})
        return 0
    _out({"ok": False, "broken_at": verdict.broken_at, "detail": verdict.detail})
    return 1


# ---------------------------------------------------------------- model-native tools


def cmd_guardrail_decode(args) -> int:
    make_world, make_p0 = WORLDS[args.world]
    config = _config(args.config)
    result = decode(
        make_world(),
        make_p0(),
        args.strategy or config.dead_end_strategy,
        args.seed,
        args.cap,
        config.backtrack_depth,
    )
    for rec in result.trace:
        _out(rec.to_dict())
    _out({"outcome": result.outcome, "tokens": [t.key for t in result.tokens]})
    return DECODE_EXIT.get(result.outcome, 2)


def cmd_repair_optimize(args) -> int:
    if args.fixture == "clearance":
        decoder, z0 = fixtures.clearance_decoder(), np.array([fixtures.CLEARANCE_Z0])
    else:
        decoder, z0 = fixtures.handle_decoder(), np.array([0.0012, 0.0, 0.0, 0.0])
    res = latent_repair(decoder, z0, lam=args.lam, beta=args.beta)
    _out(
        {
            "z": [float(v) for v in res.z],
            "violations": res.violations,
            "rounds": res.rounds,
            "iterations": res.iterations,
            "objective": res.trace[-1] if res.trace else None,
        }
    )
    return 0 if res.max_violation <= 1e-6 else 2


def cmd_artifact_ingest(args) -> int:
    art: GeneratedSpatialArtifact = ARTIFACTS[args.fixture]() if args.fixture else loads_artifact(_read(args.file))
    kernel = Kernel(_scene(args.scene), artifact_runtime())
    res = ingest(art, kernel)
    _out({"outcome": res.outcome, "gap": res.submission.txn.gap, "detail": res.submission.txn.detail, "gsc": res.gsc.to_dict()})
    if args.out and res.outcome == "committed":
        Path(args.out).write_text(dumps_scene(kernel.head))
    return res.submission.exit_code


def cmd_artifact_export(args) -> int:
    sys.stdout.write(dumps_artifact(ARTIFACTS[args.fixture]()))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opkernel", description="Contract-bounded spatial transactions.")
    sub = p.add_subparsers(dest="command", required=True)

    scene = sub.add_parser("scene").add_subparsers(dest="action", required=True)
    s = scene.add_parser("validate")
    s.add_argument("file")
    s.set_defaults(fn=cmd_scene_validate)
    s = scene.add_parser("show")
    s.add_argument("file", nargs="?")
    s.add_argument("--axis", default="x", choices=("x", "y"))
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--canonical", action="store_true", help="print the canonical scene file")
    s.set_defaults(fn=cmd_scene_show)

    txn = sub.add_parser("txn").add_subparsers(dest="action", required=True)
    for name, fn in (("propose", cmd_txn_propose), ("run", cmd_txn_run)):
        s = txn.add_parser(name)
        s.add_argument("request", help="JSON with an invocation and optional preconditions/protected/validators")
        s.add_argument("--scene")
        if name == "run":
            s.add_argument("--out", help="write the committed scene here")
        s.set_defaults(fn=fn)

    rep = sub.add_parser("replay").add_subparsers(dest="action", required=True)
    s = rep.add_parser("run")
    s.add_argument("--scenario", default="all")
    s.add_argument("--condition", default="all", choices=("all",) + CONDITIONS)
    s.add_argument("--policy", help="override the condition's scripted policy, e.g. external:CMD")
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("--log", help="write the replay log here")
    s.add_argument("--metrics", help="write the metrics report here")
    s.set_defaults(fn=cmd_replay_run)

    met = sub.add_parser("metrics").add_subparsers(dest="action", required=True)
    s = met.add_parser("report")
    s.add_argument("log")
    s.add_argument("--config")
    s.set_defaults(fn=cmd_metrics_report)

    log = sub.add_parser("log").add_subparsers(dest="action", required=True)
    s = log.add_parser("verify")
    s.add_argument("file")
    s.set_defaults(fn=cmd_log_verify)

    gr = sub.add_parser("guardrail").add_subparsers(dest="action", required=True)
    s = gr.add_parser("decode")
    s.add_argument("--world", default="tower", choices=sorted(WORLDS))
    s.add_argument("--strategy", choices=("halt", "backtrack", "review", "capability-gap"))
    s.add_argument("--seed", type=int)
    s.add_argument("--cap", type=int, default=256)
    s.add_argument("--config")
    s.set_defaults(fn=cmd_guardrail_decode)

    rp = sub.add_parser("repair").add_subparsers(dest="action", required=True)
    s = rp.add_parser("optimize")
    s.add_argument("--fixture", default="clearance", choices=("clearance", "handles"))
    s.add_argument("--lam", type=float, default=10.0)
    s.add_argument("--beta", type=float, default=0.1)
    s.set_defaults(fn=cmd_repair_optimize)

    art = sub.add_parser("artifact").add_subparsers(dest="action", required=True)
    s = art.add_parser("ingest")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--fixture", choices=sorted(ARTIFACTS))
    src.add_argument("--file")
    s.add_argument("--scene")
    s.add_argument("--out", help="write the committed scene here")
    s.set_defaults(fn=cmd_artifact_ingest)
    s = art.add_parser("export")
    s.add_argument("fixture", choices=sorted(ARTIFACTS))
    s.set_defaults(fn=cmd_artifact_export)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (KernelError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
