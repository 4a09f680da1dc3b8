"""Blind forward replay of one scenario under one condition.

observation -> optional acquisition -> ranking -> invocation -> transaction.
The policy only ever sees the exposure record built from the snapshot and
the instruction; scoring reads the scenario's ground truth afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional

from .. import _canon
from ..actuators import ActuatorInvocation
from ..causal import (
    CENTER_ON_PARENT,
    AlternativeLibrary,
    acquire_diagnostic,
    acquisition_gap,
    align_to_anchor,
    build_view,
    get_policy,
    lateral_offsets,
    rank_candidates,
)
from ..config import Config
from ..errors import MissingSource
from ..graph import CapabilityGap
from ..kernel import EXIT_CODES, Kernel, dumps_replay, txn_records
from ..realize import default_runtime
from ..scenes import BODY, TRAY, repair_scene
from .scenarios import Scenario

CONDITIONS = (
    "direct-edit",
    "prompt-heuristic",
    "structure-only",
    "contract-bounded",
    "contract-bounded+acquisition",
    "contract-bounded+alternatives",
)
CRITERIA = ("upstream-driver", "declared-space", "supported-alternative", "unsupported-withheld", "realized-layout")
# conditions whose invocations ask for a protected-invariant validator instead of review
VALIDATED = ("direct-edit", "prompt-heuristic")

BASE_LIBRARY = (align_to_anchor("anchor.opening"),)
FULL_LIBRARY = BASE_LIBRARY + (CENTER_ON_PARENT,)


def library_for(condition: str, scenario: Scenario) -> AlternativeLibrary:
    """The alternatives a condition may use, limited to those the scenario makes available."""
    pool = FULL_LIBRARY if condition == "contract-bounded+alternatives" else BASE_LIBRARY
    return AlternativeLibrary(tuple(a for a in pool if a.alt_id in scenario.alternatives))


@dataclass(frozen=True)
class ReplayResult:
    scenario_id: str
    condition: str
    deferred: bool
    selected: Optional[str]
    actuator: Optional[str]
    target: Optional[str]
    outcome: str  # a transaction outcome, or "deferred"
    status: Optional[str]
    gap: Optional[str]
    criteria: tuple[bool, ...]
    success: bool
    post_offset: Mapping[str, float]
    effect_counts: Mapping[str, int]
    acquisitions: int = 0
    reason: str = ""
    exposure: tuple[str, ...] = field(default=(), compare=False)

    @property
    def exit_code(self) -> int:
        return 2 if self.deferred else EXIT_CODES[self.outcome]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "condition": self.condition,
            "deferred": self.deferred,
            "selected": self.selected,
            "actuator": self.actuator,
            "target": self.target,
            "outcome": self.outcome,
            "status": self.status,
            "gap": self.gap,
            "criteria": dict(zip(CRITERIA, self.criteria)),
            "success": self.success,
            "post_offset": dict(self.post_offset),
            "effect_counts": dict(self.effect_counts),
            "acquisitions": self.acquisitions,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReplayResult":
        return cls(
            scenario_id=d["scenario"],
            condition=d["condition"],
            deferred=bool(d["deferred"]),
            selected=d.get("selected"),
            actuator=d.get("actuator"),
            target=d.get("target"),
            outcome=d["outcome"],
            status=d.get("status"),
            gap=d.get("gap"),
            criteria=tuple(bool(d["criteria"][k]) for k in CRITERIA),
            success=bool(d["success"]),
            post_offset={k: float(v) for k, v in d.get("post_offset", {}).items()},
            effect_counts={k: int(v) for k, v in d.get("effect_counts", {}).items()},
            acquisitions=int(d.get("acquisitions", 0)),
            reason=d.get("reason", ""),
        )


@dataclass
class ReplayRun:
    result: ReplayResult
    kernel: Kernel
    requests: list[dict]
    gaps: list[CapabilityGap] = field(default_factory=list)


def _acquire(kernel: Kernel, scenario: Scenario, config: Config, seed: int) -> tuple[int, list[CapabilityGap]]:
    done, gaps = 0, []
    for i, probe in enumerate(scenario.probes):
        try:
            records = acquire_diagnostic(kernel.head, probe, scenario.sources, config.probe_noise, seed + i)
        except MissingSource as exc:
            gaps.append(acquisition_gap(probe, f"txn.acquire.{probe.probe_id}", str(exc)))
            continue
        for rec in records:
            inv = ActuatorInvocation(
                invocation_id=f"inv.acquire.{probe.probe_id}",
                actuator="record_evidence",
                origin="backend",
                level=0,
                arguments={"record": rec.to_dict()},
            )
            sub = kernel.run(inv, protected=(), txn_id=f"txn.acquire.{probe.probe_id}")
            done += sub.outcome == "committed"
    return done, gaps


def task_ref(scenario: Scenario) -> str:
    """Opaque task id for policy requests; scenario ids spell out the alternative flags."""
    return "task." + _canon.digest({"scenario": scenario.scenario_id})[:16]


def replay(scenario: Scenario, condition: str, config: Optional[Config] = None, policy: Optional[str] = None, seed: int = 0) -> ReplayRun:
    """Run one scenario under one condition; *policy* overrides the condition's scripted policy."""
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    config = config or Config()
    pol = get_policy(policy or condition)
    library = library_for(condition, scenario)
    runtime = default_runtime(alternatives=library, tolerances=config.tolerances)
    kernel = Kernel(repair_scene(scenario.axis, scenario.delta), runtime, policy_id=pol.policy_id)
    acquisitions, gaps = _acquire(kernel, scenario, config, seed) if getattr(pol, "acquires", False) else (0, [])

    view = build_view(kernel.head, runtime.registry, library)
    ranking = rank_candidates(
        kernel.head, view, scenario.instruction, pol, library, runtime.registry, task_ref(scenario), config.tolerances.length
    )
    requests = [ranking.request]
    sel = ranking.selected
    txn = None
    if sel is not None:
        spec = runtime.registry[sel.actuator]
        allowed = set(spec.evidence_kinds)
        evidence = tuple(e for e in sel.evidence if not allowed or kernel.head.evidence[e].source in allowed)
        validators = ("val.protected",) if condition in VALIDATED else ()
        inv = ActuatorInvocation(
            invocation_id=f"inv.{scenario.scenario_id}.{condition}",
            actuator=sel.actuator,
            origin="model",
            level=spec.level,
            arguments=dict(sel.arguments),
            evidence=evidence,
            backend_candidate=sel.backend_candidate,
            value_alternative=sel.alternative,
            review=condition not in VALIDATED,
            validators=validators,
        )
        txn = kernel.run(inv, validators=validators, txn_id=f"txn.{scenario.scenario_id}.{condition}").txn

    offsets = lateral_offsets(kernel.head, TRAY, BODY)
    tol = config.tolerances.length
    committed = txn is not None and txn.outcome == "committed"
    backed = sel is not None and sel.alternative is not None and sel.supported
    criteria = (
        sel is not None and sel.depth >= 1,
        txn is not None and txn.rejected_by != "Legal",
        backed,
        not (committed and not backed),
        committed and all(abs(v) <= tol for v in offsets.values()),
    )
    correct = (
        sel is not None
        and sel.actuator == scenario.expected_actuator
        and sel.target == scenario.expected_target
    )
    success = bool(correct and committed and criteria[0] and criteria[1] and criteria[2] and criteria[4])
    diff = txn.effect_diff if txn is not None else None
    counts = (
        {k: len(getattr(diff, k)) for k in ("matched", "unexpected", "unchecked", "missed")} if diff is not None else {}
    )
    result = ReplayResult(
        scenario_id=scenario.scenario_id,
        condition=condition,
        deferred=sel is None,
        selected=sel.candidate_id if sel else None,
        actuator=sel.actuator if sel else None,
        target=sel.target if sel else None,
        outcome="deferred" if txn is None else txn.outcome,
        status=None if txn is None else txn.status,
        gap=None if txn is None else txn.gap,
        criteria=tuple(bool(c) for c in criteria),
        success=success,
        post_offset={k: float(v) for k, v in sorted(offsets.items())},
        effect_counts=counts,
        acquisitions=acquisitions,
        reason=ranking.reason,
        exposure=tuple(_canon.dumps(r) for r in requests),
    )
    return ReplayRun(result, kernel, requests, gaps)


def run_family(
    scenarios: Iterable[Scenario],
    conditions: Iterable[str] = CONDITIONS,
    config: Optional[Config] = None,
    policy: Optional[str] = None,
    seed: int = 0,
) -> tuple[list[ReplayResult], list[dict]]:
    """Replay every (scenario, condition) pair; returns results and replay-log records in run order."""
    config = config or Config()
    results, records = [], []
    for k, sc in enumerate(scenarios):
        for cond in conditions:
            run = replay(sc, cond, config, policy, seed + k)
            scope = {"scenario": sc.scenario_id, "condition": cond}
            records += [{"kind": "request", **scope, "request": r} for r in run.requests]
            records += [{"kind": "gap", **scope, "gap": g.to_dict()} for g in run.gaps]
            records += txn_records(run.kernel, scope)
            records.append({"kind": "result", **scope, "result": run.result.to_dict()})
            results.append(run.result)
    return results, records


def replay_log_text(records: list[dict], config: Config, seed: int, extra: Optional[Mapping[str, Any]] = None) -> str:
    header = {"config": config.digest, "seed": seed, **(extra or {})}
    return dumps_replay(header, records)
