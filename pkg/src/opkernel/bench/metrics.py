"""Scoring: causal repair accuracy, deferral precision, effect precision/recall, commit success.

Every ratio with an empty denominator is reported as ``undefined``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .replay import CONDITIONS, ReplayResult
from .scenarios import Scenario

METRICS_FORMAT = "hylos-metrics/1"


def ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".6f")
    return str(value)


@dataclass(frozen=True)
class ConditionMetrics:
    n: int
    cra: Optional[float]
    dp: Optional[float]
    deferral_rate: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    tcs: Optional[float]
    committed: int
    submitted: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "cra": self.cra,
            "dp": self.dp,
            "deferral_rate": self.deferral_rate,
            "effect_precision": self.precision,
            "effect_recall": self.recall,
            "tcs": self.tcs,
            "committed": self.committed,
            "submitted": self.submitted,
        }


def condition_metrics(results: Sequence[ReplayResult], scenarios: Mapping[str, Scenario]) -> ConditionMetrics:
    """Metrics over *results*; no-op controls never count toward CRA or DP."""
    scored = [r for r in results if not scenarios[r.scenario_id].control]
    deferrals = [r for r in scored if r.deferred]
    submitted = [r for r in scored if not r.deferred]
    matched = sum(r.effect_counts.get("matched", 0) for r in submitted)
    unexpected = sum(r.effect_counts.get("unexpected", 0) for r in submitted)
    missed = sum(r.effect_counts.get("missed", 0) for r in submitted)
    committed = sum(r.outcome == "committed" for r in submitted)
    return ConditionMetrics(
        n=len(scored),
        cra=ratio(sum(r.success for r in scored), len(scored)),
        dp=ratio(sum(scenarios[r.scenario_id].under_supported for r in deferrals), len(deferrals)),
        deferral_rate=ratio(len(deferrals), len(scored)),
        precision=ratio(matched, matched + unexpected),
        recall=ratio(matched, matched + missed),
        tcs=ratio(committed, len(submitted)),
        committed=committed,
        submitted=len(submitted),
    )


@dataclass(frozen=True)
class MetricsReport:
    overall: ConditionMetrics
    per_condition: Mapping[str, ConditionMetrics]
    supported: Mapping[str, ConditionMetrics]
    unsupported: Mapping[str, ConditionMetrics]
    gsc: Mapping[str, Optional[float]] = field(default_factory=dict)
    gamma_hip: Mapping[str, Optional[float]] = field(default_factory=dict)
    cycle: Mapping[str, Optional[float]] = field(default_factory=dict)
    header: Mapping[str, str] = field(default_factory=dict)


def score(
    results: Sequence[ReplayResult],
    scenarios: Iterable[Scenario],
    gsc: Optional[Mapping[str, Optional[float]]] = None,
    gamma_hip: Optional[Mapping[str, Optional[float]]] = None,
    cycle: Optional[Mapping[str, Optional[float]]] = None,
    header: Optional[Mapping[str, str]] = None,
) -> MetricsReport:
    by_id = {s.scenario_id: s for s in scenarios}
    conds = [c for c in CONDITIONS if any(r.condition == c for r in results)]
    conds += sorted({r.condition for r in results} - set(conds))

    def subset(cond: str, keep) -> ConditionMetrics:
        return condition_metrics([r for r in results if r.condition == cond and keep(by_id[r.scenario_id])], by_id)

    return MetricsReport(
        overall=condition_metrics(results, by_id),
        per_condition={c: subset(c, lambda s: True) for c in conds},
        supported={c: subset(c, lambda s: s.supported) for c in conds},
        unsupported={c: subset(c, lambda s: s.under_supported) for c in conds},
        gsc=dict(gsc or {}),
        gamma_hip=dict(gamma_hip or {}),
        cycle=dict(cycle or {}),
        header=dict(header or {}),
    )


def format_report(report: MetricsReport) -> str:
    """Deterministic key-ordered text, one ``key: value`` per line."""
    lines = [f"format: {METRICS_FORMAT}"]
    lines += [f"{k}: {v}" for k, v in sorted(report.header.items())]

    def block(prefix: str, m: ConditionMetrics) -> None:
        for k, v in sorted(m.to_dict().items()):
            lines.append(f"{prefix}.{k}: {fmt(v)}")

    block("overall", report.overall)
    for name, group in (("condition", report.per_condition), ("supported", report.supported), ("unsupported", report.unsupported)):
        for cond in sorted(group):
            block(f"{name}.{cond}", group[cond])
    for name, table in (("gsc", report.gsc), ("gamma_hip", report.gamma_hip), ("cycle_disagreement", report.cycle)):
        for k, v in sorted(table.items()):
            lines.append(f"{name}.{k}: {fmt(v)}")
    return "\n".join(lines) + "\n"
