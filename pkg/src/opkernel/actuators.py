"""Shared actuator surface: one typed invocation schema for every origin.

Humans, models, backends and importers all propose changes as
:class:`ActuatorInvocation` values against the same registry. The agency gate
(levels 0-4) decides which supports an invocation must carry.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Optional, Sequence

from . import _canon
from .errors import SceneFormatError, SchemaMismatch, UnknownRef
from .graph import SceneSnapshot, resolve_ref

REGISTRY_FORMAT = "hylos-actuators/1"

INVOCATION_ORIGINS = ("human", "model", "backend", "import")
LEVELS = (0, 1, 2, 3, 4)

# ref kinds are bound against snapshot elements; everything else is a free value
REF_KINDS = {
    "frame-ref": ("frames",),
    "entity-ref": ("entities",),
    "anchor-ref": ("anchors",),
    "assertion-ref": ("assertions",),
    "any-ref": ("entities", "frames", "anchors"),
    "handle-ref": ("projections",),
}
SCALAR_KINDS = ("axis", "length", "angle", "mark", "record", "artifact-ref", "text")

MARK_TOPOLOGIES = ("path", "region", "boundary", "point")
MARK_PURPOSES = ("uncertainty-area", "blocked-zone", "access-route", "inspection-concern", "missing-information")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str
    required: bool = True

    def __post_init__(self):
        if self.kind not in REF_KINDS and self.kind not in SCALAR_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    @property
    def is_ref(self) -> bool:
        return self.kind in REF_KINDS

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "required": self.required}


@dataclass(frozen=True)
class ActuatorSpec:
    actuator_id: str
    level: int
    params: tuple[ParamSpec, ...] = ()
    mutating: bool = True
    evidence_kinds: tuple[str, ...] = ()
    requires_evidence: bool = False
    effect_template: tuple[str, ...] = ()

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"actuator {self.actuator_id}: level must be one of {LEVELS}")
        if self.level >= 1 and not self.params:
            raise ValueError(f"actuator {self.actuator_id}: level >= 1 needs a parameter schema")

    def param(self, name: str) -> Optional[ParamSpec]:
        return next((p for p in self.params if p.name == name), None)

    @property
    def ref_params(self) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.params if p.is_ref and p.required)

    def to_dict(self) -> dict:
        return {
            "id": self.actuator_id,
            "level": self.level,
            "params": [p.to_dict() for p in self.params],
            "mutating": self.mutating,
            "evidence_kinds": list(self.evidence_kinds),
            "requires_evidence": self.requires_evidence,
            "effect_template": list(self.effect_template),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActuatorSpec":
        return cls(
            actuator_id=d["id"],
            level=int(d["level"]),
            params=tuple(ParamSpec(p["name"], p["kind"], bool(p.get("required", True))) for p in d.get("params", ())),
            mutating=bool(d.get("mutating", True)),
            evidence_kinds=tuple(d.get("evidence_kinds", ())),
            requires_evidence=bool(d.get("requires_evidence", False)),
            effect_template=tuple(d.get("effect_template", ())),
        )


@dataclass(frozen=True)
class ActuatorInvocation:
    invocation_id: str
    actuator: str
    origin: str
    level: int
    arguments: Mapping[str, Any] = field(default_factory=dict)
    evidence: tuple[str, ...] = ()
    backend_candidate: Optional[str] = None
    value_alternative: Optional[str] = None
    review: bool = False
    validators: tuple[str, ...] = ()
    ingestion_record: Optional[str] = None

    def __post_init__(self):
        if self.origin not in INVOCATION_ORIGINS:
            raise ValueError(f"unknown invocation origin {self.origin!r}")
        if self.level not in LEVELS:
            raise ValueError(f"claimed level must be one of {LEVELS}")

    def binding(self, spec: ActuatorSpec) -> tuple[tuple[str, str], ...]:
        return tuple((p.name, self.arguments[p.name]) for p in spec.ref_params if p.name in self.arguments)

    def to_dict(self) -> dict:
        return {
            "id": self.invocation_id,
            "actuator": self.actuator,
            "origin": self.origin,
            "level": self.level,
            "arguments": dict(self.arguments),
            "evidence": list(self.evidence),
            "backend_candidate": self.backend_candidate,
            "value_alternative": self.value_alternative,
            "review": self.review,
            "validators": list(self.validators),
            "ingestion_record": self.ingestion_record,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActuatorInvocation":
        return cls(
            invocation_id=d["id"],
            actuator=d["actuator"],
            origin=d["origin"],
            level=int(d["level"]),
            arguments=dict(d.get("arguments", {})),
            evidence=tuple(d.get("evidence", ())),
            backend_candidate=d.get("backend_candidate"),
            value_alternative=d.get("value_alternative"),
            review=bool(d.get("review", False)),
            validators=tuple(d.get("validators", ())),
            ingestion_record=d.get("ingestion_record"),
        )


@dataclass(frozen=True)
class SpatialMark:
    mark_id: str
    topology: str
    samples: tuple[tuple[float, float, float], ...]
    purpose: str
    origin: str = "human"
    confidence: float = 1.0
    evidence: tuple[str, ...] = ()
    anchor: Optional[str] = None

    def __post_init__(self):
        if self.topology not in MARK_TOPOLOGIES:
            raise ValueError(f"unknown mark topology {self.topology!r}")
        if self.purpose not in MARK_PURPOSES:
            raise ValueError(f"unknown mark purpose {self.purpose!r}")
        if not self.samples:
            raise ValueError("a mark needs at least one geometry sample")
        if self.origin not in INVOCATION_ORIGINS:
            raise ValueError(f"unknown mark origin {self.origin!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("mark confidence must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "id": self.mark_id,
            "topology": self.topology,
            "samples": [list(s) for s in self.samples],
            "purpose": self.purpose,
            "origin": self.origin,
            "confidence": self.confidence,
            "evidence": list(self.evidence),
            "anchor": self.anchor,
        }


# ---------------------------------------------------------------- registry


def default_registry() -> dict[str, ActuatorSpec]:
    lateral_evidence = ("measurement", "user-declaration", "sensor", "diagnostic")
    specs = [
        ActuatorSpec("highlight", 0, (ParamSpec("target", "any-ref"),), mutating=False),
        ActuatorSpec("record_evidence", 0, (ParamSpec("record", "record"),), mutating=False),
        ActuatorSpec(
            "author_mark",
            1,
            (ParamSpec("mark", "mark"), ParamSpec("anchor", "any-ref", required=False)),
            evidence_kinds=lateral_evidence + ("model-proposal",),
        ),
        ActuatorSpec(
            "move_entity",
            1,
            (ParamSpec("entity", "entity-ref"), ParamSpec("axis", "axis"), ParamSpec("delta", "length")),
            evidence_kinds=lateral_evidence,
            effect_template=("shift-entity",),
        ),
        ActuatorSpec(
            "set_frame_offset",
            2,
            (ParamSpec("frame", "frame-ref"), ParamSpec("axis", "axis"), ParamSpec("value", "length")),
            evidence_kinds=lateral_evidence,
            requires_evidence=True,
            effect_template=("shift-subtree",),
        ),
        ActuatorSpec(
            "ingest_artifact",
            4,
            (ParamSpec("artifact", "artifact-ref"),),
            evidence_kinds=("model-proposal", "diagnostic"),
            effect_template=("artifact-claims",),
        ),
        ActuatorSpec("edit_handle", 4, (ParamSpec("handle", "handle-ref"), ParamSpec("delta", "length"))),
    ]
    return {s.actuator_id: s for s in specs}


def registry_to_dict(registry: Mapping[str, ActuatorSpec]) -> dict:
    return {"version": REGISTRY_FORMAT, "actuators": [registry[k].to_dict() for k in sorted(registry)]}


def registry_from_dict(data: Mapping) -> dict[str, ActuatorSpec]:
    if data.get("version") != REGISTRY_FORMAT:
        raise SceneFormatError(f"expected version {REGISTRY_FORMAT!r}, got {data.get('version')!r}")
    try:
        specs = [ActuatorSpec.from_dict(d) for d in data.get("actuators", ())]
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"malformed actuator spec: {exc}") from exc
    return {s.actuator_id: s for s in specs}


def dumps_registry(registry: Mapping[str, ActuatorSpec]) -> str:
    return _canon.dumps(registry_to_dict(registry)) + "\n"


def loads_registry(text: str) -> dict[str, ActuatorSpec]:
    return registry_from_dict(_canon.loads(text))


def registry_fingerprint(registry: Mapping[str, ActuatorSpec]) -> str:
    return _canon.digest(registry_to_dict(registry))


# ---------------------------------------------------------------- admissible set


class AdmissibleBinding(NamedTuple):
    actuator: str
    binding: tuple[tuple[str, str], ...]
    candidates: tuple[str, ...] = ()


# (snapshot, actuator spec, binding) -> candidate refs backing a level-2 invocation
CandidateSource = Callable[[SceneSnapshot, ActuatorSpec, tuple], Sequence[str]]


def refs_of_kind(snapshot: SceneSnapshot, kind: str) -> list[str]:
    out: list[str] = []
    for coll in REF_KINDS[kind]:
        items = snapshot.collection(coll)
        if kind == "handle-ref":
            out.extend(k for k, v in items.items() if v.view_kind == "handle")
        else:
            out.extend(items)
    return sorted(out)


def ref_matches(snapshot: SceneSnapshot, kind: str, ref: Any) -> bool:
    if not isinstance(ref, str):
        return False
    return ref in refs_of_kind(snapshot, kind)


def derive_admissible(
    snapshot: SceneSnapshot,
    registry: Mapping[str, ActuatorSpec],
    candidates: Optional[CandidateSource] = None,
) -> list[AdmissibleBinding]:
    """Every (actuator, binding) the snapshot can support, sorted by actuator then binding.

    Level-2 bindings need at least one backend candidate from *candidates*;
    level-3 actuators need at least one evidence record of an allowed kind.
    """
    out: list[AdmissibleBinding] = []
    if not (snapshot.entities or snapshot.frames or snapshot.anchors):
        # nothing addressable: not even presentation or evidence has a subject
        return out
    for act_id in sorted(registry):
        spec = registry[act_id]
        if spec.level == 3:
            kinds = spec.evidence_kinds
            if not any(not kinds or e.source in kinds for e in snapshot.evidence.values()):
                continue
        ref_params = spec.ref_params
        pools = [refs_of_kind(snapshot, p.kind) for p in ref_params]
        for combo in itertools.product(*pools):
            binding = tuple(zip((p.name for p in ref_params), combo))
            cands: tuple[str, ...] = ()
            if spec.level == 2:
                cands = tuple(sorted(candidates(snapshot, spec, binding))) if candidates else ()
                if not cands:
                    continue
            out.append(AdmissibleBinding(act_id, binding, cands))
    return out


# ---------------------------------------------------------------- agency gate


class GateResult(NamedTuple):
    passed: bool
    reason: str = ""
    gap: Optional[str] = None

    def __bool__(self) -> bool:
        return self.passed


def check_schema(invocation: ActuatorInvocation, spec: ActuatorSpec) -> None:
    if invocation.actuator != spec.actuator_id:
        raise SchemaMismatch(f"invocation targets {invocation.actuator!r}, spec is {spec.actuator_id!r}")
    known = {p.name for p in spec.params}
    extra = sorted(set(invocation.arguments) - known)
    if extra:
        raise SchemaMismatch(f"unexpected arguments {extra} for {spec.actuator_id}")
    for p in spec.params:
        if p.name not in invocation.arguments:
            if p.required:
                raise SchemaMismatch(f"{spec.actuator_id}: missing argument {p.name!r}")
            continue
        v = invocation.arguments[p.name]
        if p.is_ref or p.kind in ("artifact-ref", "text"):
            ok = isinstance(v, str)
        elif p.kind == "axis":
            ok = v in ("x", "y", "z")
        elif p.kind in ("length", "angle"):
            ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
        else:
            ok = isinstance(v, Mapping)
        if not ok:
            raise SchemaMismatch(f"{spec.actuator_id}: argument {p.name}={v!r} is not a valid {p.kind}")


def gate_check(
    invocation: ActuatorInvocation,
    snapshot: SceneSnapshot,
    registry: Optional[Mapping[str, ActuatorSpec]] = None,
) -> GateResult:
    """Apply the commit rule of the effective agency level.

    The effective level is the higher of the actuator's minimum and the level
    the invocation claims. The snapshot is only read.
    """
    registry = default_registry() if registry is None else registry
    spec = registry.get(invocation.actuator)
    if spec is None:
        raise SchemaMismatch(f"unknown actuator {invocation.actuator!r}")
    check_schema(invocation, spec)
    level = max(spec.level, invocation.level)
    if level == 0:
        if spec.mutating:
            return GateResult(False, "level 0 allows presentation only", "missing-legal-target")
        return GateResult(True)
    if level == 1:
        if invocation.review or invocation.validators:
            return GateResult(True)
        return GateResult(False, "level 1 needs a review flag or an attached validator", "missing-verification")
    if level == 2:
        if invocation.backend_candidate:
            return GateResult(True)
        return GateResult(False, "level 2 needs a backend candidate", "missing-candidate")
    if level == 3:
        if not invocation.evidence:
            return GateResult(False, "missing evidence", "missing-measurement")
        if not invocation.review:
            return GateResult(False, "level 3 needs review", "missing-verification")
        return GateResult(True)
    if not invocation.ingestion_record:
        return GateResult(False, "level 4 needs an ingestion record", "missing-verification")
    if not invocation.review:
        return GateResult(False, "level 4 needs an authoring review", "missing-verification")
    return GateResult(True)


# ---------------------------------------------------------------- marks

ORIGIN_DEFAULT_LEVEL = {"human": 1, "model": 3, "backend": 3, "import": 3}


def normalize_mark(raw: SpatialMark, snapshot: SceneSnapshot, invocation_id: Optional[str] = None) -> ActuatorInvocation:
    """Turn a drawn or proposed mark into a draft ``author_mark`` invocation."""
    if not all(math.isfinite(c) for s in raw.samples for c in s):
        raise ValueError(f"mark {raw.mark_id}: geometry samples must be finite")
    args: dict[str, Any] = {"mark": raw.to_dict()}
    if raw.anchor is not None:
        resolve_ref(snapshot, raw.anchor)
        args["anchor"] = raw.anchor
    return ActuatorInvocation(
        invocation_id=invocation_id or f"inv.{raw.mark_id}",
        actuator="author_mark",
        origin=raw.origin,
        level=ORIGIN_DEFAULT_LEVEL[raw.origin],
        arguments=args,
        evidence=tuple(raw.evidence),
    )


def with_supports(invocation: ActuatorInvocation, **supports: Any) -> ActuatorInvocation:
    return replace(invocation, **supports)
