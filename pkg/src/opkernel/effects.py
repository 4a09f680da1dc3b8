"""Effect claims, tolerance equivalence and effect diffs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

QUANTITY_KINDS = ("lateral-offset", "vertical-offset", "rotation-delta", "clearance")
FLAG_KINDS = ("containment-flag", "attachment-flag")
EFFECT_KINDS = QUANTITY_KINDS + FLAG_KINDS
# subject order carries no meaning for these kinds
SYMMETRIC_KINDS = ("clearance",)

DIFF_STATUSES = ("matched", "review", "violated", "unchecked")

DEFAULT_TOL_LENGTH = 1e-3
DEFAULT_TOL_ANGLE = 1e-3


@dataclass(frozen=True)
class EffectClaim:
    kind: str
    subjects: tuple[str, ...]
    axis: str = ""
    quantity: Optional[float] = None
    verifier: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EFFECT_KINDS:
            raise ValueError(f"unknown effect kind {self.kind!r}")
        if self.kind in FLAG_KINDS:
            if self.quantity is not None:
                raise ValueError(f"{self.kind} is a flag and carries no quantity")
        else:
            if self.quantity is None or not math.isfinite(self.quantity):
                raise ValueError(f"{self.kind} needs a finite quantity")
        if self.kind in SYMMETRIC_KINDS:
            object.__setattr__(self, "subjects", tuple(sorted(self.subjects)))
        else:
            object.__setattr__(self, "subjects", tuple(self.subjects))

    def sort_key(self) -> tuple:
        return (self.kind, self.subjects, self.axis, -math.inf if self.quantity is None else self.quantity, self.verifier or "")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subjects": list(self.subjects),
            "axis": self.axis,
            "quantity": self.quantity,
            "verifier": self.verifier,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EffectClaim":
        q = d.get("quantity")
        return cls(d["kind"], tuple(d["subjects"]), d.get("axis", ""), None if q is None else float(q), d.get("verifier"))


@dataclass(frozen=True)
class Tolerances:
    length: float = DEFAULT_TOL_LENGTH
    angle: float = DEFAULT_TOL_ANGLE

    def for_kind(self, kind: str) -> float:
        if kind == "rotation-delta":
            return self.angle
        if kind in FLAG_KINDS:
            return 0.0
        return self.length

    def scaled(self, factor: float) -> "Tolerances":
        return Tolerances(self.length * factor, self.angle * factor)

    def to_dict(self) -> dict:
        return {"length": self.length, "angle": self.angle}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tolerances":
        return cls(float(d.get("length", DEFAULT_TOL_LENGTH)), float(d.get("angle", DEFAULT_TOL_ANGLE)))


def effects_equivalent(a: EffectClaim, b: EffectClaim, tol: Tolerances = Tolerances()) -> bool:
    if a.kind != b.kind or a.subjects != b.subjects or a.axis != b.axis:
        return False
    if a.kind in FLAG_KINDS:
        return True
    return abs(a.quantity - b.quantity) <= tol.for_kind(a.kind)


@dataclass(frozen=True)
class EffectDiff:
    predicted: tuple[EffectClaim, ...] = ()
    observed: tuple[EffectClaim, ...] = ()
    matched: tuple[EffectClaim, ...] = ()
    unexpected: tuple[EffectClaim, ...] = ()
    unchecked: tuple[EffectClaim, ...] = ()
    missed: tuple[EffectClaim, ...] = ()
    # predicted claim -> first equivalent observed claim, in sorted order
    pairs: tuple[tuple[EffectClaim, EffectClaim], ...] = field(default=(), compare=False)
    status: str = "matched"

    def to_dict(self) -> dict:
        def ser(claims):
            return [c.to_dict() for c in claims]

        return {
            "predicted": ser(self.predicted),
            "observed": ser(self.observed),
            "matched": ser(self.matched),
            "unexpected": ser(self.unexpected),
            "unchecked": ser(self.unchecked),
            "missed": ser(self.missed),
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EffectDiff":
        def de(key):
            return tuple(EffectClaim.from_dict(c) for c in d.get(key, ()))

        return cls(de("predicted"), de("observed"), de("matched"), de("unexpected"), de("unchecked"), de("missed"), (), d.get("status", "matched"))


def _canonical(claims: Iterable[EffectClaim]) -> list[EffectClaim]:
    return sorted(set(claims), key=EffectClaim.sort_key)


def compute_diff(
    predicted: Iterable[EffectClaim],
    observed: Iterable[EffectClaim],
    tol: Tolerances = Tolerances(),
) -> EffectDiff:
    """Split predicted/observed claims into matched, unexpected, unchecked and missed.

    Predicted claims without a verifier are *unchecked* and never count as
    matched or missed; every observed claim with no equivalent predicted claim
    is *unexpected*. Each claim is scanned against the other side in sorted
    order and the first equivalent partner is recorded in ``pairs``.
    """
    pred = _canonical(predicted)
    obs = _canonical(observed)

    matched, missed, unchecked, pairs = [], [], [], []
    for f in pred:
        if f.verifier is None:
            unchecked.append(f)
            continue
        partner = next((g for g in obs if effects_equivalent(f, g, tol)), None)
        if partner is None:
            missed.append(f)
        else:
            matched.append(f)
            pairs.append((f, partner))
    unexpected = [g for g in obs if not any(effects_equivalent(f, g, tol) for f in pred)]
    status = "review" if unexpected or unchecked else "matched"
    return EffectDiff(
        predicted=tuple(pred),
        observed=tuple(obs),
        matched=tuple(matched),
        unexpected=tuple(unexpected),
        unchecked=tuple(unchecked),
        missed=tuple(missed),
        pairs=tuple(pairs),
        status=status,
    )


def assign_status(diff: EffectDiff, invariant_results: Sequence, audit_status: str) -> str:
    """Priority: violated > unchecked > review > matched.

    *invariant_results* holds truthy/falsy results of the protected invariants
    evaluated on the result snapshot; *audit_status* is passed/failed/absent.
    """
    if any(not bool(r) for r in invariant_results):
        return "violated"
    if audit_status == "absent":
        return "unchecked"
    if diff.unexpected or diff.unchecked:
        return "review"
    return "matched"
