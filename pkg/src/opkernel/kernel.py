"""Spatial transactions: certify, admit, lower, realize, audit, diff, finalize.

Nothing becomes scene truth except through :meth:`Kernel.submit` reaching a
committed outcome, which installs a new head snapshot. Every submission
appends exactly one hash-chained :class:`CommitLogEntry`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from . import _canon
from .actuators import (
    ActuatorInvocation,
    ActuatorSpec,
    default_registry,
    derive_admissible,
    gate_check,
    ref_matches,
    registry_to_dict,
)
from .causal import AlternativeLibrary
from .effects import EffectClaim, EffectDiff, Tolerances, assign_status, compute_diff
from .errors import InvariantBreakingStructure, KernelError, MissingLowerer, SchemaMismatch, StaleContext, UnknownRef
from .graph import (
    InvariantResult,
    InvariantSpec,
    SceneSnapshot,
    SetField,
    check_invariant,
    mutation_from_dict,
    mutations_to_list,
    snapshot_commit,
)

REPLAY_FORMAT = "hylos-replay/1"
STATES = ("proposed", "admitted", "realized", "diffed")
OUTCOMES = ("committed", "review", "rolled-back", "capability-gap")
EXIT_CODES = {"committed": 0, "review": 2, "capability-gap": 3, "rolled-back": 4}
GENESIS = "0" * 64

Lowerer = Callable[[SceneSnapshot, ActuatorInvocation, "Runtime"], tuple]
Predictor = Callable[[SceneSnapshot, ActuatorInvocation, tuple, "Runtime"], Iterable[EffectClaim]]
Auditor = Callable[[SceneSnapshot, SceneSnapshot, ActuatorInvocation, "Runtime"], "AuditResult"]
Validator = Callable[[SceneSnapshot], Any]
Realizer = Callable[[SceneSnapshot, tuple], SceneSnapshot]


@dataclass(frozen=True)
class AuditResult:
    status: str  # passed | failed | absent
    observed: tuple[EffectClaim, ...] = ()
    notes: str = ""

    def __post_init__(self):
        if self.status not in ("passed", "failed", "absent"):
            raise ValueError(f"unknown audit status {self.status!r}")
        if self.status == "absent" and self.observed:
            raise ValueError("an absent audit observes nothing")

    def to_dict(self) -> dict:
        return {"status": self.status, "observed": [c.to_dict() for c in self.observed], "notes": self.notes}


ABSENT = AuditResult("absent")


@dataclass
class Runtime:
    """The kernel's capability set: what it can lower, predict, audit and validate."""

    registry: Mapping[str, ActuatorSpec] = field(default_factory=default_registry)
    lowerers: dict[str, Lowerer] = field(default_factory=dict)
    predictors: dict[str, Predictor] = field(default_factory=dict)
    auditors: dict[str, Auditor] = field(default_factory=dict)
    validators: dict[str, Validator] = field(default_factory=dict)
    alternatives: AlternativeLibrary = field(default_factory=AlternativeLibrary)
    tolerances: Tolerances = field(default_factory=Tolerances)
    realizer: Optional[Realizer] = None
    artifacts: dict[str, Any] = field(default_factory=dict)
    checkers: dict[str, Callable] = field(default_factory=dict)
    # actuator -> extra admission check returning (gap, detail) on refusal
    gate_hooks: dict[str, Callable] = field(default_factory=dict)

    def effect_key(self, actuator: str) -> str:
        spec = self.registry[actuator]
        return spec.effect_template[0] if spec.effect_template else actuator

    def realize(self, snapshot: SceneSnapshot, mutations: tuple) -> SceneSnapshot:
        return (self.realizer or snapshot_commit)(snapshot, mutations)

    def fingerprint(self) -> str:
        return _canon.digest(
            {
                "registry": registry_to_dict(self.registry),
                "lowerers": sorted(self.lowerers),
                "predictors": sorted(self.predictors),
                "auditors": sorted(self.auditors),
                "validators": sorted(self.validators),
                "alternatives": [a.to_dict() for a in self.alternatives.alternatives],
                "tolerances": self.tolerances.to_dict(),
                "checkers": sorted(self.checkers),
                "gate_hooks": sorted(self.gate_hooks),
            }
        )


def bind_runtime(snapshot: SceneSnapshot, runtime: Runtime) -> SceneSnapshot:
    """Child snapshot stamped with the runtime fingerprint (or *snapshot* if already stamped)."""
    fp = runtime.fingerprint()
    if snapshot.registry_fingerprint == fp:
        return snapshot
    return snapshot_commit(snapshot, [SetField("registry", "fingerprint", fp)])


# ---------------------------------------------------------------- transactions


@dataclass(frozen=True)
class ContextCertificate:
    snapshot_id: str
    registry_fingerprint: str
    policy_id: str

    def to_dict(self) -> dict:
        return {"snapshot": self.snapshot_id, "registry": self.registry_fingerprint, "policy": self.policy_id}


@dataclass(frozen=True)
class SpatialTransaction:
    txn_id: str
    certificate: ContextCertificate
    invocation: ActuatorInvocation
    preconditions: tuple[InvariantSpec, ...] = ()
    protected: tuple[str, ...] = ()
    validators: tuple[str, ...] = ()
    mutation: Optional[tuple] = None
    audit: Optional[AuditResult] = None
    effect_diff: Optional[EffectDiff] = None
    state: str = "proposed"
    outcome: Optional[str] = None
    status: Optional[str] = None
    gap: Optional[str] = None
    rejected_by: Optional[str] = None
    detail: str = ""
    committed_snapshot: Optional[str] = None

    def advance(self, state: str, **changes) -> "SpatialTransaction":
        if self.outcome is not None:
            raise KernelError(f"{self.txn_id} is already final ({self.outcome})")
        if STATES.index(state) <= STATES.index(self.state):
            raise KernelError(f"{self.txn_id}: cannot move from {self.state} to {state}")
        return replace(self, state=state, **changes)

    def conclude(self, outcome: str, **changes) -> "SpatialTransaction":
        if self.outcome is not None:
            raise KernelError(f"{self.txn_id} is already final ({self.outcome})")
        if outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {outcome!r}")
        if outcome != "committed" and changes.get("committed_snapshot"):
            raise KernelError("only a committed transaction carries a committed snapshot id")
        return replace(self, outcome=outcome, **changes)

    def to_dict(self) -> dict:
        return {
            "txn_id": self.txn_id,
            "certificate": self.certificate.to_dict(),
            "invocation": self.invocation.to_dict(),
            "preconditions": [p.to_dict() for p in self.preconditions],
            "protected": list(self.protected),
            "validators": list(self.validators),
            "mutation": None if self.mutation is None else mutations_to_list(self.mutation),
            "audit": None if self.audit is None else self.audit.to_dict(),
            "effect_diff": None if self.effect_diff is None else self.effect_diff.to_dict(),
            "state": self.state,
            "outcome": self.outcome,
            "status": self.status,
            "gap": self.gap,
            "rejected_by": self.rejected_by,
            "detail": self.detail,
            "committed_snapshot": self.committed_snapshot,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SpatialTransaction":
        c = d["certificate"]
        return cls(
            txn_id=d["txn_id"],
            certificate=ContextCertificate(c["snapshot"], c["registry"], c["policy"]),
            invocation=ActuatorInvocation.from_dict(d["invocation"]),
            preconditions=tuple(InvariantSpec.from_dict(p) for p in d.get("preconditions", ())),
            protected=tuple(d.get("protected", ())),
            validators=tuple(d.get("validators", ())),
        )

    @property
    def digest(self) -> str:
        return _canon.digest(self.to_dict())


@dataclass(frozen=True)
class Admission:
    admitted: bool
    predicate: Optional[str] = None  # first failing predicate
    gap: Optional[str] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.admitted


ADMIT_ORDER = ("Legal", "Grounded", "Pre", "Preserve", "Realizable")


def certify(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> None:
    cert = txn.certificate
    if cert.snapshot_id != snapshot.snapshot_id:
        raise StaleContext(f"certificate names {cert.snapshot_id}, head is {snapshot.snapshot_id}")
    if cert.registry_fingerprint != snapshot.registry_fingerprint or cert.registry_fingerprint != runtime.fingerprint():
        raise StaleContext("certificate registry fingerprint does not match the runtime")


def _reject(predicate: str, gap: Optional[str], detail: str) -> Admission:
    return Admission(False, predicate, gap, detail)


def _protected_specs(txn: SpatialTransaction, snapshot: SceneSnapshot) -> list[InvariantSpec]:
    out = []
    for pid in txn.protected:
        spec = snapshot.protected_invariants.get(pid)
        if spec is None:
            raise UnknownRef(pid, "expected a protected invariant")
        out.append(spec)
    return out


def check_legal(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> Admission:
    inv = txn.invocation
    spec = runtime.registry.get(inv.actuator)
    if spec is None:
        return _reject("Legal", "missing-legal-target", f"unknown actuator {inv.actuator!r}")
    try:
        gate = gate_check(inv, snapshot, runtime.registry)
    except SchemaMismatch as exc:
        return _reject("Legal", "missing-legal-target", str(exc))
    for p in spec.params:
        if p.is_ref and p.name in inv.arguments and not ref_matches(snapshot, p.kind, inv.arguments[p.name]):
            return _reject("Legal", "missing-legal-target", f"{p.name}={inv.arguments[p.name]!r} does not resolve to a {p.kind}")
    try:
        _protected_specs(txn, snapshot)
    except UnknownRef as exc:
        return _reject("Legal", "missing-legal-target", str(exc))
    unknown = sorted(set(txn.validators) - set(runtime.validators))
    if unknown:
        return _reject("Legal", "missing-verification", f"no validator registered for {unknown}")
    binding = inv.binding(spec)
    admissible = {(b.actuator, b.binding): b for b in derive_admissible(snapshot, runtime.registry, runtime.alternatives)}
    entry = admissible.get((inv.actuator, binding))
    if entry is None:
        gap = "missing-candidate" if spec.level == 2 else "missing-legal-target"
        if spec.level == 3:
            gap = "missing-measurement"
        return _reject("Legal", gap, f"{inv.actuator}{dict(binding)} is not in the admissible set")
    if not gate:
        return _reject("Legal", gate.gap, gate.reason)
    hook = runtime.gate_hooks.get(inv.actuator)
    refusal = hook(snapshot, inv, runtime) if hook else None
    if refusal:
        return _reject("Legal", refusal[0], refusal[1])
    if spec.level == 2:
        ref = inv.backend_candidate
        if ref not in entry.candidates:
            return _reject("Legal", "missing-candidate", f"backend candidate {ref!r} is not offered for this binding")
        cand = runtime.alternatives.resolve(snapshot, ref)
        tol = runtime.tolerances.length
        if cand is None or inv.arguments.get("axis") != cand.axis or abs(float(inv.arguments.get("value", 0.0)) - cand.value) > tol:
            return _reject("Legal", "missing-candidate", f"value does not match backend candidate {ref!r}")
    return Admission(True)


def check_grounded(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> Admission:
    inv = txn.invocation
    spec = runtime.registry[inv.actuator]
    if spec.requires_evidence and not inv.evidence:
        return _reject("Grounded", "missing-measurement", f"{inv.actuator} requires evidence")
    for ref in inv.evidence:
        ev = snapshot.evidence.get(ref)
        if ev is None:
            return _reject("Grounded", "missing-measurement", f"evidence {ref!r} does not resolve")
        if spec.evidence_kinds and ev.source not in spec.evidence_kinds:
            return _reject("Grounded", "missing-measurement", f"evidence {ref} has source {ev.source}, not allowed")
    return Admission(True)


def check_pre(txn: SpatialTransaction, snapshot: SceneSnapshot) -> Admission:
    for pre in txn.preconditions:
        try:
            res = check_invariant(snapshot, pre)
        except (UnknownRef, ValueError) as exc:
            return _reject("Pre", None, f"precondition {pre.id}: {exc}")
        if not res:
            return _reject("Pre", None, f"precondition {pre.id}: {res.detail}")
    return Admission(True)


def check_preserve(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> Admission:
    lowerer = runtime.lowerers.get(txn.invocation.actuator)
    if lowerer is None:
        return Admission(True)  # Realizable reports the missing lowerer
    try:
        shadow = snapshot_commit(snapshot, lowerer(snapshot, txn.invocation, runtime))
    except (InvariantBreakingStructure, UnknownRef) as exc:
        return _reject("Preserve", None, f"dry run breaks structure: {exc}")
    for spec in _protected_specs(txn, snapshot):
        res = check_invariant(shadow, spec)
        if not res:
            return _reject("Preserve", None, f"dry run violates {spec.id}: {res.detail}")
    return Admission(True)


def admit(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> Admission:
    """Evaluate Legal, Grounded, Pre, Preserve, Realizable in that order; stop at the first failure."""
    certify(txn, snapshot, runtime)
    for result in (
        lambda: check_legal(txn, snapshot, runtime),
        lambda: check_grounded(txn, snapshot, runtime),
        lambda: check_pre(txn, snapshot),
        lambda: check_preserve(txn, snapshot, runtime),
        lambda: Admission(True)
        if txn.invocation.actuator in runtime.lowerers
        else _reject("Realizable", "missing-lowerer", f"no lowerer for {txn.invocation.actuator}"),
    ):
        r = result()
        if not r:
            return r
    return Admission(True)


def lower(txn: SpatialTransaction, snapshot: SceneSnapshot, runtime: Runtime) -> tuple:
    lowerer = runtime.lowerers.get(txn.invocation.actuator)
    if lowerer is None:
        raise MissingLowerer(txn.invocation.actuator)
    return tuple(lowerer(snapshot, txn.invocation, runtime))


def run_audit(before: SceneSnapshot, after: SceneSnapshot, txn: SpatialTransaction, runtime: Runtime) -> AuditResult:
    auditor = runtime.auditors.get(runtime.effect_key(txn.invocation.actuator))
    return ABSENT if auditor is None else auditor(before, after, txn.invocation, runtime)


def predict(snapshot: SceneSnapshot, txn: SpatialTransaction, runtime: Runtime) -> tuple[EffectClaim, ...]:
    predictor = runtime.predictors.get(runtime.effect_key(txn.invocation.actuator))
    if predictor is None:
        return ()
    return tuple(predictor(snapshot, txn.invocation, txn.mutation or (), runtime))


def run_checks(after: SceneSnapshot, txn: SpatialTransaction, runtime: Runtime, before: SceneSnapshot) -> list[tuple[str, InvariantResult]]:
    results = [(s.id, check_invariant(after, s)) for s in _protected_specs(txn, before)]
    for vid in sorted(set(txn.validators) | set(txn.invocation.validators)):
        fn = runtime.validators.get(vid)
        if fn is None:
            results.append((vid, InvariantResult(False, "validator not registered")))
            continue
        r = fn(after)
        results.append((vid, r if isinstance(r, InvariantResult) else InvariantResult(bool(r))))
    return results


@dataclass(frozen=True)
class Finalized:
    txn: SpatialTransaction
    outcome: str
    snapshot: SceneSnapshot  # head after finalize
    parked: Optional[SceneSnapshot] = None


def finalize(
    txn: SpatialTransaction,
    snapshot: SceneSnapshot,
    diff: EffectDiff,
    result: SceneSnapshot,
    checks: Sequence[tuple[str, InvariantResult]],
) -> Finalized:
    """Map the diff, audit and invariant checks to an outcome.

    violated rolls back to *snapshot*; review and unchecked park *result*
    without committing it; matched with a passed audit commits *result*.
    """
    audit = txn.audit or ABSENT
    results = [r for _, r in checks]
    if audit.status == "failed":
        results.append(InvariantResult(False, f"audit failed: {audit.notes}"))
    status = assign_status(diff, results, audit.status)
    failing = "; ".join(f"{i}: {r.detail}" for i, r in checks if not r)
    if status == "violated":
        done = txn.conclude("rolled-back", status=status, detail=failing or audit.notes)
        return Finalized(done, "rolled-back", snapshot)
    if status in ("review", "unchecked"):
        note = "audit absent; effects unchecked" if status == "unchecked" else "effect diff needs review"
        return Finalized(txn.conclude("review", status=status, detail=note), "review", snapshot, parked=result)
    done = txn.conclude("committed", status=status, committed_snapshot=result.snapshot_id)
    return Finalized(done, "committed", result)


# ---------------------------------------------------------------- commit log


@dataclass(frozen=True)
class CommitLogEntry:
    seq: int
    txn_digest: str
    parent_snapshot: str
    result_snapshot: Optional[str]
    outcome: str
    prior_digest: str
    entry_digest: str = ""

    def body(self) -> dict:
        return {
            "seq": self.seq,
            "txn_digest": self.txn_digest,
            "parent_snapshot": self.parent_snapshot,
            "result_snapshot": self.result_snapshot,
            "outcome": self.outcome,
            "prior_digest": self.prior_digest,
        }

    def to_dict(self) -> dict:
        return {**self.body(), "entry_digest": self.entry_digest}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CommitLogEntry":
        return cls(
            int(d["seq"]), d["txn_digest"], d["parent_snapshot"], d.get("result_snapshot"), d["outcome"], d["prior_digest"], d["entry_digest"]
        )


def make_entry(log: Sequence[CommitLogEntry], txn_digest: str, parent: str, result: Optional[str], outcome: str) -> CommitLogEntry:
    prior = log[-1].entry_digest if log else GENESIS
    seq = log[-1].seq + 1 if log else 0
    e = CommitLogEntry(seq, txn_digest, parent, result, outcome, prior)
    return replace(e, entry_digest=_canon.digest(e.body()))


@dataclass(frozen=True)
class LogVerdict:
    ok: bool
    broken_at: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_log(log: Sequence[CommitLogEntry]) -> LogVerdict:
    prior, last_seq = GENESIS, -1
    for e in log:
        if e.seq <= last_seq:
            return LogVerdict(False, e.seq, "sequence does not increase")
        if e.prior_digest != prior:
            return LogVerdict(False, e.seq, "prior digest does not link")
        if _canon.digest(e.body()) != e.entry_digest:
            return LogVerdict(False, e.seq, "entry digest does not match its contents")
        if e.outcome not in OUTCOMES:
            return LogVerdict(False, e.seq, f"unknown outcome {e.outcome!r}")
        if e.outcome != "committed" and e.result_snapshot is not None:
            return LogVerdict(False, e.seq, "non-committed entry carries a result snapshot")
        prior, last_seq = e.entry_digest, e.seq
    return LogVerdict(True)


# ---------------------------------------------------------------- kernel


@dataclass(frozen=True)
class Submission:
    txn: SpatialTransaction
    outcome: str
    entry: CommitLogEntry

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]


class Kernel:
    """Single-writer owner of the head snapshot and the commit log."""

    def __init__(self, snapshot: SceneSnapshot, runtime: Optional[Runtime] = None, policy_id: str = "human"):
        self.runtime = runtime or Runtime()
        self.head = bind_runtime(snapshot, self.runtime)
        self.initial = self.head
        self.policy_id = policy_id
        self.log: list[CommitLogEntry] = []
        self.records: list[SpatialTransaction] = []
        self.parked: dict[str, SceneSnapshot] = {}
        self._counter = 0

    def certificate(self) -> ContextCertificate:
        return ContextCertificate(self.head.snapshot_id, self.head.registry_fingerprint, self.policy_id)

    def propose(
        self,
        invocation: ActuatorInvocation,
        preconditions: Sequence[InvariantSpec] = (),
        protected: Optional[Sequence[str]] = None,
        validators: Sequence[str] = (),
        txn_id: Optional[str] = None,
    ) -> SpatialTransaction:
        if txn_id is None:
            txn_id = f"txn.{self._counter:04d}"
        self._counter += 1
        if protected is None:
            protected = sorted(self.head.protected_invariants)
        return SpatialTransaction(
            txn_id=txn_id,
            certificate=self.certificate(),
            invocation=invocation,
            preconditions=tuple(preconditions),
            protected=tuple(protected),
            validators=tuple(validators),
        )

    def submit(self, txn: SpatialTransaction) -> Submission:
        before = self.head
        adm = admit(txn, before, self.runtime)
        if not adm:
            if adm.gap is not None:
                done = txn.conclude("capability-gap", gap=adm.gap, rejected_by=adm.predicate, detail=adm.detail)
            elif adm.predicate == "Pre":
                done = txn.conclude("review", rejected_by="Pre", detail=adm.detail)
            else:
                done = txn.conclude("rolled-back", rejected_by=adm.predicate, detail=adm.detail)
            return self._append(done, before, None)
        txn = txn.advance("admitted")
        muts = lower(txn, before, self.runtime)
        txn = replace(txn, mutation=muts)
        try:
            after = self.runtime.realize(before, muts)
        except (InvariantBreakingStructure, UnknownRef) as exc:
            done = txn.conclude("rolled-back", status="violated", detail=f"realization failed: {exc}")
            return self._append(done, before, None)
        audit = run_audit(before, after, txn, self.runtime)
        txn = txn.advance("realized", audit=audit)
        diff = compute_diff(predict(before, txn, self.runtime), audit.observed, self.runtime.tolerances)
        txn = txn.advance("diffed", effect_diff=diff)
        fin = finalize(txn, before, diff, after, run_checks(after, txn, self.runtime, before))
        if fin.parked is not None:
            self.parked[txn.txn_id] = fin.parked
        self.head = fin.snapshot
        return self._append(fin.txn, before, fin.snapshot.snapshot_id if fin.outcome == "committed" else None)

    def run(self, invocation: ActuatorInvocation, **kw) -> Submission:
        return self.submit(self.propose(invocation, **kw))

    def _append(self, txn: SpatialTransaction, before: SceneSnapshot, result: Optional[str]) -> Submission:
        entry = make_entry(self.log, txn.digest, before.snapshot_id, result, txn.outcome)
        self.log.append(entry)
        self.records.append(txn)
        return Submission(txn, txn.outcome, entry)


# ---------------------------------------------------------------- replay log files


def replay_lines(header: Mapping[str, Any], records: Iterable[Mapping[str, Any]]) -> list[str]:
    """Canonical JSON lines: header, records, then a trailer digest over everything before it."""
    lines = [_canon.dumps({"format": REPLAY_FORMAT, "kind": "header", **header})]
    lines += [_canon.dumps(r) for r in records]
    lines.append(_canon.dumps({"kind": "trailer", "digest": _canon.digest_text("\n".join(lines))}))
    return lines


def dumps_replay(header: Mapping[str, Any], records: Iterable[Mapping[str, Any]]) -> str:
    return "\n".join(replay_lines(header, records)) + "\n"


def txn_records(kernel: Kernel, scope: Mapping[str, Any] = {}) -> list[dict]:
    return [{"kind": "txn", **scope, "txn": t.to_dict(), "entry": e.to_dict()} for t, e in zip(kernel.records, kernel.log)]


def verify_replay_text(text: str) -> LogVerdict:
    """Check canonical spelling, per-record digests, hash chains and the trailer.

    ``broken_at`` is the 0-based line index of the first failure.
    """
    if not text.endswith("\n"):
        return LogVerdict(False, None, "missing final newline")
    lines = text[:-1].split("\n")
    chains: dict[str, list[CommitLogEntry]] = {}
    for i, line in enumerate(lines):
        try:
            rec = _canon.loads(line)
        except ValueError as exc:
            return LogVerdict(False, i, f"unparseable line: {exc}")
        if not isinstance(rec, dict) or _canon.dumps(rec) != line:
            return LogVerdict(False, i, "line is not canonical")
        kind = rec.get("kind")
        if i == 0:
            if kind != "header" or rec.get("format") != REPLAY_FORMAT:
                return LogVerdict(False, 0, f"expected a {REPLAY_FORMAT} header")
            continue
        if i == len(lines) - 1:
            if kind != "trailer" or rec.get("digest") != _canon.digest_text("\n".join(lines[:-1])):
                return LogVerdict(False, i, "trailer digest mismatch")
            continue
        if kind == "txn":
            try:
                entry = CommitLogEntry.from_dict(rec["entry"])
            except (KeyError, TypeError, ValueError) as exc:
                return LogVerdict(False, i, f"malformed log entry: {exc}")
            if _canon.digest(rec["txn"]) != entry.txn_digest:
                return LogVerdict(False, i, "transaction record digest mismatch")
            chain = chains.setdefault(str(rec.get("scenario", "")) + "/" + str(rec.get("condition", "")), [])
            chain.append(entry)
            verdict = verify_log(chain)
            if not verdict:
                return LogVerdict(False, i, verdict.detail)
    if len(lines) < 2:
        return LogVerdict(False, len(lines), "missing trailer")
    return LogVerdict(True)


def mutations_from_list(items: Iterable[Mapping]) -> tuple:
    return tuple(mutation_from_dict(d) for d in items)
