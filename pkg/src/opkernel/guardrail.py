"""Constrained dual-stream decoding over a small block world.

Geometric tokens place a part on a grid; symbolic tokens make claims about
the placed parts. The two streams interleave strictly (geometric first). A
token is admissible when a closed forward-chaining rule set, run over the
symbolic store of the prefix plus that token, derives no violation. The base
distribution is masked and renormalized; when nothing survives the mask the
decoder never emits a token and instead resolves the dead-end by strategy.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import MalformedDistribution

ORIENTATIONS = (0, 90)
CLAIM_KINDS = ("on", "clear", "attached", "end")
STRATEGIES = ("halt", "backtrack", "review", "capability-gap")
BACKTRACK_DEPTH = 32
LENGTH_CAP = 256
SUM_TOL = 1e-9


# ---------------------------------------------------------------- tokens


@dataclass(frozen=True)
class Place:
    part: str
    x: int
    y: int
    orientation: int = 0

    @property
    def key(self) -> str:
        return f"place {self.part} {self.x} {self.y} {self.orientation}"


@dataclass(frozen=True)
class Claim:
    kind: str
    args: tuple[str, ...] = ()

    @property
    def key(self) -> str:
        return " ".join((self.kind,) + self.args)


Token = Union[Place, Claim]
END = Claim("end")


@dataclass(frozen=True)
class DualToken:
    geometric: Place
    symbolic: Optional[Claim] = None

    def to_dict(self) -> dict:
        return {"g": self.geometric.key, "s": None if self.symbolic is None else self.symbolic.key}


def token_from_key(key: str) -> Token:
    words = key.split()
    if words[0] == "place":
        return Place(words[1], int(words[2]), int(words[3]), int(words[4]))
    if words[0] not in CLAIM_KINDS:
        raise ValueError(f"unknown token {key!r}")
    return Claim(words[0], tuple(words[1:]))


@dataclass(frozen=True)
class World:
    width: int
    height: int
    parts: Mapping[str, int]  # part id -> length in cells

    def cells(self, p: Place) -> tuple[tuple[int, int], ...]:
        n = self.parts[p.part]
        if p.orientation == 0:
            return tuple((p.x + i, p.y) for i in range(n))
        return tuple((p.x, p.y + i) for i in range(n))

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def geometric_vocabulary(self) -> list[Place]:
        return [
            Place(part, x, y, o)
            for part in sorted(self.parts)
            for y in range(self.height)
            for x in range(self.width)
            for o in ORIENTATIONS
        ]

    def symbolic_vocabulary(self) -> list[Claim]:
        ids = sorted(self.parts)
        out = [Claim("on", (a, b)) for a in ids for b in ids if a != b]
        out += [Claim("clear", (a,)) for a in ids]
        out += [Claim("attached", (a, b)) for a in ids for b in ids if a != b]
        return out + [END]

    def vocabulary(self, position: int) -> list[Token]:
        return self.geometric_vocabulary() if position % 2 == 0 else self.symbolic_vocabulary()


# ---------------------------------------------------------------- rule engine


def _token_facts(world: World, tok: Token, seen: set, placed: int) -> set:
    if isinstance(tok, Place):
        out = {("at", tok.part, world.cells(tok), placed)}
        if tok.part in seen:
            out.add(("placed-twice", tok.part))
        return out
    if tok.kind == "clear":
        # clear speaks about the placements made so far, later ones may cover the part
        return {("claim", "clear", tok.args[0], placed)}
    return {("claim", tok.kind) + tok.args}


def symbolic_store(world: World, prefix: Iterable[Token]) -> frozenset:
    """Base facts contributed by a prefix, as a pure left fold over its tokens."""
    facts: set = set()
    seen: set[str] = set()
    placed = 0
    for tok in prefix:
        facts |= _token_facts(world, tok, seen, placed)
        if isinstance(tok, Place):
            seen.add(tok.part)
            placed += 1
    return frozenset(facts)


def _occupancy(facts, world):
    return {("occ", c, f[1]) for f in facts if f[0] == "at" for c in f[2]}


def _bounds(facts, world):
    return {("outside", f[2], f[1]) for f in facts if f[0] == "occ" and not world.in_bounds(f[1])}


def _geometry(facts, world):
    occ = [(f[1], f[2]) for f in facts if f[0] == "occ"]
    out = set()
    for (x, y), p in occ:
        for (u, v), q in occ:
            if p == q:
                continue
            if (u, v) == (x, y):
                out.add(("overlap", min(p, q), max(p, q)))
            if (u, v) == (x, y - 1):
                out.add(("above", p, q))
            if abs(u - x) + abs(v - y) == 1:
                out.add(("adjacent", p, q))
    return out


def _support(facts, world):
    out = {("supported", f[2]) for f in facts if f[0] == "occ" and f[1][1] == 0}
    supported = {f[1] for f in facts if f[0] == "supported"}
    out |= {("supported", f[1]) for f in facts if f[0] == "above" and f[2] in supported}
    return out


def _symmetry(facts, world):
    return {("claim", "attached", f[3], f[2]) for f in facts if f[0] == "claim" and f[1] == "attached"}


# each rule with the fact kinds it reads; a rule only reruns when one of those grew
RULES: tuple[tuple[Callable, frozenset], ...] = (
    (_occupancy, frozenset({"at"})),
    (_bounds, frozenset({"occ"})),
    (_geometry, frozenset({"occ"})),
    (_support, frozenset({"occ", "above", "supported"})),
    (_symmetry, frozenset({"claim"})),
)


def closure(world: World, base: Iterable, fresh: Optional[Iterable] = None) -> frozenset:
    """Forward-chain :data:`RULES` to a fixpoint.

    When *base* is already a fixpoint, pass the added facts as *fresh* so only
    rules reading those kinds run first.
    """
    facts = set(base)
    if fresh is None:
        changed = {f[0] for f in facts}
    else:
        fresh = set(fresh) - facts
        facts |= fresh
        changed = {f[0] for f in fresh}
    while changed:
        new = set()
        for rule, reads in RULES:
            if reads & changed:
                new |= rule(facts, world)
        new -= facts
        changed = {f[0] for f in new}
        facts |= new
    return frozenset(facts)


def violations(world: World, prefix: Sequence[Token]) -> list[tuple]:
    """Invariant violations derived from the prefix, sorted."""
    return violations_in(world, closure(world, symbolic_store(world, prefix)))


def violations_in(world: World, facts: frozenset) -> list[tuple]:
    placed = {f[1] for f in facts if f[0] == "at"}
    ordinal = {f[1]: f[3] for f in facts if f[0] == "at"}

    def has(*fact) -> bool:
        return tuple(fact) in facts

    out = [f for f in facts if f[0] in ("overlap", "outside", "placed-twice")]
    out += [("unsupported", p) for p in placed if not has("supported", p)]
    for f in facts:
        if f[0] != "claim":
            continue
        kind, args = f[1], f[2:]
        if kind == "on" and not has("above", *args):
            out.append(("false-on",) + args)
        elif kind == "clear":
            a, seen = args
            if a not in placed or ordinal[a] >= seen or any(g[0] == "above" and g[2] == a and ordinal[g[1]] < seen for g in facts):
                out.append(("false-clear", a))
        elif kind == "attached" and not has("adjacent", *args):
            out.append(("detached",) + args)
        elif kind == "end" and placed != set(world.parts):
            out.append(("premature-end",))
    return sorted(out, key=repr)


def mask(world: World, prefix: Sequence[Token], candidate: Token) -> int:
    return 0 if violations(world, list(prefix) + [candidate]) else 1


class PrefixChecker:
    """Incremental masks for one prefix.

    The prefix closure is derived once; each candidate adds its own base facts
    and chains from that fixpoint, which is sound because every rule is monotone.
    """

    def __init__(self, world: World, prefix: Sequence[Token]):
        self.world = world
        self.seen = {t.part for t in prefix if isinstance(t, Place)}
        self.placed = sum(isinstance(t, Place) for t in prefix)
        self.facts = closure(world, symbolic_store(world, prefix))

    def mask(self, candidate: Token) -> int:
        new = _token_facts(self.world, candidate, self.seen, self.placed)
        return 0 if violations_in(self.world, closure(self.world, self.facts, new)) else 1


# ---------------------------------------------------------------- constrained step


@dataclass(frozen=True)
class DeadEnd:
    strategy: str
    step: int
    detail: str = ""

    @property
    def outcome(self) -> str:
        return "capability-gap" if self.strategy == "capability-gap" else f"dead-end({self.strategy})"


def check_distribution(p0, size: int) -> np.ndarray:
    p = np.asarray(p0, dtype=float)
    if p.shape != (size,):
        raise MalformedDistribution(f"expected {size} probabilities, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise MalformedDistribution("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise MalformedDistribution(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def constrained_step(p0, masks, strategy: str = "backtrack", step: int = 0) -> Union[np.ndarray, DeadEnd]:
    """Mask and renormalize *p0*; a zero denominator yields a :class:`DeadEnd`."""
    m = np.asarray(masks, dtype=float)
    p = check_distribution(p0, m.shape[0])
    weighted = p * m
    total = weighted.sum()
    if total <= 0.0:
        return DeadEnd(strategy, step, "every candidate is masked")
    return weighted / total


# ---------------------------------------------------------------- base distributions

P0Source = Callable[[World, Sequence[Token], Sequence[Token]], np.ndarray]


@dataclass
class TableP0:
    """Fixed preferences by token key; unlisted tokens share a small floor weight."""

    weights: Mapping[str, float] = field(default_factory=dict)
    floor: float = 1e-3

    def __call__(self, world: World, prefix: Sequence[Token], vocab: Sequence[Token]) -> np.ndarray:
        w = np.array([self.weights.get(t.key, self.floor) for t in vocab], dtype=float)
        return w / w.sum()


def uniform_p0(world: World, prefix: Sequence[Token], vocab: Sequence[Token]) -> np.ndarray:
    return np.full(len(vocab), 1.0 / len(vocab))


class ExternalP0:
    """Asks a child process for probabilities: one JSON request line, one ``{"probs": [...]}`` line back."""

    def __init__(self, command: str):
        self.command = command
        self._proc: Optional[subprocess.Popen] = None

    def __call__(self, world: World, prefix: Sequence[Token], vocab: Sequence[Token]) -> np.ndarray:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        req = {"prefix": [t.key for t in prefix], "vocabulary": [t.key for t in vocab]}
        self._proc.stdin.write(json.dumps(req) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise MalformedDistribution(f"p0 source {self.command!r} closed its output")
        return check_distribution(json.loads(line).get("probs"), len(vocab))

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None


# ---------------------------------------------------------------- decode loop


@dataclass(frozen=True)
class StepRecord:
    step: int
    masked: int
    chosen: Optional[str]
    outcome: str

    def to_dict(self) -> dict:
        return {"step": self.step, "masked": self.masked, "chosen": self.chosen, "outcome": self.outcome}


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[Token, ...]
    outcome: str
    trace: tuple[StepRecord, ...]
    backtracks: int = 0
    dead_end: Optional[DeadEnd] = None

    def pairs(self) -> list[DualToken]:
        return [
            DualToken(self.tokens[i], self.tokens[i + 1] if i + 1 < len(self.tokens) else None)  # type: ignore[arg-type]
            for i in range(0, len(self.tokens), 2)
        ]

    def to_dict(self) -> dict:
        return {
            "tokens": [t.key for t in self.tokens],
            "outcome": self.outcome,
            "backtracks": self.backtracks,
            "trace": [r.to_dict() for r in self.trace],
        }


def decode(
    world: World,
    p0: P0Source = uniform_p0,
    strategy: str = "backtrack",
    seed: Optional[int] = None,
    cap: int = LENGTH_CAP,
    depth: int = BACKTRACK_DEPTH,
    validator: Optional[Callable[[World, Sequence[Token]], list]] = None,
) -> DecodeResult:
    """Greedy when *seed* is None, otherwise seeded sampling from the constrained distribution.

    *validator* re-checks every emitted prefix from scratch; it defaults to
    :func:`violations` and any complaint raises, since it would mean an
    invalid token got through the mask.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown dead-end strategy {strategy!r}")
    check = validator or violations
    rng = np.random.default_rng(seed) if seed is not None else None
    prefix: list[Token] = []
    banned: dict[int, set[str]] = {}
    trace: list[StepRecord] = []
    pops = 0
    while True:
        k = len(prefix)
        if k >= cap:
            trace.append(StepRecord(k, 0, None, "length-capped"))
            return DecodeResult(tuple(prefix), "length-capped", tuple(trace), pops)
        vocab = world.vocabulary(k)
        skip = banned.get(k, set())
        checker = PrefixChecker(world, prefix)
        masks = np.array([0 if t.key in skip else checker.mask(t) for t in vocab])
        step = constrained_step(p0(world, prefix, vocab), masks, strategy, k)
        masked = int(len(vocab) - masks.sum())
        if isinstance(step, DeadEnd):
            if strategy == "backtrack":
                if prefix and pops < depth:
                    last = prefix.pop()
                    pops += 1
                    # bans below the popped position no longer apply; siblings at it keep accumulating
                    banned = {i: s for i, s in banned.items() if i < k}
                    banned.setdefault(k - 1, set()).add(last.key)
                    trace.append(StepRecord(k, masked, None, f"backtrack from {last.key}"))
                    continue
                step = DeadEnd("capability-gap", k, "backtracking exhausted")
            trace.append(StepRecord(k, masked, None, step.outcome))
            return DecodeResult(tuple(prefix), step.outcome, tuple(trace), pops, step)
        i = int(np.argmax(step)) if rng is None else int(rng.choice(len(vocab), p=step))
        tok = vocab[i]
        prefix.append(tok)
        problems = check(world, prefix)
        if problems:
            raise AssertionError(f"emitted prefix violates invariants: {problems}")
        done = tok == END
        trace.append(StepRecord(k, masked, tok.key, "complete" if done else "emitted"))
        if done:
            return DecodeResult(tuple(prefix), "complete", tuple(trace), pops)


def tower_world() -> World:
    return World(3, 4, {"a": 1, "b": 1, "c": 1})


def tower_p0() -> TableP0:
    """Prefers stacking a, b, c in column 1 with matching on-claims."""
    return TableP0(
        {
            "place a 1 0 0": 1.0,
            "place b 1 1 0": 1.0,
            "place c 1 2 0": 1.0,
            "clear a": 0.5,
            "on b a": 1.0,
            "on c b": 0.5,
            "end": 2.0,
        }
    )


def conflict_world() -> World:
    """Three parts, two cells: the third placement can never succeed."""
    return World(1, 2, {"a": 1, "b": 1, "c": 1})

