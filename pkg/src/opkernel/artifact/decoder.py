"""A closed-form toy decoder with analytic handle Jacobians.

Each part is an axis-aligned box with parameters ``[cx, cy, cz, sx, sy, sz]``
given by ``b + A z``, where selected entries saturate smoothly as
``b_i + L_i tanh((A z)_i / L_i)``. A surface point at coordinate ``u`` in
``[-1, 1]^3`` is ``c + 0.5 * s * u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import MalformedArtifact
from ..geometry import Box
from ..graph import ProvenanceTag
from .checks import DEFAULT_CHECKERS, Checker
from .model import ConstraintSpec, GeneratedSpatialArtifact, Handle, PosedPrimitive, SymbolicEdge, SymbolicNode

PARAM_NAMES = ("cx", "cy", "cz", "sx", "sy", "sz")
NP = len(PARAM_NAMES)

_CORNERS = [np.array(c, dtype=float) for c in product((-1.0, 1.0), repeat=3)]
_FACES = [s * np.eye(3)[k] for k in range(3) for s in (-1.0, 1.0)]
SAMPLE_U = np.array(_CORNERS + _FACES)


class PartTemplate(NamedTuple):
    part_id: str
    kind: str
    parent: Optional[str] = None


class ToyDecoder:
    def __init__(
        self,
        parts: Sequence[PartTemplate],
        A: np.ndarray,
        b: np.ndarray,
        saturation: Optional[Mapping[int, float]] = None,
        edges: Sequence[SymbolicEdge] = (),
        constraints: Sequence[ConstraintSpec] = (),
        handles: Sequence[Handle] = (),
        name: str = "toy",
    ):
        self.parts = tuple(parts)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.A.shape[0] != NP * len(self.parts) or self.b.shape != (self.A.shape[0],):
            raise ValueError("decoder maps need 6 rows per part")
        self.saturation = dict(saturation or {})
        self.edges = tuple(edges)
        self.constraints = tuple(constraints)
        self.handles = tuple(handles)
        self.name = name
        self.index = {p.part_id: k for k, p in enumerate(self.parts)}

    @property
    def latent_dim(self) -> int:
        return self.A.shape[1]

    def constraint(self, cid: str) -> ConstraintSpec:
        return next(c for c in self.constraints if c.constraint_id == cid)

    def handle(self, hid: str) -> Handle:
        return next(h for h in self.handles if h.handle_id == hid)

    # -- parameter map

    def params_flat(self, z) -> np.ndarray:
        lin = self.A @ np.asarray(z, dtype=float)
        out = self.b + lin
        for i, L in self.saturation.items():
            out[i] = self.b[i] + L * np.tanh(lin[i] / L)
        return out

    def params(self, z) -> np.ndarray:
        return self.params_flat(z).reshape(len(self.parts), NP)

    def params_jacobian(self, z) -> np.ndarray:
        lin = self.A @ np.asarray(z, dtype=float)
        J = self.A.copy()
        for i, L in self.saturation.items():
            J[i] *= 1.0 - np.tanh(lin[i] / L) ** 2
        return J

    # -- surface points

    def surface_point(self, z, part: str, u) -> np.ndarray:
        p = self.params(z)[self.index[part]]
        return p[:3] + 0.5 * p[3:] * np.asarray(u, dtype=float)

    def point_jacobian(self, z, part: str, u) -> np.ndarray:
        """d x(u; z) / d z, shape (3, m)."""
        k = self.index[part]
        Jp = self.params_jacobian(z)[NP * k : NP * (k + 1)]
        return Jp[:3] + 0.5 * np.asarray(u, dtype=float)[:, None] * Jp[3:]

    def sample_points(self, z) -> dict[str, np.ndarray]:
        P = self.params(z)
        return {p.part_id: P[k, :3] + 0.5 * P[k, 3:] * SAMPLE_U for k, p in enumerate(self.parts)}

    # -- realization

    def decode(self, z, artifact_id: Optional[str] = None) -> GeneratedSpatialArtifact:
        P = self.params(z)
        if not np.all(np.isfinite(P)) or np.any(P[:, 3:] <= 0.0):
            raise MalformedArtifact("decoded sizes must be finite and positive")
        geometry, nodes = [], []
        for k, part in enumerate(self.parts):
            cx, cy, cz, sx, sy, sz = (float(v) for v in P[k])
            geometry.append(PosedPrimitive(f"g.{part.part_id}", Box(sx, sz, sy), (cx, cy, cz)))
            nodes.append(SymbolicNode(part.part_id, part.kind, f"g.{part.part_id}", part.parent))
        aid = artifact_id or self.name
        tag = ProvenanceTag("model", source_ref=f"decoder.{self.name}")
        return GeneratedSpatialArtifact(
            artifact_id=aid,
            geometry=tuple(geometry),
            nodes=tuple(nodes),
            edges=self.edges,
            constraints=self.constraints,
            handles=self.handles,
            provenance={p.part_id: tag for p in self.parts},
            uncertainty={p.part_id: 0.1 for p in self.parts},
        )


def boxes_from_points(points: Mapping[str, np.ndarray]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {k: (v.min(axis=0), v.max(axis=0)) for k, v in points.items()}


# ---------------------------------------------------------------- handles


def handle_jacobian(decoder: ToyDecoder, z, handle: Handle, part: str, u) -> np.ndarray:
    """Analytic sensitivity of the surface point at *u* to the handle, shape (3, d)."""
    lo, hi = handle.latent_slice
    return decoder.point_jacobian(z, part, u)[:, lo:hi]


def fd_handle_jacobian(decoder: ToyDecoder, z, handle: Handle, part: str, u, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference estimate of :func:`handle_jacobian`."""
    z = np.asarray(z, dtype=float)
    lo, hi = handle.latent_slice
    cols = []
    for j in range(lo, hi):
        e = np.zeros_like(z)
        e[j] = step
        cols.append((decoder.surface_point(z + e, part, u) - decoder.surface_point(z - e, part, u)) / (2 * step))
    return np.stack(cols, axis=1)


def _with_edit(z, handle: Handle, dh) -> np.ndarray:
    z2 = np.array(z, dtype=float)
    lo, hi = handle.latent_slice
    z2[lo:hi] += np.asarray(dh, dtype=float)
    return z2


def first_order_points(decoder: ToyDecoder, z, handle: Handle, dh) -> dict[str, np.ndarray]:
    dh = np.asarray(dh, dtype=float)
    pts = decoder.sample_points(z)
    return {
        part: np.array([x + handle_jacobian(decoder, z, handle, part, u) @ dh for x, u in zip(pts[part], SAMPLE_U)])
        for part in pts
    }


def _local_ok(decoder: ToyDecoder, handle: Handle, boxes, checkers: Mapping[str, Checker]) -> bool:
    for cid in handle.local_constraints:
        spec = decoder.constraint(cid)
        fn = checkers.get(spec.kind)
        if fn is None or fn(spec, boxes) > 0.0:
            return False
    return True


def handle_valid(decoder: ToyDecoder, z, handle: Handle, dh, checkers: Mapping[str, Checker] = DEFAULT_CHECKERS) -> bool:
    """Local constraints evaluated on first-order displaced sample points."""
    return _local_ok(decoder, handle, boxes_from_points(first_order_points(decoder, z, handle, dh)), checkers)


def preserves(decoder: ToyDecoder, z, handle: Handle, dh, checkers: Mapping[str, Checker] = DEFAULT_CHECKERS) -> bool:
    """Local constraints evaluated on the full re-decode after the edit."""
    return _local_ok(decoder, handle, boxes_from_points(decoder.sample_points(_with_edit(z, handle, dh))), checkers)


EDIT_FACTORS = (-1.0, -0.5, 0.5, 1.0)


def edit_grid(handle: Handle) -> list[np.ndarray]:
    out = []
    for k in range(handle.dim):
        for f in EDIT_FACTORS:
            dh = np.zeros(handle.dim)
            dh[k] = f * handle.step(k)
            out.append(dh)
    return out


@dataclass(frozen=True)
class GammaReport:
    value: Optional[float]
    per_handle: Mapping[str, tuple[int, int]]  # handle -> (preserved, total)

    def to_dict(self) -> dict:
        return {
            "value": "undefined" if self.value is None else self.value,
            "per_handle": {k: list(v) for k, v in sorted(self.per_handle.items())},
        }


def gamma_hip(decoder: ToyDecoder, z, handles: Optional[Sequence[Handle]] = None, checkers: Mapping[str, Checker] = DEFAULT_CHECKERS) -> GammaReport:
    handles = decoder.handles if handles is None else tuple(handles)
    per: dict[str, tuple[int, int]] = {}
    kept = total = 0
    for h in handles:
        grid = edit_grid(h)
        ok = sum(preserves(decoder, z, h, dh, checkers) for dh in grid)
        per[h.handle_id] = (ok, len(grid))
        kept += ok
        total += len(grid)
    return GammaReport(kept / total if total else None, per)
