"""Rigid transforms and parametric primitives (meters, radians).

Quaternions are (w, x, y, z) tuples. Boxes are centered on their pose frame
with extents ``w`` along local x, ``d`` along local y and ``h`` along local z;
cylinders are centered with their axis on local z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Union

import numpy as np

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

IDENTITY_Q: Quat = (1.0, 0.0, 0.0, 0.0)
ZERO3: Vec3 = (0.0, 0.0, 0.0)
AXES = {"x": 0, "y": 1, "z": 2}
RENORM_TOL = 1e-9


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_norm(q: Quat) -> float:
    return math.sqrt(sum(c * c for c in q))


def quat_normalize(q: Quat) -> Quat:
    n = quat_norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return tuple(c / n for c in q)  # type: ignore[return-value]


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    s = math.sin(angle / 2.0)
    return (math.cos(angle / 2.0), float(ax[0] * s), float(ax[1] * s), float(ax[2] * s))


def quat_angle(q: Quat) -> float:
    """Rotation angle in [0, pi] represented by a unit quaternion."""
    w = min(1.0, abs(q[0]))
    return 2.0 * math.acos(w)


def rotate(q: Quat, v: Vec3) -> Vec3:
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * cross(q.xyz, v); v' = v + w t + cross(q.xyz, t)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def rotation_matrix(q: Quat) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Pose:
    translation: Vec3 = ZERO3
    rotation: Quat = IDENTITY_Q

    def compose(self, local: "Pose") -> "Pose":
        """self ∘ local: express *local* (given in this frame) in the outer frame."""
        rt = rotate(self.rotation, local.translation)
        t = (
            self.translation[0] + rt[0],
            self.translation[1] + rt[1],
            self.translation[2] + rt[2],
        )
        q = quat_mul(self.rotation, local.rotation)
        if abs(quat_norm(q) - 1.0) > RENORM_TOL:
            q = quat_normalize(q)
        return Pose(t, q)

    def apply(self, point: Vec3) -> Vec3:
        r = rotate(self.rotation, point)
        return (r[0] + self.translation[0], r[1] + self.translation[1], r[2] + self.translation[2])

    def inverse(self) -> "Pose":
        qi = quat_conj(self.rotation)
        t = rotate(qi, self.translation)
        return Pose((-t[0], -t[1], -t[2]), qi)


# ---------------------------------------------------------------- primitives


@dataclass(frozen=True)
class Box:
    w: float
    h: float
    d: float

    kind = "box"

    def half_extents(self) -> Vec3:
        return (self.w / 2.0, self.d / 2.0, self.h / 2.0)

    def to_dict(self) -> dict:
        return {"kind": "box", "w": self.w, "h": self.h, "d": self.d}


@dataclass(frozen=True)
class Cylinder:
    r: float
    h: float

    kind = "cylinder"

    def half_extents(self) -> Vec3:
        return (self.r, self.r, self.h / 2.0)

    def to_dict(self) -> dict:
        return {"kind": "cylinder", "r": self.r, "h": self.h}


@dataclass(frozen=True)
class PointSet:
    points: tuple[Vec3, ...]

    kind = "point-set"

    def half_extents(self) -> Vec3:
        # points are local; the box is taken about the local origin
        arr = np.abs(np.asarray(self.points, dtype=float))
        return tuple(float(v) for v in arr.max(axis=0))  # type: ignore[return-value]

    def to_dict(self) -> dict:
        return {"kind": "point-set", "points": [list(p) for p in self.points]}


Primitive = Union[Box, Cylinder, PointSet]


def primitive_from_dict(data: dict) -> Primitive:
    kind = data.get("kind")
    if kind == "box":
        prim: Primitive = Box(float(data["w"]), float(data["h"]), float(data["d"]))
    elif kind == "cylinder":
        prim = Cylinder(float(data["r"]), float(data["h"]))
    elif kind == "point-set":
        pts = tuple(tuple(float(c) for c in p) for p in data["points"])
        prim = PointSet(pts)  # type: ignore[arg-type]
    else:
        raise ValueError(f"unknown primitive kind {kind!r}")
    validate_primitive(prim)
    return prim


def validate_primitive(prim: Primitive) -> None:
    if isinstance(prim, Box):
        dims = (prim.w, prim.h, prim.d)
    elif isinstance(prim, Cylinder):
        dims = (prim.r, prim.h)
    else:
        if not prim.points:
            raise ValueError("point-set geometry needs at least one point")
        if not all(math.isfinite(c) for p in prim.points for c in p):
            raise ValueError("point-set coordinates must be finite")
        return
    for v in dims:
        if not (math.isfinite(v) and v > 0.0):
            raise ValueError(f"primitive dimensions must be finite and > 0, got {dims}")


# ---------------------------------------------------------------- boxes in world


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    axes: np.ndarray  # rows are the box's unit axes in world coordinates
    half: np.ndarray

    def corners(self) -> np.ndarray:
        signs = np.array(list(product((-1.0, 1.0), repeat=3)))
        return self.center + (signs * self.half) @ self.axes

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.corners()
        return c.min(axis=0), c.max(axis=0)


def world_box(prim: Primitive, pose: Pose) -> OrientedBox:
    """Oriented bounding box of *prim* placed at *pose* (exact for boxes)."""
    R = rotation_matrix(pose.rotation)
    if isinstance(prim, PointSet):
        pts = np.asarray(prim.points, dtype=float)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        center_local = (lo + hi) / 2.0
        half = np.maximum((hi - lo) / 2.0, 0.0)
    else:
        center_local = np.zeros(3)
        half = np.asarray(prim.half_extents(), dtype=float)
    center = R @ center_local + np.asarray(pose.translation, dtype=float)
    return OrientedBox(center=center, axes=R.T.copy(), half=half)


def obb_penetration(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum overlap depth over separating-axis candidates; <= 0 means disjoint/touching."""
    axes = [a.axes[i] for i in range(3)] + [b.axes[i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            c = np.cross(a.axes[i], b.axes[j])
            n = np.linalg.norm(c)
            if n > 1e-12:
                axes.append(c / n)
    d = b.center - a.center
    depth = math.inf
    for ax in axes:
        ra = float(np.sum(a.half * np.abs(a.axes @ ax)))
        rb = float(np.sum(b.half * np.abs(b.axes @ ax)))
        overlap = ra + rb - abs(float(d @ ax))
        depth = min(depth, overlap)
    return depth


def aabb_gap(a_lo, a_hi, b_lo, b_hi) -> float:
    """Euclidean distance between two axis-aligned boxes (0 when they touch or overlap)."""
    gaps = np.maximum(0.0, np.maximum(np.asarray(b_lo) - np.asarray(a_hi), np.asarray(a_lo) - np.asarray(b_hi)))
    return float(np.linalg.norm(gaps))


def aabb_penetration(a_lo, a_hi, b_lo, b_hi) -> float:
    """Smallest per-axis overlap; positive only when the boxes share volume."""
    overlap = np.minimum(np.asarray(a_hi), np.asarray(b_hi)) - np.maximum(np.asarray(a_lo), np.asarray(b_lo))
    return float(overlap.min())
