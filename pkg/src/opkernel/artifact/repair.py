"""Penalty-method latent repair with Armijo backtracking gradient descent.

The objective for a proximity anchor ``a`` is

    sum_i w_i (p_i(z) - y_i)^2 + lam * sum_c max(0, v_c(z))^2 + beta * |z - a|^2

Each round minimizes it from the current iterate with ``a`` set to that
iterate; rounds repeat until every violation is within tolerance. Dropping the
proximity term at a round boundary can only lower the objective, so the
concatenated trace stays non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import NonFinite
from .decoder import NP, ToyDecoder
from .model import ConstraintSpec

REPAIR_KINDS = ("contact", "clearance", "alignment")


def _bounds(P: np.ndarray, k: int):
    c, s = P[k, :3], P[k, 3:]
    return c - s / 2.0, c + s / 2.0


def constraint_value_grad(spec: ConstraintSpec, P: np.ndarray, index: dict) -> tuple[float, np.ndarray]:
    """Violation value (<= 0 holds) and its gradient with respect to the (parts, 6) parameter array."""
    if spec.kind not in REPAIR_KINDS:
        raise ValueError(f"no differentiable form for constraint kind {spec.kind!r}")
    a, b = (index[s] for s in spec.subjects)
    grad = np.zeros_like(P)
    eps = spec.epsilon
    if spec.kind == "alignment":
        i = "xyz".index(str(spec.parameters.get("axis", "x")))
        d = P[a, i] - P[b, i]
        sgn = np.sign(d)
        grad[a, i], grad[b, i] = sgn, -sgn
        return abs(d) - eps, grad
    alo, ahi = _bounds(P, a)
    blo, bhi = _bounds(P, b)
    g = np.zeros(3)
    dg = np.zeros((3,) + P.shape)
    for k in range(3):
        right, left = blo[k] - ahi[k], alo[k] - bhi[k]
        if right > 0.0 and right >= left:
            g[k] = right
            dg[k, b, k], dg[k, b, 3 + k], dg[k, a, k], dg[k, a, 3 + k] = 1.0, -0.5, -1.0, -0.5
        elif left > 0.0:
            g[k] = left
            dg[k, a, k], dg[k, a, 3 + k], dg[k, b, k], dg[k, b, 3 + k] = 1.0, -0.5, -1.0, -0.5
    gap = float(np.linalg.norm(g))
    dgap = np.tensordot(g / gap, dg, axes=1) if gap > 0.0 else np.zeros_like(P)
    if spec.kind == "contact":
        return gap - eps, dgap
    return float(spec.parameters.get("min", 0.0)) - gap - eps, -dgap


@dataclass
class RepairResult:
    z: np.ndarray
    trace: list[float]
    violations: dict[str, float]
    rounds: int
    iterations: int
    records: list[dict] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max([0.0] + [max(0.0, v) for v in self.violations.values()])


class RepairProblem:
    def __init__(
        self,
        decoder: ToyDecoder,
        target: Optional[np.ndarray] = None,
        task_weights: Optional[np.ndarray] = None,
        constraints: Optional[Sequence[ConstraintSpec]] = None,
        lam: float = 10.0,
        beta: float = 0.1,
    ):
        self.decoder = decoder
        n = NP * len(decoder.parts)
        self.target = np.zeros(n) if target is None else np.asarray(target, dtype=float)
        self.weights = np.zeros(n) if task_weights is None else np.asarray(task_weights, dtype=float)
        self.constraints = tuple(decoder.constraints if constraints is None else constraints)
        self.lam = float(lam)
        self.beta = float(beta)

    def violations(self, z) -> dict[str, float]:
        P = self.decoder.params(z)
        return {c.constraint_id: constraint_value_grad(c, P, self.decoder.index)[0] for c in self.constraints}

    def value_grad(self, z: np.ndarray, anchor: np.ndarray) -> tuple[float, np.ndarray]:
        flat = self.decoder.params_flat(z)
        Jp = self.decoder.params_jacobian(z)
        r = flat - self.target
        f = float(np.sum(self.weights * r * r))
        gp = 2.0 * self.weights * r
        P = flat.reshape(len(self.decoder.parts), NP)
        for c in self.constraints:
            v, dv = constraint_value_grad(c, P, self.decoder.index)
            if v > 0.0:
                f += self.lam * v * v
                gp = gp + 2.0 * self.lam * v * dv.reshape(-1)
        d = z - anchor
        f += self.beta * float(d @ d)
        g = Jp.T @ gp + 2.0 * self.beta * d
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise NonFinite("repair objective is not finite")
        return f, g


def latent_repair(
    decoder: ToyDecoder,
    z0,
    target=None,
    task_weights=None,
    constraints: Optional[Sequence[ConstraintSpec]] = None,
    lam: float = 10.0,
    beta: float = 0.1,
    violation_tol: float = 1e-6,
    max_rounds: int = 50,
    max_iter: int = 500,
    step0: float = 0.1,
    shrink: float = 0.5,
    armijo: float = 1e-4,
    grad_tol: float = 1e-8,
    decrease_tol: float = 1e-12,
) -> RepairResult:
    prob = RepairProblem(decoder, target, task_weights, constraints, lam, beta)
    z = np.array(z0, dtype=float)
    trace: list[float] = []
    records: list[dict] = []
    iters = rounds = 0
    for rounds in range(1, max_rounds + 1):
        anchor = z.copy()
        f, g = prob.value_grad(z, anchor)
        if not trace or f < trace[-1]:
            trace.append(f)
        for _ in range(max_iter):
            if np.linalg.norm(g) <= grad_tol:
                break
            t = step0
            gg = float(g @ g)
            while True:
                z_new = z - t * g
                f_new, g_new = prob.value_grad(z_new, anchor)
                if f_new <= f - armijo * t * gg or t < 1e-20:
                    break
                t *= shrink
            # keep shrinking while it still helps; a long step can leap over a hinge kink
            while t >= 1e-20:
                z_try = z - t * shrink * g
                f_try, g_try = prob.value_grad(z_try, anchor)
                if f_try >= f_new:
                    break
                t, z_new, f_new, g_new = t * shrink, z_try, f_try, g_try
            if f_new > f:
                break
            iters += 1
            decrease = f - f_new
            z, f, g = z_new, f_new, g_new
            trace.append(f)
            records.append({"round": rounds, "iteration": iters, "objective": f, "step": t})
            if decrease <= decrease_tol:
                break
        viol = prob.violations(z)
        worst = max([0.0] + [max(0.0, v) for v in viol.values()])
        if worst <= violation_tol or prob.lam == 0.0 or np.linalg.norm(z - anchor) == 0.0:
            break
    return RepairResult(z, trace, prob.violations(z), rounds, iters, records)
