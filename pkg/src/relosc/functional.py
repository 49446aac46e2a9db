"""Discrete action functional, its gradient, and the explicit a-priori bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ProblemInstance, gamma_inverse
from .path import PeriodicPath


class InfeasiblePathError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    perturbation: float

    @property
    def psi_value(self) -> float:
        return self.kinetic + self.potential

    @property
    def j_value(self) -> float:
        return self.perturbation

    def total(self, lam: float) -> float:
        return self.kinetic + self.potential + lam * self.perturbation

    def to_dict(self, lam: float) -> dict:
        return {"kinetic": self.kinetic, "potential": self.potential,
                "perturbation": self.perturbation, "psi": self.psi_value,
                "j": self.j_value, "lambda": lam, "total": self.total(lam)}


def _velocities(inst: ProblemInstance, p: PeriodicPath) -> np.ndarray:
    if p.n != inst.n:
        raise ValueError(f"path dimension {p.n} != instance dimension {inst.n}")
    if not np.isclose(p.T, inst.T):
        raise ValueError("path period differs from the instance period")
    v = p.increments / p.h
    speed = np.linalg.norm(v, axis=1)
    if np.any(speed >= inst.L):
        k = int(np.argmax(speed))
        raise InfeasiblePathError(f"segment {k} has speed {speed[k]:.6g} >= L = {inst.L}")
    return v


def eval_energy(inst: ProblemInstance, p: PeriodicPath) -> EnergyBreakdown:
    """Kinetic term exact for piecewise-linear paths; F and psi*G by the
    periodic rectangle rule at the nodes."""
    v = _velocities(inst, p)
    h, t, u = p.h, p.times, p.nodes
    kinetic = h * float(np.sum(inst.kinetic.Phi(v)))
    potential = h * float(np.sum(inst.potential.F(t, u)))
    perturbation = h * float(np.sum(inst.weight.psi(t) * inst.perturbation.G(u)))
    return EnergyBreakdown(kinetic, potential, perturbation)


def total_energy(inst: ProblemInstance, p: PeriodicPath, lam: float) -> float:
    return eval_energy(inst, p).total(lam)


def gradient(inst: ProblemInstance, p: PeriodicPath, lam: float) -> np.ndarray:
    """Node gradient ``phi(d_{k-1}/h) - phi(d_k/h) + h (gradF + lam psi gradG)``."""
    v = _velocities(inst, p)
    h, t, u = p.h, p.times, p.nodes
    w = inst.kinetic.phi(v)
    force = inst.potential.gradF(t, u) + lam * inst.weight.psi(t)[:, None] * inst.perturbation.gradG(u)
    return np.roll(w, 1, axis=0) - w + h * force


def coercivity_lower_bound(inst: ProblemInstance, lam: float, S: float) -> float:
    """Lower bound for ``J + lam * Psi`` over paths of sup-norm ``S``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if S < 0:
        raise ValueError("S must be non-negative")
    delta = inst.perturbation.delta
    if delta is None:
        raise ValueError("the perturbation declares no linear lower bound delta")
    ipsi = inst.weight.integral
    T = inst.T
    phi0 = float(inst.kinetic.Phi(np.zeros(inst.n)))
    g = float(inst.growth.gamma(max(0.0, S - inst.LT)))
    return -delta * ipsi * S + lam * T * g - delta * ipsi + lam * phi0 * T


def sublevel_radius(inst: ProblemInstance, r: float) -> float:
    """Radius containing every path with ``Psi <= r``."""
    T = inst.T
    phi0 = float(inst.kinetic.Phi(np.zeros(inst.n)))
    floor = phi0 * T + T * float(inst.growth.gamma(0.0))
    if r < floor:
        raise ValueError(f"level {r} is below the floor {floor}: the sub-level set is empty")
    y = max((r - phi0 * T) / T, float(inst.growth.gamma(0.0)))
    return inst.LT + gamma_inverse(inst.growth, y)


def search_radius(inst: ProblemInstance, lam: float, level: float, inside: float = 0.0) -> float:
    """Radius containing every path with ``Psi + lam J <= level``.

    Uses the coercivity chain with multiplier ``1/lam`` when a ``delta`` is
    declared, and the plain sub-level radius when the perturbation is absent.
    ``inside`` is the sup-norm of a path known to reach ``level``; the bound is
    convex in the radius, so the answer is the right end of the interval
    containing it.
    """
    if lam == 0 or inst.perturbation.spec.get("family") == "zero":
        return sublevel_radius(inst, level)
    if inst.perturbation.delta is None:
        raise ValueError("no declared delta: cannot bound the search region")
    mu = 1.0 / lam
    target = level / lam

    def excess(S):
        return coercivity_lower_bound(inst, mu, S) - target

    lo = float(inside)
    hi = max(2.0 * lo, 1.0, inst.LT)
    while excess(hi) <= 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ValueError("coercivity bound does not confine the search region")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return hi
