"""Sampled checks of the hypotheses (i1)-(i4) and the plateau condition (j1)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.stats import qmc

from .functional import sublevel_radius
from .model import Perturbation, ProblemInstance, gamma_inverse

VERIFIED = "verified-on-samples"
FALSIFIED = "falsified"
DECLARED = "declared"


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: Optional[dict] = None
    detail: str = ""
    declared_value: Optional[bool] = None

    @property
    def holds(self) -> bool:
        if self.status == DECLARED:
            return bool(self.declared_value)
        return self.status == VERIFIED

    def to_dict(self) -> dict:
        return {"status": self.status, "holds": self.holds, "witness": self.witness,
                "detail": self.detail, "declared_value": self.declared_value}


@dataclass(frozen=True)
class SampleSpec:
    radius: float = 10.0
    n_random: int = 2000
    n_times: int = 16
    seed: int = 0


@dataclass(frozen=True)
class I4Certificate:
    x1: np.ndarray
    x2: np.ndarray
    c: float
    inf_F_ball: float
    G_at_points: tuple
    inf_G_ball: float
    strict_gap: float
    argmin_G: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {"x1": self.x1.tolist(), "x2": self.x2.tolist(), "c": self.c,
                "inf_F_ball": self.inf_F_ball, "G_at_points": list(self.G_at_points),
                "inf_G_ball": self.inf_G_ball, "strict_gap": self.strict_gap,
                "argmin_G": None if self.argmin_G is None else self.argmin_G.tolist()}


def _ball_samples(n: int, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples in the closed ball, plus points on its sphere."""
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return np.vstack([g * r[:, None], g[: count // 4] * radius])


def _sphere(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def check_i1(inst: ProblemInstance, sample_spec: SampleSpec = SampleSpec()) -> Verdict:
    rng = np.random.default_rng(sample_spec.seed)
    n = inst.n
    pts = _ball_samples(n, sample_spec.n_random, sample_spec.radius, rng)
    grid = np.linspace(-sample_spec.radius, sample_spec.radius, 41)
    axis_pts = np.zeros((grid.size * n, n))
    for i in range(n):
        axis_pts[i * grid.size:(i + 1) * grid.size, i] = grid
    pts = np.vstack([pts, axis_pts])
    times = np.arange(sample_spec.n_times) * inst.T / sample_spec.n_times
    gam = inst.growth.gamma(np.linalg.norm(pts, axis=1))
    worst = None
    for t in times:
        F = inst.potential.F(np.full(len(pts), t), pts)
        gap = F + 1e-12 - gam
        k = int(np.argmin(gap))
        if gap[k] < 0 and (worst is None or gap[k] < worst[0]):
            worst = (float(gap[k]), float(t), pts[k])
    if worst is None:
        return Verdict(VERIFIED, detail=f"gamma(|x|) <= F(t,x) at {len(pts) * len(times)} samples")
    gap, t, x = worst
    return Verdict(FALSIFIED, witness={"t": t, "x": x.tolist(),
                                       "gamma": float(inst.growth.gamma(np.linalg.norm(x))),
                                       "F": float(inst.potential.F(np.array(t), x))},
                   detail=f"gamma(|x|) exceeds F(t,x) by {-gap:.6g}")


def default_radii(start: float = 10.0, count: int = 13) -> np.ndarray:
    return start * 2.0 ** np.arange(count)


def check_i2(G: Perturbation, n: int, radii_schedule=None, directions: int = 64,
             seed: int = 0, tol: float = 1e-9, delta_ref: float = 1e3) -> Verdict:
    """Ratio test on ``min_{|x|=R} G(x)/|x|`` along an increasing radius schedule.

    A falsified verdict carries a point violating ``-D(|x|+1) <= G(x)`` with
    ``D = delta_ref * max(1, delta)`` and the growth exponent of the ratio.
    """
    radii = default_radii() if radii_schedule is None else np.asarray(radii_schedule, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must increase")
    rng = np.random.default_rng(seed)
    dirs = _sphere(n, directions, rng)
    ratios, argmins = [], []
    for R in radii:
        x = R * dirs
        vals = G.G(x) / R
        k = int(np.argmin(vals))
        ratios.append(float(vals[k]))
        argmins.append(x[k])
    ratios = np.array(ratios)
    # exponent of |G/|x|| on the tail: bounded ratio -> ~0, polynomial escape -> > 0
    tail = slice(len(radii) // 2, None)
    neg = ratios[tail] < -1e-12
    slope = 0.0
    if neg.sum() >= 2:
        slope = float(np.polyfit(np.log(radii[tail][neg]), np.log(-ratios[tail][neg]), 1)[0])
    big = delta_ref * max(1.0, G.delta or 0.0)
    if slope > 0.5:
        k = int(np.argmin(ratios))
        x = argmins[k]
        r = float(np.linalg.norm(x))
        gx = float(G.G(x))
        if gx < -big * (r + 1.0):
            return Verdict(FALSIFIED, witness={"x": x.tolist(), "G": gx, "bound_delta": big,
                                               "ratio_exponent": slope},
                           detail=f"G(x)/|x| -> -inf like |x|^{slope:.2f}")
    if G.delta is not None:
        for R, x in zip(radii, argmins):
            gx = float(G.G(x))
            if gx < -G.delta * (R + 1.0) - tol:
                return Verdict(FALSIFIED, witness={"x": x.tolist(), "G": gx, "bound_delta": G.delta},
                               detail="declared linear lower bound violated")
    return Verdict(VERIFIED, detail=f"liminf G/|x| estimate {ratios.min():.6g}; "
                                    f"tail exponent {slope:.3f}")


def _refine_min(f, grad, x0, radius):
    """Local descent on the closed ball (projected gradient with backtracking)."""
    x = np.array(x0, dtype=float)
    fx = float(f(x))
    step = 1.0
    for _ in range(500):
        g = grad(x)
        if not np.all(np.isfinite(g)) or np.linalg.norm(g) < 1e-14:
            break
        while step > 1e-16:
            y = x - step * g
            ny = np.linalg.norm(y)
            if ny > radius:
                y *= radius / ny
            fy = float(f(y))
            if fy < fx:
                break
            step *= 0.5
        else:
            break
        if np.linalg.norm(y - x) < 1e-15:
            x, fx = y, fy
            break
        x, fx = y, fy
        step *= 2.0
    return x, fx


def ball_minimum(f, grad, n: int, radius: float, budget: Optional[int] = None,
                 seed: int = 0, keep: int = 10):
    """Quasi-random sampling of the ball plus descent from the ``keep`` best samples."""
    budget = budget or 10_000 * n
    if radius == 0:
        x = np.zeros(n)
        return x, float(f(x))
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(budget, 2))))
    pts = 2.0 * sampler.random_base2(m) - 1.0
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0] * radius
    extra = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = radius
        extra += [e, -e]
    pts = np.vstack([pts, np.array(extra)])
    vals = f(pts)
    order = np.argsort(vals, kind="stable")[:keep]
    best_x, best_v = pts[order[0]], float(vals[order[0]])
    for i in order:
        x, v = _refine_min(f, grad, pts[i], radius)
        if v < best_v:
            best_x, best_v = x, v
    return best_x, best_v


def check_i3(G: Perturbation, n: int, radius: float = 10.0, budget: Optional[int] = None,
             seed: int = 0) -> Verdict:
    """Evidence that ``G`` never attains its infimum: points outside a ball beating
    the refined minimum inside it.  Never returns falsified."""
    x_in, m_R = ball_minimum(G.G, G.gradG, n, radius, budget, seed)
    rng = np.random.default_rng(seed)
    dirs = _sphere(n, 64, rng)
    for R in radius * 2.0 ** np.arange(1, 8):
        vals = G.G(R * dirs)
        k = int(np.argmin(vals))
        if vals[k] < m_R - 1e-12 * (1 + abs(m_R)):
            return Verdict(VERIFIED, witness={"inside_min": m_R, "inside_argmin": x_in.tolist(),
                                              "outside_x": (R * dirs[k]).tolist(),
                                              "outside_G": float(vals[k])},
                           detail=f"G escapes below the B_{radius:g} minimum {m_R:.6g}")
    declared = G.no_global_min
    return Verdict(DECLARED, declared_value=declared,
                   witness={"inside_min": m_R, "inside_argmin": x_in.tolist()},
                   detail="no escape found; author declaration recorded"
                   if declared is not None else "no escape found and nothing declared")


def _mean_F_grad(inst: ProblemInstance, x: np.ndarray, nt: int = 256) -> np.ndarray:
    if inst.potential.time_independent:
        return inst.potential.gradF(np.zeros(x.shape[:-1]), x)
    t = np.arange(nt) * inst.T / nt
    return inst.potential.gradF(t, x[None, :]).mean(axis=0)


def check_i4(inst: ProblemInstance, x1, x2, seed: int = 0, tol: float = 1e-9):
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if np.array_equal(x1, x2):
        raise ValueError("x1 and x2 must differ")
    T, n = inst.T, inst.n
    mF = [float(inst.mean_F(x1)), float(inst.mean_F(x2))]
    top = max(mF)
    c = inst.LT + gamma_inverse(inst.growth, top)

    # the infimum of the time-averaged F sits inside the ball where gamma(|x|) <= best
    best = min(mF + [float(inst.mean_F(np.zeros(n)))])
    rad = gamma_inverse(inst.growth, max(best, float(inst.growth.gamma(0.0))))
    _, inf_F = ball_minimum(lambda x: inst.mean_F(x), lambda x: _mean_F_grad(inst, x),
                            n, rad, budget=2000 * n, seed=seed)
    inf_F = min(inf_F, best)

    G = inst.perturbation
    argmin_G, inf_G = ball_minimum(G.G, G.gradG, n, c, seed=seed)
    G_pts = (float(G.G(x1)), float(G.G(x2)))
    gap = top - inf_F
    cert = I4Certificate(x1=x1, x2=x2, c=c, inf_F_ball=inf_F * T, G_at_points=G_pts,
                         inf_G_ball=inf_G, strict_gap=gap * T, argmin_G=argmin_G)
    problems = []
    if not gap * T > tol:
        problems.append("inf of int F is not strictly below max{int F(x1), int F(x2)}")
    if abs(G_pts[0] - G_pts[1]) > tol:
        problems.append(f"G(x1) = {G_pts[0]:.6g} differs from G(x2) = {G_pts[1]:.6g}")
    if max(G_pts) > inf_G + tol:
        problems.append(f"G(x_i) = {max(G_pts):.6g} exceeds inf over B_c = {inf_G:.6g}")
    if problems:
        return cert, Verdict(FALSIFIED, witness={"argmin_G": argmin_G.tolist(), "inf_G": inf_G,
                                                 "G_at_points": list(G_pts), "c": c},
                             detail="; ".join(problems))
    return cert, Verdict(VERIFIED, detail=f"c = {c:.12g}; gap {gap * T:.6g}; "
                                          f"G(x_i) = inf_B_c G = {inf_G:.6g}")


def i4_radius_from_sublevel(inst: ProblemInstance, x1, x2) -> float:
    """The same ``c`` obtained from the sub-level radius at the level r of the proof."""
    phi0 = float(inst.kinetic.Phi(np.zeros(inst.n)))
    top = max(float(inst.mean_F(np.atleast_1d(x1))), float(inst.mean_F(np.atleast_1d(x2))))
    return sublevel_radius(inst, inst.T * top + phi0 * inst.T)


def check_j1(G: Perturbation, n: int, rho: float, LT: float,
             sample_spec: SampleSpec = SampleSpec()) -> Verdict:
    if rho <= 0:
        raise ValueError("rho must be positive")
    if rho <= LT:
        return Verdict(FALSIFIED, witness={"rho": rho, "LT": LT}, detail="rho <= LT")
    rng = np.random.default_rng(sample_spec.seed)
    pts = _ball_samples(n, sample_spec.n_random, rho, rng) * (1 - 1e-12)
    g0 = float(G.G(np.zeros(n)))
    dv = np.abs(G.G(pts) - g0)
    dg = np.linalg.norm(G.gradG(pts), axis=1)
    k = int(np.argmax(np.maximum(dv / 1e-12, dg / 1e-10)))
    if dv[k] > 1e-12 or dg[k] > 1e-10:
        return Verdict(FALSIFIED, witness={"x": pts[k].tolist(), "G": float(G.G(pts[k])),
                                           "G0": g0, "grad_norm": float(dg[k])},
                       detail="G is not constant on B_rho")
    return Verdict(VERIFIED, detail=f"G == {g0:.6g} on {len(pts)} samples of B_{rho:g}; rho > LT")


@dataclass
class HypothesisReport:
    instance: str
    verdicts: dict = field(default_factory=dict)
    certificate: Optional[I4Certificate] = None

    @property
    def failing(self) -> list:
        return [k for k, v in self.verdicts.items() if not v.holds]

    def to_dict(self) -> dict[str, Any]:
        return {"instance": self.instance,
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
                "i4_certificate": None if self.certificate is None else self.certificate.to_dict(),
                "failing": self.failing}


def check_all(inst: ProblemInstance, x1=None, x2=None, seed: int = 0) -> HypothesisReport:
    """Run every applicable check; (j1) only when a plateau radius is set."""
    if x1 is None or x2 is None:
        if inst.witnesses is None:
            raise ValueError("no witness points given for (i4)")
        x1, x2 = inst.witnesses
    rep = HypothesisReport(inst.name)
    rep.verdicts["i1"] = check_i1(inst, SampleSpec(seed=seed))
    rep.verdicts["i2"] = check_i2(inst.perturbation, inst.n, seed=seed)
    rep.verdicts["i3"] = check_i3(inst.perturbation, inst.n, seed=seed)
    cert, v4 = check_i4(inst, x1, x2, seed=seed)
    rep.verdicts["i4"] = v4
    rep.certificate = cert
    if inst.plateau_radius is not None:
        rep.verdicts["j1"] = check_j1(inst.perturbation, inst.n, inst.plateau_radius, inst.LT,
                                      SampleSpec(seed=seed))
    return rep
