"""Certification of minimizers: Euler-Lagrange residual, grid refinement and a
shooting solver for the periodic problem in the variables (u, w = phi(u'))."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .functional import _velocities
from .model import ProblemInstance
from .optimizer import MinimizeOptions, Minimum, minimize
from .path import PeriodicPath, path_distance, project_feasible


@dataclass(frozen=True)
class ResidualReport:
    residual: np.ndarray
    max_norm: float
    boundary_checks: tuple = (0.0, 0.0)

    def to_dict(self) -> dict:
        return {"max_norm": self.max_norm, "boundary_checks": list(self.boundary_checks),
                "node_norms": np.linalg.norm(self.residual, axis=1).tolist()}


def el_residual(inst: ProblemInstance, lam: float, p: PeriodicPath) -> ResidualReport:
    """``[phi(d_k/h) - phi(d_{k-1}/h)]/h - gradF(t_k,u_k) - lam psi(t_k) gradG(u_k)``."""
    v = _velocities(inst, p)
    h, t, u = p.h, p.times, p.nodes
    w = inst.kinetic.phi(v)
    force = inst.potential.gradF(t, u) + lam * inst.weight.psi(t)[:, None] * inst.perturbation.gradG(u)
    r = (w - np.roll(w, 1, axis=0)) / h - force
    # periodicity of u and u' is built into the representation
    return ResidualReport(residual=r, max_norm=float(np.linalg.norm(r, axis=1).max()))


# ---------------------------------------------------------------------------
# shooting


def _rhs(inst: ProblemInstance, lam: float):
    n = inst.n
    phi_inv = inst.kinetic.phi_inv
    gradF = inst.potential.gradF
    gradG = inst.perturbation.gradG
    psi = inst.weight.psi

    def f(t, z):
        u, w = z[..., :n], z[..., n:]
        tt = np.full(u.shape[:-1], t)
        dw = gradF(tt, u) + lam * psi(tt)[..., None] * gradG(u)
        return np.concatenate([phi_inv(w), dw], axis=-1)

    return f


def _rk4(inst: ProblemInstance, lam: float, z0: np.ndarray, steps: int, keep: bool = False):
    f = _rhs(inst, lam)
    dt = inst.T / steps
    z = np.array(z0, dtype=float)
    out = [z] if keep else None
    for k in range(steps):
        t = k * dt
        k1 = f(t, z)
        k2 = f(t + dt / 2, z + dt / 2 * k1)
        k3 = f(t + dt / 2, z + dt / 2 * k2)
        k4 = f(t + dt, z + dt * k3)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if keep:
            out.append(z)
    return np.array(out) if keep else z


def shoot_trajectory(inst: ProblemInstance, lam: float, u0, w0, steps: int) -> np.ndarray:
    """Classical RK4 with ``steps`` fixed steps over one period; returns all states."""
    if steps < 1:
        raise ValueError("steps must be positive")
    z = np.concatenate([np.atleast_1d(np.asarray(u0, dtype=float)),
                        np.atleast_1d(np.asarray(w0, dtype=float))])
    if z.size != 2 * inst.n:
        raise ValueError("initial state has the wrong dimension")
    return _rk4(inst, lam, z, steps, keep=True)


def shoot(inst: ProblemInstance, lam: float, u0, w0, steps: int = 1024):
    """Time-``T`` map of the first-order system; returns ``(u(T), w(T))``."""
    if steps < 64:
        raise ValueError("use at least 64 steps")
    n = inst.n
    z = np.concatenate([np.asarray(u0, dtype=float).reshape(-1, n),
                        np.asarray(w0, dtype=float).reshape(-1, n)], axis=-1)
    zT = _rk4(inst, lam, z, steps)
    if np.ndim(u0) <= 1:
        zT = zT[0]
    return zT[..., :n], zT[..., n:]


def conserved_energy(inst: ProblemInstance, lam: float, u, w) -> np.ndarray:
    """First integral of autonomous instances (weight taken at its mean)."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    v = inst.kinetic.phi_inv(w)
    psibar = inst.weight.mean(inst.T)
    return (np.sum(w * v, axis=-1) - inst.kinetic.Phi(v)
            - inst.potential.F(np.zeros(u.shape[:-1]), u) - lam * psibar * inst.perturbation.G(u))


@dataclass(frozen=True)
class NewtonOptions:
    steps: int = 1024
    tol: float = 1e-11
    max_iter: int = 50
    damping: float = 0.5
    max_halvings: int = 40
    fd_step: float = 1e-7
    dedup_tol: float = 1e-6
    N: int = 256


@dataclass(frozen=True, eq=False)
class ShootingRoot:
    u0: np.ndarray
    w0: np.ndarray
    defect: float
    iterations: int
    start_index: int
    path: Optional[PeriodicPath] = None

    def to_dict(self) -> dict:
        return {"u0": self.u0.tolist(), "w0": self.w0.tolist(), "defect": self.defect,
                "iterations": self.iterations, "start_index": self.start_index}


@dataclass
class ShootingResult:
    roots: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"roots": [r.to_dict() for r in self.roots], "failures": self.failures}


def _defect(inst, lam, z, steps):
    """Period-map defect for one state or a batch of states (rows)."""
    return _rk4(inst, lam, z, steps) - z


def solve_by_shooting(inst: ProblemInstance, lam: float, init_grid,
                      newton_opts: NewtonOptions = NewtonOptions()) -> ShootingResult:
    """Damped Newton on the period-map defect from every start of ``init_grid``
    (rows ``(u0, w0)``); converged roots are deduplicated."""
    grid = np.atleast_2d(np.asarray(init_grid, dtype=float))
    n = inst.n
    if grid.size == 0:
        raise ValueError("init_grid must not be empty")
    if grid.shape[1] != 2 * n:
        raise ValueError(f"init_grid rows must have length {2 * n}")
    o = newton_opts
    m = len(grid)
    z = grid.copy()
    D = _defect(inst, lam, z, o.steps)
    nd = np.linalg.norm(D, axis=1)
    iters = np.zeros(m, dtype=int)
    active = nd > o.tol
    stalled = np.zeros(m, dtype=bool)
    # all starts advance together so that each RK4 sweep integrates a batch
    for _ in range(o.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        iters[idx] += 1
        za = z[idx]
        eps = o.fd_step * (1.0 + np.abs(za))                       # (A, 2n)
        shifts = eps[:, :, None] * np.eye(2 * n)[None]              # (A, 2n, 2n)
        probe = np.concatenate([za[:, None, :] + shifts, za[:, None, :] - shifts], axis=1)
        Dp = _defect(inst, lam, probe.reshape(-1, 2 * n), o.steps).reshape(idx.size, 4 * n, 2 * n)
        J = np.transpose((Dp[:, :2 * n] - Dp[:, 2 * n:]) / (2 * eps)[:, :, None], (0, 2, 1))
        delta = np.stack([np.linalg.lstsq(J[i], -D[k], rcond=None)[0] for i, k in enumerate(idx)])
        alpha = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(o.max_halvings):
            sel = np.flatnonzero(pending)
            if sel.size == 0:
                break
            cand = za[sel] + alpha[sel, None] * delta[sel]
            Dc = _defect(inst, lam, cand, o.steps)
            nc = np.linalg.norm(Dc, axis=1)
            better = nc < nd[idx[sel]]
            for j, k in enumerate(idx[sel]):
                if better[j]:
                    z[k], D[k], nd[k] = cand[j], Dc[j], nc[j]
            pending[sel[better]] = False
            alpha[sel[~better]] *= o.damping
        stalled[idx[pending]] = True
        active = (nd > o.tol) & ~stalled
    result = ShootingResult()
    for idx in range(m):
        if nd[idx] > o.tol:
            result.failures.append({"start_index": idx, "defect": float(nd[idx]),
                                    "iterations": int(iters[idx])})
            continue
        zi = z[idx]
        if any(np.linalg.norm(np.concatenate([r.u0, r.w0]) - zi) <= o.dedup_tol for r in result.roots):
            continue
        traj = shoot_trajectory(inst, lam, zi[:n], zi[n:], o.steps)
        stride = max(1, o.steps // o.N)
        nodes = traj[:-1:stride, :n]
        result.roots.append(ShootingRoot(u0=zi[:n].copy(), w0=zi[n:].copy(), defect=float(nd[idx]),
                                         iterations=int(iters[idx]), start_index=idx,
                                         path=PeriodicPath(nodes, inst.T)))
    return result


def default_shooting_grid(inst: ProblemInstance, center=None, spread: float = 1.0,
                          per_axis: int = 3) -> np.ndarray:
    """``per_axis``-point grid in each of u_1 and w_1 (other coordinates at ``center``)."""
    n = inst.n
    center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=float)
    offs = np.linspace(-spread, spread, per_axis)
    rows = []
    for a in offs:
        for b in offs:
            z = center.copy()
            z[0] += a
            z[n] += b
            rows.append(z)
    return np.array(rows)


# ---------------------------------------------------------------------------
# certification


@dataclass
class Certificate:
    passed: bool
    levels: list
    distances: list
    residual: float
    residual_tol: float
    final: Optional[Minimum] = None
    diagnostics: str = ""

    def to_dict(self) -> dict:
        return {"passed": self.passed, "levels": self.levels, "distances": self.distances,
                "residual": self.residual, "residual_tol": self.residual_tol,
                "diagnostics": self.diagnostics,
                "final": None if self.final is None else self.final.to_dict()}


def certify(m: Minimum, inst: ProblemInstance, lam: float, refine_levels: int = 2,
            opts: MinimizeOptions = MinimizeOptions(), residual_tol: float = 1e-6,
            distance_floor: float = 1e-8) -> Certificate:
    """Re-solve on grids N, 2N, 4N, ... from the interpolated minimizer.

    Passes when the finest residual is below ``residual_tol`` and successive
    cross-grid distances do not grow (distances under ``distance_floor`` count
    as converged).
    """
    if not m.converged:
        raise ValueError("certify needs a converged minimum")
    current = m
    levels = [m.path.N]
    distances = []
    diag = []
    for _ in range(refine_levels):
        N2 = 2 * current.path.N
        start = project_feasible(current.path.resample(N2).nodes, inst.T, inst.L, opts.eps_bd)
        nxt = minimize(inst, lam, start, MinimizeOptions(**{**opts.__dict__, "N": N2}))
        if not nxt.converged:
            diag.append(f"refinement to N={N2} ended with status {nxt.status}")
        distances.append(path_distance(current.path, nxt.path))
        levels.append(N2)
        current = nxt
    res = el_residual(inst, lam, current.path).max_norm
    monotone = all(b <= a or b <= distance_floor for a, b in zip(distances, distances[1:]))
    passed = res <= residual_tol and monotone and current.converged
    if res > residual_tol:
        diag.append(f"residual {res:.3e} above {residual_tol:.1e}")
    if not monotone:
        diag.append("cross-grid distances are not decreasing")
    return Certificate(passed=passed, levels=levels, distances=distances, residual=res,
                       residual_tol=residual_tol, final=current, diagnostics="; ".join(diag))
