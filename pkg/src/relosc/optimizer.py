"""Projected, preconditioned descent on the discrete constraint set, multistart, clustering."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np
from scipy.stats import qmc

from .functional import (EnergyBreakdown, eval_energy, gradient, search_radius,
                         sublevel_radius)
from .model import ProblemInstance
from .path import (DEFAULT_EPS_BD, PeriodicPath, ProjectionError, path_distance,
                   project_feasible, random_feasible)


@dataclass(frozen=True)
class MinimizeOptions:
    """Knobs of ``minimize``.

    ``grad_tol`` applies to the projected node gradient divided by the step
    ``h``, i.e. it bounds the discrete Euler-Lagrange residual of a
    converged interior minimizer.
    """

    N: int = 64
    max_iter: int = 5000
    grad_tol: float = 1e-8
    eps_bd: float = DEFAULT_EPS_BD
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_step: float = 1e3
    precond_mass: float = 1.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.N < 4:
            raise ValueError("N must be at least 4")
        for name in ("grad_tol", "eps_bd", "backtrack", "armijo", "max_step", "precond_mass"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.backtrack < 1:
            raise ValueError("backtrack factor must be < 1")


@dataclass(frozen=True, eq=False)
class Minimum:
    path: PeriodicPath
    energy: EnergyBreakdown
    lam: float
    projected_grad_norm: float
    iterations: int
    converged: bool
    status: str = "converged"
    start_index: int = 0
    history: tuple = field(default=(), repr=False)

    @property
    def value(self) -> float:
        return self.energy.total(self.lam)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "energy": self.energy.to_dict(self.lam),
                "projected_grad_norm": self.projected_grad_norm,
                "iterations": self.iterations, "converged": self.converged,
                "status": self.status, "start_index": self.start_index,
                "N": self.path.N, "sup_norm": self.path.sup_norm(),
                "inf_norm": self.path.inf_norm()}


def _preconditioner(N: int, h: float, curvature: float, mass: float) -> np.ndarray:
    j = np.arange(N // 2 + 1)
    return curvature * (2.0 - 2.0 * np.cos(2 * np.pi * j / N)) / h + h * mass


def _apply_inverse(g: np.ndarray, eig: np.ndarray) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(g, axis=0) / eig[:, None], n=g.shape[0], axis=0)


def _projected_step(inst, nodes, T, eps_bd):
    return project_feasible(nodes, T, inst.L, eps_bd)


def minimize(inst: ProblemInstance, lam: float, start: PeriodicPath,
             opts: MinimizeOptions = MinimizeOptions(), log: Optional[TextIO] = None,
             start_index: int = 0) -> Minimum:
    """Minimize ``Psi + lam * J`` from ``start``.

    Every iterate is feasible with margin ``eps_bd``.  The step is accepted on
    sufficient decrease; once the predicted decrease drops under the round-off
    of the energy, a slope test along the step is used instead.
    """
    T = inst.T
    x = start
    if not x.is_feasible(inst.L, opts.eps_bd):
        x = _projected_step(inst, x.nodes, T, opts.eps_bd)
    h = x.h
    eig = _preconditioner(x.N, h, inst.kinetic.curvature0, opts.precond_mass)
    energy = eval_energy(inst, x)
    E = energy.total(lam)
    g = gradient(inst, x, lam)
    step = 1.0
    shift = 1.0
    history = [E]
    status = "max-iter"
    pg_norm = np.inf
    it = 0
    for it in range(opts.max_iter + 1):
        try:
            pg = x.nodes - _projected_step(inst, x.nodes - g, T, opts.eps_bd).nodes
        except ProjectionError:
            pg = g
        pg_norm = float(np.abs(pg).max())
        if log is not None:
            log.write(json.dumps({"iter": it, "energy": E, "grad_norm": pg_norm / h,
                                  "step": step}) + "\n")
        if pg_norm / h <= opts.grad_tol:
            status = "converged"
            break
        if it == opts.max_iter:
            break
        d = -_apply_inverse(g, eig)
        trial_step = min(2.0 * step, opts.max_step)
        accepted = False
        while trial_step > 1e-18:
            try:
                trial = _projected_step(inst, x.nodes + trial_step * d, T, opts.eps_bd)
            except ProjectionError:
                trial_step *= opts.backtrack
                continue
            delta = trial.nodes - x.nodes
            slope = float(np.sum(g * delta))
            if slope >= 0:
                trial_step *= opts.backtrack
                continue
            e_trial = eval_energy(inst, trial)
            E_trial = e_trial.total(lam)
            noise = 64 * np.finfo(float).eps * (1.0 + abs(E))
            if -opts.armijo * slope > noise:
                ok = E_trial <= E + opts.armijo * slope
                curv = E_trial - E - slope
                tau = -slope / (2.0 * curv) if curv > 0 else 1.0
                if ok and tau < 0.75:
                    # overshoot along a near-quadratic valley: try the model minimizer
                    try:
                        alt = _projected_step(inst, x.nodes + tau * trial_step * d, T, opts.eps_bd)
                        e_alt = eval_energy(inst, alt)
                        if e_alt.total(lam) < E_trial:
                            trial, e_trial, E_trial = alt, e_alt, e_alt.total(lam)
                            trial_step *= tau
                    except ProjectionError:
                        pass
            else:
                g_trial = gradient(inst, trial, lam)
                ok = E_trial <= E + noise and float(np.sum(g_trial * delta)) <= 0.5 * abs(slope)
            if ok:
                accepted = True
                break
            trial_step *= opts.backtrack
        if not accepted:
            status = "line-search-failed"
            break
        step = trial_step
        x, energy, E = trial, e_trial, E_trial
        g = gradient(inst, x, lam)
        # rigid translations keep speeds and feasibility; a separate step size
        # for them handles flat (e.g. quartic) directions of the mean
        gm = g.sum(axis=0)
        sq = float(gm @ gm)
        shift = min(2.0 * shift, 1e12)
        noise = 64 * np.finfo(float).eps * (1.0 + abs(E))
        while sq > 0 and shift * sq / T > noise:
            moved = x.with_nodes(x.nodes - shift * gm / T)
            e_moved = eval_energy(inst, moved)
            if e_moved.total(lam) <= E - opts.armijo * shift * sq / T:
                x, energy, E = moved, e_moved, e_moved.total(lam)
                g = gradient(inst, x, lam)
                break
            shift *= opts.backtrack
        else:
            shift = 1.0
        history.append(E)
    return Minimum(path=x, energy=energy, lam=lam, projected_grad_norm=pg_norm / h,
                   iterations=it, converged=status == "converged", status=status,
                   start_index=start_index, history=tuple(history))


# ---------------------------------------------------------------------------
# multistart


def _constant_value(inst: ProblemInstance, lam: float, x: np.ndarray, nt: int = 64) -> np.ndarray:
    """Energy of constant paths at the rows of ``x`` (kinetic part included)."""
    t = np.arange(nt) * inst.T / nt
    psi = inst.weight.psi(t)
    F = inst.potential.F(t[:, None], x[None, :, :])
    G = inst.perturbation.G(x)
    phi0 = float(inst.kinetic.Phi(np.zeros(inst.n)))
    return inst.T * (phi0 + F.mean(axis=0) + lam * psi.mean() * G)


def _ball_points(n: int, count: int, radius: float, seed: int) -> np.ndarray:
    sampler = qmc.Halton(d=n, scramble=True, seed=seed)
    out = []
    while sum(len(o) for o in out) < count:
        pts = 2.0 * sampler.random(max(count, 16)) - 1.0
        out.append(pts[np.linalg.norm(pts, axis=1) <= 1.0])
    return radius * np.vstack(out)[:count]


def start_portfolio(inst: ProblemInstance, lam: float, opts: MinimizeOptions,
                    starts: int) -> list[PeriodicPath]:
    """Constant paths at quasi-random points of a ball that must contain every
    global minimizer, then random perturbations of the most promising ones."""
    N, T, n = opts.N, inst.T, inst.n
    candidates = [np.zeros(n)]
    if inst.witnesses is not None:
        candidates += [np.asarray(w, dtype=float) for w in inst.witnesses]
    cand = np.array(candidates)
    vals = _constant_value(inst, lam, cand)
    best = int(np.argmin(vals))
    try:
        radius = search_radius(inst, lam, float(vals[best]),
                               inside=float(np.linalg.norm(cand[best])))
    except ValueError:
        phi0 = float(inst.kinetic.Phi(np.zeros(n)))
        psi_level = T * (phi0 + float(inst.mean_F(cand[best])))
        radius = sublevel_radius(inst, psi_level)
    radius = min(max(radius, inst.LT), 1e6)

    n_const = max(1, int(np.ceil(2 * starts / 3)))
    pool = _ball_points(n, 1000 * n, radius, opts.seed)
    pool_vals = _constant_value(inst, lam, pool)
    order = np.argsort(pool_vals, kind="stable")
    spacing = radius / max(starts, 1)
    chosen: list[np.ndarray] = []
    n_best = (n_const + 1) // 2
    for i in order:
        if len(chosen) >= n_best:
            break
        if all(np.linalg.norm(pool[i] - c) > spacing for c in chosen):
            chosen.append(pool[i])
    k = 0
    while len(chosen) < n_const:
        chosen.append(pool[k])
        k += 1
    paths = [PeriodicPath(np.tile(c, (N, 1)), T) for c in chosen]
    for i in range(starts - n_const):
        base = chosen[i % n_best]
        paths.append(random_feasible(N, T, inst.L, 0.25 * inst.LT, seed=opts.seed + 1 + i,
                                     base=base, eps_bd=opts.eps_bd))
    return paths[:starts]


def multistart(inst: ProblemInstance, lam: float, opts: MinimizeOptions = MinimizeOptions(),
               starts: int = 20) -> list[Minimum]:
    if starts < 1:
        raise ValueError("need at least one start")
    portfolio = start_portfolio(inst, lam, opts, starts)

    def run(item):
        i, p = item
        return minimize(inst, lam, p, opts, start_index=i)

    if opts.threads > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            results = list(pool.map(run, enumerate(portfolio)))
    else:
        results = [run(item) for item in enumerate(portfolio)]
    return sorted(results, key=lambda m: (m.value, m.start_index))


# ---------------------------------------------------------------------------
# clustering


@dataclass(frozen=True, eq=False)
class Cluster:
    members: tuple
    representative: Minimum
    best_value: float
    is_global: bool


def default_value_tol(best: float) -> float:
    return 1e-8 * (1.0 + abs(best))


def cluster_minima(results: list[Minimum], value_tol: Optional[float] = None,
                   dist_tol: float = 1e-3,
                   energy_fn: Optional[Callable[[PeriodicPath], float]] = None) -> list[Cluster]:
    """Single-linkage clusters under ``path_distance``.

    With ``energy_fn``, global clusters whose representatives are joined by a
    segment with no energy barrier (sampled at a few interior points) are
    merged: they lie in one flat basin rather than being distinct minima.
    """
    if not results:
        raise ValueError("nothing to cluster")
    m = len(results)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if find(i) != find(j) and path_distance(results[i].path, results[j].path) <= dist_tol:
                parent[find(j)] = find(i)

    best = min(r.value for r in results)
    tol = default_value_tol(best) if value_tol is None else value_tol

    def groups():
        out: dict[int, list[int]] = {}
        for i in range(m):
            out.setdefault(find(i), []).append(i)
        return [sorted(v, key=lambda k: (results[k].value, k)) for v in out.values()]

    if energy_fn is not None:
        merged = True
        while merged:
            merged = False
            glob = [g for g in groups() if results[g[0]].value <= best + tol]
            for a in range(len(glob)):
                for b in range(a + 1, len(glob)):
                    ra, rb = results[glob[a][0]], results[glob[b][0]]
                    top = max(ra.value, rb.value) + tol
                    flat = True
                    for s in (0.25, 0.5, 0.75):
                        mid = ra.path.with_nodes((1 - s) * ra.path.nodes + s * rb.path.nodes)
                        if energy_fn(mid) > top:
                            flat = False
                            break
                    if flat:
                        parent[find(glob[b][0])] = find(glob[a][0])
                        merged = True
                        break
                if merged:
                    break

    clusters = []
    for g in sorted(groups(), key=lambda v: (results[v[0]].value, v[0])):
        rep = results[g[0]]
        clusters.append(Cluster(members=tuple(g), representative=rep, best_value=rep.value,
                                is_global=rep.value <= best + tol))
    return clusters
