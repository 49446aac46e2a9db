"""Finite-dimensional laboratory for level-set minimization through scalarization.

A ``ScalarizedProblem`` carries J and Psi on R^m.  ``level_minimize`` finds the
minimizer of J on {Psi = r} by bisection on the multiplier of J + lam * Psi.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize as sp_minimize
from scipy.stats import qmc

INF = math.inf


@dataclass(frozen=True)
class ScalarizedProblem:
    m: int
    J: Callable
    gradJ: Callable
    Psi: Callable
    gradPsi: Callable
    a: float = 0.0
    b: float = INF
    box: float = 10.0
    name: str = "custom"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("dimension must be positive")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.box <= 0:
            raise ValueError("box half-width must be positive")

    def lagrangian(self, lam):
        def f(x):
            return float(self.J(x) + lam * self.Psi(x))

        def g(x):
            return np.asarray(self.gradJ(x) + lam * self.gradPsi(x), dtype=float)

        return f, g


def quadratic_lab(m: int = 2, box: float = 10.0) -> ScalarizedProblem:
    """J = x_1, Psi = |x|^2 on ]0, inf[."""
    e1 = np.eye(m)[0]
    return ScalarizedProblem(m, lambda x: float(x[0]), lambda x: e1.copy(),
                             lambda x: float(x @ x), lambda x: 2.0 * np.asarray(x, float),
                             a=0.0, b=INF, box=box, name="quadratic")


def symmetric_lab(m: int = 2, box: float = 10.0) -> ScalarizedProblem:
    """J = -x_1^2, Psi = |x|^2: two antipodal minimizers on every level set."""
    def gJ(x):
        g = np.zeros(m)
        g[0] = -2.0 * x[0]
        return g

    return ScalarizedProblem(m, lambda x: -float(x[0]) ** 2, gJ,
                             lambda x: float(x @ x), lambda x: 2.0 * np.asarray(x, float),
                             a=0.0, b=INF, box=box, name="symmetric")


# ---------------------------------------------------------------------------
# global minimization on the box


@dataclass
class BoxMinimum:
    x: Optional[np.ndarray]
    value: float
    minimizers: list = field(default_factory=list)
    unbounded: bool = False
    box: float = 0.0
    starts: int = 0

    @property
    def unique(self) -> bool:
        return len(self.minimizers) == 1


def _local_minima(f, g, m, half, starts, seed):
    pts = qmc.Sobol(d=m, scramble=True, seed=seed).random(starts)
    pts = np.vstack([np.zeros((1, m)), half * (2.0 * pts - 1.0)])
    bounds = [(-half, half)] * m
    out = []
    for x0 in pts:
        res = sp_minimize(f, x0, jac=g, method="L-BFGS-B", bounds=bounds,
                          options={"gtol": 1e-13, "ftol": 1e-16, "maxiter": 2000})
        out.append((float(res.fun), np.asarray(res.x, dtype=float)))
    return out


def box_minimize(f, g, m: int, half: float, starts: int = 16, seed: int = 0,
                 doublings: int = 4, value_tol: float = 1e-10,
                 dist_tol: float = 1e-6) -> BoxMinimum:
    """Multistart L-BFGS-B over ``[-half, half]^m``.

    A best point on the box boundary triggers box doubling (unless
    ``doublings`` is 0, which minimizes over the box itself); if it is still on
    the boundary after ``doublings`` rounds with values still dropping, the
    function is reported unbounded below.
    """
    prev = INF
    for k in range(doublings + 1):
        w = half * 2.0 ** k
        loc = _local_minima(f, g, m, w, starts, seed)
        best = min(v for v, _ in loc)
        tol = value_tol * (1.0 + abs(best))
        mins: list[np.ndarray] = []
        for v, x in sorted(loc, key=lambda t: t[0]):
            if v <= best + tol and all(np.linalg.norm(x - y) > dist_tol * (1 + np.linalg.norm(y))
                                       for y in mins):
                mins.append(x)
        on_edge = any(np.max(np.abs(x)) >= w * (1 - 1e-9) for x in mins)
        # without doublings the box itself is the domain
        if not on_edge or doublings == 0:
            return BoxMinimum(mins[0], best, mins, False, w, starts)
        if k > 0 and not best < prev - tol:
            # boundary minimizer but no further decrease: treat the edge point as genuine
            return BoxMinimum(mins[0], best, mins, False, w, starts)
        prev = best
    return BoxMinimum(None, -INF, [], True, w, starts)


def minimize_scalarized(prob: ScalarizedProblem, lam: float, starts: int = 16,
                        seed: int = 0, expand: bool = True) -> BoxMinimum:
    f, g = prob.lagrangian(lam)
    return box_minimize(f, g, prob.m, prob.box, starts, seed, doublings=4 if expand else 0)


# ---------------------------------------------------------------------------
# alpha, beta


@dataclass
class AlphaBeta:
    alpha: float
    beta: float
    M_a_witness: Optional[np.ndarray] = None
    M_b_witness: Optional[np.ndarray] = None
    inf_psi: float = -INF
    sup_psi: float = INF
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def ext(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")

        return {"alpha": ext(self.alpha), "beta": ext(self.beta),
                "inf_psi": ext(self.inf_psi), "sup_psi": ext(self.sup_psi),
                "M_a_witness": None if self.M_a_witness is None else self.M_a_witness.tolist(),
                "M_b_witness": None if self.M_b_witness is None else self.M_b_witness.tolist(),
                "meta": self.meta}


def alpha_beta(prob: ScalarizedProblem, starts: int = 16, seed: int = 0) -> AlphaBeta:
    """Estimate alpha = max(inf Psi, sup_{M_b} Psi) and beta = min(sup Psi, inf_{M_a} Psi),
    with inf of the empty set = +inf and sup of the empty set = -inf."""
    lo = box_minimize(lambda x: float(prob.Psi(x)), prob.gradPsi, prob.m, prob.box, starts, seed)
    hi = box_minimize(lambda x: -float(prob.Psi(x)), lambda x: -np.asarray(prob.gradPsi(x)),
                      prob.m, prob.box, starts, seed)
    inf_psi = lo.value
    sup_psi = INF if hi.unbounded else -hi.value

    def level_set(endpoint):
        if not math.isfinite(endpoint):
            return None
        res = minimize_scalarized(prob, endpoint, starts, seed)
        return None if res.unbounded else res

    Ma, Mb = level_set(prob.a), level_set(prob.b)
    inf_Ma = INF if Ma is None else min(float(prob.Psi(x)) for x in Ma.minimizers)
    sup_Mb = -INF if Mb is None else max(float(prob.Psi(x)) for x in Mb.minimizers)
    alpha = max(inf_psi, sup_Mb)
    beta = min(sup_psi, inf_Ma)
    return AlphaBeta(alpha=alpha, beta=beta,
                     M_a_witness=None if Ma is None else Ma.x,
                     M_b_witness=None if Mb is None else Mb.x,
                     inf_psi=inf_psi, sup_psi=sup_psi,
                     meta={"starts": starts, "box": prob.box, "seed": seed,
                           "M_a_empty": Ma is None, "M_b_empty": Mb is None})


# ---------------------------------------------------------------------------
# level minimization


class BisectionStall(RuntimeError):
    """Psi(x_lam) jumps across r: the flanking minimizers are kept."""

    def __init__(self, r, lam_lo, lam_hi, x_lo, x_hi, psi_lo, psi_hi):
        super().__init__(f"bisection stalled at lambda in [{lam_lo:.15g}, {lam_hi:.15g}]: "
                         f"Psi jumps from {psi_lo:.6g} to {psi_hi:.6g} across r={r:g}")
        self.r = r
        self.lam_lo, self.lam_hi = lam_lo, lam_hi
        self.x_lo, self.x_hi = x_lo, x_hi
        self.psi_lo, self.psi_hi = psi_lo, psi_hi


@dataclass(frozen=True)
class LevelOptions:
    starts: int = 8
    seed: int = 0
    psi_tol: float = 1e-8
    max_bisect: int = 200
    max_expand: int = 200


@dataclass
class LevelMinimum:
    r: float
    x_hat: np.ndarray
    lambda_hat: float
    J: float
    psi: float
    iterations: int


def level_minimize(prob: ScalarizedProblem, r: float, opts: LevelOptions = LevelOptions(),
                   ab: Optional[AlphaBeta] = None) -> LevelMinimum:
    """Bisection on lam in ]a, b[ until Psi(x_lam) = r within ``psi_tol (1 + |r|)``.

    Psi(x_lam) is non-increasing in lam, which keeps the bracket valid.
    """
    ab = alpha_beta(prob, opts.starts, opts.seed) if ab is None else ab
    if not ab.alpha < r < ab.beta:
        raise ValueError(f"r={r} is outside ]alpha, beta[ = ]{ab.alpha}, {ab.beta}[")
    a, b = prob.a, prob.b
    tol = opts.psi_tol * (1.0 + abs(r))
    count = 0

    def evaluate(lam):
        nonlocal count
        count += 1
        res = minimize_scalarized(prob, lam, opts.starts, opts.seed)
        if res.unbounded:
            return None, INF
        return res.x, float(prob.Psi(res.x))

    def done(lam, x, p):
        return LevelMinimum(r=r, x_hat=x, lambda_hat=lam, J=float(prob.J(x)), psi=p,
                            iterations=count)

    # initial point and bracket expansion
    if math.isfinite(a) and math.isfinite(b):
        lam = 0.5 * (a + b)
    elif math.isfinite(a):
        lam = a + max(1.0, abs(a))
    elif math.isfinite(b):
        lam = b - max(1.0, abs(b))
    else:
        lam = 0.0
    lo = hi = None  # lo: Psi above r, hi: Psi below r
    x, p = evaluate(lam)
    for _ in range(opts.max_expand):
        if abs(p - r) <= tol:
            return done(lam, x, p)
        if p > r:
            lo = (lam, x, p)
            if hi is not None:
                break
            lam = lam + 2 * (lam - a) if not math.isfinite(b) else 0.5 * (lam + b)
        else:
            hi = (lam, x, p)
            if lo is not None:
                break
            lam = a + 0.5 * (lam - a) if math.isfinite(a) else lam - 2 * max(1.0, abs(lam))
        x, p = evaluate(lam)
    else:
        raise RuntimeError("could not bracket the level")
    if lo is None or hi is None:
        if abs(p - r) <= tol:
            return done(lam, x, p)
        if p > r:
            lo = (lam, x, p)
        else:
            hi = (lam, x, p)
    if lo is None or hi is None:
        raise RuntimeError("could not bracket the level")

    for _ in range(opts.max_bisect):
        lam = 0.5 * (lo[0] + hi[0])
        if not lo[0] < lam < hi[0]:
            break
        x, p = evaluate(lam)
        if abs(p - r) <= tol:
            return done(lam, x, p)
        if p > r:
            lo = (lam, x, p)
        else:
            hi = (lam, x, p)
    raise BisectionStall(r, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])


# ---------------------------------------------------------------------------
# probes


@dataclass
class ContinuityReport:
    rows: list
    jump_x: list
    jump_J: list
    max_jump_x: float
    max_jump_J: float
    discontinuity: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = max((len(rw["x_hat"]) for rw in self.rows if rw["x_hat"] is not None), default=0)
        w.writerow(["r"] + [f"x_{i + 1}" for i in range(m)]
                   + ["J", "lambda_hat", "jump_x", "jump_J", "status"])
        for i, rw in enumerate(self.rows):
            xs = [repr(float(v)) for v in rw["x_hat"]] if rw["x_hat"] is not None else [""] * m
            jx = repr(self.jump_x[i - 1]) if 0 < i <= len(self.jump_x) else ""
            jj = repr(self.jump_J[i - 1]) if 0 < i <= len(self.jump_J) else ""
            w.writerow([repr(rw["r"])] + xs + [
                "" if rw["J"] is None else repr(rw["J"]),
                "" if rw["lambda_hat"] is None else repr(rw["lambda_hat"]), jx, jj, rw["status"]])
        return buf.getvalue()


def continuity_probe(prob: ScalarizedProblem, r_grid, opts: LevelOptions = LevelOptions(),
                     ab: Optional[AlphaBeta] = None, factor: float = 1e3) -> ContinuityReport:
    r_grid = [float(r) for r in r_grid]
    if r_grid != sorted(r_grid):
        raise ValueError("r grid must be sorted")
    ab = alpha_beta(prob, opts.starts, opts.seed) if ab is None else ab
    rows = []
    for r in r_grid:
        try:
            lm = level_minimize(prob, r, opts, ab)
            rows.append({"r": r, "x_hat": lm.x_hat, "J": lm.J, "lambda_hat": lm.lambda_hat,
                         "status": "ok"})
        except BisectionStall as exc:
            rows.append({"r": r, "x_hat": None, "J": None, "lambda_hat": None,
                         "status": f"stall [{exc.lam_lo:.6g}, {exc.lam_hi:.6g}]"})
    # consecutive ratios over adjacent grid points that both succeeded
    jx, jJ = [], []
    for p, q in zip(rows, rows[1:]):
        if p["x_hat"] is None or q["x_hat"] is None:
            jx.append(INF)
            jJ.append(INF)
            continue
        dr = q["r"] - p["r"]
        jx.append(float(np.linalg.norm(q["x_hat"] - p["x_hat"]) / dr))
        jJ.append(abs(q["J"] - p["J"]) / dr)
    disc = False
    for ratios in (jx, jJ):
        finite = [v for v in ratios if math.isfinite(v)]
        if len(finite) < len(ratios):
            disc = True
        elif finite:
            med = float(np.median(finite))
            disc |= any(v > factor * med for v in finite) if med > 0 else any(v > 0 for v in finite)
    return ContinuityReport(rows, jx, jJ, max(jx, default=0.0), max(jJ, default=0.0), disc)


def project_to_level(prob: ScalarizedProblem, x, r: float, tol: float = 1e-12,
                     max_iter: int = 100) -> Optional[np.ndarray]:
    """Newton steps along grad Psi onto {Psi = r}; None when it fails."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        d = float(prob.Psi(x)) - r
        if abs(d) <= tol * (1.0 + abs(r)):
            return x
        g = np.asarray(prob.gradPsi(x), dtype=float)
        gg = float(g @ g)
        if gg == 0:
            return None
        x = x - d * g / gg
    return None


@dataclass
class WellposednessReport:
    r: float
    x_hat: np.ndarray
    J_star: float
    eps: list
    max_distance: list
    median_distance: list
    well_posed: bool
    source: str
    trials: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "max_distance", "median_distance"])
        for e, a, b in zip(self.eps, self.max_distance, self.median_distance):
            w.writerow([repr(e), repr(a), repr(b)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"r": self.r, "x_hat": self.x_hat.tolist(), "J_star": self.J_star,
                "eps": self.eps, "max_distance": self.max_distance,
                "median_distance": self.median_distance, "well_posed": self.well_posed,
                "x_hat_source": self.source, "trials": self.trials}


def _level_descent(prob, x, r, targets=(), max_iter=20000):
    """Projected gradient descent of J on {Psi = r}.

    Returns the first iterate at or below each target value (None if never
    reached) and the last iterate.
    """
    hits: list = [None] * len(targets)
    step = 1.0
    Jx = float(prob.J(x))
    for _ in range(max_iter):
        for i, t in enumerate(targets):
            if hits[i] is None and Jx <= t:
                hits[i] = x.copy()
        if targets and hits[-1] is not None:
            break
        gJ = np.asarray(prob.gradJ(x), dtype=float)
        n = np.asarray(prob.gradPsi(x), dtype=float)
        n = n / max(np.linalg.norm(n), 1e-300)
        tg = gJ - (gJ @ n) * n
        if np.linalg.norm(tg) <= 1e-14:
            break
        step *= 2.0
        while step > 1e-16:
            y = project_to_level(prob, x - step * tg, r)
            # c = 0.25 rejects the overshooting steps that merely decrease J
            if y is not None and float(prob.J(y)) <= Jx - 0.25 * step * float(tg @ tg):
                x, Jx = y, float(prob.J(y))
                break
            step *= 0.5
        else:
            break
    return hits, x


def wellposedness_probe(prob: ScalarizedProblem, r: float, trial_count: int = 32,
                        eps_schedule=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), seed: int = 0,
                        opts: LevelOptions = LevelOptions(),
                        ab: Optional[AlphaBeta] = None) -> WellposednessReport:
    """Random minimizing sequences on {Psi = r}: each trial starts at a random
    level-set point and descends J along the level set; the first iterates
    within each eps of the optimum are compared with x_hat_r."""
    ab = alpha_beta(prob, opts.starts, opts.seed) if ab is None else ab
    if not ab.alpha < r < ab.beta:
        raise ValueError(f"r={r} is outside ]alpha, beta[")
    rng = np.random.default_rng(seed)
    starts = []
    while len(starts) < trial_count:
        z = rng.uniform(-prob.box, prob.box, prob.m)
        y = project_to_level(prob, z, r)
        if y is not None:
            starts.append(y)
    # optimum: level minimization when it succeeds, else the best descent limit
    try:
        x_hat, source = level_minimize(prob, r, opts, ab).x_hat, "level_minimize"
    except BisectionStall:
        finals = [_level_descent(prob, s, r)[1] for s in starts]
        x_hat = min(finals, key=lambda y: float(prob.J(y)))
        source = "descent (bisection stalled)"
    J_star = float(prob.J(x_hat))
    eps = [float(e) for e in eps_schedule]
    targets = [J_star + e for e in eps]
    hits = [_level_descent(prob, s, r, targets)[0] for s in starts]
    max_d, med_d = [], []
    for i in range(len(eps)):
        d = [float(np.linalg.norm(h[i] - x_hat)) for h in hits if h[i] is not None]
        max_d.append(max(d) if d else INF)
        med_d.append(float(np.median(d)) if d else INF)
    shrinking = all(b <= a for a, b in zip(max_d, max_d[1:])) and max_d[-1] <= 0.1 * max_d[0]
    return WellposednessReport(r=r, x_hat=np.asarray(x_hat), J_star=J_star, eps=eps,
                               max_distance=max_d, median_distance=med_d,
                               well_posed=bool(shrinking), source=source, trials=trial_count)

