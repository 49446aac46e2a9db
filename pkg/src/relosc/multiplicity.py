"""Lambda scans for two global minima, unboundedness detection, and the
plateau-instance driver."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .functional import total_energy
from .hypotheses import FALSIFIED, VERIFIED, HypothesisReport, Verdict, check_all, check_j1
from .model import ProblemInstance
from .optimizer import MinimizeOptions, Minimum, cluster_minima, multistart
from .path import PeriodicPath, path_distance
from .verify import Certificate, certify


def default_lambda_grid(lo: float = 1e-2, hi: float = 1e2, count: int = 25) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), count)


@dataclass(frozen=True)
class ScanOptions:
    minimize: MinimizeOptions = MinimizeOptions()
    starts: int = 20
    value_tol: Optional[float] = None
    dist_tol: Optional[float] = None
    threads: int = 1


@dataclass(frozen=True, eq=False)
class LambdaEntry:
    lam: float
    best_energy: float
    n_global: int
    representatives: tuple
    all_converged: bool
    results: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "best_energy": self.best_energy,
                "n_global_clusters": self.n_global, "all_converged": self.all_converged,
                "representatives": [
                    {"value": c.best_value, "is_global": c.is_global, "members": list(c.members),
                     "sup_norm": c.representative.path.sup_norm(),
                     "inf_norm": c.representative.path.inf_norm(),
                     "mean": c.representative.path.nodes.mean(axis=0).tolist()}
                    for c in self.representatives]}


@dataclass
class ScanReport:
    lambdas: list = field(default_factory=list)
    entries: list = field(default_factory=list)
    detected_lambda: Optional[float] = None
    detected_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {"lambdas": list(self.lambdas), "detected_lambda": self.detected_lambda,
                "detected_index": self.detected_index,
                "entries": [e.to_dict() for e in self.entries]}

    def to_csv(self) -> str:
        lines = ["lambda,best_energy,n_global_clusters,detected"]
        for i, e in enumerate(self.entries):
            lines.append(f"{e.lam!r},{e.best_energy!r},{e.n_global},{int(i == self.detected_index)}")
        return "\n".join(lines) + "\n"


def _dist_tol(inst: ProblemInstance, opts: ScanOptions) -> float:
    return 1e-3 * inst.LT if opts.dist_tol is None else opts.dist_tol


def scan_point(inst: ProblemInstance, lam: float, opts: ScanOptions) -> LambdaEntry:
    results = multistart(inst, lam, opts.minimize, opts.starts)
    converged = [r for r in results if r.converged]
    pool = converged or results
    clusters = cluster_minima(pool, opts.value_tol, _dist_tol(inst, opts),
                              energy_fn=lambda p: total_energy(inst, p, lam))
    glob = [c for c in clusters if c.is_global]
    return LambdaEntry(lam=float(lam), best_energy=clusters[0].best_value,
                       n_global=len(glob) if converged else 0, representatives=tuple(clusters),
                       all_converged=len(converged) == len(results), results=tuple(results))


def lambda_scan(inst: ProblemInstance, lambda_grid, opts: ScanOptions = ScanOptions()) -> ScanReport:
    grid = [float(x) for x in np.asarray(lambda_grid, dtype=float).ravel()]
    if any(x <= 0 for x in grid) or grid != sorted(grid):
        raise ValueError("lambda grid must be positive and sorted")
    if opts.threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            entries = list(pool.map(lambda lam: scan_point(inst, lam, opts), grid))
    else:
        entries = [scan_point(inst, lam, opts) for lam in grid]
    report = ScanReport(lambdas=grid, entries=entries)
    for i, e in enumerate(entries):
        if e.n_global >= 2:
            report.detected_lambda, report.detected_index = e.lam, i
            break
    return report


# ---------------------------------------------------------------------------


def detect_unbounded(inst: ProblemInstance, lam: float, radius_schedule=None,
                     directions: int = 16, N: int = 16, threshold: float = -1e6,
                     seed: int = 0) -> Verdict:
    """Energies of constant paths of growing norm; evidence of unboundedness when
    they fall below ``threshold``."""
    radii = 10.0 * 2.0 ** np.arange(12) if radius_schedule is None else np.asarray(radius_schedule, float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radius schedule must increase")
    n = inst.n
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        g = np.random.default_rng(seed).standard_normal((directions, n))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    trace = []
    for R in radii:
        vals = [total_energy(inst, PeriodicPath(np.tile(R * d, (N, 1)), inst.T), lam) for d in dirs]
        k = int(np.argmin(vals))
        trace.append((float(R), float(vals[k])))
        if vals[k] <= threshold:
            return Verdict(VERIFIED, witness={"radius": float(R), "direction": dirs[k].tolist(),
                                              "energy": float(vals[k]), "trace": trace},
                           detail=f"constant path of norm {R:g} has energy {vals[k]:.6g}")
    return Verdict("no-evidence", witness={"trace": trace},
                   detail=f"energies stay above {threshold:g} up to radius {radii[-1]:g}")


@dataclass
class TwoMinimaResult:
    status: str  # found | not-detected | certification-failed | unbounded | hypotheses-failed
    lam: Optional[float] = None
    pair: tuple = ()
    certificates: tuple = ()
    report: Optional[ScanReport] = None
    onset_bracket: Optional[tuple] = None
    unbounded: Optional[Verdict] = None
    hypotheses: Optional[HypothesisReport] = None

    @property
    def found(self) -> bool:
        return self.status == "found"

    def to_dict(self) -> dict:
        out = {"status": self.status, "lambda": self.lam,
               "onset_bracket": None if self.onset_bracket is None else list(self.onset_bracket),
               "pair": [m.to_dict() for m in self.pair],
               "certificates": [c.to_dict() for c in self.certificates],
               "scan": None if self.report is None else self.report.to_dict()}
        if self.pair:
            a, b = self.pair
            out["separation"] = path_distance(a.path, b.path)
            out["energy_gap"] = abs(a.value - b.value)
        if self.unbounded is not None:
            out["unbounded"] = self.unbounded.to_dict()
        out["hypotheses"] = "override" if self.hypotheses is None else self.hypotheses.to_dict()
        return out


def _refine_onset(inst, lo, hi, opts, rounds=3):
    """Bisect (in log scale) between a non-detecting and a detecting lambda."""
    for _ in range(rounds):
        mid = float(np.sqrt(lo * hi))
        if scan_point(inst, mid, opts).n_global >= 2:
            hi = mid
        else:
            lo = mid
    return lo, hi


def find_two_minima(inst: ProblemInstance, opts: ScanOptions = ScanOptions(),
                    lambda_grid=None, refine_rounds: int = 3, certify_levels: int = 2,
                    check_hypotheses: bool = False) -> TwoMinimaResult:
    """Scan lambda for two global minima and certify a representative pair.

    The pair is taken at the detecting grid point.  Close to the onset the two
    minima can coalesce (a pitchfork in the symmetric case), so the bisection
    only brackets the onset; it does not move the reported lambda.
    Without ``check_hypotheses`` the result records an override instead of a
    hypothesis report.
    """
    hyp = None
    if check_hypotheses:
        hyp = check_all(inst)
        if hyp.failing:
            return TwoMinimaResult(status="hypotheses-failed", hypotheses=hyp)
    grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, float)
    for lam in (grid[0], grid[-1]):
        verdict = detect_unbounded(inst, float(lam))
        if verdict.status == VERIFIED:
            return TwoMinimaResult(status="unbounded", lam=float(lam), unbounded=verdict,
                                   hypotheses=hyp)
    report = lambda_scan(inst, grid, opts)
    if report.detected_lambda is None:
        return TwoMinimaResult(status="not-detected", report=report, hypotheses=hyp)
    i = report.detected_index
    lam = report.detected_lambda
    bracket = None
    if i > 0 and refine_rounds > 0:
        bracket = _refine_onset(inst, report.lambdas[i - 1], lam, opts, refine_rounds)
    entry = report.entries[i]
    glob = [c for c in entry.representatives if c.is_global][:2]
    pair = tuple(c.representative for c in glob)
    certs = tuple(certify(m, inst, lam, certify_levels, opts.minimize) for m in pair)
    status = "found" if all(c.passed for c in certs) else "certification-failed"
    return TwoMinimaResult(status=status, lam=lam, pair=pair, certificates=certs,
                           report=report, onset_bracket=bracket, hypotheses=hyp)


@dataclass
class Theorem32Result:
    status: str  # found | not-found | precondition-failed
    minimum: Optional[Minimum] = None
    certificate: Optional[Certificate] = None
    min_norm: Optional[float] = None
    threshold: Optional[float] = None
    zero_energy: Optional[float] = None
    lam: Optional[float] = None
    search: Optional[TwoMinimaResult] = None
    j1: Optional[Verdict] = None

    def to_dict(self) -> dict:
        return {"status": self.status, "lambda": self.lam, "min_norm": self.min_norm,
                "threshold": self.threshold, "zero_energy": self.zero_energy,
                "minimum": None if self.minimum is None else self.minimum.to_dict(),
                "certificate": None if self.certificate is None else self.certificate.to_dict(),
                "j1": None if self.j1 is None else self.j1.to_dict(),
                "search": None if self.search is None else self.search.to_dict()}


def range_excludes_ball(p: PeriodicPath, radius: float) -> bool:
    return p.inf_norm() > radius


def theorem32_driver(inst: ProblemInstance, opts: ScanOptions = ScanOptions(),
                     lambda_grid=None) -> Theorem32Result:
    """Find a certified global minimizer whose range avoids the closed ball of
    radius ``rho - LT``."""
    rho = inst.plateau_radius
    if rho is None:
        raise ValueError("instance carries no plateau radius")
    j1 = check_j1(inst.perturbation, inst.n, rho, inst.LT)
    if j1.status == FALSIFIED:
        return Theorem32Result(status="precondition-failed", j1=j1)
    if inst.potential.spec.get("family") != "power" or "omega" in inst.potential.spec:
        raise ValueError("the plateau driver expects the unforced power potential")
    threshold = rho - inst.LT
    search = find_two_minima(inst, opts, lambda_grid)
    if search.status not in ("found", "certification-failed"):
        return Theorem32Result(status="not-found", search=search, threshold=threshold, j1=j1)
    lam = search.lam
    zero = PeriodicPath(np.zeros((opts.minimize.N, inst.n)), inst.T)
    zero_energy = total_energy(inst, zero, lam)
    for m, cert in zip(search.pair, search.certificates):
        path = cert.final.path if cert.final is not None else m.path
        if cert.passed and range_excludes_ball(path, threshold):
            return Theorem32Result(status="found", minimum=cert.final, certificate=cert,
                                   min_norm=path.inf_norm(), threshold=threshold,
                                   zero_energy=zero_energy, lam=lam, search=search, j1=j1)
    return Theorem32Result(status="not-found", search=search, threshold=threshold,
                           zero_energy=zero_energy, lam=lam, j1=j1)
