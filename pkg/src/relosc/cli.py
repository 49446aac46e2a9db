"""Command-line entry point: ``relosc <subcommand> [options]``.

Exit status: 0 success, 1 mathematical failure (falsified hypothesis, failed
certificate, non-convergence, no detection), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dumps, load_instance, to_jsonable
from .hypotheses import check_all
from .model import PRESETS, preset
from .multiplicity import (ScanOptions, default_lambda_grid, find_two_minima, lambda_scan)
from .optimizer import MinimizeOptions, cluster_minima, minimize, multistart
from .path import PeriodicPath, project_feasible
from .verify import certify, default_shooting_grid, el_residual, NewtonOptions, solve_by_shooting
from .functional import total_energy

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:count[:log|lin]`` (log spacing by default)."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError("expected lo:hi:count[:log|lin]")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    mode = parts[3] if len(parts) == 4 else "log"
    if mode not in ("log", "lin") or count < 1 or hi < lo or (mode == "log" and lo <= 0):
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    if count == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, count) if mode == "log" else np.linspace(lo, hi, count)


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--instance", help="instance description JSON file")
    src.add_argument("--preset", choices=PRESETS)
    common.add_argument("--param", action="append", type=_param, default=[],
                        metavar="KEY=VALUE", help="preset parameter (JSON value)")
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--lambda-grid", type=parse_grid, metavar="LO:HI:COUNT[:log|lin]")
    common.add_argument("--grid-n", type=int, default=64, help="path nodes N")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--starts", type=int, default=20)
    common.add_argument("--tol-grad", type=float, default=1e-8)
    common.add_argument("--tol-value", type=float, default=None)
    common.add_argument("--tol-dist", type=float, default=None)

    p = argparse.ArgumentParser(prog="relosc", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="hypothesis checks")
    sub.add_parser("minimize", parents=[common], help="multistart minimization at one lambda")
    sub.add_parser("scan", parents=[common], help="lambda scan for multiple global minima")
    sub.add_parser("find-two", parents=[common], help="detect and certify two global minima")
    v = sub.add_parser("verify", parents=[common], help="certify a minimizer")
    v.add_argument("--path", help="path CSV to polish and certify (default: multistart best)")
    v.add_argument("--refine-levels", type=int, default=2)
    s = sub.add_parser("shoot", parents=[common], help="periodic solutions by shooting")
    s.add_argument("--steps", type=int, default=1024)
    s.add_argument("--spread", type=float, default=1.0)
    s.add_argument("--per-axis", type=int, default=3)
    s.add_argument("--center", type=float, nargs="+", default=None)
    w = sub.add_parser("wellposed", parents=[common], help="finite-dimensional level-set lab")
    w.add_argument("--lab", choices=("quadratic", "symmetric"), default="quadratic")
    w.add_argument("--r", type=float, default=1.0, help="level for the well-posedness probe")
    w.add_argument("--r-grid", type=parse_grid, default=None, metavar="LO:HI:COUNT[:log|lin]")
    w.add_argument("--trials", type=int, default=32)
    r = sub.add_parser("report", parents=[common], help="SVG plots from earlier artifacts")
    r.add_argument("--from", dest="source", required=True, help="artifact directory")
    return p


# ---------------------------------------------------------------------------
# helpers


def _instance(args):
    if args.instance:
        if args.param:
            raise UsageError("--param only applies to --preset")
        return load_instance(args.instance)
    if args.preset:
        try:
            return preset(args.preset, **dict(args.param))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    raise UsageError("one of --instance or --preset is required")


def _minimize_opts(args) -> MinimizeOptions:
    try:
        return MinimizeOptions(N=args.grid_n, grad_tol=args.tol_grad, seed=args.seed,
                               threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scan_opts(args) -> ScanOptions:
    return ScanOptions(minimize=_minimize_opts(args), starts=args.starts,
                       value_tol=args.tol_value, dist_tol=args.tol_dist, threads=args.threads)


def _config(args, inst=None, **extra) -> dict:
    cfg = {"command": args.command, "seed": args.seed, "N": args.grid_n,
           "threads": args.threads, "starts": args.starts, "tol_grad": args.tol_grad,
           "tol_value": args.tol_value, "tol_dist": args.tol_dist}
    if inst is not None:
        cfg["instance"] = inst.spec
    cfg.update(extra)
    return to_jsonable(cfg)


class Out:
    def __init__(self, root, config):
        self.root = Path(root)
        self.config = config
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def json(self, name, payload):
        body = {"config": self.config, "seed": self.config["seed"], **payload}
        (self.root / name).write_text(dumps(body))
        self.files.append(name)

    def path_csv(self, name, path: PeriodicPath):
        (self.root / name).write_text(path.to_csv(config=self.config))
        self.files.append(name)

    def csv(self, name, text):
        header = "# config: " + json.dumps(self.config, sort_keys=True) + "\n"
        (self.root / name).write_text(header + text)
        self.files.append(name)


def _residual_csv(inst, lam, path) -> str:
    rep = el_residual(inst, lam, path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "residual_norm"])
    for k, v in enumerate(np.linalg.norm(rep.residual, axis=1)):
        w.writerow([k, repr(float(v))])
    return buf.getvalue()


def _need_lambda(args) -> float:
    if args.lam is None:
        raise UsageError("--lambda is required")
    if not args.lam >= 0:
        raise UsageError("--lambda must be non-negative")
    return args.lam


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args):
    inst = _instance(args)
    if inst.witnesses is None:
        raise UsageError(f"instance {inst.name} declares no witness points for (i4)")
    rep = check_all(inst, seed=args.seed)
    out = Out(args.out, _config(args, inst))
    out.json("check.json", {"report": rep.to_dict()})
    for k, v in rep.verdicts.items():
        print(f"{k}: {v.status}{'' if v.holds else '  <-- fails'}")
    return FAILED if rep.failing else OK


def cmd_minimize(args):
    inst = _instance(args)
    lam = _need_lambda(args)
    opts = _minimize_opts(args)
    results = multistart(inst, lam, opts, args.starts)
    best = results[0]
    clusters = cluster_minima(results, args.tol_value,
                              1e-3 * inst.LT if args.tol_dist is None else args.tol_dist,
                              energy_fn=lambda p: total_energy(inst, p, lam))
    out = Out(args.out, _config(args, inst, **{"lambda": lam}))
    out.json("minimum.json", {"minimum": best.to_dict(),
                              "clusters": [{"value": c.best_value, "is_global": c.is_global,
                                            "members": list(c.members)} for c in clusters],
                              "runs": [m.to_dict() for m in results]})
    out.path_csv("path.csv", best.path)
    print(f"best value {best.value:.12g} ({best.status}), {sum(c.is_global for c in clusters)} "
          f"global cluster(s)")
    return OK if best.converged else FAILED


def cmd_scan(args):
    inst = _instance(args)
    grid = default_lambda_grid() if args.lambda_grid is None else args.lambda_grid
    rep = lambda_scan(inst, grid, _scan_opts(args))
    out = Out(args.out, _config(args, inst, lambda_grid=list(grid)))
    out.csv("scan.csv", rep.to_csv())
    out.json("scan.json", {"scan": rep.to_dict()})
    for i, e in enumerate(rep.entries):
        for j, c in enumerate(x for x in e.representatives if x.is_global):
            out.path_csv(f"scan_{i:02d}_global_{j}.csv", c.representative.path)
    print(f"detected lambda: {rep.detected_lambda}")
    stuck = any(not any(r.converged for r in e.results) for e in rep.entries)
    return FAILED if stuck else OK


def cmd_find_two(args):
    inst = _instance(args)
    grid = default_lambda_grid() if args.lambda_grid is None else args.lambda_grid
    res = find_two_minima(inst, _scan_opts(args), grid)
    out = Out(args.out, _config(args, inst, lambda_grid=list(grid)))
    out.json("find_two.json", {"result": res.to_dict()})
    if res.report is not None:
        out.csv("scan.csv", res.report.to_csv())
    for k, cert in enumerate(res.certificates, start=1):
        out.json(f"certificate_{k}.json", {"certificate": cert.to_dict()})
        final = cert.final.path if cert.final is not None else res.pair[k - 1].path
        out.path_csv(f"pair_{k}.csv", final)
        out.csv(f"residual_{k}.csv", _residual_csv(inst, res.lam, final))
    print(f"status: {res.status}" + (f" at lambda {res.lam:.12g}" if res.lam else ""))
    return OK if res.found else FAILED


def cmd_verify(args):
    inst = _instance(args)
    lam = _need_lambda(args)
    opts = _minimize_opts(args)
    if args.path:
        try:
            raw = PeriodicPath.from_csv(Path(args.path).read_text(), T=inst.T)
        except (OSError, ValueError, IndexError) as exc:
            raise UsageError(f"cannot read path {args.path}: {exc}") from None
        if raw.n != inst.n:
            raise UsageError("path dimension does not match the instance")
        start = project_feasible(raw.nodes, inst.T, inst.L, opts.eps_bd)
        opts = MinimizeOptions(**{**opts.__dict__, "N": start.N})
        m = minimize(inst, lam, start, opts)
    else:
        m = multistart(inst, lam, opts, args.starts)[0]
    out = Out(args.out, _config(args, inst, **{"lambda": lam, "path": args.path}))
    if not m.converged:
        out.json("certificate.json", {"minimum": m.to_dict(), "certificate": None,
                                      "diagnostics": f"minimization ended with {m.status}"})
        print(f"minimization did not converge ({m.status})")
        return FAILED
    cert = certify(m, inst, lam, args.refine_levels, opts)
    out.json("certificate.json", {"minimum": m.to_dict(), "certificate": cert.to_dict()})
    out.path_csv("certified_path.csv", cert.final.path)
    out.csv("residual.csv", _residual_csv(inst, lam, cert.final.path))
    print(f"certificate {'passed' if cert.passed else 'FAILED'}: residual {cert.residual:.3e}")
    return OK if cert.passed else FAILED


def cmd_shoot(args):
    inst = _instance(args)
    lam = _need_lambda(args)
    if args.steps < 64:
        raise UsageError("--steps must be at least 64")
    center = args.center
    if center is not None and len(center) != 2 * inst.n:
        raise UsageError(f"--center needs {2 * inst.n} values (u0 then w0)")
    grid = default_shooting_grid(inst, center, args.spread, args.per_axis)
    res = solve_by_shooting(inst, lam, grid, NewtonOptions(steps=args.steps, N=args.grid_n))
    out = Out(args.out, _config(args, inst, **{"lambda": lam, "steps": args.steps,
                                               "spread": args.spread,
                                               "per_axis": args.per_axis, "center": center}))
    out.json("roots.json", {"shooting": res.to_dict()})
    for k, root in enumerate(res.roots, start=1):
        out.path_csv(f"root_{k}.csv", root.path)
    print(f"{len(res.roots)} root(s), {len(res.failures)} failed start(s)")
    return OK if res.roots else FAILED


def cmd_wellposed(args):
    from . import wellposed as wp

    prob = wp.quadratic_lab() if args.lab == "quadratic" else wp.symmetric_lab()
    ab = wp.alpha_beta(prob, seed=args.seed)
    opts = wp.LevelOptions(seed=args.seed)
    grid = args.r_grid if args.r_grid is not None else np.linspace(0.25, 4.0, 21)
    cfg = _config(args, None, lab=args.lab, r=args.r, r_grid=list(grid), trials=args.trials)
    out = Out(args.out, cfg)
    cont = wp.continuity_probe(prob, grid, opts, ab)
    out.csv("continuity.csv", cont.to_csv())
    try:
        probe = wp.wellposedness_probe(prob, args.r, args.trials, seed=args.seed, opts=opts, ab=ab)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.csv("wellposedness.csv", probe.to_csv())
    out.json("wellposed.json", {"alpha_beta": ab.to_dict(),
                                "continuity": {"max_jump_x": cont.max_jump_x,
                                               "max_jump_J": cont.max_jump_J,
                                               "discontinuity": cont.discontinuity},
                                "probe": probe.to_dict()})
    print(f"alpha={ab.alpha:g} beta={ab.beta:g}; discontinuity={cont.discontinuity}; "
          f"well_posed={probe.well_posed}")
    return OK if probe.well_posed and not cont.discontinuity else FAILED


def cmd_report(args):
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "relosc"
    src = Path(args.source)
    if not src.is_dir():
        raise UsageError(f"no artifact directory {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    made = []

    def save(fig, name):
        fig.savefig(out / name, format="svg", metadata={"Date": None})
        plt.close(fig)
        made.append(name)

    scan = next((src / n for n in ("scan.json", "find_two.json") if (src / n).exists()), None)
    if scan is not None:
        data = json.loads(scan.read_text())
        rep = data.get("scan") or (data.get("result") or {}).get("scan")
        if rep and rep["entries"]:
            lam = [e["lambda"] for e in rep["entries"]]
            best = [e["best_energy"] for e in rep["entries"]]
            fig, ax = plt.subplots()
            ax.semilogx(lam, best, marker="o", label="best energy")
            if rep.get("detected_lambda") is not None:
                ax.axvline(rep["detected_lambda"], color="k", ls="--", label="detected")
            ax.set_xlabel("lambda")
            ax.set_ylabel("minimal energy")
            ax.legend()
            save(fig, "energy_vs_lambda.svg")

    path_files = sorted(p for p in src.glob("*.csv")
                        if p.name.startswith(("pair_", "path", "root_", "certified_")))
    if path_files:
        fig, ax = plt.subplots()
        for p in path_files:
            path = PeriodicPath.from_csv(p.read_text())
            for i in range(path.n):
                t = np.append(path.times, path.T)
                ax.plot(t, np.append(path.nodes[:, i], path.nodes[0, i]),
                        label=f"{p.stem} u_{i + 1}")
        ax.set_xlabel("t")
        ax.set_ylabel("u(t)")
        ax.legend()
        save(fig, "paths.svg")

    res_files = sorted(src.glob("residual*.csv"))
    if res_files:
        fig, ax = plt.subplots()
        for p in res_files:
            rows = [ln for ln in p.read_text().splitlines() if ln and not ln.startswith("#")]
            vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
            ax.hist(np.log10(np.maximum(vals, 1e-300)), bins=20, alpha=0.6, label=p.stem)
        ax.set_xlabel("log10 |EL residual|")
        ax.set_ylabel("nodes")
        ax.legend()
        save(fig, "residuals.svg")
    if not made:
        print(f"nothing to plot in {src}", file=sys.stderr)
        return FAILED
    print("wrote " + ", ".join(made))
    return OK


COMMANDS = {"check": cmd_check, "minimize": cmd_minimize, "scan": cmd_scan,
            "find-two": cmd_find_two, "verify": cmd_verify, "shoot": cmd_shoot,
            "wellposed": cmd_wellposed, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.threads < 1 or args.starts < 1:
        print("relosc: --threads and --starts must be positive", file=sys.stderr)
        return USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"relosc: {exc}", file=sys.stderr)
        return USAGE
    except UsageError as exc:
        print(f"relosc: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
