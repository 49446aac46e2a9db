"""Instance description files and deterministic JSON output.

An instance file is a JSON object that either names a preset::

    {"preset": "two-minima-symmetric", "params": {"L": 1.0}}

or composes the built-in families::

    {"name": "my-instance", "n": 1, "T": 1.0,
     "kinetic": {"family": "relativistic", "L": 1.0},
     "potential": {"family": "power", "p": 2, "mu": 1,
                   "omega": {"kind": "harmonic", "cos": [0.1], "sin": [0.0], "k": 1}},
     "growth": {"family": "power", "p": 2, "k": 0.5, "offset": 0},
     "perturbation": {"family": "expression", "expr": "exp(-r**2) - r", "delta": 2},
     "weight": {"kind": "constant", "value": 1},
     "plateau_radius": null,
     "witnesses": [[0.5], [-0.5]]}

Expressions use the variables ``x1 .. xn`` and ``r = |x|`` with the operators
``+ - * / **`` and the functions listed in ``EXPR_FUNCTIONS``.
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path
from typing import Any

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr

from . import model
from .model import ProblemInstance

EXPR_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "log": sp.log,
                  "sqrt": sp.sqrt, "tanh": sp.tanh, "atan": sp.atan, "abs": sp.Abs}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        loc = f"{source}:{line}" if line is not None else source
        super().__init__(f"{loc}: {message}")


# ---------------------------------------------------------------------------
# JSON writing


def to_jsonable(obj: Any) -> Any:
    """Plain-JSON view: numpy scalars/arrays unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


# ---------------------------------------------------------------------------
# expressions


def expression_perturbation(expr: str, n: int, delta: float | None,
                            no_global_min: bool = True):
    """Perturbation from an expression in ``x1..xn`` and ``r``."""
    xs = sp.symbols(" ".join(f"x{i + 1}" for i in range(n)), real=True)
    xs = (xs,) if n == 1 else tuple(xs)
    r = sp.Symbol("r", nonnegative=True)
    names = {s.name: s for s in xs}
    names["r"] = r
    names.update(EXPR_FUNCTIONS)
    # parse_expr evaluates Python, so only numbers, known names and arithmetic get through
    if not re.fullmatch(r"[\w\s.+\-*/()]*", expr):
        raise ValueError(f"expression {expr!r} contains characters outside the operator set")
    bad = {w for w in re.findall(r"[A-Za-z_]\w*", expr) if w not in names}
    if bad:
        raise ValueError(f"expression {expr!r} uses unknown names {sorted(bad)}")
    try:
        e = parse_expr(expr, local_dict=names, global_dict={"Integer": sp.Integer,
                                                            "Float": sp.Float,
                                                            "Rational": sp.Rational,
                                                            "Symbol": sp.Symbol})
    except Exception as exc:  # sympy raises a zoo of types
        raise ValueError(f"cannot parse expression {expr!r}: {exc}") from None
    if not isinstance(e, sp.Expr):
        raise ValueError(f"expression {expr!r} is not scalar")
    allowed = set(EXPR_FUNCTIONS.values()) | {sp.Pow}
    for f in e.atoms(sp.Function):
        if f.func not in allowed:
            raise ValueError(f"function {f.func} is not allowed")
    unknown = e.free_symbols - set(xs) - {r}
    if unknown:
        raise ValueError(f"unknown symbols {sorted(map(str, unknown))}")
    full = e.subs(r, sp.sqrt(sum(s ** 2 for s in xs)))
    G_f = sp.lambdify(xs, full, "numpy")
    grads = [sp.lambdify(xs, sp.diff(full, s), "numpy") for s in xs]

    def G(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(G_f(*np.moveaxis(x, -1, 0)), x.shape[:-1]).astype(float)

    def gradG(x):
        x = np.asarray(x, dtype=float)
        cols = np.moveaxis(x, -1, 0)
        return np.stack([np.broadcast_to(g(*cols), x.shape[:-1]) for g in grads],
                        axis=-1).astype(float)

    return model.Perturbation(G=G, gradG=gradG, delta=delta, no_global_min=no_global_min,
                              name=expr, spec={"family": "expression", "expr": expr,
                                               "delta": delta, "no_global_min": no_global_min})


# ---------------------------------------------------------------------------
# instance construction


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise KeyError(f"{where}: missing field {key!r}")
    return d[key]


def _check_keys(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise TypeError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise KeyError(f"{where}: unknown field {sorted(extra)[0]!r}")


def _omega(spec, T, L, n):
    if spec is None:
        return None, None
    _check_keys(spec, {"kind", "cos", "sin", "k", "amplitude"}, "potential.omega")
    kind = _require(spec, "kind", "potential.omega")
    if kind == "harmonic":
        om = model.harmonic_forcing(T, spec.get("cos"), spec.get("sin"), int(spec.get("k", 1)))
        if om(np.zeros(1)).shape[-1] not in (1, n):
            raise ValueError("potential.omega: coefficient length must match n")
        return om, spec
    if kind == "manufactured":
        if n != 1:
            raise ValueError("potential.omega: manufactured forcing is one-dimensional")
        om, _ = model.manufactured_forcing(L, T, float(_require(spec, "amplitude", "omega")))
        return om, spec
    raise ValueError(f"potential.omega: unknown kind {kind!r}")


def _perturbation(spec, n, L, T):
    family = _require(spec, "family", "perturbation")
    if family == "zero":
        _check_keys(spec, {"family"}, "perturbation")
        return model.zero_perturbation()
    if family == "linear":
        _check_keys(spec, {"family", "z"}, "perturbation")
        z = np.atleast_1d(np.asarray(_require(spec, "z", "perturbation"), dtype=float))
        if z.size != n:
            raise ValueError("perturbation.z must have length n")
        return model.linear_perturbation(z)
    if family == "two-well":
        _check_keys(spec, {"family", "shift"}, "perturbation")
        return model.two_well_perturbation(float(spec.get("shift", 0.0)))
    if family == "plateau":
        _check_keys(spec, {"family", "rho"}, "perturbation")
        return model.plateau_perturbation(float(_require(spec, "rho", "perturbation")))
    if family == "cubic-escape":
        _check_keys(spec, {"family", "R0"}, "perturbation")
        return model.cubic_escape_perturbation(float(spec.get("R0", L * T + 1.0)))
    if family == "scaled":
        _check_keys(spec, {"family", "kappa", "base"}, "perturbation")
        base = _perturbation(_require(spec, "base", "perturbation"), n, L, T)
        return model.scaled_perturbation(base, float(_require(spec, "kappa", "perturbation")))
    if family == "expression":
        _check_keys(spec, {"family", "expr", "delta", "no_global_min"}, "perturbation")
        delta = spec.get("delta")
        return expression_perturbation(str(_require(spec, "expr", "perturbation")), n,
                                       None if delta is None else float(delta),
                                       bool(spec.get("no_global_min", True)))
    raise ValueError(f"perturbation: unknown family {family!r}")


TOP_KEYS = {"name", "n", "T", "kinetic", "potential", "growth", "perturbation", "weight",
            "plateau_radius", "witnesses"}


def instance_from_dict(d: dict) -> ProblemInstance:
    """Build an instance from a parsed description (see the module docstring)."""
    if not isinstance(d, dict):
        raise TypeError("instance description must be a JSON object")
    if "preset" in d:
        _check_keys(d, {"preset", "params"}, "instance")
        params = d.get("params") or {}
        if not isinstance(params, dict):
            raise TypeError("params must be an object")
        return model.preset(str(d["preset"]), **params)
    _check_keys(d, TOP_KEYS, "instance")
    n = int(d.get("n", 1))
    T = float(_require(d, "T", "instance"))
    kin = _require(d, "kinetic", "instance")
    _check_keys(kin, {"family", "L"}, "kinetic")
    if kin.get("family", "relativistic") != "relativistic":
        raise ValueError(f"kinetic: unknown family {kin['family']!r}")
    L = float(_require(kin, "L", "kinetic"))
    pot = _require(d, "potential", "instance")
    _check_keys(pot, {"family", "p", "mu", "omega"}, "potential")
    if pot.get("family", "power") != "power":
        raise ValueError(f"potential: unknown family {pot['family']!r}")
    omega, omega_spec = _omega(pot.get("omega"), T, L, n)
    potential = model.power_potential(float(pot.get("p", 2.0)), float(pot.get("mu", 1.0)),
                                      omega, omega_spec)
    gr = _require(d, "growth", "instance")
    _check_keys(gr, {"family", "p", "k", "offset"}, "growth")
    if gr.get("family", "power") != "power":
        raise ValueError(f"growth: unknown family {gr['family']!r}")
    k = gr.get("k")
    growth = model.power_growth(float(gr.get("p", 2.0)), None if k is None else float(k),
                                float(gr.get("offset", 0.0)))
    pert = _perturbation(_require(d, "perturbation", "instance"), n, L, T)
    w = d.get("weight", {"kind": "constant", "value": 1.0})
    _check_keys(w, {"kind", "value", "values"}, "weight")
    if w.get("kind") == "constant":
        weight = model.constant_weight(T, float(w.get("value", 1.0)))
    elif w.get("kind") == "table":
        weight = model.table_weight(T, _require(w, "values", "weight"))
    else:
        raise ValueError(f"weight: unknown kind {w.get('kind')!r}")
    wit = d.get("witnesses")
    if wit is not None:
        if len(wit) != 2:
            raise ValueError("witnesses must hold exactly two points")
        wit = tuple(np.atleast_1d(np.asarray(p, dtype=float)) for p in wit)
        if any(p.size != n for p in wit):
            raise ValueError("witness points must have length n")
    rho = d.get("plateau_radius")
    return model.ProblemInstance(kinetic=model.make_relativistic_kinetic(L, n),
                                 potential=potential, growth=growth, perturbation=pert,
                                 weight=weight, n=n, T=T,
                                 plateau_radius=None if rho is None else float(rho),
                                 name=str(d.get("name", "custom")), witnesses=wit,
                                 spec=json.loads(json.dumps(d)))


def _line_of(text: str, message: str) -> int | None:
    """Line of the first quoted name mentioned in ``message`` (best effort)."""
    for name in re.findall(r"'([^']+)'", message):
        m = re.search(r'"' + re.escape(name.split(".")[-1]) + r'"', text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    for name in re.findall(r"(\w+)[.:]", message):
        m = re.search(r'"' + re.escape(name) + r'"', text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    return None


def load_instance_text(text: str, source: str = "<config>") -> ProblemInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, source) from None
    try:
        return instance_from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        raise ConfigError(str(msg), _line_of(text, str(msg)), source) from None


def load_instance(path) -> ProblemInstance:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read instance file: {exc.strerror}", None, str(p)) from None
    return load_instance_text(text, str(p))
