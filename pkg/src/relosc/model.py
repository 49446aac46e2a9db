"""Ingredients of a relativistic-oscillator problem and the built-in presets.

Arrays follow one convention throughout the package: a point of R^n is a
trailing axis of length ``n``; times are 1-D arrays broadcast against the
leading axes of the points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


def _norm(x: Array) -> Array:
    return np.linalg.norm(x, axis=-1)


@dataclass(frozen=True)
class KineticLaw:
    """Convex kinetic potential ``Phi`` on the closed ball of radius ``L``.

    ``phi`` is the gradient of ``Phi`` (a homeomorphism of the open ball onto
    R^n) and ``phi_inv`` its globally defined inverse.  ``curvature0`` is the
    second derivative of ``Phi`` at the origin; the optimizer uses it to build
    its preconditioner.
    """

    L: float
    n: int
    Phi: Callable[[Array], Array]
    phi: Callable[[Array], Array]
    phi_inv: Callable[[Array], Array]
    curvature0: float
    name: str = "relativistic"


@dataclass(frozen=True)
class Potential:
    F: Callable[[Array, Array], Array]
    gradF: Callable[[Array, Array], Array]
    time_independent: bool = True
    name: str = ""
    spec: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GrowthBound:
    gamma: Callable[[Array], Array]
    gamma_inv: Optional[Callable[[Array], Array]] = None
    name: str = ""
    spec: dict = field(default_factory=dict)

    def superlinear_certificate(self, count: int = 12) -> tuple[Array, Array]:
        """Schedule ``s = 2^k`` and the ratios ``gamma(s)/s`` along it."""
        s = 2.0 ** np.arange(count)
        return s, self.gamma(s) / s


@dataclass(frozen=True)
class Perturbation:
    """The function ``G`` with its gradient.

    ``delta`` is the author-declared constant with ``-delta(|x|+1) <= G(x)``;
    ``None`` means no such constant is claimed.  ``no_global_min`` records an
    author declaration about whether ``G`` attains its infimum.
    """

    G: Callable[[Array], Array]
    gradG: Callable[[Array], Array]
    delta: Optional[float] = None
    no_global_min: Optional[bool] = None
    name: str = ""
    spec: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Weight:
    psi: Callable[[Array], Array]
    integral: float
    spec: dict = field(default_factory=dict)

    def mean(self, T: float) -> float:
        return self.integral / T


@dataclass(frozen=True)
class ProblemInstance:
    kinetic: KineticLaw
    potential: Potential
    growth: GrowthBound
    perturbation: Perturbation
    weight: Weight
    n: int
    T: float
    plateau_radius: Optional[float] = None
    name: str = "custom"
    witnesses: Optional[tuple[Array, Array]] = None
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"period T must be positive, got {self.T}")
        if self.kinetic.n != self.n:
            raise ValueError("kinetic law dimension does not match n")
        if self.plateau_radius is not None and self.plateau_radius <= self.LT:
            raise ValueError(
                f"plateau radius {self.plateau_radius} must exceed LT = {self.LT}")

    @property
    def L(self) -> float:
        return self.kinetic.L

    @property
    def LT(self) -> float:
        return self.kinetic.L * self.T

    @property
    def autonomous(self) -> bool:
        return self.potential.time_independent and self.weight.spec.get("kind") == "constant"

    def mean_F(self, x: Array, nt: int = 256) -> Array:
        """``(1/T) * int_0^T F(t, x) dt`` by the periodic rectangle rule."""
        x = np.asarray(x, dtype=float)
        if self.potential.time_independent:
            return self.potential.F(np.zeros(x.shape[:-1]), x)
        t = np.arange(nt) * self.T / nt
        vals = self.potential.F(t[(...,) + (None,) * (x.ndim - 1)], x[None, ...])
        return vals.mean(axis=0)


# ---------------------------------------------------------------------------
# kinetic laws


def make_relativistic_kinetic(L: float, n: int = 1) -> KineticLaw:
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    L = float(L)

    def gap(v):
        r = _norm(v)
        # (L-r)(L+r) keeps digits near the boundary
        return (L - r) * (L + r)

    def Phi(v):
        v = np.asarray(v, dtype=float)
        return -np.sqrt(gap(v))

    def phi(v):
        v = np.asarray(v, dtype=float)
        return v / np.sqrt(gap(v))[..., None]

    def phi_inv(w):
        w = np.asarray(w, dtype=float)
        return L * w / np.sqrt(1.0 + np.sum(w * w, axis=-1))[..., None]

    return KineticLaw(L=L, n=n, Phi=Phi, phi=phi, phi_inv=phi_inv, curvature0=1.0 / L)


def phi_inverse(law: KineticLaw, w) -> Array:
    return law.phi_inv(np.asarray(w, dtype=float))


# ---------------------------------------------------------------------------
# growth bounds


def power_growth(p: float, k: Optional[float] = None, offset: float = 0.0) -> GrowthBound:
    """``gamma(s) = k * s^p - offset`` with ``k = 1/p`` unless given."""
    if p <= 1:
        raise ValueError("superlinear growth needs p > 1")
    k = 1.0 / p if k is None else float(k)
    if k <= 0:
        raise ValueError("growth coefficient must be positive")
    if offset < 0:
        raise ValueError("growth offset must be non-negative")

    def gamma(s):
        return k * np.power(np.asarray(s, dtype=float), p) - offset

    def gamma_inv(y):
        return np.power((np.asarray(y, dtype=float) + offset) / k, 1.0 / p)

    spec = {"family": "power", "p": p, "k": k}
    if offset:
        spec["offset"] = offset
    name = f"{k:g}*s^{p:g}" + (f" - {offset:g}" if offset else "")
    return GrowthBound(gamma=gamma, gamma_inv=gamma_inv, name=name, spec=spec)


def gamma_inverse(growth: GrowthBound, y: float, tol: float = 1e-10) -> float:
    """Solve ``gamma(s) = y`` for ``s >= 0``."""
    g0 = float(growth.gamma(0.0))
    if y < g0:
        raise ValueError(f"y = {y} lies below gamma(0) = {g0}")
    if growth.gamma_inv is not None:
        return float(growth.gamma_inv(y))
    hi = 1.0
    while float(growth.gamma(hi)) < y:
        hi *= 2.0
    lo = 0.0
    target = tol * max(1.0, abs(y))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = float(growth.gamma(mid))
        if abs(val - y) <= target:
            return mid
        if val < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# potentials


def power_potential(p: float = 2.0, mu: float = 1.0, omega: Optional[Callable] = None,
                    omega_spec: Optional[dict] = None) -> Potential:
    """``F(t, x) = mu |x|^p / p + <omega(t), x>``."""
    if p <= 1:
        raise ValueError("power potential needs p > 1")

    def F(t, x):
        x = np.asarray(x, dtype=float)
        val = mu * _norm(x) ** p / p
        if omega is not None:
            val = val + np.sum(_forcing(omega, t) * x, axis=-1)
        return val

    def gradF(t, x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None]
        if p == 2:
            g = mu * x
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(r > 0, mu * r ** (p - 2) * x, 0.0)
        if omega is not None:
            g = g + _forcing(omega, t)
        return g

    spec = {"family": "power", "p": p, "mu": mu}
    if omega_spec:
        spec["omega"] = omega_spec
    return Potential(F=F, gradF=gradF, time_independent=omega is None,
                     name=f"{mu:g}|x|^{p:g}/{p:g}" + (" + <omega,x>" if omega else ""), spec=spec)


def _forcing(omega, t):
    return omega(np.asarray(t, dtype=float))


def harmonic_forcing(T: float, cos=None, sin=None, k: int = 1):
    """``omega(t) = a cos(2 pi k t / T) + b sin(2 pi k t / T)``."""
    a = np.atleast_1d(np.asarray(cos if cos is not None else 0.0, dtype=float))
    b = np.atleast_1d(np.asarray(sin if sin is not None else 0.0, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    freq = 2 * np.pi * k / T

    def omega(t):
        t = np.asarray(t, dtype=float)[..., None]
        return a * np.cos(freq * t) + b * np.sin(freq * t)

    return omega


# ---------------------------------------------------------------------------
# perturbations


def zero_perturbation() -> Perturbation:
    return Perturbation(G=lambda x: np.zeros(np.shape(x)[:-1]),
                        gradG=lambda x: np.zeros(np.shape(x)),
                        delta=0.0, no_global_min=False, name="0",
                        spec={"family": "zero"})


def linear_perturbation(z) -> Perturbation:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not np.any(z):
        raise ValueError("z must be non-zero")
    return Perturbation(G=lambda x: np.asarray(x, dtype=float) @ z,
                        gradG=lambda x: np.broadcast_to(z, np.shape(x)).copy(),
                        delta=float(np.linalg.norm(z)), no_global_min=True,
                        name="<z,x>", spec={"family": "linear", "z": z.tolist()})


def _radial(f, df, name, spec, delta, no_global_min=True) -> Perturbation:
    """Perturbation ``G(x) = f(|x|)`` with ``f'(0) = 0``."""

    def G(x):
        return f(_norm(np.asarray(x, dtype=float)))

    def gradG(x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, df(r) * x / r, 0.0)

    return Perturbation(G=G, gradG=gradG, delta=delta, no_global_min=no_global_min,
                        name=name, spec=spec)


def _escape(y):
    """Smooth tail ``y^3/(1+y^2)`` for ``y > 0``, zero otherwise (C^2 at 0)."""
    y = np.maximum(y, 0.0)
    return y ** 3 / (1.0 + y * y)


def _escape_d(y):
    y = np.maximum(y, 0.0)
    return y * y * (3.0 + y * y) / (1.0 + y * y) ** 2


def two_well_perturbation(shift: float = 0.0) -> Perturbation:
    """Double well with zeros at +-0.5 and a linear escape beyond |x| = 2.

    ``G(x) = (x^2 - 1/4)^2/(1 + x^4) - s(|x|)`` for n = 1; ``shift`` moves the
    whole profile, breaking the x -> -x symmetry.
    """

    def core(x):
        return (x * x - 0.25) ** 2 / (1.0 + x ** 4) - _escape(np.abs(x) - 2.0)

    def core_d(x):
        q = x * x - 0.25
        d_well = (4 * x * q * (1 + x ** 4) - q * q * 4 * x ** 3) / (1 + x ** 4) ** 2
        return d_well - np.sign(x) * _escape_d(np.abs(x) - 2.0)

    def G(x):
        x = np.asarray(x, dtype=float)
        return core(x[..., 0] - shift)

    def gradG(x):
        x = np.asarray(x, dtype=float)
        return core_d(x - shift)

    return Perturbation(G=G, gradG=gradG, delta=1.1 + abs(shift), no_global_min=True,
                        name="two-well", spec={"family": "two-well", "shift": shift})


def plateau_perturbation(rho: float) -> Perturbation:
    """Constant (zero) on the ball of radius ``rho``, then ``-y^2/(1+y)``, y = |x| - rho."""

    def f(r):
        y = np.maximum(r - rho, 0.0)
        return -y * y / (1.0 + y)

    def df(r):
        y = np.maximum(r - rho, 0.0)
        return -y * (2.0 + y) / (1.0 + y) ** 2

    # -y^2/(1+y) >= -y >= -(|x| + 1)
    return _radial(f, df, name="plateau", spec={"family": "plateau", "rho": rho}, delta=1.0)


def cubic_escape_perturbation(R0: float) -> Perturbation:
    """Zero on the ball of radius ``R0``, ``-(|x| - R0)^3`` outside."""

    def f(r):
        return -np.maximum(r - R0, 0.0) ** 3

    def df(r):
        return -3.0 * np.maximum(r - R0, 0.0) ** 2

    return _radial(f, df, name="cubic-escape", spec={"family": "cubic-escape", "R0": R0},
                   delta=None)


def scaled_perturbation(pert: Perturbation, kappa: float) -> Perturbation:
    """``kappa * G``; the functional at ``lambda / kappa`` is unchanged."""
    return Perturbation(G=lambda x: kappa * pert.G(x), gradG=lambda x: kappa * pert.gradG(x),
                        delta=None if pert.delta is None else kappa * pert.delta,
                        no_global_min=pert.no_global_min, name=f"{kappa:g}*{pert.name}",
                        spec={"family": "scaled", "kappa": kappa, "base": pert.spec})


# ---------------------------------------------------------------------------
# weights


def constant_weight(T: float, value: float = 1.0) -> Weight:
    if value <= 0:
        raise ValueError("weight must be non-zero and non-negative")
    return Weight(psi=lambda t: np.full(np.shape(t), float(value)), integral=float(value) * T,
                  spec={"kind": "constant", "value": value})


def table_weight(T: float, values) -> Weight:
    """Periodic piecewise-linear interpolation of samples on ``k T / m``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("weight table must be a non-empty 1-D sequence")
    if np.any(v < 0):
        raise ValueError("weight samples must be non-negative")
    if not np.any(v > 0):
        raise ValueError("weight must not vanish identically")
    m = v.size
    grid = np.arange(m + 1) * T / m
    ext = np.append(v, v[0])

    def psi(t):
        return np.interp(np.mod(t, T), grid, ext)

    return Weight(psi=psi, integral=float(v.mean() * T),
                  spec={"kind": "table", "values": v.tolist()})


# ---------------------------------------------------------------------------
# presets

PRESETS = ("example-3.1", "example-3.2", "example-3.3", "two-minima-symmetric",
           "two-minima-asymmetric", "theorem-3.2", "forced-oscillator")


def _instance(name, n, T, L, potential, growth, pert, weight=None, plateau=None,
              witnesses=None, params=None) -> ProblemInstance:
    weight = weight or constant_weight(T)
    spec = {"preset": name, "params": params or {}, "n": n, "T": T,
            "kinetic": {"family": "relativistic", "L": L},
            "potential": potential.spec, "growth": growth.spec,
            "perturbation": pert.spec, "weight": weight.spec}
    if plateau is not None:
        spec["plateau_radius"] = plateau
    if witnesses is not None:
        witnesses = tuple(np.atleast_1d(np.asarray(w, dtype=float)) for w in witnesses)
    return ProblemInstance(kinetic=make_relativistic_kinetic(L, n), potential=potential,
                           growth=growth, perturbation=pert, weight=weight, n=n, T=T,
                           plateau_radius=plateau, name=name, witnesses=witnesses, spec=spec)


def _pair(n, radius):
    e = np.zeros(n)
    e[0] = radius
    return e, -e


def manufactured_forcing(L: float, T: float, amplitude: float, mu: float = 1.0):
    """Forcing that makes ``u(t) = amplitude * sin(2 pi t / T)`` the periodic solution
    of ``(phi(u'))' = mu u + omega(t)`` for the 1-D relativistic law."""
    k = 2 * np.pi / T
    if amplitude * k >= L:
        raise ValueError("manufactured solution would exceed the speed bound")

    def exact(t):
        return amplitude * np.sin(k * np.asarray(t, dtype=float))

    def omega(t):
        t = np.asarray(t, dtype=float)
        v = amplitude * k * np.cos(k * t)
        acc = -amplitude * k * k * np.sin(k * t)
        dphi = L * L / ((L - np.abs(v)) * (L + np.abs(v))) ** 1.5
        return (dphi * acc - mu * exact(t))[..., None]

    return omega, exact


def preset(name: str, **params) -> ProblemInstance:
    """Build one of the shipped instances.

    ``example-3.1/3.2/3.3`` are the three counterexamples (each missing one
    hypothesis), ``two-minima-symmetric`` satisfies every hypothesis with the
    witnesses +-0.5, ``theorem-3.2`` carries the plateau condition, and
    ``forced-oscillator`` has a known non-constant periodic solution.
    """
    L = float(params.pop("L", 0.5 if name == "theorem-3.2" else 1.0))
    T = float(params.pop("T", 1.0))
    n = int(params.pop("n", 1))
    used = {"L": L, "T": T, "n": n}

    if name == "example-3.1":
        z = params.pop("z", None)
        z = np.ones(n) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
        used["z"] = z.tolist()
        inst = _instance(name, n, T, L, power_potential(2.0), power_growth(2.0),
                         linear_perturbation(z), witnesses=_pair(n, 0.5), params=used)
    elif name == "example-3.2":
        inst = _instance(name, n, T, L, power_potential(2.0), power_growth(2.0),
                         zero_perturbation(), witnesses=_pair(n, 0.5), params=used)
    elif name == "example-3.3":
        inst = _instance(name, n, T, L, power_potential(2.0, mu=2.0), power_growth(2.0, k=1.0),
                         cubic_escape_perturbation(L * T + 1.0), witnesses=_pair(n, 0.5),
                         params=used)
    elif name in ("two-minima-symmetric", "two-minima-asymmetric"):
        if n != 1:
            raise ValueError(f"{name} is one-dimensional")
        shift = float(params.pop("shift", 0.1 if name == "two-minima-asymmetric" else 0.0))
        used["shift"] = shift
        wit = (np.array([0.5 + shift]), np.array([-0.5 + shift]))
        inst = _instance(name, n, T, L, power_potential(2.0), power_growth(2.0),
                         two_well_perturbation(shift), witnesses=wit, params=used)
    elif name == "theorem-3.2":
        p = float(params.pop("p", 2.0))
        rho = float(params.pop("rho", 0.8))
        used.update(p=p, rho=rho)
        if rho <= L * T:
            raise ValueError(f"plateau radius rho = {rho} must exceed LT = {L * T}")
        inst = _instance(name, n, T, L, power_potential(p), power_growth(p),
                         plateau_perturbation(rho), plateau=rho,
                         witnesses=_pair(n, rho - L * T), params=used)
    elif name == "forced-oscillator":
        if n != 1:
            raise ValueError(f"{name} is one-dimensional")
        amp = float(params.pop("amplitude", 0.1))
        used["amplitude"] = amp
        omega, _ = manufactured_forcing(L, T, amp)
        pot = power_potential(2.0, omega=omega,
                              omega_spec={"kind": "manufactured", "amplitude": amp})
        # x^2/2 + w x >= x^2/4 - w^2, so s^2/4 - W^2 bounds F from below when W >= max|w|
        W = 1.01 * float(np.abs(omega(np.linspace(0.0, T, 4097))).max())
        inst = _instance(name, n, T, L, pot, power_growth(2.0, k=0.25, offset=W * W),
                         zero_perturbation(),
                         witnesses=None, params=used)
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if params:
        raise ValueError(f"unused parameters for {name}: {sorted(params)}")
    return inst
