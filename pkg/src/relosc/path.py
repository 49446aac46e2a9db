"""Periodic piecewise-linear paths: the discrete constraint set."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

DEFAULT_EPS_BD = 1e-6


class ProjectionError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class PeriodicPath:
    """Nodes ``u_0..u_{N-1}`` at ``t_k = k T / N`` with ``u_N = u_0``."""

    nodes: np.ndarray
    T: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.ndim != 2:
            raise ValueError("nodes must have shape (N, n)")
        if nodes.shape[0] < 4:
            raise ValueError(f"need at least 4 nodes, got {nodes.shape[0]}")
        if self.T <= 0:
            raise ValueError("period must be positive")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def N(self) -> int:
        return self.nodes.shape[0]

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N) * self.h

    @property
    def increments(self) -> np.ndarray:
        return np.roll(self.nodes, -1, axis=0) - self.nodes

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.increments, axis=1) / self.h

    def sup_norm(self) -> float:
        return float(np.linalg.norm(self.nodes, axis=1).max())

    def inf_norm(self) -> float:
        return float(np.linalg.norm(self.nodes, axis=1).min())

    def is_feasible(self, L: float, eps_bd: float = 0.0) -> bool:
        return bool(np.all(self.speeds <= (1.0 - eps_bd) * L * (1 + 1e-12)))

    def evaluate(self, t) -> np.ndarray:
        """Periodic linear interpolation at arbitrary times."""
        t = np.mod(np.asarray(t, dtype=float), self.T)
        grid = np.append(self.times, self.T)
        ext = np.vstack([self.nodes, self.nodes[:1]])
        return np.stack([np.interp(t, grid, ext[:, i]) for i in range(self.n)], axis=-1)

    def resample(self, N: int) -> "PeriodicPath":
        return PeriodicPath(self.evaluate(np.arange(N) * self.T / N), self.T)

    def with_nodes(self, nodes) -> "PeriodicPath":
        return PeriodicPath(nodes, self.T)

    def __neg__(self):
        return PeriodicPath(-self.nodes, self.T)

    # serialization --------------------------------------------------------

    def to_csv(self, config: dict | None = None) -> str:
        buf = io.StringIO()
        if config is not None:
            buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"u_{i + 1}" for i in range(self.n)])
        for t, row in zip(self.times, self.nodes):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, T: float | None = None) -> "PeriodicPath":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        header, body = rows[0], rows[1:]
        if not header or header[0] != "t" or len(header) < 2:
            raise ValueError("path CSV needs a header 't,u_1,...'")
        data = np.array(body, dtype=float)
        t = data[:, 0]
        if T is None:
            h = t[1] - t[0]
            T = float(t[-1] + h)
        return cls(data[:, 1:], T)


def _reconstruct(increments: np.ndarray, mean: np.ndarray) -> np.ndarray:
    nodes = np.vstack([np.zeros((1, increments.shape[1])), np.cumsum(increments[:-1], axis=0)])
    return nodes - nodes.mean(axis=0) + mean


def _ball(y: np.ndarray, cap: float) -> np.ndarray:
    r = np.linalg.norm(y, axis=1, keepdims=True)
    return y * np.minimum(1.0, cap / np.maximum(r, 1e-300))


def _dual_newton(d: np.ndarray, cap: float, mu: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Projection by the multiplier mu of the zero-sum constraint: the answer is
    ball(d - mu) at the root of sum_k ball(d_k - mu).  Damped Newton on the
    (convex, C^1) negated dual."""
    n = d.shape[1]
    if n == 1:
        # scalar and monotone: bracket and solve directly
        f = lambda m: float(np.clip(d[:, 0] - m, -cap, cap).sum())
        m = brentq(f, d.min() - cap, d.max() + cap, xtol=1e-15 * cap, rtol=4 * np.finfo(float).eps)
        return _ball(d - m, cap)

    def parts(m):
        x = _ball(d - m, cap)
        val = -float(np.sum(0.5 * (x - d) ** 2) + np.sum(x @ m))
        return x, val, -x.sum(axis=0)

    x, val, g = parts(mu)
    for _ in range(max_iter):
        if np.abs(g).max() <= 1e-15 * cap * len(d):
            break
        y = d - mu
        r = np.linalg.norm(y, axis=1)
        H = np.zeros((n, n))
        for yk, rk in zip(y, r):
            if rk <= cap:
                H += np.eye(n)
            else:
                u = yk / rk
                H += cap / rk * (np.eye(n) - np.outer(u, u))
        H += 1e-12 * max(np.trace(H), 1.0) * np.eye(n)
        step = np.linalg.solve(H, -g)
        t = 1.0
        while t > 1e-12:
            x2, val2, g2 = parts(mu + t * step)
            # near the root the dual value stalls at round-off; the residual still shrinks
            if val2 <= val + 1e-4 * t * float(g @ step) or np.abs(g2).max() < np.abs(g).max():
                break
            t *= 0.5
        else:
            break
        mu, x, val, g = mu + t * step, x2, val2, g2
    return x


def project_feasible(raw, T: float, L: float, eps_bd: float = DEFAULT_EPS_BD,
                     max_iter: int = 10_000, tol: float = 1e-12) -> PeriodicPath:
    """Dykstra projection of the increments onto {sum = 0} and {|d_k| <= (1-eps) L h}.

    Nodes are rebuilt from the projected increments with the mean of ``raw``.
    When Dykstra creeps (it can converge sublinearly) the limit is computed
    directly from the multiplier of the zero-sum constraint instead.
    """
    if not 0 < eps_bd < 1:
        raise ValueError("eps_bd must lie in (0, 1)")
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    N = raw.shape[0]
    if N < 4:
        raise ValueError("need at least 4 nodes")
    h = T / N
    cap = (1.0 - eps_bd) * L * h
    d = np.roll(raw, -1, axis=0) - raw
    if np.all(np.linalg.norm(d, axis=1) <= cap):
        return PeriodicPath(raw, T)

    x = d.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _ball(x + p, cap)
        p = x + p - y
        x_new = y + q
        x_new = x_new - x_new.mean(axis=0)
        q = y + q - x_new
        change = np.abs(x_new - x).max()
        x = x_new
        excess = np.linalg.norm(x, axis=1).max() - cap
        if change <= tol * cap and excess <= tol * cap:
            break
    else:
        # p holds the outward normal part removed by the clamp, so d - x - p ~ mu
        x = _dual_newton(d, cap, (d - x - p).mean(axis=0))
    # final radial clamp keeps the speed bound exact; mean drift is at round-off level
    x = _ball(x, cap)
    x = x - x.mean(axis=0)
    residual = max(np.linalg.norm(x, axis=1).max() - cap, np.abs(x.sum(axis=0)).max())
    if residual > 1e-10 * cap:
        raise ProjectionError("Dykstra projection did not converge", residual)
    return PeriodicPath(_reconstruct(x, raw.mean(axis=0)), T)


def random_feasible(N: int, T: float, L: float, amplitude: float, seed: int,
                    base=None, n: int = 1, modes: int = 4,
                    eps_bd: float = DEFAULT_EPS_BD) -> PeriodicPath:
    """Random smooth periodic path around ``base`` with speed below ``(1-eps) L``."""
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    base = np.zeros(n) if base is None else np.atleast_1d(np.asarray(base, dtype=float))
    n = base.size
    nodes = np.tile(base, (N, 1))
    if amplitude == 0:
        return PeriodicPath(nodes, T)
    rng = np.random.default_rng(seed)
    t = np.arange(N) / N
    k = np.arange(1, modes + 1)
    a = rng.standard_normal((modes, n)) / k[:, None]
    b = rng.standard_normal((modes, n)) / k[:, None]
    wave = np.cos(2 * np.pi * np.outer(t, k)) @ a + np.sin(2 * np.pi * np.outer(t, k)) @ b
    wave *= amplitude / max(np.abs(wave).max(), 1e-300)
    h = T / N
    speed = np.linalg.norm(np.roll(wave, -1, axis=0) - wave, axis=1).max() / h
    limit = 0.999 * (1.0 - eps_bd) * L
    if speed > limit:
        wave *= limit / speed
    return PeriodicPath(nodes + wave, T)


def path_distance(p: PeriodicPath, q: PeriodicPath) -> float:
    """Sup-norm over nodes after resampling onto the finer of the two grids."""
    if not np.isclose(p.T, q.T, rtol=1e-12, atol=0):
        raise ValueError(f"periods differ: {p.T} vs {q.T}")
    N = max(p.N, q.N)
    a = p.nodes if p.N == N else p.resample(N).nodes
    b = q.nodes if q.N == N else q.resample(N).nodes
    return float(np.linalg.norm(a - b, axis=1).max())
