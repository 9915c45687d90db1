"""Fluid utility-maximization oracle.

The per-slot feasible regions are replaced by their mean-capacity
time-sharing polytopes.  Decision variables are

* ``g[k]`` in ``[0, c_k]``: content device k downloads for itself;
* ``tau[a] >= 0`` with ``sum(tau) <= 1``: the time share of local
  activation ``a = (n, J)``, which moves content from n to every k in J at
  rate ``b_a`` (the link rate in unicast, the weakest member in broadcast).

Device k receives ``y_k = g_k + sum_a tau_a b_a [k in J_a]``, and the
relay stream from n to k cannot exceed what n can pull from the cellular
link, ``sum_{a: n_a = n, k in J_a} tau_a b_a <= c_n``.  The concave
objective ``sum_k log(1 + y_k)`` is maximized by projected gradient ascent
with step ``eta0 / sqrt(t)``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import quadprog

from .errors import OracleError
from .model import LocalMode, SimConfig

BROADCAST_ORACLE_LIMIT = 6
Activation = Tuple[int, Tuple[int, ...]]


@dataclass(frozen=True)
class FluidInstance:
    """Mean capacities of one cooperation group.

    ``local[n][k]`` is the mean rate from n to k; diagonal entries are ignored.
    """

    n_devices: int
    cellular: Tuple[float, ...]
    local: Tuple[Tuple[float, ...], ...]
    mode: LocalMode = LocalMode.UNICAST

    def __post_init__(self):
        n = self.n_devices
        if n < 1:
            raise OracleError(f"n_devices must be at least 1, got {n}")
        if len(self.cellular) != n or len(self.local) != n or any(len(r) != n for r in self.local):
            raise OracleError(f"capacity shapes do not match n_devices={n}")
        values = list(self.cellular) + [v for r in self.local for v in r]
        if any(not math.isfinite(v) or v < 0.0 for v in values):
            raise OracleError("capacities must be finite and nonnegative")

    @classmethod
    def uniform(cls, n_devices: int, cellular: float, local: float,
                mode: LocalMode = LocalMode.UNICAST) -> "FluidInstance":
        loc = tuple(tuple(0.0 if a == b else float(local) for b in range(n_devices))
                    for a in range(n_devices))
        return cls(n_devices, (float(cellular),) * n_devices, loc, mode)

    @classmethod
    def from_config(cls, config: SimConfig) -> "FluidInstance":
        return cls.uniform(config.n_devices, config.cellular.mean, config.local.mean,
                           config.local_mode)

    @classmethod
    def from_dict(cls, data: dict) -> "FluidInstance":
        try:
            n = int(data["n_devices"])
            mode = LocalMode(data.get("mode", "Unicast"))
            cell = data["cellular"]
            loc = data["local"]
        except (KeyError, TypeError, ValueError) as exc:
            raise OracleError(f"malformed instance: {exc}") from exc
        if isinstance(cell, (int, float)):
            cell = [cell] * n
        if isinstance(loc, (int, float)):
            loc = [[0.0 if a == b else loc for b in range(n)] for a in range(n)]
        return cls(n, tuple(float(v) for v in cell),
                   tuple(tuple(float(v) for v in row) for row in loc), mode)

    def to_dict(self) -> dict:
        return {"n_devices": self.n_devices, "mode": self.mode.value,
                "cellular": list(self.cellular), "local": [list(r) for r in self.local]}


def load_instance(path) -> FluidInstance:
    """Read an instance file (JSON with n_devices, mode, cellular, local)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OracleError(f"cannot read instance file {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise OracleError(f"instance file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise OracleError(f"instance file {path} must hold a JSON object")
    return FluidInstance.from_dict(data)


@dataclass(frozen=True)
class OracleSolution:
    y_star: Tuple[float, ...]
    g_star: Tuple[float, ...]
    relay_star: Tuple[Tuple[float, ...], ...]
    time_shares: Dict[Activation, float]
    utility_star: float
    max_violation: float
    kkt_residual: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "y_star": list(self.y_star),
            "g_star": list(self.g_star),
            "relay_star": [list(r) for r in self.relay_star],
            "time_shares": [{"transmitter": n, "receivers": list(j), "share": s}
                            for (n, j), s in self.time_shares.items() if s > 0.0],
            "utility_star": self.utility_star,
            "max_violation": self.max_violation,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
        }


def project_capped_simplex(v: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{x : 0 <= x <= upper, sum(x) <= 1}``.

    The sum ``phi(theta) = sum(clip(v - theta, 0, upper))`` is piecewise linear
    and nonincreasing, so the multiplier is found exactly between breakpoints.
    """
    x = np.clip(v, 0.0, upper)
    if x.sum() <= 1.0:
        return x
    bps = np.unique(np.concatenate([v, v - upper]))
    phis = np.array([np.clip(v - t, 0.0, upper).sum() for t in bps])
    i = int(np.searchsorted(-phis, -1.0))
    t1 = bps[i]
    t0 = bps[i - 1] if i > 0 else t1 - 1.0
    f0 = np.clip(v - t0, 0.0, upper).sum()
    f1 = phis[i]
    theta = t1 if f0 == f1 else t0 + (f0 - 1.0) * (t1 - t0) / (f0 - f1)
    return np.clip(v - max(theta, 0.0), 0.0, upper)


class FluidProblem:
    """The concave program over ``z = (g, tau)`` for one instance."""

    def __init__(self, instance: FluidInstance):
        if instance.mode is LocalMode.BROADCAST and instance.n_devices > BROADCAST_ORACLE_LIMIT:
            raise OracleError(
                f"broadcast oracle supports at most {BROADCAST_ORACLE_LIMIT} devices, "
                f"got {instance.n_devices}"
            )
        self.instance = instance
        n = instance.n_devices
        self.n = n
        self.cap = np.array(instance.cellular, dtype=float)
        self.activations: List[Activation] = []
        rates = []
        sizes = [1] if instance.mode is LocalMode.UNICAST else range(1, n)
        for tx in range(n):
            others = [k for k in range(n) if k != tx]
            for r in sizes:
                for group in itertools.combinations(others, r):
                    self.activations.append((tx, group))
                    rates.append(min(instance.local[tx][k] for k in group))
        self.rates = np.array(rates, dtype=float)
        a = len(self.activations)
        self.n_vars = n + a
        # reach[k, a]: rate activation a delivers to device k.
        self.reach = np.zeros((n, a))
        # pair_rows[(tx, k)]: per-activation rate on the relay stream tx -> k.
        self.pair_rows: Dict[Tuple[int, int], np.ndarray] = {}
        for idx, (tx, group) in enumerate(self.activations):
            for k in group:
                self.reach[k, idx] = self.rates[idx]
                row = self.pair_rows.setdefault((tx, k), np.zeros(a))
                row[idx] = self.rates[idx]
        self.upper = np.ones(a)
        self._qp: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
        if instance.mode is LocalMode.UNICAST:
            # One activation per stream, so the relay cap is a box bound.
            for idx, (tx, _) in enumerate(self.activations):
                b = self.rates[idx]
                self.upper[idx] = min(1.0, self.cap[tx] / b) if b > 0.0 else 0.0
        else:
            for idx in range(a):
                if self.rates[idx] <= 0.0:
                    self.upper[idx] = 0.0
            binding = [(pair, row) for pair, row in sorted(self.pair_rows.items())
                       if row.max() > self.cap[pair[0]]]
            if binding:
                self._qp = self._projection_qp([row for _, row in binding],
                                               [self.cap[pair[0]] for pair, _ in binding])

    def _projection_qp(self, rows: List[np.ndarray], caps: List[float]
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Constraints ``C.T @ x >= b`` of the share projection, zero-rate shares dropped."""
        live = np.flatnonzero(self.upper > 0.0)
        m = live.size
        parts = [np.eye(m), -np.eye(m), -np.ones((1, m)), -np.array(rows)[:, live]]
        bounds = [np.zeros(m), -self.upper[live], -np.ones(1), -np.array(caps)]
        return live, np.vstack(parts).T.copy(), np.concatenate(bounds)

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return z[:self.n], z[self.n:]

    def rates_of(self, z: np.ndarray) -> np.ndarray:
        g, tau = self.split(z)
        return g + self.reach @ tau

    def objective(self, z: np.ndarray) -> float:
        return float(np.sum(np.log1p(self.rates_of(z))))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        marginal = 1.0 / (1.0 + self.rates_of(z))
        return np.concatenate([marginal, self.reach.T @ marginal])

    def relay(self, z: np.ndarray) -> np.ndarray:
        _, tau = self.split(z)
        out = np.zeros((self.n, self.n))
        for (tx, k), row in self.pair_rows.items():
            out[tx, k] = row @ tau
        return out

    def _project_tau(self, v: np.ndarray) -> np.ndarray:
        if self._qp is None:
            return project_capped_simplex(v, self.upper)
        live, constraints, bounds = self._qp
        out = np.zeros_like(v)
        if live.size:
            eye = np.eye(live.size)
            out[live] = quadprog.solve_qp(eye, v[live], constraints, bounds)[0]
        # The QP is solved to machine precision; clip the last ulp of drift.
        return np.clip(out, 0.0, self.upper)

    def project(self, z: np.ndarray) -> np.ndarray:
        g, tau = self.split(z)
        return np.concatenate([np.clip(g, 0.0, self.cap), self._project_tau(tau)])

    def kkt_residual(self, z: np.ndarray) -> float:
        """Size of the projected-gradient map; zero exactly at an optimum."""
        return float(np.abs(z - self.project(z + self.gradient(z))).max())

    def violation(self, z: np.ndarray) -> float:
        """Largest violation of any constraint of the program at ``z``."""
        g, tau = self.split(z)
        worst = [0.0, -g.min(initial=0.0), (g - self.cap).max(initial=0.0)]
        if tau.size:
            worst += [-tau.min(), tau.sum() - 1.0, (tau - 1.0).max()]
            worst.append(float(tau[self.rates <= 0.0].max(initial=0.0)))
            rel = self.relay(z)
            for (tx, k) in self.pair_rows:
                worst.append(rel[tx, k] - self.cap[tx])
        return float(max(worst))


def solve_fluid(instance: FluidInstance, eta0: float = 1.0, max_iter: int = 100_000,
                tol: float = 1e-6) -> OracleSolution:
    """Maximize total log utility over the fluid region of ``instance``.

    Starts from the zero vector, so the result is deterministic.
    """
    problem = FluidProblem(instance)
    z = np.zeros(problem.n_vars)
    residual = problem.kkt_residual(z)
    it = 0
    while residual >= tol and it < max_iter:
        it += 1
        z = problem.project(z + (eta0 / math.sqrt(it)) * problem.gradient(z))
        residual = problem.kkt_residual(z)
    y = problem.rates_of(z)
    g, tau = problem.split(z)
    shares = {act: float(s) for act, s in zip(problem.activations, tau)}
    return OracleSolution(
        y_star=tuple(float(v) for v in y),
        g_star=tuple(float(v) for v in g),
        relay_star=tuple(tuple(float(v) for v in row) for row in problem.relay(z)),
        time_shares=shares,
        utility_star=float(np.sum(np.log1p(y))),
        max_violation=max(problem.violation(z), 0.0),
        kkt_residual=residual,
        iterations=it,
    )


def symmetric_optimum(n_devices: int, cellular: float, local: float, mode: LocalMode) -> float:
    """Closed-form per-device optimum when every capacity is equal.

    Each device downloads ``c`` directly.  The local channel carries ``w`` per
    unit time to one peer (unicast) or ``N - 1`` peers (broadcast), shared
    evenly, and each relay stream is capped by the sender's ``c``.
    """
    n, c, w = n_devices, cellular, local
    if n == 1:
        return c
    spread = w / n if mode is LocalMode.UNICAST else w * (n - 1) / n
    return c + min(spread, (n - 1) * c)


def utility_gap(summary, solution: OracleSolution) -> float:
    """Relative shortfall of a run's utility from the fluid optimum."""
    rates = list(summary.mean_rate_per_device)
    if len(rates) != len(solution.y_star):
        raise OracleError(
            f"dimension mismatch: summary has {len(rates)} devices, "
            f"solution has {len(solution.y_star)}"
        )
    achieved = sum(math.log1p(r) for r in rates)
    best = solution.utility_star
    if best == 0.0:
        return 0.0 if achieved == 0.0 else -math.inf
    return (best - achieved) / abs(best)


def achieved_utility(rates: Sequence[float]) -> float:
    return sum(math.log1p(r) for r in rates)
