"""Decentralized gradient descent over row-stochastic broadcast networks.

``pulm_dgd_run`` is the double loop: every outer iteration takes a local
gradient step, then runs ``R_k`` PULM rounds on the combined state. The
adjust step's anchor is configurable:

``scaled_gradient`` (default)
    subtract ``d_i * (-gamma g_i)``. The inner state stays equal to
    ``Phi x - gamma W g``: parameters are plainly gossiped (consensus is
    preserved by row-stochastic products) while the gradient step is
    PULM-averaged.
``gradient``
    subtract ``d_i * g_i``, the unscaled anchor. Its limit carries a
    ``(1 + gamma)``-weighted Perron bias on the gradients.
``seeded_state``
    subtract ``d_i * (x_i - gamma g_i)``, i.e. plain PULM on the seeded
    state. Before ``W`` settles its rows do not sum to one, so this
    rescales consensual parameters.

Push-DIGing and centralized gradient descent are kept as references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mixing import column_stochastic_from_intended, row_stochastic_from_graph
from .objectives import Objective
from .records import COLLAPSED, DIVERGED, OK, MetricRecord
from .topology import Network

ANCHORS = ("gradient", "seeded_state", "scaled_gradient")
WEIGHT_FLOOR = 1e-300


@dataclass(frozen=True)
class ConstantRounds:
    R: int

    def __post_init__(self):
        if self.R < 1:
            raise ValueError(f"R must be >= 1, got {self.R}")


@dataclass(frozen=True)
class LogSchedule:
    """``R_k = ceil(max(ln C_W, ln k) / (1 - beta_W))``, at least 1."""

    C_W: float
    beta_W: float

    def __post_init__(self):
        if self.C_W <= 0:
            raise ValueError(f"C_W must be > 0, got {self.C_W}")
        if not 0.0 <= self.beta_W < 1.0:
            raise ValueError(f"beta_W must lie in [0, 1), got {self.beta_W}")


@dataclass(frozen=True)
class OptimizerConfig:
    gamma: float
    K: int
    rk_mode: ConstantRounds | LogSchedule = ConstantRounds(1)
    seed: int = 0
    anchor: str = "scaled_gradient"

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")


@dataclass(frozen=True)
class SmoothnessEstimate:
    L: float
    Delta: float

    def __post_init__(self):
        if self.L <= 0 or self.Delta < 0:
            raise ValueError("need L > 0 and Delta >= 0")


def estimate_smoothness(obj: Objective, x0) -> SmoothnessEstimate:
    return SmoothnessEstimate(L=obj.lipschitz(), Delta=obj.initial_gap(np.asarray(x0, dtype=float)))


def rk_schedule(k: int, cfg: OptimizerConfig) -> int:
    mode = cfg.rk_mode
    if isinstance(mode, ConstantRounds):
        return mode.R
    top = max(math.log(mode.C_W), math.log(max(k, 1)))
    return max(1, math.ceil(top / (1.0 - mode.beta_W)))


def max_step_size(n: int, C_W: float, L: float) -> float:
    """Largest step size covered by the nonconvex rate guarantee."""
    return 1.0 / (24.0 * n * C_W ** 2 * L)


def param_consensus_error(X) -> float:
    """RMS over coordinates of the across-node variance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    var = np.mean((X - X.mean(axis=0)) ** 2, axis=0)
    return float(np.sqrt(np.mean(var ** 2)))


@dataclass
class Trajectory:
    """Per-outer-iteration trace of an optimizer run.

    ``xbar[k]`` is the network average at outer iteration ``k``; records
    carry the same index.
    """

    x: np.ndarray
    records: list[MetricRecord]
    xbar: list[np.ndarray]
    status: str = OK
    rounds: list[int] = field(default_factory=list)

    @property
    def inner_total(self) -> int:
        return int(sum(self.rounds))

    def series(self, name: str) -> np.ndarray:
        return np.array([r.get(name) for r in self.records])


def _record(obj: Objective, X, k, t, status=OK):
    # diverging runs are flagged by status; overflow here is expected, not an error
    with np.errstate(all="ignore"):
        xbar = X.mean(axis=0)
        g = obj.grad(xbar)
        values = {"loss_mean": obj.value(xbar), "grad_norm_sq": float(g @ g),
                  "param_consensus_error": param_consensus_error(X)}
    return MetricRecord(k, values, t=t, status=status), xbar


def pulm_dgd_run(obj: Objective, network: Network, cfg: OptimizerConfig, x0,
                 observer=None) -> Trajectory:
    """PULM-DGD from a common start ``x0``.

    Communication round ``t`` (counted across all inner loops) uses the
    network's round-``t`` graph. ``observer(k, r, Z, W)`` is called after
    every inner round when given.
    """
    n = network.n
    if obj.n != n:
        raise ValueError(f"objective has {obj.n} nodes, network has {n}")
    X = np.tile(np.asarray(x0, dtype=float), (n, 1))
    idx = np.arange(n)
    t = 0
    rec, xb = _record(obj, X, 0, 0)
    traj = Trajectory(x=X, records=[rec], xbar=[xb])
    for k in range(cfg.K):
        with np.errstate(all="ignore"):
            G = obj.grads(X)
        if not np.all(np.isfinite(G)):
            traj.status = DIVERGED
            traj.records[-1].status = DIVERGED
            break
        with np.errstate(all="ignore"):
            Z = X - cfg.gamma * G
            if cfg.anchor == "gradient":
                anchor = G
            elif cfg.anchor == "seeded_state":
                anchor = Z.copy()
            else:
                anchor = -cfg.gamma * G
            W = np.eye(n)
            R = rk_schedule(k, cfg)
            for r in range(R):
                A = row_stochastic_from_graph(network.effective(t)).entries
                t += 1
                Z = A @ Z
                W = A @ W
                d = W[idx, idx] - 1.0 / n
                Z -= d[:, None] * anchor
                W[idx, idx] = 1.0 / n
                if observer is not None:
                    observer(k, r + 1, Z, W)
        X = Z
        traj.rounds.append(R)
        status = OK if np.all(np.isfinite(X)) else DIVERGED
        rec, xb = _record(obj, X, k + 1, t, status)
        traj.records.append(rec)
        traj.xbar.append(xb)
        traj.x = X
        if status != OK:
            traj.status = status
            break
    return traj


def push_diging_run(obj: Objective, network: Network, cfg: OptimizerConfig, x0) -> Trajectory:
    """Push-DIGing with step ``cfg.gamma``, one communication round per iteration.

    Column weights come from the intended graph; messages lost in transit
    are dropped, which breaks the sum invariants the method relies on.
    """
    n = network.n
    alpha = cfg.gamma
    u = np.tile(np.asarray(x0, dtype=float), (n, 1))
    v = np.ones(n)
    z = u / v[:, None]
    g = obj.grads(z)
    y = g.copy()
    rec, xb = _record(obj, z, 0, 0)
    traj = Trajectory(x=z, records=[rec], xbar=[xb])
    for k in range(cfg.K):
        intended, effective = network.round(k)
        C = column_stochastic_from_intended(intended, effective).entries
        with np.errstate(all="ignore"):
            u = C @ (u - alpha * y)
            v = C @ v
            status = OK
            if np.any(v < WEIGHT_FLOOR):
                status = COLLAPSED
            z = u / v[:, None]
            g_new = obj.grads(z)
            y = C @ y + g_new - g
        g = g_new
        if status == OK and not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            status = DIVERGED
        traj.rounds.append(1)
        rec, xb = _record(obj, z, k + 1, k + 1, status)
        traj.records.append(rec)
        traj.xbar.append(xb)
        traj.x = z
        if status != OK:
            traj.status = status
            break
    return traj


def centralized_gd_run(obj: Objective, gamma: float, K: int, x0) -> Trajectory:
    """``x <- x - gamma * grad f(x)`` on the global average objective."""
    x = np.asarray(x0, dtype=float).copy()
    X = x[None, :]
    rec, _ = _record(obj, X, 0, 0)
    traj = Trajectory(x=X, records=[rec], xbar=[x.copy()])
    for k in range(K):
        x = x - gamma * obj.grad(x)
        X = x[None, :]
        status = OK if np.all(np.isfinite(x)) else DIVERGED
        rec, _ = _record(obj, X, k + 1, k + 1, status)
        traj.records.append(rec)
        traj.xbar.append(x.copy())
        traj.x = X
        if status != OK:
            traj.status = status
            break
    return traj


@dataclass
class RateReport:
    applicable: bool
    reason: str = ""
    holds: bool | None = None
    running_mean: np.ndarray | None = None
    bound: np.ndarray | None = None
    total_rounds: int = 0
    rounds_bound: float = float("nan")
    rounds_ok: bool | None = None


def rate_check(traj: Trajectory, est: SmoothnessEstimate, cfg: OptimizerConfig,
               n: int) -> RateReport:
    """Check the prefix bound ``mean_{k<K} ||grad f(xbar_k)||^2 <= 18 Delta / (gamma K)``.

    Only applies when the run used a log schedule whose constants admit
    ``cfg.gamma``; otherwise the report says why and asserts nothing.
    """
    mode = cfg.rk_mode
    if cfg.gamma <= 0:
        return RateReport(False, "gamma must be positive")
    if not isinstance(mode, LogSchedule):
        return RateReport(False, "bound not applicable: R_k schedule carries no (C_W, beta_W)")
    limit = max_step_size(n, mode.C_W, est.L)
    if cfg.gamma > limit * (1 + 1e-12):
        return RateReport(False, f"bound not applicable: gamma {cfg.gamma:.3g} > {limit:.3g}")
    if traj.status != OK:
        return RateReport(False, f"bound not applicable: run status {traj.status}")
    g2 = traj.series("grad_norm_sq")[:-1]
    K = np.arange(1, g2.size + 1)
    running = np.cumsum(g2) / K
    bound = 18.0 * est.Delta / (cfg.gamma * K)
    Kt = len(traj.rounds)
    rb = max(Kt * math.log(max(Kt, 1)), Kt * math.log(mode.C_W)) / (1.0 - mode.beta_W) + Kt
    return RateReport(True, "", bool(np.all(running <= bound)), running, bound,
                      traj.inner_total, rb, traj.inner_total <= rb)
