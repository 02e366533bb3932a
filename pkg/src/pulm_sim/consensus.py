"""Average consensus over row-stochastic broadcast networks.

PULM (pull with memory) alternates a gossip step with a local adjust step:
each node tracks its row ``w_i`` of the distribution matrix and, after
mixing, pins its own coordinate back to ``1/n`` while subtracting the same
correction times its initial vector from its estimate. Plain gossip and
push-sum are kept alongside as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import CertificationError, ProtocolViolation, UndefinedMetric
from .mixing import (MixingCertificate, MixingMatrix, certify_eta_B,
                     column_stochastic_from_intended, row_stochastic_from_graph)
from .records import COLLAPSED, OK, MetricRecord
from .topology import Network

WEIGHT_FLOOR = 1e-300


# -- metrics -----------------------------------------------------------------

def consensus_error(z, x) -> float:
    """``||z - E_n x||_F / ||x - E_n x||_F``."""
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    if z.shape != x.shape:
        raise ValueError(f"shape mismatch {z.shape} vs {x.shape}")
    xbar = x.mean(axis=0, keepdims=True)
    denom = np.linalg.norm(x - xbar)
    if denom <= 1e-15 * max(1.0, np.linalg.norm(x)):
        raise UndefinedMetric("initial vectors are already consensual")
    return float(np.linalg.norm(z - xbar) / denom)


def w_error(W) -> float:
    """Frobenius distance from the distribution matrix to ``E_n``."""
    W = W.W if isinstance(W, DistributionMatrix) else np.asarray(W, dtype=float)
    return float(np.linalg.norm(W - 1.0 / W.shape[0]))


def max_deviation(W) -> float:
    W = W.W if isinstance(W, DistributionMatrix) else np.asarray(W, dtype=float)
    return float(np.max(np.abs(W - 1.0 / W.shape[0])))


def geometric_bound(cert: MixingCertificate, n: int, K: int) -> float:
    """Envelope ``n/(1-eta) * (1-eta)^(K/B)`` on ``||W^(K) - E_n||_F``."""
    q = 1.0 - cert.eta
    return n / q * q ** (K / cert.B)


# -- matrix level ------------------------------------------------------------

@dataclass(frozen=True)
class DistributionMatrix:
    """Coefficients mapping the initial vectors to the current node states."""

    W: np.ndarray
    round: int = 0

    @classmethod
    def identity(cls, n: int) -> "DistributionMatrix":
        return cls(np.eye(n), 0)


def matrix_level_step(W: DistributionMatrix, A: MixingMatrix) -> DistributionMatrix:
    """Gossip ``A W`` then reset the diagonal to ``1/n``."""
    if not A.is_row:
        raise ValueError("matrix_level_step expects a row-stochastic matrix")
    if A.n != W.W.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.n}x{A.n}, W is {W.W.shape}")
    nxt = A.entries @ W.W
    np.fill_diagonal(nxt, 1.0 / A.n)
    return DistributionMatrix(nxt, W.round + 1)


# -- node level --------------------------------------------------------------

@dataclass(frozen=True)
class PulmNodeState:
    id: int
    x0: np.ndarray
    z: np.ndarray
    w: np.ndarray

    @classmethod
    def initial(cls, id: int, x0, n: int) -> "PulmNodeState":
        x0 = np.asarray(x0, dtype=float)
        w = np.zeros(n)
        w[id] = 1.0
        return cls(id=id, x0=x0, z=x0.copy(), w=w)


def pulm_step(state: PulmNodeState, inbox: Mapping[int, tuple[np.ndarray, np.ndarray]],
              a_row) -> PulmNodeState:
    """One gossip + adjust step at a single node.

    ``inbox`` maps each sender (self included) to its ``(z_j, w_j)``;
    ``a_row`` is this node's row of the mixing matrix.
    """
    a_row = np.asarray(a_row, dtype=float)
    support = np.flatnonzero(a_row)
    missing = [int(j) for j in support if int(j) not in inbox]
    if missing:
        raise ProtocolViolation(f"node {state.id} weights senders {missing} absent from its inbox")
    if np.any(a_row < 0):
        raise ValueError("mixing weights must be nonnegative")
    n = state.w.shape[0]
    z_half = sum(a_row[j] * inbox[j][0] for j in support)
    w_half = sum(a_row[j] * inbox[j][1] for j in support)
    d = w_half[state.id] - 1.0 / n
    z = z_half - d * state.x0
    w = w_half.copy()
    w[state.id] = 1.0 / n
    return PulmNodeState(id=state.id, x0=state.x0, z=z, w=w)


def pulm_nodewise(x, matrices: Sequence[MixingMatrix]) -> list[list[PulmNodeState]]:
    """Node-by-node PULM over a fixed matrix sequence; returns the state history.

    Every node reads the frozen snapshot of the previous round.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    states = [PulmNodeState.initial(i, x[i], n) for i in range(n)]
    history = [states]
    for A in matrices:
        snapshot = {s.id: (s.z, s.w) for s in states}
        nxt = []
        for i, s in enumerate(states):
            row = A.entries[i]
            inbox = {int(j): snapshot[int(j)] for j in np.flatnonzero(row)}
            nxt.append(pulm_step(s, inbox, row))
        states = nxt
        history.append(states)
    return history


# -- network-level runners ---------------------------------------------------

@dataclass
class ConsensusResult:
    z: np.ndarray
    trace: list[MetricRecord]
    W: DistributionMatrix | None = None
    weights: np.ndarray | None = None
    matrices: list[MixingMatrix] | None = None
    metadata: dict = field(default_factory=dict)

    def series(self, name: str) -> np.ndarray:
        return np.array([r.get(name) for r in self.trace])


def pulm_apply(x, matrices: Sequence[MixingMatrix]):
    """Vectorized PULM over a given matrix sequence; yields ``(k, z, W)`` for k = 0..K."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    z, W = x.copy(), np.eye(n)
    idx = np.arange(n)
    yield 0, z, W
    for k, A in enumerate(matrices, start=1):
        z = A.entries @ z
        W = A.entries @ W
        d = W[idx, idx] - 1.0 / n
        z -= d[:, None] * x
        W[idx, idx] = 1.0 / n
        yield k, z, W


def _safe_error(z, x):
    try:
        return consensus_error(z, x)
    except UndefinedMetric:
        return float("nan")


def _row_matrices(network: Network, K: int) -> list[MixingMatrix]:
    return [row_stochastic_from_graph(network.effective(k)) for k in range(K)]


def _attach_certificate(result: ConsensusResult, matrices, n):
    hint = len(matrices) // n
    if hint < 1:
        result.metadata["certificate"] = None
        result.metadata["certification"] = "too few rounds to certify"
        return
    try:
        result.metadata["certificate"] = certify_eta_B(matrices, hint)
        result.metadata["certification"] = "ok"
    except CertificationError as exc:
        result.metadata["certificate"] = None
        result.metadata["certification"] = f"failed: {exc}"


def pulm_run(x, network: Network, K: int, *, certify: bool = False,
             keep_matrices: bool = False) -> ConsensusResult:
    """Synchronous PULM; receivers normalize over the post-loss graph."""
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    matrices = _row_matrices(network, K)
    trace = []
    for k, z, W in pulm_apply(x, matrices):
        trace.append(MetricRecord(k, {"consensus_error": _safe_error(z, x), "w_error": w_error(W)}))
    result = ConsensusResult(z=z, trace=trace, W=DistributionMatrix(W, K))
    if keep_matrices or certify:
        result.matrices = matrices
    if certify:
        _attach_certificate(result, matrices, x.shape[0])
    return result


def plain_gossip_run(x, network: Network, K: int) -> ConsensusResult:
    """``z <- A z`` only; reaches a Perron-weighted consensus, not the average."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    trace = []
    for k, z in plain_gossip_apply(x, _row_matrices(network, K)):
        trace.append(MetricRecord(k, {"consensus_error": _safe_error(z, x)}))
    return ConsensusResult(z=z, trace=trace)


def plain_gossip_apply(x, matrices: Sequence[MixingMatrix]):
    """``z <- A z`` over a given matrix sequence; yields ``(k, z)`` for k = 0..K."""
    z = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    yield 0, z
    for k, A in enumerate(matrices, start=1):
        z = A.entries @ z
        yield k, z


def push_sum_run(x, network: Network, K: int) -> ConsensusResult:
    """Push-sum with sender-side normalization over the intended graph.

    Lost messages simply vanish, so total weight is conserved only when the
    channel is lossless.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    v = x.copy()
    weight = np.ones(n)
    status = OK

    def record(k):
        ratio = v / weight[:, None]
        return MetricRecord(k, {"consensus_error": _safe_error(ratio, x),
                                "weight_sum": float(weight.sum())}, status=status)

    trace = [record(0)]
    collapsed: list[int] = []
    for k in range(K):
        intended, effective = network.round(k)
        B = column_stochastic_from_intended(intended, effective).entries
        v = B @ v
        weight = B @ weight
        low = np.flatnonzero(weight < WEIGHT_FLOOR)
        if low.size:
            status = COLLAPSED
            collapsed = sorted(set(collapsed) | set(int(i) for i in low))
            trace.append(record(k + 1))
            break
        trace.append(record(k + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = v / weight[:, None]
    res = ConsensusResult(z=ratio, trace=trace, weights=weight)
    res.metadata["status"] = status
    if collapsed:
        res.metadata["collapsed_nodes"] = collapsed
    return res
