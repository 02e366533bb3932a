"""Time-varying directed graphs and the channel faults applied to them.

Adjacency is stored receiver-major: ``adj[i, j]`` is true when node ``j``
transmits to node ``i`` in the round. That matches the index order of the
mixing matrices built from the graph, where row ``i`` holds the weights
node ``i`` applies to what it pulled.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# stream tags keep topology and loss draws independent under one master seed
_TOPOLOGY_STREAM = 0
_LOSS_STREAM = 1
_LATENT_STREAM = 2


def round_rng(seed: int, k: int, stream: int) -> np.random.Generator:
    """Generator for one (seed, stream, round) cell; rounds never share state."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(k)]))


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """One round's communication topology. Self-loops are always present."""

    adj: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a = np.array(self.adj, dtype=bool, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        np.fill_diagonal(a, True)
        a.setflags(write=False)
        object.__setattr__(self, "adj", a)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], **metadata) -> "DirectedGraph":
        """Build from ``(j, i)`` pairs meaning ``j`` transmits to ``i``."""
        a = np.zeros((n, n), dtype=bool)
        for j, i in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({j} -> {i}) references a node outside [0, {n})")
            a[i, j] = True
        return cls(a, dict(metadata))

    @classmethod
    def self_loops(cls, n: int) -> "DirectedGraph":
        return cls(np.eye(n, dtype=bool))

    @classmethod
    def complete(cls, n: int) -> "DirectedGraph":
        return cls(np.ones((n, n), dtype=bool))

    @classmethod
    def ring(cls, n: int) -> "DirectedGraph":
        """Directed ring ``i -> i+1 (mod n)``."""
        return cls.from_edges(n, ((i, (i + 1) % n) for i in range(n)))

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def edges(self) -> set[tuple[int, int]]:
        recv, send = np.nonzero(self.adj)
        return {(int(j), int(i)) for i, j in zip(recv, send)}

    def in_neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i])

    def out_neighbors(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, j])

    @property
    def in_degree(self) -> np.ndarray:
        return self.adj.sum(axis=1)

    @property
    def out_degree(self) -> np.ndarray:
        return self.adj.sum(axis=0)

    @property
    def density(self) -> float:
        """Non-self-loop edges over ``n(n-1)``; 0 for a single node."""
        n = self.n
        if n < 2:
            return 0.0
        return float(self.adj.sum() - n) / (n * (n - 1))

    def union(self, other: "DirectedGraph") -> "DirectedGraph":
        return DirectedGraph(self.adj | other.adj)

    def is_subgraph_of(self, other: "DirectedGraph") -> bool:
        return self.n == other.n and not np.any(self.adj & ~other.adj)

    def to_edgelist(self) -> str:
        """Debug dump, one ``j i`` pair per line, sorted."""
        return "".join(f"{j} {i}\n" for j, i in sorted(self.edges))

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.adj.shape == other.adj.shape and bool(np.array_equal(self.adj, other.adj))

    def __hash__(self):
        return hash((self.n, self.adj.tobytes()))

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, edges={int(self.adj.sum())})"


def _reach(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u] & ~seen):
            seen[v] = True
            queue.append(v)
    return seen


def is_strongly_connected(g: DirectedGraph) -> bool:
    """Forward and backward BFS from node 0 must both reach every node."""
    if g.n <= 1:
        return True
    # adj[i, j] is j -> i, so the forward successor table is adj.T
    fwd = g.adj.T
    return bool(_reach(fwd, 0).all() and _reach(g.adj, 0).all())


def verify_B_window(seq: Sequence[DirectedGraph], window: int) -> bool:
    """True iff every ``window``-round union of edge sets is strongly connected."""
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if len(seq) < window:
        raise ValueError(f"sequence of length {len(seq)} shorter than window {window}")
    for k in range(len(seq) - window + 1):
        acc = seq[k].adj.copy()
        for g in seq[k + 1:k + window]:
            acc |= g.adj
        if not is_strongly_connected(DirectedGraph(acc)):
            return False
    return True


def gen_latent_strongly_connected(n: int, sparsity: float, seed: int) -> DirectedGraph:
    """Directed ring backbone plus random extra edges up to the target density.

    A sparsity below the ring's own density returns the bare ring and sets
    ``metadata["warning"]``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in [0, 1], got {sparsity}")
    if n == 1:
        return DirectedGraph.self_loops(1)
    ring = DirectedGraph.ring(n)
    ring_edges = int(ring.adj.sum()) - n
    target = int(round(sparsity * n * (n - 1)))
    if target < ring_edges:
        msg = (f"sparsity {sparsity} is below ring density {ring.density:.4g}; "
               f"returning the ring")
        logger.warning(msg)
        return DirectedGraph(ring.adj, {"warning": msg, "sparsity": sparsity})
    rng = round_rng(seed, 0, _LATENT_STREAM)
    candidates = np.flatnonzero(~ring.adj.ravel())
    extra = rng.choice(candidates, size=target - ring_edges, replace=False)
    a = ring.adj.copy()
    a.ravel()[extra] = True
    return DirectedGraph(a, {"sparsity": sparsity})


class TopologyModel:
    """Source of the intended graph for each round."""

    n: int
    seed: int = 0

    def realize(self, k: int) -> DirectedGraph:
        raise NotImplementedError


@dataclass(frozen=True)
class RandomBroadcast(TopologyModel):
    """Every ordered pair ``j -> i`` is present independently with probability ``p_c``."""

    n: int
    p_c: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_c <= 1.0:
            raise ValueError(f"p_c must lie in [0, 1], got {self.p_c}")

    def realize(self, k):
        u = round_rng(self.seed, k, _TOPOLOGY_STREAM).random((self.n, self.n))
        return DirectedGraph(u < self.p_c)


@dataclass(frozen=True)
class LatentDropout(TopologyModel):
    """Each latent edge disappears independently with probability ``p_d``."""

    latent: DirectedGraph
    p_d: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d must lie in [0, 1], got {self.p_d}")
        if not is_strongly_connected(self.latent):
            raise ValueError("latent graph must be strongly connected")

    @property
    def n(self):
        return self.latent.n

    def realize(self, k):
        u = round_rng(self.seed, k, _TOPOLOGY_STREAM).random((self.n, self.n))
        return DirectedGraph(self.latent.adj & (u >= self.p_d))


@dataclass(frozen=True)
class Static(TopologyModel):
    graph: DirectedGraph
    seed: int = 0

    @property
    def n(self):
        return self.graph.n

    def realize(self, k):
        return self.graph


def realize_round(model: TopologyModel, k: int) -> DirectedGraph:
    return model.realize(k)


@dataclass(frozen=True)
class PacketLossModel:
    """Post-send loss: each non-self edge is dropped with probability ``p_t``."""

    p_t: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_t < 1.0:
            raise ValueError(f"p_t must lie in [0, 1), got {self.p_t}")


def apply_packet_loss(intended: DirectedGraph, loss: PacketLossModel | None, k: int) -> DirectedGraph:
    """Effective reception graph for round ``k``; the sender's view is untouched."""
    if loss is None or loss.p_t == 0.0:
        return intended
    u = round_rng(loss.seed, k, _LOSS_STREAM).random((intended.n, intended.n))
    return DirectedGraph(intended.adj & (u >= loss.p_t))


@dataclass(frozen=True)
class Network:
    """A topology model plus an optional packet-loss channel."""

    topology: TopologyModel
    loss: PacketLossModel | None = None

    @property
    def n(self) -> int:
        return self.topology.n

    def intended(self, k: int) -> DirectedGraph:
        return self.topology.realize(k)

    def effective(self, k: int) -> DirectedGraph:
        return apply_packet_loss(self.intended(k), self.loss, k)

    def round(self, k: int) -> tuple[DirectedGraph, DirectedGraph]:
        g = self.intended(k)
        return g, apply_packet_loss(g, self.loss, k)
