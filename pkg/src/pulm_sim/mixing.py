"""Mixing matrices built from graphs, and diagnostics on their products."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import CertificationError, NotPrimitiveError
from .topology import DirectedGraph

STOCHASTIC_TOL = 1e-12


class Stochasticity(enum.Enum):
    ROW = "row"
    COLUMN = "column"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Dense nonnegative ``n x n`` matrix tagged with the sums it preserves."""

    entries: np.ndarray
    stochasticity: Stochasticity = Stochasticity.NONE

    def __post_init__(self):
        a = np.array(self.entries, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"mixing matrix must be square, got shape {a.shape}")
        if np.any(a < 0):
            raise ValueError("mixing matrix has negative entries")
        if self.stochasticity is Stochasticity.ROW:
            _check_sums(a.sum(axis=1), "row")
        elif self.stochasticity is Stochasticity.COLUMN:
            _check_sums(a.sum(axis=0), "column")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_row(self) -> bool:
        return self.stochasticity is Stochasticity.ROW

    def compatible_with(self, g: DirectedGraph) -> bool:
        return bool(np.array_equal(self.entries > 0, g.adj))

    def to_text(self) -> str:
        """Row-major decimal dump, 17 significant digits."""
        return "".join(" ".join(f"{v:.17g}" for v in row) + "\n" for row in self.entries)

    @classmethod
    def from_text(cls, text: str, stochasticity=Stochasticity.NONE) -> "MixingMatrix":
        rows = [[float(t) for t in line.split()] for line in text.splitlines() if line.strip()]
        return cls(np.array(rows), stochasticity)


def _check_sums(sums, what):
    bad = np.abs(sums - 1.0) > STOCHASTIC_TOL
    if np.any(bad):
        raise ValueError(f"{what} sums deviate from 1: {sums[bad]}")


def row_stochastic_from_graph(g: DirectedGraph) -> MixingMatrix:
    """Uniform ``1/d_in`` weights over what each receiver actually pulled."""
    a = g.adj / g.in_degree[:, None]
    return MixingMatrix(a, Stochasticity.ROW)


def column_stochastic_from_intended(intended: DirectedGraph, effective: DirectedGraph) -> MixingMatrix:
    """Sender-normalized weights from the intended graph, with lost messages zeroed.

    Senders split over their intended out-degree because they cannot see
    losses, so a column only sums to 1 when nothing was dropped.
    """
    if not effective.is_subgraph_of(intended):
        raise ValueError("effective graph must be an edge subset of the intended graph")
    b = intended.adj / intended.out_degree[None, :]
    b = np.where(effective.adj, b, 0.0)
    tag = Stochasticity.COLUMN if effective == intended else Stochasticity.NONE
    return MixingMatrix(b, tag)


def product_window(seq: Sequence[MixingMatrix], k: int, B: int) -> MixingMatrix:
    """``A^(k+B-1) ... A^(k)``, consecutive left multiplication."""
    if k < 0 or B < 1 or k + B > len(seq):
        raise ValueError(f"window [{k}, {k + B}) outside sequence of length {len(seq)}")
    if not all(m.is_row for m in seq[k:k + B]):
        raise ValueError("product_window expects row-stochastic matrices")
    p = seq[k].entries
    for m in seq[k + 1:k + B]:
        p = m.entries @ p
    # rounding can push row sums a few ulps past the tag tolerance on long windows
    p = p / p.sum(axis=1, keepdims=True)
    return MixingMatrix(p, Stochasticity.ROW)


@dataclass(frozen=True)
class MixingCertificate:
    """Window length ``B`` and floor ``eta`` verified on an observed prefix."""

    B: int
    eta: float
    window_checked: int


def certify_eta_B(seq: Sequence[MixingMatrix], window_hint: int) -> MixingCertificate:
    """Smallest ``B <= n * window_hint`` with every ``B``-step product strictly positive.

    This is empirical: it certifies the observed prefix only.
    """
    if not seq:
        raise ValueError("empty matrix sequence")
    n = seq[0].n
    if window_hint < 1:
        raise ValueError(f"window hint must be positive, got {window_hint}")
    budget = n * window_hint
    if len(seq) < budget:
        raise ValueError(f"sequence length {len(seq)} < n * window_hint = {budget}")
    if not all(m.is_row for m in seq):
        raise ValueError("certification expects row-stochastic matrices")
    stack = np.stack([m.entries for m in seq])
    prods = stack.copy()
    for B in range(1, budget + 1):
        count = len(seq) - B + 1
        if B > 1:
            prods = np.matmul(stack[B - 1:B - 1 + count], prods[:count])
        window = prods[:count]
        if np.all(window > 0):
            return MixingCertificate(B=B, eta=float(window.min()), window_checked=count)
    raise CertificationError(
        f"no window length B <= {budget} yields entrywise positive products "
        f"over {len(seq)} rounds")


@dataclass(frozen=True)
class PerronVector:
    pi: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def is_primitive(a: MixingMatrix) -> bool:
    """Wielandt test: ``A^((n-1)^2 + 1) > 0``, by boolean repeated squaring."""
    p = a.entries > 0
    need = (a.n - 1) ** 2 + 1
    power = 1
    while power < need:
        p = (p.astype(np.int64) @ p.astype(np.int64)) > 0
        power *= 2
    # positivity persists once reached, so overshooting the exponent is harmless
    return bool(p.all())


def perron_vector(a: MixingMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> PerronVector:
    """Left eigenvector of a primitive row-stochastic matrix, by power iteration on ``A^T``."""
    if not a.is_row:
        raise ValueError("perron_vector expects a row-stochastic matrix")
    if not is_primitive(a):
        raise NotPrimitiveError("no power of the matrix is entrywise positive")
    at = a.entries.T
    pi = np.full(a.n, 1.0 / a.n)
    res = np.inf
    for it in range(1, max_iter + 1):
        nxt = at @ pi
        nxt /= nxt.sum()
        res = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if res <= tol:
            break
    else:
        raise NotPrimitiveError(f"power iteration residual {res:.3g} after {max_iter} iterations")
    # one more residual against the fixed-point equation itself
    res = float(np.max(np.abs(at @ pi - pi)))
    if np.any(pi <= 0):
        raise NotPrimitiveError("limit vector has non-positive entries")
    return PerronVector(pi=pi, iterations=it, residual=res)


def rank_one_gap(seq: Sequence[MixingMatrix]) -> np.ndarray:
    """Largest column spread (max - min) of each running product, t = 0..len(seq)."""
    if not seq:
        return np.array([1.0])
    n = seq[0].n
    p = np.eye(n)
    gaps = [_col_spread(p)]
    for m in seq:
        if not m.is_row:
            raise ValueError("rank_one_gap expects row-stochastic matrices")
        p = m.entries @ p
        gaps.append(_col_spread(p))
    return np.array(gaps)


def _col_spread(p):
    return float(np.max(p.max(axis=0) - p.min(axis=0)))


def gap_envelope(cert: MixingCertificate, blocks: int) -> float:
    """Geometric envelope ``((1+eta)/eta)(1-eta)^blocks`` on the column spread."""
    eta = cert.eta
    return (1.0 + eta) / eta * (1.0 - eta) ** blocks
