"""Local objectives, their gradients and synthetic data.

Both objective classes expose the same surface to the optimizers: a node
count ``n``, parameter dimension ``dim``, per-node ``local_value`` /
``local_grad``, the stacked ``grads(X)`` and the global average ``value`` /
``grad``. Logistic parameters are flattened as ``theta = [w, b]``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

SOFTPLUS_BRANCH = 30.0


def softplus(t):
    """``log(1 + exp(t))`` without overflow; returns ``t`` itself past the branch."""
    t = np.asarray(t, dtype=float)
    return np.where(t > SOFTPLUS_BRANCH, t, np.log1p(np.exp(np.minimum(t, SOFTPLUS_BRANCH))))


def sigmoid(t):
    # exp of a nonpositive argument only, so neither branch overflows or cancels
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class LogisticDataset:
    features: list[np.ndarray]
    labels: list[np.ndarray]
    lam: float = 0.1
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must cover the same nodes")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        for X, y in zip(self.features, self.labels):
            if X.shape[0] != y.shape[0] or X.shape[0] < 1:
                raise ValueError("every node needs at least one sample with a label")
            if not np.all(np.isin(y, (-1, 1))):
                raise ValueError("labels must be +1 or -1")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return self.features[0].shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "label"] + [f"f_{j}" for j in range(self.d)])
        for i, (X, y) in enumerate(zip(self.features, self.labels)):
            for row, lab in zip(X, y):
                w.writerow([i, int(lab)] + [f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, lam: float = 0.1) -> "LogisticDataset":
        rows = list(csv.reader(io.StringIO(text)))
        body = np.array(rows[1:], dtype=float)
        nodes = body[:, 0].astype(int)
        feats, labs = [], []
        for i in range(nodes.max() + 1):
            sel = body[nodes == i]
            feats.append(sel[:, 2:])
            labs.append(sel[:, 1].astype(int))
        return cls(feats, labs, lam)


def _penalty(w, b, lam):
    return lam * (b * b / (1.0 + b * b) + np.sum(w * w / (1.0 + w * w)))


def logistic_value(i: int, w, b: float, data: LogisticDataset) -> float:
    X, y = data.features[i], data.labels[i]
    margins = X @ w + b
    return float(np.mean(softplus(-y * margins)) + _penalty(np.asarray(w), b, data.lam))


def logistic_grad(i: int, w, b: float, data: LogisticDataset) -> tuple[np.ndarray, float]:
    X, y = data.features[i], data.labels[i]
    w = np.asarray(w, dtype=float)
    coef = -y * sigmoid(-y * (X @ w + b)) / X.shape[0]
    gw = X.T @ coef + data.lam * 2.0 * w / (1.0 + w * w) ** 2
    gb = float(coef.sum() + data.lam * 2.0 * b / (1.0 + b * b) ** 2)
    return gw, gb


def gen_synthetic_logistic(n: int, S_total: int, d: int, sigma_h: float, seed: int,
                           lam: float = 0.1, bias: float | None = None) -> LogisticDataset:
    """Heterogeneous logistic data around a shared latent model.

    Features are standard normal. Shards are equal, with any remainder given
    one extra sample each on the first nodes. ``bias`` pins the global
    latent bias instead of drawing it.
    """
    if n < 1 or S_total < n:
        raise ValueError(f"need S_total >= n >= 1, got n={n}, S_total={S_total}")
    if sigma_h < 0:
        raise ValueError("sigma_h must be >= 0")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(d)
    b_star = float(rng.standard_normal()) if bias is None else float(bias)
    base, rem = divmod(S_total, n)
    sizes = [base + (1 if i < rem else 0) for i in range(n)]
    feats, labs, local = [], [], []
    for i in range(n):
        wi = w_star + sigma_h * rng.standard_normal(d)
        bi = b_star + sigma_h * rng.standard_normal()
        X = rng.standard_normal((sizes[i], d))
        p = sigmoid(X @ wi + bi)
        y = np.where(rng.random(sizes[i]) < p, 1, -1)
        feats.append(X)
        labs.append(y)
        local.append((wi, bi))
    meta = {"sigma_h": sigma_h, "seed": seed, "w_star": w_star, "b_star": b_star,
            "local": local, "shard_sizes": sizes, "remainder": rem}
    return LogisticDataset(feats, labs, lam, meta)


class Objective:
    """Average of ``n`` local functions over a shared parameter space."""

    n: int
    dim: int

    def local_value(self, i: int, x) -> float:
        raise NotImplementedError

    def local_grad(self, i: int, x) -> np.ndarray:
        raise NotImplementedError

    def grads(self, X) -> np.ndarray:
        """Row ``i`` is node ``i``'s gradient at its own parameter ``X[i]``."""
        return np.stack([self.local_grad(i, X[i]) for i in range(self.n)])

    def value(self, x) -> float:
        return float(np.mean([self.local_value(i, x) for i in range(self.n)]))

    def grad(self, x) -> np.ndarray:
        return np.mean([self.local_grad(i, x) for i in range(self.n)], axis=0)

    def lipschitz(self) -> float:
        raise NotImplementedError

    def initial_gap(self, x0) -> float:
        """Upper bound on ``max_i f_i(x0) - inf f_i``."""
        raise NotImplementedError


class LogisticObjective(Objective):
    """Logistic loss plus the bounded nonconvex penalty, over ``theta = [w, b]``."""

    def __init__(self, data: LogisticDataset):
        self.data = data
        self.n = data.n
        self.dim = data.d + 1
        # bias folded in as a constant feature for the vectorized paths
        self._aug = [np.hstack([X, np.ones((X.shape[0], 1))]) for X in data.features]

    def local_value(self, i, x):
        x = np.asarray(x, dtype=float)
        return logistic_value(i, x[:-1], x[-1], self.data)

    def local_grad(self, i, x):
        x = np.asarray(x, dtype=float)
        gw, gb = logistic_grad(i, x[:-1], x[-1], self.data)
        return np.append(gw, gb)

    def grads(self, X):
        X = np.asarray(X, dtype=float)
        lam = self.data.lam
        out = np.empty_like(X)
        for i, (A, y) in enumerate(zip(self._aug, self.data.labels)):
            coef = -y * sigmoid(-y * (A @ X[i])) / A.shape[0]
            out[i] = A.T @ coef
        return out + lam * 2.0 * X / (1.0 + X * X) ** 2

    def lipschitz(self):
        # data term: sigma' <= 1/4; each penalty coordinate has |second derivative| <= 2
        data_l = max(np.linalg.norm(A, 2) ** 2 / A.shape[0] for A in self._aug) / 4.0
        return float(data_l + 2.0 * self.data.lam)

    def initial_gap(self, x0):
        # both terms are nonnegative, so inf f_i >= 0
        return max(self.local_value(i, x0) for i in range(self.n))


class QuadraticObjective(Objective):
    """``f_i(x) = 0.5 ||x - c_i||^2``; the global minimizer is ``mean(c)``."""

    def __init__(self, targets):
        self.targets = np.atleast_2d(np.asarray(targets, dtype=float))
        self.n, self.dim = self.targets.shape

    @property
    def minimizer(self) -> np.ndarray:
        return self.targets.mean(axis=0)

    def local_value(self, i, x):
        r = np.asarray(x, dtype=float) - self.targets[i]
        return 0.5 * float(r @ r)

    def local_grad(self, i, x):
        return np.asarray(x, dtype=float) - self.targets[i]

    def grads(self, X):
        return np.asarray(X, dtype=float) - self.targets

    def lipschitz(self):
        return 1.0

    def initial_gap(self, x0):
        return max(self.local_value(i, x0) for i in range(self.n))


def quadratic_value_grad(obj: QuadraticObjective, i: int, x) -> tuple[float, np.ndarray]:
    return obj.local_value(i, x), obj.local_grad(i, x)


def finite_diff_check(value_fn: Callable[[np.ndarray], float],
                      grad_fn: Callable[[np.ndarray], np.ndarray],
                      point: Sequence[float], h: float = 1e-6) -> float:
    """Max over coordinates of ``|fd - grad| / max(1, |grad|)`` with central differences."""
    x = np.array(point, dtype=float)
    g = np.asarray(grad_fn(x), dtype=float)
    worst = 0.0
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd = (value_fn(x + e) - value_fn(x - e)) / (2.0 * h)
        worst = max(worst, abs(fd - g[j]) / max(1.0, abs(g[j])))
    return worst
