"""Trace rows shared by the consensus and optimization runners."""

from __future__ import annotations

from dataclasses import dataclass, field

OK = "ok"
DIVERGED = "diverged"
COLLAPSED = "numerical-collapse"


@dataclass
class MetricRecord:
    """One row of a run's metric trace.

    ``k`` is the round (outer iteration for optimizers); ``t`` is the
    cumulative communication-round count when it differs from ``k``.
    """

    k: int
    values: dict[str, float] = field(default_factory=dict)
    t: int | None = None
    status: str = OK

    def get(self, name, default=float("nan")):
        return self.values.get(name, default)
