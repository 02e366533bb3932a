"""Flat ``key = value`` experiment configs with dotted keys.

Example::

    task = consensus
    algorithm = pulm
    seed = 3
    topology.kind = random_broadcast
    topology.n = 20
    topology.p_c = 0.2
    consensus.K = 200
    consensus.d = 1024

``#`` starts a comment. Unknown keys are rejected so a typo never falls
back to a default silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..exceptions import ConfigError

TASKS = ("consensus", "optimize", "certify", "calibrate")
ALGORITHMS = {
    "consensus": ("pulm", "plain_gossip", "push_sum"),
    "optimize": ("pulm_dgd", "push_diging", "centralized_gd"),
    "certify": ("pulm",),
    "calibrate": ("pulm",),
}
DEFAULT_ALGORITHM = {"consensus": "pulm", "optimize": "pulm_dgd", "certify": "pulm",
                     "calibrate": "pulm"}
TOPOLOGY_KINDS = ("random_broadcast", "latent_dropout", "static")
GRAPHS = ("ring", "random", "complete")
OBJECTIVES = ("logistic", "quadratic")
RK_MODES = ("constant", "log")
ANCHORS = ("scaled_gradient", "gradient", "seeded_state")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "consensus"
    algorithm: str = "pulm"
    seed: int = 0
    output: str = "trace.csv"

    topology_kind: str = "random_broadcast"
    topology_n: int = 20
    topology_p_c: float = 0.2
    topology_p_d: float = 0.0
    topology_p_t: float = 0.0
    topology_graph: str = "random"
    topology_sparsity: float = 0.3

    consensus_K: int = 200
    consensus_d: int = 16

    objective_kind: str = "logistic"
    objective_samples: int = 1000
    objective_features: int = 30
    objective_sigma_h: float = 0.1
    objective_lambda: float = 0.1

    optimizer_gamma: float = 0.1
    optimizer_K: int = 100
    optimizer_rk_mode: str = "constant"
    optimizer_R: int = 10
    optimizer_C_W: float = 1.0
    optimizer_beta_W: float = 0.5
    optimizer_anchor: str = "scaled_gradient"

    certify_window: int = 1
    certify_K: int = 0

    calibrate_windows: int = 10
    calibrate_rounds: int = 50

    source: dict = field(default_factory=dict, compare=False)

    def validate(self) -> "ExperimentConfig":
        _choice("task", self.task, TASKS)
        _choice("algorithm", self.algorithm, ALGORITHMS[self.task])
        if self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        _choice("topology.kind", self.topology_kind, TOPOLOGY_KINDS)
        _choice("topology.graph", self.topology_graph, GRAPHS)
        _choice("objective.kind", self.objective_kind, OBJECTIVES)
        _choice("optimizer.rk_mode", self.optimizer_rk_mode, RK_MODES)
        _choice("optimizer.anchor", self.optimizer_anchor, ANCHORS)
        for key in ("topology.p_c", "topology.p_d", "topology.sparsity"):
            _unit(key, getattr(self, _attr(key)))
        _unit("topology.p_t", self.topology_p_t)
        if self.topology_p_t >= 1.0:
            raise ConfigError("topology.p_t", "must be < 1")
        for key in ("topology.n", "consensus.d", "objective.features", "optimizer.R",
                    "certify.window", "calibrate.windows", "calibrate.rounds"):
            if getattr(self, _attr(key)) < 1:
                raise ConfigError(key, "must be >= 1")
        for key in ("consensus.K", "optimizer.K", "certify.K"):
            if getattr(self, _attr(key)) < 0:
                raise ConfigError(key, "must be >= 0")
        if self.objective_samples < self.topology_n:
            raise ConfigError("objective.samples", "need at least one sample per node")
        if self.objective_sigma_h < 0:
            raise ConfigError("objective.sigma_h", "must be >= 0")
        if self.objective_lambda < 0:
            raise ConfigError("objective.lambda", "must be >= 0")
        if self.optimizer_gamma < 0:
            raise ConfigError("optimizer.gamma", "must be >= 0")
        if self.optimizer_C_W <= 0:
            raise ConfigError("optimizer.C_W", "must be > 0")
        if not 0.0 <= self.optimizer_beta_W < 1.0:
            raise ConfigError("optimizer.beta_W", "must lie in [0, 1)")
        return self

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw).validate()


def _attr(key: str) -> str:
    return key.replace(".", "_")


def _choice(key, value, allowed):
    if value not in allowed:
        raise ConfigError(key, f"{value!r} is not one of {', '.join(allowed)}")


def _unit(key, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError(key, f"{value} is outside [0, 1]")


_TYPES = {f.name: f.type for f in fields(ExperimentConfig) if f.name != "source"}


def parse_config(text: str, task: str | None = None) -> ExperimentConfig:
    """Parse config text; ``task`` (from the CLI subcommand) must agree with the file."""
    values: dict = {}
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        attr = _attr(key)
        if attr not in _TYPES:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "given twice")
        typ = _TYPES[attr]
        try:
            if typ == "int":
                values[attr] = int(value)
            elif typ == "float":
                values[attr] = float(value)
            else:
                values[attr] = value
        except ValueError:
            raise ConfigError(key, f"cannot parse {value!r} as {typ}") from None
        raw[key] = value
    if task is not None:
        if values.get("task", task) != task:
            raise ConfigError("task", f"config says {values['task']!r} but the subcommand is {task!r}")
        values["task"] = task
    if "algorithm" not in values:
        values["algorithm"] = DEFAULT_ALGORITHM.get(values.get("task", "consensus"), "pulm")
    return ExperimentConfig(**values, source=raw).validate()


def load_config(path, task: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text, task)
