"""Experiment orchestration: build models from a config, run, write CSV."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..consensus import plain_gossip_run, pulm_apply, pulm_run, push_sum_run, w_error
from ..exceptions import CalibrationError, CertificationError
from ..mixing import MixingCertificate, certify_eta_B, row_stochastic_from_graph
from ..objectives import LogisticObjective, QuadraticObjective, gen_synthetic_logistic
from ..optimization import (ConstantRounds, LogSchedule, OptimizerConfig, centralized_gd_run,
                            pulm_dgd_run, push_diging_run)
from ..topology import (DirectedGraph, LatentDropout, Network, PacketLossModel, RandomBroadcast,
                        Static, gen_latent_strongly_connected)
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFY = 3

CONSENSUS_COLUMNS = ("round", "consensus_error", "w_error", "weight_sum", "status")
OPTIMIZE_COLUMNS = ("outer_k", "inner_total", "loss_mean", "grad_norm_sq",
                    "param_consensus_error", "status")
CERTIFY_COLUMNS = ("B", "eta", "window_checked", "rounds", "status")
CALIBRATE_COLUMNS = ("window", "log_slope", "log_intercept", "C_W", "beta_W", "residual", "status")

# w_error values below this are treated as exact consensus and left out of fits
CALIBRATION_FLOOR = 1e-13
BETA_FLOOR = 1e-6

# independent sub-streams of the master seed for data that is not per-round
_INIT_STREAM = 7
_TARGET_STREAM = 11


def build_graph(cfg: ExperimentConfig) -> DirectedGraph:
    n = cfg.topology_n
    if cfg.topology_graph == "ring":
        return DirectedGraph.ring(n)
    if cfg.topology_graph == "complete":
        return DirectedGraph.complete(n)
    return gen_latent_strongly_connected(n, cfg.topology_sparsity, cfg.seed)


def build_network(cfg: ExperimentConfig) -> Network:
    if cfg.topology_kind == "random_broadcast":
        topo = RandomBroadcast(cfg.topology_n, cfg.topology_p_c, cfg.seed)
    elif cfg.topology_kind == "latent_dropout":
        topo = LatentDropout(build_graph(cfg), cfg.topology_p_d, cfg.seed)
    else:
        topo = Static(build_graph(cfg), cfg.seed)
    loss = PacketLossModel(cfg.topology_p_t, cfg.seed) if cfg.topology_p_t > 0 else None
    return Network(topo, loss)


def build_objective(cfg: ExperimentConfig):
    if cfg.objective_kind == "logistic":
        data = gen_synthetic_logistic(cfg.topology_n, cfg.objective_samples,
                                      cfg.objective_features, cfg.objective_sigma_h,
                                      cfg.seed, lam=cfg.objective_lambda)
        return LogisticObjective(data)
    rng = np.random.default_rng([cfg.seed, _TARGET_STREAM])
    return QuadraticObjective(rng.standard_normal((cfg.topology_n, cfg.objective_features)))


def initial_vectors(cfg: ExperimentConfig) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, _INIT_STREAM])
    return rng.standard_normal((cfg.topology_n, cfg.consensus_d))


def optimizer_config(cfg: ExperimentConfig) -> OptimizerConfig:
    if cfg.optimizer_rk_mode == "constant":
        mode = ConstantRounds(cfg.optimizer_R)
    else:
        mode = LogSchedule(cfg.optimizer_C_W, cfg.optimizer_beta_W)
    return OptimizerConfig(cfg.optimizer_gamma, cfg.optimizer_K, mode, cfg.seed,
                           cfg.optimizer_anchor)


# -- calibration -------------------------------------------------------------

@dataclass
class Calibration:
    C_W: float
    beta_W: float
    residual: float
    slopes: list[float] = field(default_factory=list)
    intercepts: list[float] = field(default_factory=list)
    errors: np.ndarray | None = None

    def envelope(self, r) -> np.ndarray:
        return self.C_W * self.beta_W ** np.asarray(r, dtype=float)


def calibrate_network(network: Network, windows: int = 10, rounds: int = 50) -> Calibration:
    """Fit ``w_error(r) <= C_W beta_W^r`` over fresh PULM restarts.

    Window ``m`` restarts the distribution matrix at the identity and runs
    rounds ``m*rounds .. (m+1)*rounds - 1``. A least-squares line through
    ``log w_error`` per window gives a slope; ``beta_W`` is the slowest one.
    ``C_W`` is then the smallest constant for which ``C_W beta_W^r``
    dominates every observation, and ``residual`` is how far (in log units)
    it sits above the best fitted line.

    The whole calibration prefix must first pass ``certify_eta_B``; an
    uncertifiable sequence raises :class:`CalibrationError`.
    """
    n = network.n
    mats = [row_stochastic_from_graph(network.effective(t)) for t in range(windows * rounds)]
    hint = max(1, len(mats) // n)
    try:
        certify_eta_B(mats, hint)
    except (CertificationError, ValueError) as exc:
        raise CalibrationError(f"calibration prefix is not certifiable: {exc}") from None
    errs = np.empty((windows, rounds + 1))
    dummy = np.zeros((n, 1))
    for m in range(windows):
        for r, _, W in pulm_apply(dummy, mats[m * rounds:(m + 1) * rounds]):
            errs[m, r] = w_error(W)
    slopes, intercepts = [], []
    rr = np.arange(rounds + 1, dtype=float)
    for m in range(windows):
        keep = errs[m] > CALIBRATION_FLOOR
        if keep.sum() >= 2:
            slope, icpt = np.polyfit(rr[keep], np.log(errs[m, keep]), 1)
        else:
            slope, icpt = -math.inf, math.log(max(errs[m, 0], CALIBRATION_FLOOR))
        slopes.append(float(slope))
        intercepts.append(float(icpt))
    top = max(slopes)
    if top >= 0:
        raise CalibrationError(f"w_error does not decay (largest log-slope {top:.3g})")
    beta = max(math.exp(top), BETA_FLOOR)
    keep = errs > CALIBRATION_FLOOR
    lifted = np.log(errs[keep]) - np.broadcast_to(rr, errs.shape)[keep] * math.log(beta)
    logC = float(lifted.max())
    residual = max(0.0, logC - max(intercepts))
    return Calibration(math.exp(logC), beta, residual, slopes, intercepts, errs)


def certify_network(network: Network, window: int, K: int = 0) -> tuple[MixingCertificate, int]:
    K = K or network.n * window
    mats = [row_stochastic_from_graph(network.effective(k)) for k in range(K)]
    return certify_eta_B(mats, window), K


# -- CSV ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return path


# -- tasks -------------------------------------------------------------------

def _consensus_rows(cfg):
    network = build_network(cfg)
    x = initial_vectors(cfg)
    K = cfg.consensus_K
    if cfg.algorithm == "pulm":
        res = pulm_run(x, network, K)
    elif cfg.algorithm == "plain_gossip":
        res = plain_gossip_run(x, network, K)
    else:
        res = push_sum_run(x, network, K)
    rows = []
    for rec in res.trace:
        rows.append({"round": rec.k, "consensus_error": rec.values.get("consensus_error"),
                     "w_error": rec.values.get("w_error"),
                     "weight_sum": rec.values.get("weight_sum"), "status": rec.status})
    return rows


def _optimize_rows(cfg):
    network = build_network(cfg)
    obj = build_objective(cfg)
    x0 = np.zeros(obj.dim)
    ocfg = optimizer_config(cfg)
    if cfg.algorithm == "pulm_dgd":
        traj = pulm_dgd_run(obj, network, ocfg, x0)
    elif cfg.algorithm == "push_diging":
        traj = push_diging_run(obj, network, ocfg, x0)
    else:
        traj = centralized_gd_run(obj, ocfg.gamma, ocfg.K, x0)
    rows = []
    for rec in traj.records:
        rows.append({"outer_k": rec.k, "inner_total": rec.t, **rec.values, "status": rec.status})
    return rows


def run_experiment(cfg: ExperimentConfig, out=None) -> int:
    """Run the configured task and write its CSV. Returns the process exit code."""
    out = out or cfg.output
    if cfg.task == "consensus":
        write_csv(out, CONSENSUS_COLUMNS, _consensus_rows(cfg))
        return EXIT_OK
    if cfg.task == "optimize":
        write_csv(out, OPTIMIZE_COLUMNS, _optimize_rows(cfg))
        return EXIT_OK
    network = build_network(cfg)
    if cfg.task == "certify":
        try:
            cert, K = certify_network(network, cfg.certify_window, cfg.certify_K)
        except CertificationError as exc:
            logger.error("certification failed: %s", exc)
            write_csv(out, CERTIFY_COLUMNS, [{"rounds": cfg.certify_K or network.n * cfg.certify_window,
                                              "status": "certification-failed"}])
            return EXIT_CERTIFY
        print(f"B = {cert.B}, eta = {cert.eta:.6g}, windows checked = {cert.window_checked}")
        write_csv(out, CERTIFY_COLUMNS, [{"B": cert.B, "eta": cert.eta,
                                          "window_checked": cert.window_checked,
                                          "rounds": K, "status": "ok"}])
        return EXIT_OK
    try:
        cal = calibrate_network(network, cfg.calibrate_windows, cfg.calibrate_rounds)
    except CalibrationError as exc:
        logger.error("calibration failed: %s", exc)
        write_csv(out, CALIBRATE_COLUMNS, [{"window": "envelope", "status": "calibration-failed"}])
        return EXIT_CERTIFY
    rows = [{"window": m, "log_slope": s, "log_intercept": c, "status": "ok"}
            for m, (s, c) in enumerate(zip(cal.slopes, cal.intercepts))]
    rows.append({"window": "envelope", "C_W": cal.C_W, "beta_W": cal.beta_W,
                 "residual": cal.residual, "status": "ok"})
    print(f"C_W = {cal.C_W:.6g}, beta_W = {cal.beta_W:.6g}, residual = {cal.residual:.3g}")
    write_csv(out, CALIBRATE_COLUMNS, rows)
    return EXIT_OK
