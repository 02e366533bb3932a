"""Average consensus and decentralized gradient descent over time-varying
broadcast networks, using row-stochastic mixing only."""

from .consensus import (DistributionMatrix, PulmNodeState, consensus_error, matrix_level_step,
                        plain_gossip_apply, plain_gossip_run, pulm_apply, pulm_run, pulm_step, push_sum_run, w_error)
from .mixing import (MixingCertificate, MixingMatrix, Stochasticity, certify_eta_B,
                     column_stochastic_from_intended, perron_vector, product_window,
                     rank_one_gap, row_stochastic_from_graph)
from .objectives import (LogisticDataset, LogisticObjective, QuadraticObjective,
                         finite_diff_check, gen_synthetic_logistic)
from .optimization import (ConstantRounds, LogSchedule, OptimizerConfig, centralized_gd_run,
                           param_consensus_error, pulm_dgd_run, push_diging_run, rate_check,
                           rk_schedule)
from .topology import (DirectedGraph, LatentDropout, Network, PacketLossModel, RandomBroadcast,
                       Static, apply_packet_loss, gen_latent_strongly_connected,
                       is_strongly_connected, realize_round, verify_B_window)

__version__ = "0.1.0"
