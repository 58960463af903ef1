"""Max-min URLLC-rate precoding for cell-free massive MIMO.

Modules
-------
config        scenario parameters and YAML loading
scenario      AP grid, user drops, path loss and Rayleigh channels
rates         SINR, Shannon and finite-blocklength rates
surrogates    per-iteration concave minorants of the rate
socp          primal-dual interior-point solver for second-order cone programs
subproblem    cone form of the per-iteration max-min problems
pfa           centralized path-following algorithm
decentralized clustered variant
mmse          MMSE baseline and complexity counts
harness       Monte-Carlo experiments, sweeps and report files
"""

from .config import ConfigError, ScenarioConfig, load_config
from .decentralized import ClusterPartition, assemble, partition_aps, run_cluster, run_decentralized, virtual_sinr
from .harness import RateReport, emit, load_report, percentile, run_experiment, sweep_clusters, sweep_n, sweep_t
from .mmse import flop_report, mmse_precoding
from .pfa import InitializationFailed, PfaTrace, initialize, run
from .rates import RateVector, evaluate_rates, q_function, q_inverse, shannon_rate, sinr, sinr_all, urllc_rate
from .scenario import draw_scenario, trial_rng
from .subproblem import ConeProgram, SolveResult, build_init_subproblem, build_subproblem, solve
from .surrogates import SurrogateState, freeze_state

__version__ = "0.1.0"
