"""Solver-driven sensitive-sample search for ReLU network integrity checking."""

__version__ = "0.1.0"

from .attack import PerturbSpec, Trigger, attack_success_rate, stamp_trigger, synthetic_perturb, trojan_retrain
from .data import Dataset, gen_synthetic, load_csv, save_csv
from .encode import (
    DeltaMode,
    QuerySpec,
    SmtScript,
    emit_exact_literal,
    encode_logit_probe,
    encode_network,
    encode_query,
    modeled_sensitivity,
    validate_query,
)
from .errors import SensqError
from .mlp import (
    ForwardTrace,
    Layer,
    Mlp,
    Precision,
    forward,
    forward_exact,
    logit_inverse,
    random_mlp,
    sensitivity,
    sigmoid,
    sip,
)
from .profiling import DBiasProfile, Direction, FixPlan, NodeStatus, compute_dbias, fix_order, initial_fixplan
from .report import scaling_report, write_run_report
from .search import Outcome, SearchOutcome, greedy_search, naive_search, verify_sample
from .solver import SolveResult, SolveStatus, SolverConfig, parse_value, solve
from .train import Metrics, TrainConfig, evaluate, train
