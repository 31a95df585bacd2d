"""Desk-scale federated learning with carbon-aware client selection."""

from .clp import ClpConfig, clp_ended, participant_count
from .config import ExperimentConfig, from_dict, load_config
from .cost import CostModel, assign_costs, load_traces, round_emissions
from .engine import (
    ExperimentResult,
    compare_policies,
    convergence_round,
    cost_to_accuracy,
    rounds_to_accuracy,
    run_experiment,
)
from .model import HyperParams, ModelParams, evaluate, fed_avg, init_params, local_train
from .partition import LabeledDataset, PartitionSpec, class_histogram, generate_synthetic, partition_non_iid
from .selection import ClientStats, SelectionConfig, utility, utility_per_cost

__version__ = "0.1.0"
