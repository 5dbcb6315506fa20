"""Best-of-both-worlds online learning with directed feedback graphs (EXP3.G++)."""

from .env import AdversarialEnv, StochasticEnv, generate_graph, pseudo_regret
from .estimator import GapEstimator, GapSnapshot, gap_snapshot
from .explore import ExplorationPlan, build_exploration_set, exploration_rates, observation_lower_bound
from .graph import (
    CapacityError,
    FeedbackGraph,
    GraphError,
    GraphParseError,
    GraphStats,
    graph_stats,
    independence_number,
    is_dominating,
    load_graph,
    mas,
    strong_independence_number,
    strong_subgraph,
)
from .harness import ExperimentSpec, load_spec, run_experiment, spec_from_obj
from .learner import Exp3, Exp3GPP, LearnerConfig, compute_q, eta_schedule

__version__ = "0.1.0"
