"""Slotted-time uplink simulator with AoI tracking and bandwidth schedulers."""

from .env import (
    ConfigError,
    InvalidActionError,
    Schedule,
    SimConfig,
    StepResult,
    UeState,
    UplinkEnv,
    node_utility,
    slot_reward,
)
from .harness import (
    ExperimentConfig,
    EpisodeMetrics,
    MetricsReport,
    run_episode,
    run_sweep,
)
from .ppo import (
    PpoHyperparams,
    PpoScheduler,
    load_checkpoint,
    save_checkpoint,
    train_ppo,
)
from .schedulers import (
    GreedyOracle,
    OracleSizeError,
    ProportionalFair,
    RandomScheduler,
    RoundRobin,
    greedy_oracle_decide,
    make_scheduler,
    proportional_fair_decide,
    round_robin_decide,
)
from .traffic import ArrivalSpec, RateAssignment, assign_rates, sample_arrivals

__version__ = "0.1.0"

__all__ = [
    "ArrivalSpec",
    "ConfigError",
    "EpisodeMetrics",
    "ExperimentConfig",
    "GreedyOracle",
    "InvalidActionError",
    "MetricsReport",
    "OracleSizeError",
    "PpoHyperparams",
    "PpoScheduler",
    "ProportionalFair",
    "RandomScheduler",
    "RateAssignment",
    "RoundRobin",
    "Schedule",
    "SimConfig",
    "StepResult",
    "UeState",
    "UplinkEnv",
    "assign_rates",
    "greedy_oracle_decide",
    "load_checkpoint",
    "make_scheduler",
    "node_utility",
    "proportional_fair_decide",
    "round_robin_decide",
    "run_episode",
    "run_sweep",
    "sample_arrivals",
    "save_checkpoint",
    "slot_reward",
    "train_ppo",
]
