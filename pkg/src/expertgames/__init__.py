"""Online learning in episodic zero-sum matrix games built from expert ensembles."""

__version__ = "0.1.0"

from .agents import (
    BestResponderOpponent,
    Exp3Agent,
    FixedOpponent,
    FixedStrategyAgent,
    OFULinMatAgent,
    SaddleOracleOpponent,
    UniformOpponent,
)
from .environment import (
    Environment,
    EnvironmentConfig,
    EpisodeTrace,
    ExpertEnsemble,
    ExpertSpec,
    ThetaSpec,
    emit_reward,
)
from .estimator import EstimatorConfig, RidgeEstimator
from .game import (
    GameMatrix,
    MixedStrategy,
    SaddlePoint,
    best_response_value,
    expected_payoff,
    solve_saddle_point,
)
from .harness import (
    ExperimentConfig,
    LearnerSpec,
    OpponentSpec,
    default_paper_config,
    emit_plot_data,
    load_config,
    replay_manifest,
    run_experiment,
)
from .metrics import RegretReport, build_report

__all__ = [
    "BestResponderOpponent",
    "Environment",
    "EnvironmentConfig",
    "EpisodeTrace",
    "EstimatorConfig",
    "Exp3Agent",
    "ExpertEnsemble",
    "ExpertSpec",
    "ExperimentConfig",
    "FixedOpponent",
    "FixedStrategyAgent",
    "GameMatrix",
    "LearnerSpec",
    "MixedStrategy",
    "OFULinMatAgent",
    "OpponentSpec",
    "RegretReport",
    "RidgeEstimator",
    "SaddleOracleOpponent",
    "SaddlePoint",
    "ThetaSpec",
    "UniformOpponent",
    "best_response_value",
    "build_report",
    "default_paper_config",
    "emit_plot_data",
    "emit_reward",
    "expected_payoff",
    "load_config",
    "replay_manifest",
    "run_experiment",
    "solve_saddle_point",
]
