"""Episodic learners and opponent policies.

Every learner follows the same protocol driven by the simulator:

    begin_episode(ensemble) -> act(t) / observe(i, j, r) per round -> end_episode()

Learners never see the true payoff matrix, only rewards (and, for the
optimistic learner, the expert ensemble revealed each episode). Opponents are
episode-level policies that may read the true game; they expose the mixed
strategy they play so the simulator can compute expectation-form metrics.
"""

from __future__ import annotations

import math

import numpy as np

from .estimator import EstimatorConfig, RidgeEstimator
from .game import MixedStrategy, solve_saddle_point


class AgentProtocolError(RuntimeError):
    """Raised when the episodic begin/act/observe/end contract is violated."""


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


class OFULinMatAgent:
    """Optimistic episodic learner for games that mix revealed expert games.

    At each episode boundary it refits the ridge estimate of the mixing
    weights, inflates every payoff entry by the confidence-scaled exploration
    bonus of that entry's expert readings, solves the optimistic game's
    saddle point, and commits to the resulting row strategy for the whole
    episode. Rewards are buffered during the episode and absorbed into the
    estimator at the end.
    """

    def __init__(self, n_actions: int, config: EstimatorConfig, seed=None):
        self.n_actions = n_actions
        self.estimator = RidgeEstimator(config)
        self.rng = _rng(seed)
        self.current_strategy: MixedStrategy | None = None
        self.optimistic_matrix: np.ndarray | None = None
        self.optimistic_value: float | None = None
        self.planned_theta: np.ndarray | None = None
        self.planned_beta: float | None = None
        self.cap_active = False
        self.cap_episodes = 0
        self._ensemble = None
        self._buffer_features: list[np.ndarray] = []
        self._buffer_rewards: list[float] = []

    @property
    def last_strategy(self) -> np.ndarray | None:
        return None if self.current_strategy is None else self.current_strategy.probs

    def begin_episode(self, ensemble) -> None:
        cfg = self.estimator.config
        if ensemble.n_experts != cfg.n_experts:
            raise ValueError(
                f"ensemble has {ensemble.n_experts} experts, estimator expects {cfg.n_experts}"
            )
        if ensemble.rows != self.n_actions:
            raise ValueError("ensemble row count does not match the agent's action set")
        est = self.estimator
        theta = est.point_estimate()
        beta = est.beta_radius()
        feats = ensemble.feature_matrix()  # (n_experts, rows*cols)
        mean = theta @ feats
        optimistic = mean + math.sqrt(beta) * est.ellipsoid_norms(feats)
        self.cap_active = est.confidence_set_escapes_ball()
        if self.cap_active:
            # Fall back to the norm-ball payoff cap on every entry.
            cap = mean + cfg.param_bound * np.linalg.norm(feats, axis=0)
            optimistic = np.minimum(optimistic, cap)
            self.cap_episodes += 1
        matrix = optimistic.reshape(ensemble.rows, ensemble.cols)
        saddle = solve_saddle_point(matrix)
        self.current_strategy = saddle.row_strategy
        self.optimistic_matrix = matrix
        self.optimistic_value = saddle.value
        self.planned_theta = theta
        self.planned_beta = beta
        self._ensemble = ensemble
        self._buffer_features.clear()
        self._buffer_rewards.clear()

    def act(self, t: int) -> int:
        if self.current_strategy is None:
            raise AgentProtocolError("act() called before begin_episode()")
        return self.current_strategy.sample(self.rng)

    def observe(self, own_action: int, opponent_action: int, reward: float) -> None:
        if self._ensemble is None:
            raise AgentProtocolError("observe() called before begin_episode()")
        self._buffer_features.append(self._ensemble.features(own_action, opponent_action))
        self._buffer_rewards.append(reward)

    def end_episode(self) -> None:
        if self._buffer_features:
            self.estimator.absorb_batch(
                np.array(self._buffer_features), np.array(self._buffer_rewards)
            )
        self._buffer_features.clear()
        self._buffer_rewards.clear()


class Exp3Agent:
    """Exponential-weights adversarial bandit over the row actions.

    The policy mixes uniform exploration with a softmax of cumulative
    importance-weighted reward estimates,

        policy_t = alpha_t / n + (1 - alpha_t) * softmax(gamma_t * G_t),

    with schedules alpha_t = min(1, sqrt(n ln n / t)) and
    gamma_t = sqrt(2 ln n / (n t)). Only the played arm's estimate is
    updated, with the reward first mapped affinely from
    [reward_min, reward_max] into [0, 1] and clipped (the softmax estimator
    needs bounded nonnegative rewards). Estimates reset at every episode
    boundary.
    """

    def __init__(self, n_actions: int, seed=None, reward_min: float = 0.0, reward_max: float = 1.0):
        if not reward_min < reward_max:
            raise ValueError("reward_min must be strictly below reward_max")
        self.n_actions = n_actions
        self.rng = _rng(seed)
        self.reward_min = float(reward_min)
        self.reward_max = float(reward_max)
        self.cumulative_estimates = np.zeros(n_actions)
        self._last_policy: np.ndarray | None = None
        self._last_action: int | None = None
        self._awaiting_feedback = False

    @property
    def last_strategy(self) -> np.ndarray | None:
        return self._last_policy

    def policy(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("round index must be >= 1")
        n = self.n_actions
        log_n = math.log(n)
        alpha = min(1.0, math.sqrt(n * log_n / t))
        gamma = math.sqrt(2.0 * log_n / (n * t))
        scores = gamma * self.cumulative_estimates
        weights = np.exp(scores - scores.max())
        return alpha / n + (1.0 - alpha) * weights / weights.sum()

    def begin_episode(self, ensemble=None) -> None:
        self.cumulative_estimates[:] = 0.0
        self._last_policy = None
        self._last_action = None
        self._awaiting_feedback = False

    def act(self, t: int) -> int:
        if self._awaiting_feedback:
            raise AgentProtocolError("act() called twice without observe()")
        policy = self.policy(t)
        cutoffs = np.cumsum(policy)
        action = min(int(np.searchsorted(cutoffs, self.rng.random(), side="right")), self.n_actions - 1)
        self._last_policy = policy
        self._last_action = action
        self._awaiting_feedback = True
        return action

    def observe(self, own_action: int, opponent_action: int, reward: float) -> None:
        if not self._awaiting_feedback:
            raise AgentProtocolError("observe() called before act()")
        span = self.reward_max - self.reward_min
        clipped = min(max((reward - self.reward_min) / span, 0.0), 1.0)
        self.cumulative_estimates[own_action] += clipped / self._last_policy[own_action]
        self._awaiting_feedback = False

    def end_episode(self) -> None:
        self._awaiting_feedback = False


class FixedStrategyAgent:
    """Learner that plays one fixed mixed strategy every round."""

    def __init__(self, strategy, seed=None):
        self.current_strategy = (
            strategy if isinstance(strategy, MixedStrategy) else MixedStrategy(strategy)
        )
        self.n_actions = self.current_strategy.n_actions
        self.rng = _rng(seed)

    @classmethod
    def uniform(cls, n_actions: int, seed=None) -> "FixedStrategyAgent":
        return cls(MixedStrategy.uniform(n_actions), seed)

    @property
    def last_strategy(self) -> np.ndarray:
        return self.current_strategy.probs

    def begin_episode(self, ensemble=None) -> None:
        pass

    def act(self, t: int) -> int:
        return self.current_strategy.sample(self.rng)

    def observe(self, own_action, opponent_action, reward) -> None:
        pass

    def end_episode(self) -> None:
        pass


class _ColumnOpponent:
    """Shared sampling machinery for episode-level column policies."""

    def __init__(self, seed=None):
        self.rng = _rng(seed)
        self.current_strategy: MixedStrategy | None = None

    def act(self) -> int:
        if self.current_strategy is None:
            raise AgentProtocolError("opponent act() called before begin_episode()")
        return self.current_strategy.sample(self.rng)

    def observe(self, row_action, col_action, reward) -> None:
        pass


class SaddleOracleOpponent(_ColumnOpponent):
    """Omniscient attacker: plays the true game's saddle-point column mix,
    recomputed from the revealed true matrix at every episode."""

    def begin_episode(self, true_game, learner_previous_strategy=None) -> None:
        self.current_strategy = solve_saddle_point(true_game).col_strategy


class UniformOpponent(_ColumnOpponent):
    def begin_episode(self, true_game, learner_previous_strategy=None) -> None:
        self.current_strategy = MixedStrategy.uniform(true_game.cols)


class FixedOpponent(_ColumnOpponent):
    def __init__(self, strategy, seed=None):
        super().__init__(seed)
        self._strategy = strategy if isinstance(strategy, MixedStrategy) else MixedStrategy(strategy)

    def begin_episode(self, true_game, learner_previous_strategy=None) -> None:
        if self._strategy.n_actions != true_game.cols:
            raise ValueError("fixed opponent strategy does not match the game's column count")
        self.current_strategy = self._strategy


class BestResponderOpponent(_ColumnOpponent):
    """Plays the pure column minimizing the learner's previous-episode payoff.

    The current mixed strategy of the learner is unobservable, so the best
    response targets the strategy from the previous episode; with no history
    it falls back to uniform play.
    """

    def begin_episode(self, true_game, learner_previous_strategy=None) -> None:
        if learner_previous_strategy is None:
            self.current_strategy = MixedStrategy.uniform(true_game.cols)
            return
        mu = np.asarray(learner_previous_strategy, dtype=float)
        column_payoffs = mu @ true_game.entries
        self.current_strategy = MixedStrategy.pure(true_game.cols, int(np.argmin(column_payoffs)))
