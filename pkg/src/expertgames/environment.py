"""Episodic game environment: ground truth, expert reveals, and the play loop.

A trial's randomness is split into three independent streams (mixing weights,
expert draws, reward noise) spawned from one seed, so changing the number of
rounds or the set of learners cannot perturb the expert matrices, and the
reward noise is pre-drawn indexed by (episode, round): two learners replayed
on the same environment see identical noise even when they choose different
actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .game import GameMatrix, SaddlePoint, solve_saddle_point

_THETA_DRAW_LIMIT = 100_000


class SimulationError(RuntimeError):
    """An agent broke the play protocol (e.g. produced an illegal action)."""


@dataclass(frozen=True)
class ExpertEnsemble:
    """The expert game matrices revealed at the start of one episode.

    ``matrices`` is an (n_experts, rows, cols) stack with every entry in
    [0, 1]; the per-entry feature vector of cell (i, j) is the vector of the
    experts' (i, j) readings.
    """

    matrices: np.ndarray
    episode: int = 0

    def __post_init__(self):
        stack = np.asarray(self.matrices, dtype=float)
        if stack.ndim != 3 or stack.shape[0] < 1:
            raise ValueError("ensemble must be a non-empty (n_experts, rows, cols) stack")
        if not np.all(np.isfinite(stack)):
            raise ValueError("expert matrices must be finite")
        if stack.min() < 0.0 or stack.max() > 1.0:
            raise ValueError("expert matrix entries must lie in [0, 1]")
        object.__setattr__(self, "matrices", stack)
        stack.setflags(write=False)

    @property
    def n_experts(self) -> int:
        return self.matrices.shape[0]

    @property
    def rows(self) -> int:
        return self.matrices.shape[1]

    @property
    def cols(self) -> int:
        return self.matrices.shape[2]

    def features(self, i: int, j: int) -> np.ndarray:
        """Expert readings of entry (i, j); components in [0,1], norm <= sqrt(S)."""
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"entry ({i}, {j}) outside a {self.rows}x{self.cols} game")
        return self.matrices[:, i, j].copy()

    def feature_matrix(self) -> np.ndarray:
        """All entries' features as an (n_experts, rows*cols) column stack."""
        return self.matrices.reshape(self.n_experts, -1)

    def mix(self, weights) -> np.ndarray:
        """Payoff matrix obtained by linearly combining the experts."""
        w = np.asarray(weights, dtype=float)
        return np.tensordot(w, self.matrices, axes=1)


@dataclass(frozen=True)
class ThetaSpec:
    """How the true mixing weights are chosen: an explicit vector, or a
    Gaussian draw (mean * ones, identity covariance) rejection-sampled into
    the norm ball when a bound is given."""

    kind: str = "gaussian"
    values: tuple[float, ...] | None = None
    mean: float = 0.5
    norm_bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "fixed"):
            raise ValueError(f"theta kind must be 'gaussian' or 'fixed', got {self.kind!r}")
        if self.kind == "fixed" and self.values is None:
            raise ValueError("fixed theta spec requires explicit values")
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class ExpertSpec:
    """How expert matrices arise: fresh U[0,1] draws per episode, or a fixed
    per-episode list."""

    kind: str = "uniform"
    matrices: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "fixed"):
            raise ValueError(f"expert kind must be 'uniform' or 'fixed', got {self.kind!r}")
        if self.kind == "fixed" and self.matrices is None:
            raise ValueError("fixed expert spec requires matrices")


@dataclass(frozen=True)
class EnvironmentConfig:
    n_rows: int
    n_cols: int
    n_experts: int
    n_episodes: int
    rounds_per_episode: int
    noise_variance: float = 0.0
    theta: ThetaSpec = field(default_factory=ThetaSpec)
    experts: ExpertSpec = field(default_factory=ExpertSpec)
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("both action counts must be at least 1")
        if self.n_experts < 1:
            raise ValueError("n_experts must be at least 1")
        if self.n_episodes < 1 or self.rounds_per_episode < 1:
            raise ValueError("n_episodes and rounds_per_episode must be at least 1")
        if not (self.noise_variance >= 0 and math.isfinite(self.noise_variance)):
            raise ValueError("noise_variance must be finite and nonnegative")


@dataclass
class EpisodeTrace:
    """Record of one episode: per-round plays plus episode-level summaries."""

    episode: int
    row_actions: np.ndarray
    col_actions: np.ndarray
    rewards: np.ndarray
    true_value: float
    metrics: dict[str, float]
    hindsight_row_totals: np.ndarray
    learner_strategy: np.ndarray | None = None
    opponent_strategy: np.ndarray | None = None
    theta_hat: np.ndarray | None = None
    beta: float | None = None
    theta_error: float | None = None
    strategies_known: bool = True
    diagnostics: dict[str, float] = field(default_factory=dict)


def emit_reward(matrix, i: int, j: int, noise_variance: float, rng: np.random.Generator) -> float:
    """One noisy payoff observation: M[i, j] + N(0, noise_variance)."""
    game = matrix if isinstance(matrix, GameMatrix) else GameMatrix(matrix)
    if not (0 <= i < game.rows and 0 <= j < game.cols):
        raise IndexError(f"entry ({i}, {j}) outside a {game.rows}x{game.cols} game")
    return float(game.entries[i, j] + rng.normal(0.0, math.sqrt(noise_variance)))


def _draw_theta(spec: ThetaSpec, n_experts: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    if spec.kind == "fixed":
        theta = np.asarray(spec.values, dtype=float)
        if theta.shape != (n_experts,):
            raise ValueError(
                f"fixed theta has length {theta.size}, environment expects {n_experts}"
            )
        return theta, 0
    rejections = 0
    for _ in range(_THETA_DRAW_LIMIT):
        theta = rng.normal(spec.mean, 1.0, size=n_experts)
        if spec.norm_bound is None or np.linalg.norm(theta) <= spec.norm_bound:
            return theta, rejections
        rejections += 1
    raise RuntimeError("rejection sampling of the mixing weights did not terminate")


class Environment:
    """One trial's ground truth: mixing weights, expert reveals, noise table."""

    def __init__(self, config: EnvironmentConfig):
        self.config = config
        root = np.random.SeedSequence(config.seed)
        theta_seq, expert_seq, noise_seq = root.spawn(3)
        theta_rng = np.random.default_rng(theta_seq)
        expert_rng = np.random.default_rng(expert_seq)
        noise_rng = np.random.default_rng(noise_seq)

        self.theta_star, self.theta_rejections = _draw_theta(
            config.theta, config.n_experts, theta_rng
        )
        shape = (config.n_episodes, config.n_experts, config.n_rows, config.n_cols)
        if config.experts.kind == "uniform":
            self._expert_stacks = expert_rng.uniform(0.0, 1.0, size=shape)
        else:
            stacks = np.asarray(config.experts.matrices, dtype=float)
            if stacks.shape != shape:
                raise ValueError(
                    f"fixed expert matrices must have shape {shape}, got {stacks.shape}"
                )
            self._expert_stacks = stacks
        # True games never clip: only the expert matrices are [0,1]-bounded.
        self._true_games = np.tensordot(self.theta_star, self._expert_stacks, axes=(0, 1))
        self.noise = noise_rng.normal(
            0.0,
            math.sqrt(config.noise_variance),
            size=(config.n_episodes, config.rounds_per_episode),
        )
        self._saddles: dict[int, SaddlePoint] = {}

    def ensemble(self, episode: int) -> ExpertEnsemble:
        return ExpertEnsemble(self._expert_stacks[episode], episode=episode)

    def true_game(self, episode: int) -> GameMatrix:
        return GameMatrix(self._true_games[episode])

    def true_saddle(self, episode: int) -> SaddlePoint:
        if episode not in self._saddles:
            self._saddles[episode] = solve_saddle_point(self.true_game(episode))
        return self._saddles[episode]

    def episodes(self):
        for k in range(self.config.n_episodes):
            yield k, self.ensemble(k), self.true_game(k)

    def run_episode(self, learner, opponent, episode: int, learner_previous_strategy=None) -> EpisodeTrace:
        """Play one episode and return its trace.

        Both players move simultaneously each round: the opponent's policy is
        fixed before the round from history and the true game only, so it
        never conditions on the learner's current action. Both then observe
        the executed action pair and the noisy reward.
        """
        cfg = self.config
        ensemble = self.ensemble(episode)
        game = self.true_game(episode)
        value = self.true_saddle(episode).value
        m = game.entries
        n_rounds = cfg.rounds_per_episode

        learner.begin_episode(ensemble)
        opponent.begin_episode(game, learner_previous_strategy)
        episode_mu = getattr(learner, "current_strategy", None)
        episode_nu = getattr(opponent, "current_strategy", None)

        rows = np.empty(n_rounds, dtype=int)
        cols = np.empty(n_rounds, dtype=int)
        rewards = np.empty(n_rounds)
        sums = dict.fromkeys(metrics.METRIC_KEYS, 0.0)
        row_totals = np.zeros(cfg.n_rows)
        strategies_known = True
        cached_mu = None
        mu_payoffs = None  # mu' M, reused while the learner's policy is unchanged
        cached_nu = None
        game_nu = None  # M nu, reused while the opponent mix is unchanged
        br_row = None

        for t in range(1, n_rounds + 1):
            i = int(learner.act(t))
            if not 0 <= i < cfg.n_rows:
                raise SimulationError(
                    f"learner produced row {i} outside [0, {cfg.n_rows}) "
                    f"at episode {episode}, round {t}"
                )
            j = int(opponent.act())
            if not 0 <= j < cfg.n_cols:
                raise SimulationError(
                    f"opponent produced column {j} outside [0, {cfg.n_cols}) "
                    f"at episode {episode}, round {t}"
                )
            r = float(m[i, j] + self.noise[episode, t - 1])
            learner.observe(i, j, r)
            opponent.observe(i, j, r)

            mu_t = getattr(learner, "last_strategy", None)
            nu_strategy = getattr(opponent, "current_strategy", None)
            if nu_strategy is None:
                # Opponent declared no mix: use the played column as a basis vector.
                strategies_known = False
                game_nu_t = m[:, j]
                br_row_t = float(game_nu_t.max())
            else:
                nu_t = nu_strategy.probs
                if nu_t is not cached_nu:
                    cached_nu = nu_t
                    game_nu = m @ nu_t
                    br_row = float(game_nu.max())
                game_nu_t = game_nu
                br_row_t = br_row
            if mu_t is None:
                strategies_known = False
                expected = float(game_nu_t[i])
                br_col_t = float(m[i].min())
            else:
                if mu_t is not cached_mu:
                    cached_mu = mu_t
                    mu_payoffs = mu_t @ m
                expected = float(mu_t @ game_nu_t)
                br_col_t = float(mu_payoffs.min())

            sums["saddle_realized"] += value - r
            sums["saddle_pseudo"] += value - expected
            sums["best_response_p1_realized"] += br_row_t - r
            sums["best_response_p1_expected"] += br_row_t - expected
            sums["best_response_p2_realized"] += r - br_col_t
            sums["best_response_p2_expected"] += expected - br_col_t
            row_totals += m[:, j]
            rows[t - 1] = i
            cols[t - 1] = j
            rewards[t - 1] = r

        sums["external"] = float(row_totals.max() - rewards.sum())

        diagnostics: dict[str, float] = {}
        theta_hat = getattr(learner, "planned_theta", None)
        beta = getattr(learner, "planned_beta", None)
        theta_error = None
        if theta_hat is not None:
            theta_hat = np.asarray(theta_hat, dtype=float)
            theta_error = float(np.linalg.norm(theta_hat - self.theta_star))
            estimator = getattr(learner, "estimator", None)
            if estimator is not None and beta is not None:
                err_norm = estimator.mahalanobis_norm(self.theta_star - theta_hat)
                diagnostics["coverage"] = float(err_norm <= math.sqrt(beta))
            optimistic = getattr(learner, "optimistic_matrix", None)
            if optimistic is not None:
                true_mean = ensemble.mix(self.theta_star)
                diagnostics["value_optimism_gap"] = float(
                    learner.optimistic_value - value
                )
                diagnostics["entrywise_optimism_margin"] = float(
                    (optimistic - true_mean).min()
                )
            if getattr(learner, "cap_active", None) is not None:
                diagnostics["cap_active"] = float(learner.cap_active)

        estimator = getattr(learner, "estimator", None)
        log_det_before = estimator.log_det() if estimator is not None else None
        learner.end_episode()
        if estimator is not None:
            log_det_after = estimator.log_det()
            diagnostics["det_ratio"] = math.exp(log_det_after - log_det_before)
            diagnostics["potential_sum"] = estimator.potential_sum
            diagnostics["potential_bound"] = estimator.potential_bound()

        return EpisodeTrace(
            episode=episode,
            row_actions=rows,
            col_actions=cols,
            rewards=rewards,
            true_value=value,
            metrics=sums,
            hindsight_row_totals=row_totals,
            learner_strategy=None if episode_mu is None else episode_mu.probs,
            opponent_strategy=None if episode_nu is None else episode_nu.probs,
            theta_hat=theta_hat,
            beta=None if beta is None else float(beta),
            theta_error=theta_error,
            strategies_known=strategies_known,
            diagnostics=diagnostics,
        )

    def run_trial(self, learner, opponent) -> list[EpisodeTrace]:
        """Play all episodes in order, tracking the learner's previous-episode
        strategy for opponents that react to it."""
        traces = []
        previous_strategy = None
        for k in range(self.config.n_episodes):
            trace = self.run_episode(learner, opponent, k, previous_strategy)
            traces.append(trace)
            if trace.learner_strategy is not None:
                previous_strategy = trace.learner_strategy
            else:
                # Empirical fallback for learners without an episode-level mix.
                counts = np.bincount(trace.row_actions, minlength=self.config.n_rows)
                previous_strategy = counts / counts.sum()
        return traces
