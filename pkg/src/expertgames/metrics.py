"""Regret metrics over episodic traces.

Two families are computed everywhere: realized forms, which subtract the
noisy reward actually received, and expectation forms, which replace it with
the bilinear payoff of the round's mixed strategies. Expectation forms obey
the pointwise ordering pseudo-saddle <= best-response <= exploitability;
realized forms do not (noise breaks it) and are reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import best_response_value, expected_payoff

# Per-episode metric keys produced by the simulator and consumed here.
METRIC_KEYS = (
    "saddle_realized",
    "saddle_pseudo",
    "best_response_p1_realized",
    "best_response_p1_expected",
    "best_response_p2_realized",
    "best_response_p2_expected",
    "external",
)


def saddle_regret_increment(true_value: float, reward: float) -> float:
    """Realized saddle-point regret for one round: val(M) - r."""
    return true_value - reward


def pseudo_saddle_regret_increment(true_value, row_strategy, matrix, col_strategy) -> float:
    """Expectation-form increment: val(M) - mu' M nu."""
    return true_value - expected_payoff(matrix, row_strategy, col_strategy)


def best_response_regret_increment(matrix, col_strategy, reward: float) -> float:
    """Row player's realized best-response regret: max_mu mu' M nu - r."""
    return best_response_value(matrix, col_strategy, "row") - reward


def best_response_regret_increment_p2(matrix, row_strategy, reward: float) -> float:
    """Column player's realized best-response regret: r - min_nu mu' M nu."""
    return reward - best_response_value(matrix, row_strategy, "col")


def hindsight_best_row_regret(matrix, col_actions, rewards) -> float:
    """Within-episode external regret: max_i sum_t M[i, j_t] - sum_t r_t."""
    m = np.asarray(matrix, dtype=float) if not hasattr(matrix, "entries") else matrix.entries
    cols = np.asarray(col_actions, dtype=int)
    row_totals = m[:, cols].sum(axis=1)
    return float(row_totals.max() - np.sum(rewards))


@dataclass
class RegretReport:
    """Per-episode and cumulative regret series for one learner's trial."""

    per_episode: dict[str, np.ndarray]
    theta_error: np.ndarray
    external_single_row: float
    expectation_form_exact: bool = True
    warnings: list[str] = field(default_factory=list)

    @property
    def n_episodes(self) -> int:
        return next(iter(self.per_episode.values())).size

    def cumulative(self) -> dict[str, np.ndarray]:
        return {name: np.cumsum(series) for name, series in self.per_episode.items()}

    def series_rows(self):
        """Yield (series, episode, value) rows in a stable order."""
        episodes = range(1, self.n_episodes + 1)
        for name in sorted(self.per_episode):
            for k, v in zip(episodes, self.per_episode[name]):
                yield f"per_episode_{name}", k, float(v)
        for name, series in sorted(self.cumulative().items()):
            for k, v in zip(episodes, series):
                yield f"cumulative_{name}", k, float(v)
        for k, v in zip(episodes, self.theta_error):
            yield "theta_error", k, float(v)
        # Across-episode single-best-row external regret, one terminal row.
        yield "external_single_row", self.n_episodes, float(self.external_single_row)


def build_report(traces) -> RegretReport:
    """Assemble a RegretReport from a trial's episode traces.

    Exploitability is formed here as the exact sum of the two expectation-form
    best-response series, and cumulative series are plain prefix sums, so the
    report-level identities hold to the last bit.
    """
    if not traces:
        raise ValueError("cannot build a report from an empty trace list")
    per_episode = {
        key: np.array([trace.metrics[key] for trace in traces]) for key in METRIC_KEYS
    }
    per_episode["exploitability"] = (
        per_episode["best_response_p1_expected"] + per_episode["best_response_p2_expected"]
    )
    theta_error = np.array(
        [np.nan if trace.theta_error is None else trace.theta_error for trace in traces]
    )
    totals = np.sum([trace.hindsight_row_totals for trace in traces], axis=0)
    realized = sum(float(np.sum(trace.rewards)) for trace in traces)
    exact = all(trace.strategies_known for trace in traces)
    warnings = []
    if not exact:
        warnings.append(
            "expectation-form metrics use empirical pure-action strategies "
            "for at least one player"
        )
    return RegretReport(
        per_episode=per_episode,
        theta_error=theta_error,
        external_single_row=float(totals.max() - realized),
        expectation_form_exact=exact,
        warnings=warnings,
    )
