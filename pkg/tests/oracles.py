"""Independent brute-force oracles used to cross-check library output.

Everything in here deliberately avoids the code paths under test: the game
oracle enumerates equilibrium supports and solves small linear systems, the
ridge oracles rebuild their answers from scratch with dense solves, and the
adversarial-bandit oracle is a straight-line transcription of the two policy
formulas.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_FEAS_TOL = 1e-8


def support_enumeration_saddle(matrix) -> tuple[float, np.ndarray, np.ndarray]:
    """Solve a zero-sum game by exhaustive enumeration of strategy supports.

    For every pair of candidate supports, solve the linear system that makes
    each player indifferent across the opponent's support, then keep the
    solution if it is a valid strategy pair whose security levels certify a
    saddle point. Returns (value, row_strategy, col_strategy).
    """
    m = np.asarray(matrix, dtype=float)
    n1, n2 = m.shape
    row_supports = [s for size in range(1, n1 + 1) for s in itertools.combinations(range(n1), size)]
    col_supports = [s for size in range(1, n2 + 1) for s in itertools.combinations(range(n2), size)]
    pairs = sorted(
        ((r, c) for r in row_supports for c in col_supports),
        key=lambda rc: (len(rc[0]) + len(rc[1]), rc),
    )
    for rows, cols in pairs:
        solved = _solve_support_pair(m, rows, cols)
        if solved is not None:
            return solved
    raise RuntimeError("support enumeration found no equilibrium (should be impossible)")


def _solve_support_pair(m, rows, cols):
    n1, n2 = m.shape
    k1, k2 = len(rows), len(cols)
    # Unknowns: mu on `rows`, nu on `cols`, and the common value v.
    n_unknowns = k1 + k2 + 1
    eqs = []
    rhs = []
    for j_pos, j in enumerate(cols):  # row mix makes every support column worth v
        row = np.zeros(n_unknowns)
        row[:k1] = m[list(rows), j]
        row[-1] = -1.0
        eqs.append(row)
        rhs.append(0.0)
    for i_pos, i in enumerate(rows):  # column mix makes every support row worth v
        row = np.zeros(n_unknowns)
        row[k1 : k1 + k2] = m[i, list(cols)]
        row[-1] = -1.0
        eqs.append(row)
        rhs.append(0.0)
    for start, width in ((0, k1), (k1, k2)):  # both mixes are distributions
        row = np.zeros(n_unknowns)
        row[start : start + width] = 1.0
        eqs.append(row)
        rhs.append(1.0)

    a = np.array(eqs)
    b = np.array(rhs)
    solution, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.max(np.abs(a @ solution - b)) > _FEAS_TOL:
        return None
    mu_s = solution[:k1]
    nu_s = solution[k1 : k1 + k2]
    value = float(solution[-1])
    if mu_s.min() < -_FEAS_TOL or nu_s.min() < -_FEAS_TOL:
        return None

    mu = np.zeros(n1)
    nu = np.zeros(n2)
    mu[list(rows)] = np.maximum(mu_s, 0.0)
    nu[list(cols)] = np.maximum(nu_s, 0.0)
    mu /= mu.sum()
    nu /= nu.sum()
    # Security certificates: mu guarantees >= v against every pure column,
    # nu concedes <= v against every pure row.
    if (mu @ m).min() < value - _FEAS_TOL:
        return None
    if (m @ nu).max() > value + _FEAS_TOL:
        return None
    return value, mu, nu


def ridge_solution(features: np.ndarray, rewards: np.ndarray, ridge: float) -> np.ndarray:
    """Closed-form ridge estimate from scratch: (lam I + Z'Z)^-1 Z'r."""
    z = np.asarray(features, dtype=float)
    r = np.asarray(rewards, dtype=float)
    dim = z.shape[1]
    return np.linalg.solve(ridge * np.eye(dim) + z.T @ z, z.T @ r)


def gram_from_scratch(features: np.ndarray, ridge: float) -> np.ndarray:
    z = np.asarray(features, dtype=float)
    return ridge * np.eye(z.shape[1]) + z.T @ z


def confidence_radius_from_scratch(
    features: np.ndarray, ridge: float, bound: float, delta: float
) -> float:
    """Recompute the confidence-ball radius from a from-scratch Gram matrix."""
    gram = gram_from_scratch(features, ridge)
    dim = gram.shape[0]
    sign, log_det = np.linalg.slogdet(gram)
    assert sign > 0
    inner = 0.5 * (log_det - dim * math.log(ridge)) + math.log(1.0 / delta)
    return (math.sqrt(2.0 * inner) + math.sqrt(ridge) * bound) ** 2


def entrywise_optimistic_matrix(
    expert_stack: np.ndarray,
    theta_hat: np.ndarray,
    gram: np.ndarray,
    radius: float,
) -> np.ndarray:
    """Optimistic per-entry payoff bound computed with an explicit inverse."""
    gram_inv = np.linalg.inv(gram)
    s, n1, n2 = expert_stack.shape
    out = np.empty((n1, n2))
    for i in range(n1):
        for j in range(n2):
            z = expert_stack[:, i, j]
            out[i, j] = float(theta_hat @ z) + math.sqrt(radius) * math.sqrt(z @ gram_inv @ z)
    return out


def exp3_policy_trace(
    n_actions: int,
    actions: list[int],
    rewards: list[float],
    reward_min: float,
    reward_max: float,
) -> list[np.ndarray]:
    """Replay a scripted action/reward sequence through the textbook formulas.

    Policy at round t: alpha_t / n + (1 - alpha_t) * softmax(gamma_t * G)
    with G the per-arm sum of importance-weighted clipped rewards, where only
    the played arm's estimate is updated each round.
    """
    cumulative = np.zeros(n_actions)
    policies = []
    for t, (action, reward) in enumerate(zip(actions, rewards), start=1):
        alpha = min(1.0, math.sqrt(n_actions * math.log(n_actions) / t))
        gamma = math.sqrt(2.0 * math.log(n_actions) / (n_actions * t))
        weights = np.exp(gamma * cumulative - np.max(gamma * cumulative))
        policy = alpha / n_actions + (1.0 - alpha) * weights / weights.sum()
        policies.append(policy)
        clipped = min(max((reward - reward_min) / (reward_max - reward_min), 0.0), 1.0)
        cumulative[action] += clipped / policy[action]
    return policies
