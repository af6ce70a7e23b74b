"""Zero-sum matrix games: payoff containers and exact mixed saddle-point solving.

The solver uses the classical reduction of a matrix game to a linear program:
shift the payoffs so every entry is strictly positive, solve the resulting
bounded LP with a dense tableau simplex, and read both players' strategies off
the optimal tableau (one from the basis, one from the dual multipliers).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Tolerance for reported game values and security levels.
VALUE_TOL = 1e-7
# Pivot / normalization tolerance inside the simplex solver.
SIMPLEX_TOL = 1e-9

_MAX_PIVOTS = 10_000


def _as_payoff_array(entries) -> np.ndarray:
    arr = np.array(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("payoff matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("payoff matrix entries must be finite")
    return arr


@dataclass(frozen=True)
class GameMatrix:
    """Row player's payoff matrix of a finite two-player zero-sum game.

    The row player maximizes, the column player minimizes; the column
    player's payoff is the negation of ``entries``.
    """

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_payoff_array(self.entries))
        self.entries.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class MixedStrategy:
    """Probability vector over one player's action set."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("strategy must be a non-empty 1-D probability vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("strategy probabilities must be finite")
        if arr.min() < -SIMPLEX_TOL:
            raise ValueError("strategy probabilities must be nonnegative")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError("strategy probabilities must sum to 1")
        arr = np.maximum(arr, 0.0)
        object.__setattr__(self, "probs", arr)
        arr.setflags(write=False)

    @property
    def n_actions(self) -> int:
        return self.probs.size

    @cached_property
    def _cumulative(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def sample(self, rng: np.random.Generator) -> int:
        """Draw a pure action index from this distribution."""
        idx = int(np.searchsorted(self._cumulative, rng.random(), side="right"))
        return min(idx, self.n_actions - 1)

    @classmethod
    def uniform(cls, n: int) -> "MixedStrategy":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def pure(cls, n: int, action: int) -> "MixedStrategy":
        probs = np.zeros(n)
        probs[action] = 1.0
        return cls(probs)


@dataclass(frozen=True)
class SaddlePoint:
    """Mixed-strategy saddle point: optimal strategies and the game value."""

    row_strategy: MixedStrategy
    col_strategy: MixedStrategy
    value: float


def _coerce_game(matrix) -> GameMatrix:
    return matrix if isinstance(matrix, GameMatrix) else GameMatrix(matrix)


def _coerce_strategy(strategy) -> np.ndarray:
    if isinstance(strategy, MixedStrategy):
        return strategy.probs
    return MixedStrategy(strategy).probs


def _solve_positive_lp(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Simplex for: maximize sum(q) subject to a @ q <= 1, q >= 0.

    Requires a strictly positive ``a``, which makes the all-slack basis
    feasible and the problem bounded. Entering and leaving variables follow
    Bland's rule (lowest eligible index), so the pivot sequence cannot cycle
    and is fully deterministic.

    Returns (q, dual multipliers of the row constraints, objective value).
    """
    m, n = a.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = 1.0
    tab[-1, :n] = -1.0
    basis = np.arange(n, n + m)

    for _ in range(_MAX_PIVOTS):
        negative = np.flatnonzero(tab[-1, :-1] < -SIMPLEX_TOL)
        if negative.size == 0:
            break
        enter = int(negative[0])
        col = tab[:m, enter]
        eligible = col > SIMPLEX_TOL
        if not eligible.any():
            raise RuntimeError("LP unbounded; positivity shift violated")
        ratios = np.where(eligible, tab[:m, -1] / np.where(eligible, col, 1.0), np.inf)
        tied = np.flatnonzero(ratios <= ratios.min() + SIMPLEX_TOL)
        leave = int(tied[np.argmin(basis[tied])])
        tab[leave] /= tab[leave, enter]
        others = np.arange(m + 1) != leave
        tab[others] -= np.outer(tab[others, enter], tab[leave])
        basis[leave] = enter
    else:
        raise RuntimeError("simplex exceeded the pivot budget")

    q = np.zeros(n)
    from_q = basis < n
    q[basis[from_q]] = tab[:m, -1][from_q]
    duals = tab[-1, n : n + m].copy()
    return q, duals, float(tab[-1, -1])


def _normalized(weights: np.ndarray) -> np.ndarray:
    w = np.maximum(weights, 0.0)
    total = w.sum()
    if total <= SIMPLEX_TOL:
        raise RuntimeError("degenerate LP solution: zero strategy mass")
    return w / total


def solve_saddle_point(matrix) -> SaddlePoint:
    """Compute an exact mixed-strategy saddle point of a zero-sum game.

    The payoffs are shifted by a constant so the matrix is strictly positive
    (``1 + |min entry|`` whenever the minimum entry is nonpositive), the row
    player's maximin LP is solved in its standard positive form, the column
    strategy is recovered from the dual, and the shift is subtracted from the
    reported value. Deterministic: identical input yields identical output.
    """
    game = _coerce_game(matrix)
    entries = game.entries
    low = float(entries.min())
    # Shift so the smallest entry becomes 1: for low <= 0 this is the usual
    # 1 + |min| transformation, and for 0 < low < 1 it keeps every pivot
    # comfortably above the solver tolerance.
    shift = max(0.0, 1.0 - low)
    q, duals, objective = _solve_positive_lp(entries + shift)
    value = 1.0 / objective - shift
    return SaddlePoint(
        row_strategy=MixedStrategy(_normalized(duals)),
        col_strategy=MixedStrategy(_normalized(q)),
        value=value,
    )


def expected_payoff(matrix, row_strategy, col_strategy) -> float:
    """Bilinear payoff mu' M nu to the row player."""
    game = _coerce_game(matrix)
    mu = _coerce_strategy(row_strategy)
    nu = _coerce_strategy(col_strategy)
    if mu.size != game.rows or nu.size != game.cols:
        raise ValueError(
            f"strategy dimensions ({mu.size}, {nu.size}) do not match "
            f"game shape {game.rows}x{game.cols}"
        )
    return float(mu @ game.entries @ nu)


def best_response_value(matrix, opponent, side: str) -> float:
    """Value of the best pure response against an opponent mixed strategy.

    side="row": the row player responds, so the value is the maximum over
    pure rows of (M @ opponent). side="col": the column player responds, so
    the value is the minimum over pure columns of (opponent @ M).
    """
    game = _coerce_game(matrix)
    probs = _coerce_strategy(opponent)
    if side == "row":
        if probs.size != game.cols:
            raise ValueError("opponent strategy length must equal the column count")
        return float((game.entries @ probs).max())
    if side == "col":
        if probs.size != game.rows:
            raise ValueError("opponent strategy length must equal the row count")
        return float((probs @ game.entries).min())
    raise ValueError(f"side must be 'row' or 'col', got {side!r}")
