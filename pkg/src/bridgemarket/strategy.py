"""Trade timing on the (auction, last-trade) state space.

Auctions run at grid indices ``1 .. m-1``. The state at auction ``t`` is the
index ``s`` of the last executed trade (``0`` before any trade). Trading at
``t`` earns the expected profit ``E(t, s)`` and moves the state to ``s = t``;
skipping earns nothing and keeps ``s``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analytics import (
    QualityInputs,
    ab_coefficients,
    directional_profit_kernel,
    expected_profit,
    profit_variance,
    _own_sign,
)
from .bridge import TimeGrid

__all__ = [
    "DecisionGrid",
    "StrategyContext",
    "StrategyTrace",
    "ValueGrid",
    "h_surface",
    "signal_independent_context",
    "posterior_context",
    "adjusted_gain",
    "adjusted_gain_grid",
    "decide",
    "value_recursion",
    "enumerate_strategies",
    "trace_from_schedule",
    "sharpe_objective",
]

TRADE = "trade"
SKIP = "skip"


@dataclass(frozen=True)
class DecisionGrid:
    """Values on admissible states; ``values[t, s]`` is NaN unless ``0 <= s < t``.

    Row ``0`` and row ``m`` are unused (no auction at ``t_0`` or ``T``).
    """

    values: np.ndarray
    grid: TimeGrid

    def __call__(self, t: int, s: int) -> float:
        if not (1 <= t <= self.grid.m - 1 and 0 <= s < t):
            raise ValueError(f"state (t={t}, s={s}) is not admissible")
        return float(self.values[t, s])

    def admissible(self):
        for t in range(1, self.grid.m):
            for s in range(t):
                yield t, s


@dataclass(frozen=True)
class StrategyContext:
    """Immediate expected profit and profit variance as functions of the state."""

    grid: TimeGrid
    gain: Callable[[int, int], float]
    variance: Callable[[int, int], float] | None = None

    @property
    def last(self) -> int:
        return self.grid.m - 1


@dataclass(frozen=True)
class StrategyTrace:
    decisions: tuple[str, ...]
    states: tuple[int, ...]
    expected_profit: float

    @property
    def trades(self) -> tuple[bool, ...]:
        return tuple(d == TRADE for d in self.decisions)


@dataclass(frozen=True)
class ValueGrid:
    value: np.ndarray
    policy: np.ndarray
    grid: TimeGrid

    @property
    def initial_value(self) -> float:
        """Value at the first auction before any trade."""
        return float(self.value[1, 0])


def _empty(grid: TimeGrid) -> np.ndarray:
    return np.full((grid.m + 1, grid.m + 1), np.nan)


def h_surface(base: QualityInputs, grid: TimeGrid, x: float, agent: int = 2) -> DecisionGrid:
    """Expected profit at every state with the fundamental pinned at ``x``.

    Independent of the realised signals; ``x > 0`` gives the high-type
    surface and ``x < 0`` its low-type analogue.
    """
    out = _empty(grid)
    sign = _own_sign(agent)
    for t in range(1, grid.m):
        for s in range(t):
            ab = ab_coefficients(base.at(grid[t], grid[s]))
            out[t, s] = directional_profit_kernel(sign * ab.a * x, ab.b, x)
    return DecisionGrid(out, grid)


def signal_independent_context(base: QualityInputs, grid: TimeGrid, x: float, agent: int = 2) -> StrategyContext:
    surface = h_surface(base, grid, x, agent)
    var = _empty(grid)
    for t, s in surface.admissible():
        var[t, s] = ab_coefficients(base.at(grid[t], grid[s])).b ** 2
    return StrategyContext(grid, surface, DecisionGrid(var, grid))


def posterior_context(base: QualityInputs, grid: TimeGrid, posterior, agent: int = 1) -> StrategyContext:
    """Context built from the agent's current effective posterior (held fixed)."""

    def gain(t, s):
        return expected_profit(base.at(grid[t], grid[s]), posterior, agent)

    def variance(t, s):
        return profit_variance(base.at(grid[t], grid[s]), posterior, agent)

    return StrategyContext(grid, gain, variance)


def adjusted_gain(t: int, s: int, context: StrategyContext) -> float:
    """Immediate gain minus the cost of giving up the information advantage.

    ``E(t, s) - (E(t+1, s) - E(t+1, t))``.
    """
    if t >= context.last:
        raise ValueError("no later auction: the adjusted gain needs t + 1 on the grid")
    if not 0 <= s < t:
        raise ValueError(f"state (t={t}, s={s}) is not admissible")
    g = context.gain
    return g(t, s) - (g(t + 1, s) - g(t + 1, t))


def adjusted_gain_grid(context: StrategyContext) -> DecisionGrid:
    out = _empty(context.grid)
    for t in range(1, context.last):
        for s in range(t):
            out[t, s] = adjusted_gain(t, s, context)
    return DecisionGrid(out, context.grid)


def decide(t: int, s: int, context: StrategyContext) -> str:
    """Trade iff the immediate gain is positive and trading beats waiting one step."""
    now = context.gain(t, s)
    if not now > 0:
        return SKIP
    if t == context.last:
        return TRADE
    return TRADE if adjusted_gain(t, s, context) > 0 else SKIP


def value_recursion(context: StrategyContext) -> ValueGrid:
    """Backward induction ``V(t, s) = max(E(t, s) + V(t+1, t), V(t+1, s))``.

    ``V(m, .) = 0``; ties go to skipping. ``policy[t, s]`` is 1 for trade.
    """
    grid = context.grid
    m = grid.m
    value = np.zeros((m + 1, m + 1))
    policy = np.zeros((m + 1, m + 1), dtype=np.int8)
    for t in range(m - 1, 0, -1):
        for s in range(t):
            trade = context.gain(t, s) + value[t + 1, t]
            skip = value[t + 1, s]
            if trade > skip:
                value[t, s] = trade
                policy[t, s] = 1
            else:
                value[t, s] = skip
    return ValueGrid(value, policy, grid)


def trace_from_schedule(schedule, context: StrategyContext, t_index: int = 1, s_index: int = 0) -> StrategyTrace:
    decisions = []
    states = []
    total = 0.0
    s = s_index
    for k, trade in enumerate(schedule):
        u = t_index + k
        states.append(s)
        if trade:
            total += context.gain(u, s)
            s = u
        decisions.append(TRADE if trade else SKIP)
    return StrategyTrace(tuple(decisions), tuple(states), total)


def enumerate_strategies(context: StrategyContext, t_index: int = 1, s_index: int = 0, max_m: int = 12):
    """Every trade schedule from ``(t_index, s_index)`` with its expected profit."""
    if context.grid.m > max_m:
        raise ValueError(f"exhaustive enumeration is capped at m <= {max_m}")
    n = context.grid.m - t_index
    return [trace_from_schedule(bits, context, t_index, s_index) for bits in itertools.product((False, True), repeat=n)]


def sharpe_objective(trace: StrategyTrace, context: StrategyContext, t_index: int = 1) -> float:
    """Sum of expected profits over the root of the summed profit variances."""
    if context.variance is None:
        raise ValueError("context has no variance function")
    num = 0.0
    den = 0.0
    for k, (decision, s) in enumerate(zip(trace.decisions, trace.states)):
        if decision == TRADE:
            u = t_index + k
            num += context.gain(u, s)
            den += context.variance(u, s)
    if not any(d == TRADE for d in trace.decisions):
        raise ValueError("Sharpe ratio is undefined without trades")
    if not den > 0:
        raise ZeroDivisionError("zero profit variance")
    return num / math.sqrt(den)
