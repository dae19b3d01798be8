"""Expected one-trade gain surface and optimal trade schedule for the better-informed agent.

Run: python3 demos/strategy_surface.py
"""

import numpy as np

from bridgemarket.analytics import QualityInputs
from bridgemarket.bridge import make_grid
from bridgemarket.pricing import PayoffModel
from bridgemarket.strategy import h_surface, signal_independent_context, value_recursion


def main():
    grid = make_grid(1.0, 10)
    base = QualityInputs(grid[1], 0.0, 1.0, 0.5, PayoffModel.gaussian(), grid.T)
    h = h_surface(base, grid, 0.5, agent=1)
    np.set_printoptions(precision=4, suppress=True, linewidth=140)
    print("gain H(t, s); rows t = 1..9, columns s = 0..8")
    print(np.nan_to_num(h.values[1:grid.m, : grid.m - 1]))
    v = value_recursion(signal_independent_context(base, grid, 0.5, agent=1))
    print("optimal expected profit:", round(v.initial_value, 6))


if __name__ == "__main__":
    main()
