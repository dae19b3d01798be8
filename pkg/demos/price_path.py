"""Digital contract prices of two agents along one market path.

Run: python3 demos/price_path.py
"""

import numpy as np

from bridgemarket.bridge import SignalParams, make_grid, sample_bridges, signal_path
from bridgemarket.market import AgentState, run_auction_sequence
from bridgemarket.pricing import Numeraire, PayoffModel


def main():
    grid = make_grid(1.0, 20)
    model = PayoffModel.digital()
    num = Numeraire(0.05, 1.0)
    x = 1.0
    rng = np.random.default_rng(2024)
    agents = [AgentState(0, SignalParams(0.5, 1.0)), AgentState(1, SignalParams(2.0, 1.0))]
    paths = [signal_path(sample_bridges(grid, 1, rng)[0], a.params, x, grid) for a in agents]
    rec = run_auction_sequence(agents, paths, model, num, multipliers=(0.95, 1.05))
    trades = {r.index: r.match for r in rec.ledger.trades}
    print(f"{'i':>3} {'t':>5} {'S_low':>8} {'S_high':>8}  trade")
    for i in range(1, grid.m):
        m = trades.get(i)
        note = f"agent {m.buyer} buys at {m.price:.4f}" if m else ""
        print(f"{i:>3} {grid[i]:5.2f} {rec.prices[i - 1, 0]:8.4f} {rec.prices[i - 1, 1]:8.4f}  {note}")
    print("settlement P&L:", rec.settlement.totals.round(4))


if __name__ == "__main__":
    main()
