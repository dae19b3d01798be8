"""Quoting, matching, clearing and settlement for sequential auctions.

Two code paths share the same rules:

* :func:`run_auction_sequence` walks one market path with explicit agent
  objects, quotes and ledgers. It is the readable reference.
* :func:`simulate_batch` runs many paths at once on arrays and is what the
  Monte Carlo experiments use.

Auctions take place at grid indices ``1 .. m-1``; contracts settle at ``T``
against the realised fundamental. Trades are one unit. On a trade the
attentive agents back out the counterpart's signal from its revealed
(unscaled) price and condition on it from the next auction on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .analytics import QualityInputs, ab_coefficients, expected_abs_gaussian
from .bridge import SignalParams, SignalPath, TimeGrid
from .pricing import (
    CounterpartInfo,
    EffectiveInfo,
    Numeraire,
    PayoffModel,
    cara_clearing_price,
    cara_quotes,
    invert_coefficients,
    likelihood_coefficients,
    posterior_mean,
    posterior_on_truth,
    price,
)
from .strategy import TRADE, StrategyContext, decide

__all__ = [
    "StaleInfoError",
    "AgentState",
    "Quote",
    "Match",
    "AuctionRecord",
    "TradeLedger",
    "SettlementReport",
    "SimulationRecord",
    "BatchResult",
    "quote",
    "match_and_clear",
    "match_quotes",
    "run_auction_sequence",
    "settle",
    "simulate_batch",
]

OMITTER = "omitter"
ATTENTIVE = "attentive"


class StaleInfoError(RuntimeError):
    """An agent was asked to quote on information from another time."""


@dataclass(frozen=True)
class AgentState:
    """One trader.

    ``params.sigma`` generates the agent's signal. ``belief_sigma`` is what
    the agent thinks its own signal-to-noise is (defaults to the true value)
    and ``belief_sigma_counterpart`` what it attributes to the other side.
    """

    id: int
    params: SignalParams
    mode: str = OMITTER
    info: EffectiveInfo | None = None
    lam: float | None = None
    belief_sigma: float | None = None
    belief_sigma_counterpart: float | None = None
    strategic: bool = False

    def __post_init__(self):
        if self.mode not in (OMITTER, ATTENTIVE):
            raise ValueError(f"unknown agent mode {self.mode!r}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("risk aversion must be positive")

    @property
    def sigma(self) -> float:
        return self.params.sigma if self.belief_sigma is None else self.belief_sigma

    def counterpart_sigma(self, default: float) -> float:
        return default if self.belief_sigma_counterpart is None else self.belief_sigma_counterpart


@dataclass(frozen=True)
class Quote:
    agent_id: int
    t: float
    bid: float
    ask: float
    price: float


@dataclass(frozen=True)
class Match:
    price: float
    buyer: int
    seller: int


@dataclass(frozen=True)
class AuctionRecord:
    index: int
    t: float
    quotes: tuple[Quote, ...]
    match: Match | None
    quantities: tuple[int, ...]
    s_before: float
    s_after: float


@dataclass
class TradeLedger:
    n_agents: int
    records: list[AuctionRecord] = field(default_factory=list)

    def append(self, record: AuctionRecord):
        if sum(record.quantities) != 0:
            raise AssertionError("market clearing violated")
        self.records.append(record)

    @property
    def holdings(self) -> np.ndarray:
        """Cumulative positions after each auction, shape ``(n_auctions, n_agents)``."""
        if not self.records:
            return np.zeros((0, self.n_agents), dtype=int)
        return np.cumsum([r.quantities for r in self.records], axis=0)

    @property
    def trades(self) -> list[AuctionRecord]:
        return [r for r in self.records if r.match is not None]


@dataclass(frozen=True)
class SettlementReport:
    per_trade: np.ndarray  # (n_trades, n_agents)
    totals: np.ndarray
    zero_sum: bool


@dataclass(frozen=True)
class SimulationRecord:
    grid: TimeGrid
    signals: np.ndarray  # (n_agents, m+1)
    prices: np.ndarray  # (m-1, n_agents), unscaled signal-based prices
    posterior_truth: np.ndarray  # (m-1, n_agents)
    ledger: TradeLedger
    settlement: SettlementReport
    x: float


# --------------------------------------------------------------------------
# single auction


def quote(agent: AgentState, t: float, model: PayoffModel, numeraire: Numeraire, multipliers=(1.0, 1.0)) -> Quote:
    """Bid and ask of ``agent`` at ``t`` from its effective information."""
    lo, hi = multipliers
    if not lo <= 1.0 <= hi:
        raise ValueError("multipliers must satisfy bid <= 1 <= ask")
    info = agent.info
    if info is None or info.t != t:
        raise StaleInfoError(f"agent {agent.id} holds information for t={None if info is None else info.t}, not {t}")
    s = price(model, info, numeraire)
    if agent.lam is not None:
        if model.kind != "gaussian":
            raise ValueError("exponential-utility quotes need the Gaussian payoff model")
        bid, ask = cara_quotes(info, agent.lam, numeraire)
        return Quote(agent.id, t, bid, ask, s)
    return Quote(agent.id, t, lo * s, hi * s, s)


def match_quotes(quotes, lambdas=None) -> Match | None:
    """Best crossed pair among ``quotes``.

    The pair with the largest ``bid - ask`` surplus trades; equal surpluses go
    to the lowest buyer index, then the lowest seller index. With two agents
    crossing both ways this makes the higher-priced agent the buyer.
    Risk-neutral trades clear at the mid of the crossing quotes; with
    ``lambdas`` the clearing price weights the seller's ask and the buyer's bid
    by the respective risk aversions.
    """
    best = None
    for i, qb in enumerate(quotes):
        for j, qs in enumerate(quotes):
            if i == j or qb.bid < qs.ask:
                continue
            surplus = qb.bid - qs.ask
            if best is None or surplus > best[0]:
                best = (surplus, i, j)
    if best is None:
        return None
    _, i, j = best
    qb, qs = quotes[i], quotes[j]
    if lambdas is None:
        clearing = 0.5 * (qb.bid + qs.ask)
    else:
        clearing = cara_clearing_price(qs.ask, qb.bid, lambdas[j], lambdas[i])
    return Match(clearing, buyer=qb.agent_id, seller=qs.agent_id)


def match_and_clear(q1: Quote, q2: Quote, lambdas=None) -> Match | None:
    if q1.t != q2.t:
        raise ValueError("quotes belong to different auctions")
    return match_quotes((q1, q2), lambdas)


def settle(ledger: TradeLedger, x: float) -> SettlementReport:
    """Profit ``q (x - S*)`` per trade and agent."""
    rows = []
    for r in ledger.trades:
        row = np.zeros(ledger.n_agents)
        for j, qj in enumerate(r.quantities):
            if qj:
                row[j] = qj * (x - r.match.price)
        rows.append(row)
    per_trade = np.array(rows).reshape(-1, ledger.n_agents)
    totals = per_trade.sum(axis=0)
    zero_sum = bool(np.all(per_trade.sum(axis=1) == 0.0))
    return SettlementReport(per_trade, totals, zero_sum)


# --------------------------------------------------------------------------
# one path with explicit agents


def _own_info(agent: AgentState, t: float, xi: float, T: float, counterpart, rho: float) -> EffectiveInfo:
    cp = counterpart if agent.mode == ATTENTIVE else None
    return EffectiveInfo(t=t, xi=float(xi), sigma=agent.sigma, T=T, counterpart=cp, rho=rho)


def _strategic_context(agent: AgentState, other_sigma: float, model, grid, info) -> StrategyContext:
    """Gain function from the agent's current posterior, held fixed over time."""
    A, B = info.coefficients()
    post_mean, post_var = B / (1.0 + A), 1.0 / (1.0 + A)
    abs_x = float(expected_abs_gaussian(post_mean, post_var))
    base = QualityInputs(grid[1], 0.0, agent.sigma, other_sigma, model, grid.T)

    def gain(t, s):
        return -ab_coefficients(base.at(grid[t], grid[s])).a * abs_x

    return StrategyContext(grid, gain)


def run_auction_sequence(
    agents,
    paths,
    model: PayoffModel,
    numeraire: Numeraire,
    multipliers=(1.0, 1.0),
    rho: float = 0.0,
    x: float | None = None,
) -> SimulationRecord:
    """Run the auctions at ``t_1 .. t_{m-1}`` for one market path.

    ``paths[j]`` is agent ``j``'s signal path; the fundamental used at
    settlement is ``x`` or, if omitted, the one stored in the first path.
    """
    agents = list(agents)
    n = len(agents)
    if n < 2 or len(paths) != n:
        raise ValueError("need at least two agents and one signal path per agent")
    grid = paths[0].grid
    if any(not np.array_equal(p.grid.times, grid.times) for p in paths):
        raise ValueError("all agents must share the same grid")
    if n > 2 and any(a.mode == ATTENTIVE for a in agents):
        raise ValueError("attentive mode is defined for two agents only")
    if any(a.strategic for a in agents) and model.kind != "gaussian":
        raise ValueError("strategic quoting needs the Gaussian payoff model")
    x = paths[0].x if x is None else x
    T = grid.T
    lambdas = [a.lam for a in agents]
    use_cara = all(lam is not None for lam in lambdas)
    if any(lam is not None for lam in lambdas) and not use_cara:
        raise ValueError("either every agent or no agent carries a risk aversion")
    true_sigma = [a.params.sigma for a in agents]

    ledger = TradeLedger(n)
    counterpart = [None] * n
    s_idx = 0
    prices = np.zeros((grid.m - 1, n))
    truth = np.zeros((grid.m - 1, n))
    for i in range(1, grid.m):
        t = grid[i]
        agents = [replace(a, info=_own_info(a, t, paths[j].xi[i], T, counterpart[j], rho)) for j, a in enumerate(agents)]
        quotes = [quote(a, t, model, numeraire, multipliers) for a in agents]
        for j, (a, qj) in enumerate(zip(agents, quotes)):
            prices[i - 1, j] = qj.price
            A, B = a.info.coefficients()
            truth[i - 1, j] = float(posterior_on_truth(model, A, B, x))
        willing = [True] * n
        for j, a in enumerate(agents):
            if a.strategic:
                other = a.counterpart_sigma(true_sigma[1 - j])
                ctx = _strategic_context(a, other, model, grid, a.info)
                willing[j] = decide(i, s_idx, ctx) == TRADE
        live = [qj for qj, w in zip(quotes, willing) if w]
        lam_live = [lam for lam, w in zip(lambdas, willing) if w] if use_cara else None
        match = match_quotes(live, lam_live) if len(live) >= 2 else None
        quantities = [0] * n
        s_before = grid[s_idx]
        if match is not None:
            ids = [a.id for a in agents]
            b, sl = ids.index(match.buyer), ids.index(match.seller)
            quantities[b], quantities[sl] = 1, -1
            if n == 2:
                for j, a in enumerate(agents):
                    if a.mode == ATTENTIVE:
                        counterpart[j] = _learn(a, agents[1 - j], quotes[1 - j].price, t, s_idx, paths[j], model, numeraire, rho, true_sigma[1 - j])
            s_idx = i
        ledger.append(AuctionRecord(i, t, tuple(quotes), match, tuple(quantities), s_before, grid[s_idx]))
    report = settle(ledger, x)
    signals = np.stack([p.xi for p in paths])
    return SimulationRecord(grid, signals, prices, truth, ledger, report, float(x))


def _learn(agent, other, other_price, t, s_idx, own_path, model, numeraire, rho, other_true_sigma):
    """Counterpart signal recovered by ``agent`` from ``other``'s revealed price."""
    sigma_c = agent.counterpart_sigma(other_true_sigma)
    grid = own_path.grid
    if other.mode == ATTENTIVE and s_idx > 0:
        # the counterpart also holds our signal from the previous trade
        cp = CounterpartInfo(grid[s_idx], float(own_path.xi[s_idx]), agent.sigma)
    else:
        cp = None
    A, b0 = likelihood_coefficients(t, 0.0, sigma_c, grid.T, *_cp_args(cp, rho))
    _, b_one = likelihood_coefficients(t, 1.0, sigma_c, grid.T, *_cp_args(cp, rho))
    target = other_price / numeraire.discount(t)
    xi_c = float(invert_coefficients(model, target, A, b0, b_one - b0))
    return CounterpartInfo(t, xi_c, sigma_c)


def _cp_args(cp, rho):
    if cp is None:
        return ()
    return (cp.s, cp.xi, cp.sigma, rho)


# --------------------------------------------------------------------------
# many paths on arrays


@dataclass(frozen=True)
class BatchResult:
    """Per-path, per-auction arrays; auction axis covers indices ``1 .. m-1``."""

    grid: TimeGrid
    x: np.ndarray  # (n,)
    prices: np.ndarray  # (n, m-1, N)
    posterior_truth: np.ndarray  # (n, m-1, N)
    quantities: np.ndarray  # (n, m-1, N) in {-1, 0, 1}
    clearing: np.ndarray  # (n, m-1), NaN without trade
    pnl: np.ndarray  # (n, m-1, N)

    @property
    def traded(self) -> np.ndarray:
        return np.any(self.quantities != 0, axis=-1)


def _batch_coefficients(model, t, xi, sigma, T, s, xi_c, sigma_c, rho):
    if xi_c is None:
        return likelihood_coefficients(t, xi, sigma, T)
    return likelihood_coefficients(t, xi, sigma, T, s, xi_c, sigma_c, rho)


def simulate_batch(
    agents,
    xi: np.ndarray,
    x: np.ndarray,
    grid: TimeGrid,
    model: PayoffModel,
    numeraire: Numeraire,
    multipliers=(1.0, 1.0),
    rho: float = 0.0,
) -> BatchResult:
    """Vectorised counterpart of :func:`run_auction_sequence`.

    ``xi`` has shape ``(n_paths, n_agents, m + 1)``; ``x`` holds one
    fundamental per path. Same quoting, matching and learning rules.
    """
    agents = list(agents)
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    n_paths, N, width = xi.shape
    if width != len(grid) or N != len(agents) or x.shape != (n_paths,):
        raise ValueError("signal array does not match agents, grid or fundamentals")
    if N > 2 and any(a.mode == ATTENTIVE for a in agents):
        raise ValueError("attentive mode is defined for two agents only")
    strategic = [a.strategic for a in agents]
    if any(strategic) and model.kind != "gaussian":
        raise ValueError("strategic quoting needs the Gaussian payoff model")
    lambdas = [a.lam for a in agents]
    use_cara = all(lam is not None for lam in lambdas)
    if any(lam is not None for lam in lambdas) and not use_cara:
        raise ValueError("either every agent or no agent carries a risk aversion")
    if use_cara and model.kind != "gaussian":
        raise ValueError("exponential-utility quotes need the Gaussian payoff model")
    lo_mult, hi_mult = multipliers
    if not lo_mult <= 1.0 <= hi_mult:
        raise ValueError("multipliers must satisfy bid <= 1 <= ask")

    T = grid.T
    m = grid.m
    sig = np.array([a.sigma for a in agents])
    true_sig = [a.params.sigma for a in agents]
    sig_c = np.array([a.counterpart_sigma(true_sig[1 - j]) if N == 2 else 0.0 for j, a in enumerate(agents)])
    attentive = [a.mode == ATTENTIVE for a in agents]
    rows = np.arange(n_paths)

    prices = np.zeros((n_paths, m - 1, N))
    truth = np.zeros((n_paths, m - 1, N))
    qty = np.zeros((n_paths, m - 1, N), dtype=np.int8)
    clearing = np.full((n_paths, m - 1), np.nan)
    s_idx = np.zeros(n_paths, dtype=int)
    cp_xi = np.zeros((n_paths, N))

    for i in range(1, m):
        t = grid[i]
        disc = numeraire.discount(t)
        s_time = grid.times[s_idx]
        coeffs = []
        for j in range(N):
            has_cp = cp_xi[:, j] if attentive[j] else None
            A, B = _batch_coefficients(model, t, xi[:, j, i], sig[j], T, s_time, has_cp, sig_c[j], rho)
            coeffs.append((A, B))
            mean = posterior_mean(model, A, B)
            prices[:, i - 1, j] = disc * mean
            truth[:, i - 1, j] = posterior_on_truth(model, A, B, x)
        S = prices[:, i - 1, :]
        if use_cara:
            half = np.stack([0.5 * lambdas[j] / (1.0 + coeffs[j][0]) for j in range(N)], axis=-1) * disc
            bid, ask = S - half, S + half
        else:
            bid, ask = lo_mult * S, hi_mult * S
        willing = np.ones((n_paths, N), dtype=bool)
        for j in range(N):
            if strategic[j]:
                A, B = coeffs[j]
                willing[:, j] = _batch_decide(i, s_idx, grid, sig[j], sig_c[j], B / (1.0 + A), 1.0 / (1.0 + A), model)

        # best crossed pair, scanning buyers then sellers in index order
        best = np.full(n_paths, -np.inf)
        buyer = np.full(n_paths, -1)
        seller = np.full(n_paths, -1)
        for b in range(N):
            for sl in range(N):
                if b == sl:
                    continue
                surplus = bid[:, b] - ask[:, sl]
                ok = (surplus >= 0) & willing[:, b] & willing[:, sl] & (surplus > best)
                best = np.where(ok, surplus, best)
                buyer = np.where(ok, b, buyer)
                seller = np.where(ok, sl, seller)
        trade = buyer >= 0
        if not np.any(trade):
            continue
        tb, ts = buyer[trade], seller[trade]
        rt = rows[trade]
        bb, aa = bid[rt, tb], ask[rt, ts]
        if use_cara:
            lam = np.array(lambdas)
            price_star = cara_clearing_price_vec(aa, bb, lam[ts], lam[tb])
        else:
            price_star = 0.5 * (bb + aa)
        clearing[rt, i - 1] = price_star
        qty[rt, i - 1, tb] = 1
        qty[rt, i - 1, ts] = -1

        if N == 2:
            new_cp = cp_xi.copy()
            for j in range(2):
                if not attentive[j]:
                    continue
                k = 1 - j
                s_prev = s_idx[trade]
                own_prev = xi[rt, j, s_prev]
                if attentive[k]:
                    cp_args = (grid.times[s_prev], own_prev, sig[j], rho)
                    A0, b0 = likelihood_coefficients(t, np.zeros(rt.size), sig_c[j], T, *cp_args)
                    _, b1 = likelihood_coefficients(t, np.ones(rt.size), sig_c[j], T, *cp_args)
                else:
                    A0, b0 = likelihood_coefficients(t, np.zeros(rt.size), sig_c[j], T)
                    _, b1 = likelihood_coefficients(t, np.ones(rt.size), sig_c[j], T)
                target = S[rt, k] / disc
                new_cp[rt, j] = invert_coefficients(model, target, A0, b0, b1 - b0)
            cp_xi = new_cp
        s_idx = np.where(trade, i, s_idx)

    pnl = qty * (x[:, None, None] - np.nan_to_num(clearing)[:, :, None])
    return BatchResult(grid, x, prices, truth, qty, clearing, pnl)


def cara_clearing_price_vec(ask_seller, bid_buyer, lam_seller, lam_buyer):
    w = lam_seller / (lam_seller + lam_buyer)
    return w * ask_seller + (1.0 - w) * bid_buyer


def _batch_decide(i, s_idx, grid, sigma_own, sigma_other, post_mean, post_var, model):
    """Vectorised trade rule for agents quoting on a Gaussian posterior."""
    abs_x = expected_abs_gaussian(post_mean, post_var)
    base = QualityInputs(grid[1], 0.0, sigma_own, sigma_other, model, grid.T)
    a = {}

    def edge(t, s):
        key = (t, s)
        if key not in a:
            a[key] = -ab_coefficients(base.at(grid[t], grid[s])).a
        return a[key]

    now = np.array([edge(i, s) for s in s_idx]) * abs_x
    ok = now > 0
    if i == grid.m - 1:
        return ok
    adj = np.array([edge(i, s) - (edge(i + 1, s) - edge(i + 1, i)) for s in s_idx]) * abs_x
    return ok & (adj > 0)
