"""Scenario configuration, Monte Carlo orchestration and CSV output.

A configuration is a JSON document. Every field is optional; missing fields
take the defaults below (two agents with signal-to-noise 0.5 and 1.5, a
digital payoff on ``{0, 1}`` with even prior odds, ``T = 1``, ten auction
intervals, ``r = 0.05``, bid/ask multipliers ``(0.95, 1.05)`` and a true
fundamental of 1)::

    {
      "scenario": "omitter",            # omitter | attentive | strategic | cara
      "grid": {"T": 1.0, "m": 10},
      "r": 0.05,
      "payoff": {"kind": "digital", "x0": 0.0, "x1": 1.0, "p0": 0.5, "p1": 0.5},
      "agents": [{"sigma": 0.5}, {"sigma": 1.5}],
      "multipliers": [0.95, 1.05],
      "rho": 0.0,
      "true_x": 1.0,                    # null draws X from the prior per path
      "paths": 1000,
      "seed": 20240601,
      "threads": 1,
      "output": {"dir": "out", "csv": "aggregate.csv"}
    }

Agent entries accept ``sigma`` (true), ``belief_sigma``,
``belief_sigma_counterpart``, ``mode`` and ``lambda``.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bridge import TimeGrid, bridges_from_normals, make_grid, path_rng
from .market import ATTENTIVE, OMITTER, AgentState, BatchResult, simulate_batch
from .bridge import SignalParams
from .pricing import Numeraire, PayoffModel

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "AggregateResult",
    "DEFAULT_CONFIG",
    "SCENARIOS",
    "CHUNK_SIZE",
    "config_from_dict",
    "load_config",
    "generate_paths",
    "run_paths",
    "run_experiment",
    "aggregate",
    "emit_csv",
    "CSV_COLUMNS",
]

SCENARIOS = ("omitter", "attentive", "strategic", "cara")
CHUNK_SIZE = 256  # paths per work unit; independent of the thread count
CSV_COLUMNS = ("auction_index", "t", "agent_id", "mean_pnl", "se_pnl", "mean_posterior_truth", "trade_freq")

DEFAULT_CONFIG = {
    "scenario": "omitter",
    "grid": {"T": 1.0, "m": 10},
    "r": 0.05,
    "payoff": {"kind": "digital", "x0": 0.0, "x1": 1.0, "p0": 0.5, "p1": 0.5},
    "agents": [{"sigma": 0.5}, {"sigma": 1.5}],
    "multipliers": [0.95, 1.05],
    "rho": 0.0,
    "true_x": 1.0,
    "paths": 1000,
    "seed": 20240601,
    "threads": 1,
    "output": {"dir": "out", "csv": "aggregate.csv"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class AgentSpec:
    sigma: float
    belief_sigma: float | None = None
    belief_sigma_counterpart: float | None = None
    mode: str | None = None
    lam: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    T: float
    m: int
    r: float
    payoff: dict
    agents: tuple[AgentSpec, ...]
    multipliers: tuple[float, float]
    rho: float
    true_x: float | None
    paths: int
    seed: int
    threads: int = 1
    output_dir: str = "out"
    output_csv: str = "aggregate.csv"
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def grid(self) -> TimeGrid:
        return make_grid(self.T, self.m)

    @property
    def model(self) -> PayoffModel:
        return _payoff_model(self.payoff)

    @property
    def numeraire(self) -> Numeraire:
        return Numeraire(self.r, self.T)

    def agent_states(self) -> list[AgentState]:
        default_mode = OMITTER if self.scenario == "omitter" else ATTENTIVE
        out = []
        for j, spec in enumerate(self.agents):
            out.append(
                AgentState(
                    id=j,
                    params=SignalParams(spec.sigma, self.T),
                    mode=spec.mode or default_mode,
                    lam=spec.lam if self.scenario == "cara" else None,
                    belief_sigma=spec.belief_sigma,
                    belief_sigma_counterpart=spec.belief_sigma_counterpart,
                    strategic=self.scenario == "strategic",
                )
            )
        return out

    def with_overrides(self, **kw) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        for key, value in kw.items():
            if value is not None:
                raw[key] = value
        return config_from_dict(raw)


def _payoff_model(spec: dict) -> PayoffModel:
    kind = spec.get("kind")
    if kind == "digital":
        return PayoffModel.digital(spec.get("x0", 0.0), spec.get("x1", 1.0), spec.get("p0", 0.5), spec.get("p1", 0.5))
    if kind == "gaussian":
        return PayoffModel.gaussian()
    if kind == "tabulated":
        return PayoffModel.tabulated(spec["x"], spec["density"])
    raise ConfigError(f"payoff.kind: unknown payoff kind {kind!r}")


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "payoff":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _number(raw, name, cast=float):
    try:
        value = cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if cast is float and not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    return value


def config_from_dict(given: dict) -> ExperimentConfig:
    """Validate a configuration mapping, filling defaults."""
    if not isinstance(given, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(given) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
    raw = _merge(DEFAULT_CONFIG, given)

    scenario = raw["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {SCENARIOS}, got {scenario!r}")
    T = _number(raw["grid"].get("T"), "grid.T")
    if not T > 0:
        raise ConfigError("grid.T: must be positive")
    m_raw = raw["grid"].get("m")
    if isinstance(m_raw, bool) or not isinstance(m_raw, int) or m_raw < 2:
        raise ConfigError(f"grid.m: need an integer >= 2 (at least one auction before T), got {m_raw!r}")
    r = _number(raw["r"], "r")
    payoff = raw["payoff"]
    if not isinstance(payoff, dict):
        raise ConfigError("payoff: expected an object")
    try:
        _payoff_model(payoff)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"payoff: {exc}") from None

    agents_raw = raw["agents"]
    if not isinstance(agents_raw, list) or len(agents_raw) < 2:
        raise ConfigError("agents: need a list of at least two agents")
    agents = []
    lam_given = False
    for j, a in enumerate(agents_raw):
        if not isinstance(a, dict):
            raise ConfigError(f"agents[{j}]: expected an object")
        extra = set(a) - {"sigma", "belief_sigma", "belief_sigma_counterpart", "mode", "lambda"}
        if extra:
            raise ConfigError(f"agents[{j}].{sorted(extra)[0]}: unknown field")
        sigma = _number(a.get("sigma"), f"agents[{j}].sigma")
        if not sigma > 0:
            raise ConfigError(f"agents[{j}].sigma: must be positive")
        beliefs = {}
        for key in ("belief_sigma", "belief_sigma_counterpart"):
            if a.get(key) is not None:
                beliefs[key] = _number(a[key], f"agents[{j}].{key}")
                if not beliefs[key] > 0:
                    raise ConfigError(f"agents[{j}].{key}: must be positive")
        mode = a.get("mode")
        if mode is not None and mode not in (OMITTER, ATTENTIVE):
            raise ConfigError(f"agents[{j}].mode: expected 'omitter' or 'attentive', got {mode!r}")
        lam = a.get("lambda")
        if lam is not None:
            lam_given = True
            lam = _number(lam, f"agents[{j}].lambda")
            if not lam > 0:
                raise ConfigError(f"agents[{j}].lambda: must be positive")
        agents.append(AgentSpec(sigma, beliefs.get("belief_sigma"), beliefs.get("belief_sigma_counterpart"), mode, lam))

    if lam_given and scenario != "cara":
        warnings.warn("lambda is ignored outside the cara scenario", UserWarning, stacklevel=3)
    if scenario == "cara":
        if any(a.lam is None for a in agents):
            raise ConfigError("agents: every agent needs a lambda in the cara scenario")
        if payoff.get("kind") != "gaussian":
            raise ConfigError("payoff.kind: the cara scenario needs the gaussian payoff")
    if scenario == "strategic" and payoff.get("kind") != "gaussian":
        raise ConfigError("payoff.kind: the strategic scenario needs the gaussian payoff")
    if len(agents) > 2:
        modes = [a.mode or (OMITTER if scenario == "omitter" else ATTENTIVE) for a in agents]
        if ATTENTIVE in modes or scenario in ("strategic",):
            raise ConfigError("agents: more than two agents is supported in omitter mode only")

    mult = raw["multipliers"]
    if not isinstance(mult, (list, tuple)) or len(mult) != 2:
        raise ConfigError("multipliers: expected [bid, ask]")
    lo, hi = _number(mult[0], "multipliers[0]"), _number(mult[1], "multipliers[1]")
    if not (0 < lo <= 1.0 <= hi):
        raise ConfigError("multipliers: need 0 < bid <= 1 <= ask")
    rho = _number(raw["rho"], "rho")
    if not -1.0 <= rho <= 1.0:
        raise ConfigError("rho: must lie in [-1, 1]")
    if rho != 0.0 and len(agents) != 2:
        raise ConfigError("rho: correlated noise is defined for two agents only")
    true_x = raw["true_x"]
    if true_x is not None:
        true_x = _number(true_x, "true_x")
    paths = raw["paths"]
    if isinstance(paths, bool) or not isinstance(paths, int) or paths < 0:
        raise ConfigError(f"paths: need a non-negative integer, got {paths!r}")
    seed = raw["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: need a non-negative integer, got {seed!r}")
    threads = raw["threads"]
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"threads: need a positive integer, got {threads!r}")
    out = raw["output"] if isinstance(raw["output"], dict) else {}
    return ExperimentConfig(
        scenario=scenario,
        T=T,
        m=m_raw,
        r=r,
        payoff=payoff,
        agents=tuple(agents),
        multipliers=(lo, hi),
        rho=rho,
        true_x=true_x,
        paths=paths,
        seed=seed,
        threads=threads,
        output_dir=str(out.get("dir", "out")),
        output_csv=str(out.get("csv", "aggregate.csv")),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


# --------------------------------------------------------------------------
# simulation


def generate_paths(config: ExperimentConfig, start: int, stop: int):
    """Signals ``(n, N, m+1)`` and fundamentals ``(n,)`` for paths ``start .. stop-1``.

    Path ``k`` draws from its own generator, so its numbers do not depend on
    how paths are grouped.
    """
    grid = config.grid
    model = config.model
    N = len(config.agents)
    n = stop - start
    z = np.empty((n, N, grid.m))
    x = np.empty(n)
    for row, k in enumerate(range(start, stop)):
        rng = path_rng(config.seed, k)
        z[row] = rng.standard_normal((N, grid.m))
        x[row] = config.true_x if config.true_x is not None else float(model.sample(rng))
    beta = bridges_from_normals(grid, z)
    if N == 2 and config.rho != 0.0:
        rho = config.rho
        beta[:, 0] = rho * beta[:, 1] + math.sqrt(1.0 - rho * rho) * beta[:, 0]
    sigma = np.array([a.sigma for a in config.agents])
    xi = sigma[None, :, None] * grid.times[None, None, :] * x[:, None, None] + beta
    return xi, x


def _run_chunk(config: ExperimentConfig, start: int, stop: int) -> BatchResult:
    xi, x = generate_paths(config, start, stop)
    return simulate_batch(
        config.agent_states(), xi, x, config.grid, config.model, config.numeraire, config.multipliers, config.rho
    )


def run_paths(config: ExperimentConfig, threads: int | None = None) -> BatchResult:
    """Simulate all paths; chunks run in parallel and are joined in order."""
    threads = config.threads if threads is None else threads
    grid = config.grid
    N = len(config.agents)
    bounds = [(a, min(a + CHUNK_SIZE, config.paths)) for a in range(0, config.paths, CHUNK_SIZE)]
    if not bounds:
        shape = (0, grid.m - 1, N)
        return BatchResult(grid, np.zeros(0), np.zeros(shape), np.zeros(shape), np.zeros(shape, dtype=np.int8), np.zeros((0, grid.m - 1)), np.zeros(shape))
    if threads == 1:
        parts = [_run_chunk(config, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(config, *ab), bounds))
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
    return BatchResult(grid, cat("x"), cat("prices"), cat("posterior_truth"), cat("quantities"), cat("clearing"), cat("pnl"))


@dataclass(frozen=True)
class AggregateResult:
    """Cross-path summaries; per-auction arrays have shape ``(m-1, n_agents)``."""

    times: np.ndarray
    n_paths: int
    mean_pnl: np.ndarray
    se_pnl: np.ndarray
    mean_posterior_truth: np.ndarray
    trade_freq: np.ndarray  # (m-1,)
    mean_total_pnl: np.ndarray  # (n_agents,)
    se_total_pnl: np.ndarray
    total_pnl_quantiles: np.ndarray  # (5, n_agents) at 5, 25, 50, 75, 95 %

    @property
    def n_agents(self) -> int:
        return self.mean_pnl.shape[1]


def _se(values: np.ndarray, axis: int = 0) -> np.ndarray:
    n = values.shape[axis]
    if n < 2:
        return np.full(np.delete(values.shape, axis), np.nan)
    return values.std(axis=axis, ddof=1) / math.sqrt(n)


def aggregate(batch: BatchResult) -> AggregateResult:
    n = batch.pnl.shape[0]
    N = batch.pnl.shape[2]
    m1 = batch.grid.m - 1
    times = batch.grid.times[1:-1]
    if n == 0:
        nan = np.full((m1, N), np.nan)
        return AggregateResult(times, 0, nan, nan, nan, np.full(m1, np.nan), np.full(N, np.nan), np.full(N, np.nan), np.full((5, N), np.nan))
    total = batch.pnl.sum(axis=1)
    return AggregateResult(
        times=times,
        n_paths=n,
        mean_pnl=batch.pnl.mean(axis=0),
        se_pnl=_se(batch.pnl),
        mean_posterior_truth=batch.posterior_truth.mean(axis=0),
        trade_freq=batch.traded.mean(axis=0),
        mean_total_pnl=total.mean(axis=0),
        se_total_pnl=_se(total),
        total_pnl_quantiles=np.quantile(total, [0.05, 0.25, 0.5, 0.75, 0.95], axis=0),
    )


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> AggregateResult:
    return aggregate(run_paths(config, threads))


def emit_csv(result: AggregateResult, path) -> None:
    """One row per auction and agent; floats are written with ``repr`` so they round-trip."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        if result.n_paths == 0:
            return
        for i, t in enumerate(result.times):
            for j in range(result.n_agents):
                writer.writerow(
                    [
                        i + 1,
                        repr(float(t)),
                        j,
                        repr(float(result.mean_pnl[i, j])),
                        repr(float(result.se_pnl[i, j])),
                        repr(float(result.mean_posterior_truth[i, j])),
                        repr(float(result.trade_freq[i])),
                    ]
                )
