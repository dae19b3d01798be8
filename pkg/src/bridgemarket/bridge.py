"""Brownian bridges and the signal processes built on them.

A signal observed by an agent is ``xi_t = sigma * t * X + beta_t`` where
``beta`` is a standard Brownian bridge pinned to zero at ``0`` and ``T``.
Bridges are sampled exactly on a grid with the sequential conditional-Gaussian
construction, so grid marginals carry no discretisation bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "BridgePair",
    "SignalParams",
    "SignalPath",
    "SignalView",
    "make_grid",
    "kappa",
    "path_rng",
    "sample_bridges",
    "bridges_from_normals",
    "sample_bridge_pair",
    "signal_path",
    "simulate_sde_bridge",
]


@dataclass(frozen=True)
class TimeGrid:
    """Auction times ``0 = t_0 < t_1 < ... < t_m = T``."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a grid needs at least two points (m >= 1)")
        if times[0] != 0.0:
            raise ValueError("grid must start at t_0 = 0")
        if not np.all(np.diff(times) > 0):
            raise ValueError("grid times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def m(self) -> int:
        return self.times.size - 1

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i):
        return self.times[i]


def make_grid(T: float, m: int) -> TimeGrid:
    """Uniform grid with spacing ``T / m``."""
    if not T > 0:
        raise ValueError(f"horizon T must be positive, got {T!r}")
    if int(m) != m or m < 1:
        raise ValueError(f"number of intervals m must be a positive integer, got {m!r}")
    m = int(m)
    times = np.arange(m + 1, dtype=float) * (T / m)
    times[-1] = T
    return TimeGrid(times)


def kappa(t, T: float):
    """Time change ``T / (T - t)``; diverges at ``t = T``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr >= T):
        raise ValueError(f"kappa is defined for 0 <= t < T (T={T}), got t={t!r}")
    out = T / (T - t_arr)
    return float(out) if out.ndim == 0 else out


def path_rng(seed: int, index: int | None = None) -> np.random.Generator:
    """Generator for path ``index`` of a run seeded with ``seed``.

    Uses ``SeedSequence`` spawn keys so that path ``k`` draws the same numbers
    no matter how paths are distributed over workers.
    """
    if index is None:
        return np.random.default_rng(np.random.SeedSequence(seed))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


def bridges_from_normals(grid: TimeGrid, z: np.ndarray) -> np.ndarray:
    """Map standard normals of shape ``(..., m)`` to bridges of shape ``(..., m + 1)``.

    Given ``beta(t_i)``, ``beta(t_{i+1})`` is Gaussian with mean
    ``beta(t_i) (T - t_{i+1}) / (T - t_i)`` and variance
    ``(t_{i+1} - t_i)(T - t_{i+1}) / (T - t_i)``. The last normal is unused
    because the bridge is pinned at ``T``.
    """
    t = grid.times
    T = grid.T
    m = grid.m
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != m:
        raise ValueError(f"need {m} normals per bridge, got {z.shape[-1]}")
    out = np.zeros(z.shape[:-1] + (m + 1,))
    for i in range(m - 1):
        ratio = (T - t[i + 1]) / (T - t[i])
        var = (t[i + 1] - t[i]) * ratio
        out[..., i + 1] = out[..., i] * ratio + np.sqrt(var) * z[..., i]
    # last column stays exactly 0
    return out


def sample_bridges(grid: TimeGrid, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``n_paths`` standard Brownian bridges on ``grid``, shape ``(n_paths, m + 1)``."""
    return bridges_from_normals(grid, rng.standard_normal((n_paths, grid.m)))


@dataclass(frozen=True)
class BridgePair:
    """Two correlated bridges on a common grid.

    ``beta1 = rho * beta2 + sqrt(1 - rho^2) * beta_bar`` with ``beta2`` and
    ``beta_bar`` independent standard bridges.
    """

    beta1: np.ndarray
    beta2: np.ndarray
    rho: float
    beta_bar: np.ndarray = field(repr=False, default=None)


def sample_bridge_pair(grid: TimeGrid, rho: float, seed: int) -> BridgePair:
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho!r}")
    rng = path_rng(seed)
    both = sample_bridges(grid, 2, rng)
    beta2, beta_bar = both[0], both[1]
    beta1 = rho * beta2 + np.sqrt(1.0 - rho * rho) * beta_bar
    return BridgePair(beta1=beta1, beta2=beta2, rho=float(rho), beta_bar=beta_bar)


@dataclass(frozen=True)
class SignalParams:
    sigma: float
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma!r}")


@dataclass(frozen=True)
class SignalView:
    """What an agent sees of its signal: the path, never the fundamental."""

    xi: np.ndarray
    params: SignalParams
    grid: TimeGrid


@dataclass(frozen=True)
class SignalPath:
    """A realised signal path together with the fundamental that generated it.

    ``x`` is kept for settlement and for test oracles. Agent-facing code should
    use :meth:`view`.
    """

    xi: np.ndarray
    params: SignalParams
    grid: TimeGrid
    x: float | np.ndarray = field(repr=False)

    def view(self) -> SignalView:
        return SignalView(self.xi, self.params, self.grid)


def signal_path(bridge: np.ndarray, params: SignalParams, x, grid: TimeGrid) -> SignalPath:
    """``xi(t_i) = sigma * t_i * x + beta(t_i)`` pointwise.

    ``bridge`` may hold several paths along its leading axis, in which case
    ``x`` is either a scalar or one value per path.
    """
    bridge = np.asarray(bridge, dtype=float)
    if bridge.shape[-1] != len(grid):
        raise ValueError("bridge and grid lengths differ")
    if grid.T != params.T:
        raise ValueError("grid horizon does not match SignalParams.T")
    x_arr = np.asarray(x, dtype=float)
    xi = params.sigma * grid.times * x_arr[..., None] + bridge
    x_out = float(x_arr) if x_arr.ndim == 0 else x_arr
    return SignalPath(xi=xi, params=params, grid=grid, x=x_out)


def _sde_drift(xi, t: float, sigma: float, x: float, T: float):
    if t >= T:
        raise ValueError("bridge SDE drift is undefined at t = T")
    return (sigma * x - xi / T) * (T / (T - t))


def simulate_sde_bridge(
    grid: TimeGrid,
    params: SignalParams,
    x: float,
    seed: int,
    n_paths: int | None = None,
) -> SignalPath | np.ndarray:
    """Euler-Maruyama path of ``d xi = (sigma x - xi / T) kappa_t dt + dB``.

    Only meant as a distributional cross-check of :func:`signal_path`. With
    ``n_paths`` given, returns an ``(n_paths, len(grid))`` array instead of a
    single :class:`SignalPath`.
    """
    rng = path_rng(seed)
    n = 1 if n_paths is None else int(n_paths)
    t = grid.times
    xi = np.zeros((n, len(t)))
    dB = rng.standard_normal((n, grid.m)) * np.sqrt(np.diff(t))
    for i in range(grid.m):
        drift = _sde_drift(xi[:, i], t[i], params.sigma, x, params.T)
        xi[:, i + 1] = xi[:, i] + drift * (t[i + 1] - t[i]) + dB[:, i]
    if n_paths is None:
        return SignalPath(xi=xi[0], params=params, grid=grid, x=float(x))
    return xi
