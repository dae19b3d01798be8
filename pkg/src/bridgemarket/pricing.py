"""Signal-based posteriors and prices.

Every likelihood used here is Gaussian in the signal values, so as a function
of the payoff ``x`` its logarithm is ``B x - A x^2 / 2`` up to a constant. The
pair ``(A, B)`` (see :func:`likelihood_coefficients`) carries all the
information an agent has, whether it holds only its own signal or also the
counterpart's signal revealed at the last trade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import trapezoid

from .bridge import SignalPath, kappa

__all__ = [
    "NumericUnderflowError",
    "PayoffModel",
    "CounterpartInfo",
    "EffectiveInfo",
    "Numeraire",
    "GaussianPosterior",
    "GridPosterior",
    "log_likelihood_exponent",
    "conditional_corr",
    "likelihood_coefficients",
    "univariate_likelihood",
    "product_likelihood",
    "joint_likelihood",
    "effective_likelihood",
    "posterior",
    "posterior_mean",
    "posterior_on_truth",
    "gaussian_price",
    "two_source_gaussian_price",
    "price",
    "invert_signal",
    "invert_coefficients",
    "innovation_increments",
    "cara_quotes",
    "cara_clearing_price",
    "cara_expected_utility",
]


class NumericUnderflowError(FloatingPointError):
    """Posterior weights vanished even after exponent shifting."""


@dataclass(frozen=True)
class PayoffModel:
    """Prior law of the fundamental ``X`` (the payoff is ``X`` itself).

    Build instances with :meth:`digital`, :meth:`gaussian` or
    :meth:`tabulated`. For ``tabulated`` the ``prior`` holds density values
    on ``support`` and integrals use the trapezoid rule; for ``digital`` it
    holds point masses.
    """

    kind: str
    support: np.ndarray | None = None
    prior: np.ndarray | None = None

    @classmethod
    def digital(cls, x0: float = 0.0, x1: float = 1.0, p0: float = 0.5, p1: float = 0.5):
        if not x1 > x0:
            raise ValueError("digital payoff requires x1 > x0")
        if p0 < 0 or p1 < 0 or not math.isclose(p0 + p1, 1.0, abs_tol=1e-12):
            raise ValueError("digital prior masses must be non-negative and sum to 1")
        return cls("digital", np.array([x0, x1], dtype=float), np.array([p0, p1], dtype=float))

    @classmethod
    def gaussian(cls):
        """Standard normal prior."""
        return cls("gaussian")

    @classmethod
    def tabulated(cls, support, density):
        support = np.asarray(support, dtype=float)
        density = np.asarray(density, dtype=float)
        if support.ndim != 1 or support.shape != density.shape or support.size < 3:
            raise ValueError("tabulated prior needs matching 1-d grid and density arrays")
        if not np.all(np.diff(support) > 0):
            raise ValueError("tabulated grid must be strictly increasing")
        if np.any(density < 0):
            raise ValueError("prior density must be non-negative")
        total = trapezoid(density, support)
        if not total > 0:
            raise ValueError("prior density integrates to zero")
        return cls("tabulated", support, density / total)

    @classmethod
    def tabulated_from_pdf(cls, pdf, mean: float, sd: float, n: int = 4001):
        """Tabulate ``pdf`` on a grid spanning ``mean +/- 8 sd``."""
        grid = np.linspace(mean - 8.0 * sd, mean + 8.0 * sd, n)
        return cls.tabulated(grid, pdf(grid))

    def __post_init__(self):
        if self.kind not in ("digital", "gaussian", "tabulated"):
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.kind != "gaussian" and (self.support is None or self.prior is None):
            raise ValueError(f"{self.kind} payoff needs a support and prior")

    def _integrate(self, values):
        if self.kind == "digital":
            return np.sum(values, axis=-1)
        return trapezoid(values, self.support, axis=-1)

    @property
    def mean(self) -> float:
        if self.kind == "gaussian":
            return 0.0
        return float(self._integrate(self.support * self.prior))

    @property
    def sd(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        second = float(self._integrate(self.support**2 * self.prior))
        return math.sqrt(max(second - self.mean**2, 0.0))

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "digital":
            return rng.choice(self.support, size=size, p=self.prior)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (self.prior[1:] + self.prior[:-1]) * np.diff(self.support))])
        cdf /= cdf[-1]
        return np.interp(rng.random(size), cdf, self.support)


@dataclass(frozen=True)
class CounterpartInfo:
    """Counterpart signal value ``xi`` recovered at the last trade time ``s``."""

    s: float
    xi: float
    sigma: float


@dataclass(frozen=True)
class EffectiveInfo:
    """An agent's information just before the auction at time ``t``.

    Holds its own signal ``xi`` at ``t`` and, once a trade has happened, the
    counterpart's signal at the last trade time. ``rho`` is the correlation of
    the two bridge noises.
    """

    t: float
    xi: float
    sigma: float
    T: float
    counterpart: CounterpartInfo | None = None
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t < self.T:
            raise ValueError(f"information time must satisfy 0 <= t < T, got t={self.t}")
        c = self.counterpart
        if c is not None and not 0.0 < c.s < self.t:
            raise ValueError(f"counterpart time must satisfy 0 < s < t, got s={c.s}, t={self.t}")

    @property
    def s(self) -> float:
        return 0.0 if self.counterpart is None else self.counterpart.s

    def advance(self, t: float, xi: float) -> "EffectiveInfo":
        return replace(self, t=t, xi=xi)

    def coefficients(self):
        c = self.counterpart
        if c is None:
            return likelihood_coefficients(self.t, self.xi, self.sigma, self.T)
        return likelihood_coefficients(self.t, self.xi, self.sigma, self.T, c.s, c.xi, c.sigma, self.rho)


@dataclass(frozen=True)
class Numeraire:
    r: float
    T: float

    def discount(self, t):
        """``exp(-r (T - t))`` for ``t <= T``."""
        t = np.asarray(t, dtype=float)
        if np.any(t > self.T):
            raise ValueError("discount factor requested beyond the horizon")
        out = np.exp(-self.r * (self.T - t))
        return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# likelihoods


def log_likelihood_exponent(t, sigma, xi, x, T):
    """``kappa_t * (sigma xi x - sigma^2 x^2 t / 2)``."""
    k = kappa(t, T)
    return k * (sigma * xi * x - 0.5 * sigma**2 * x**2 * t)


def conditional_corr(t, s, T, rho):
    """Correlation of ``xi^1_t`` and ``xi^2_s`` given ``x`` (``s <= t``)."""
    if np.any(np.asarray(s) > np.asarray(t)):
        raise ValueError("conditional correlation needs s <= t")
    if np.any(np.asarray(s) <= 0):
        raise ValueError("conditional correlation needs s > 0")
    return rho * np.sqrt((s / t) * (kappa(s, T) / kappa(t, T)))


def _bivariate_terms(t, s, T, rho):
    v1 = t * (T - t) / T
    v2 = s * (T - s) / T
    rho_hat = conditional_corr(t, s, T, rho)
    c = rho_hat * np.sqrt(v1 * v2)
    det = v1 * v2 - c * c
    return v1, v2, c, det


def likelihood_coefficients(t, xi, sigma, T, s=0.0, xi_c=None, sigma_c=None, rho=0.0):
    """Return ``(A, B)`` with log-likelihood ``B x - A x^2 / 2`` (+ const).

    Without counterpart information ``A = sigma^2 kappa_t t`` and
    ``B = sigma kappa_t xi``. With it, the bivariate Gaussian law of
    ``(xi_t, xi^c_s)`` given ``x`` is used. Array arguments broadcast, and
    entries with ``s = 0`` fall back to the single-signal form.
    """
    k = kappa(t, T)
    xi = np.asarray(xi, dtype=float)
    A1 = sigma**2 * k * t
    B1 = sigma * k * xi
    if xi_c is None:
        return A1 + 0.0 * B1, B1
    s = np.asarray(s, dtype=float)
    has = s > 0
    if not np.any(has):
        return A1 + 0.0 * B1, B1
    s_safe = np.where(has, s, 0.5 * np.asarray(t, dtype=float))
    v1, v2, c, det = _bivariate_terms(t, s_safe, T, rho)
    d1 = sigma * t
    d2 = sigma_c * s_safe
    A2 = (v2 * d1 * d1 - 2.0 * c * d1 * d2 + v1 * d2 * d2) / det
    B2 = (v2 * d1 * xi - c * (d1 * xi_c + d2 * xi) + v1 * d2 * xi_c) / det
    A = np.where(has, A2, A1) + 0.0 * B2
    B = np.where(has, B2, B1)
    if A.ndim == 0:
        return float(A), float(B)
    return A, B


def univariate_likelihood(xi, x, t, sigma, T):
    """Density of ``xi_t`` given ``X = x``: ``N(sigma x t, t (T - t) / T)``."""
    var = t * (T - t) / T
    return np.exp(-0.5 * (xi - sigma * x * t) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def product_likelihood(xi_t, xi_s, x, t, s, sigma1, sigma2, T):
    """Joint density of ``(xi^1_t, xi^2_s)`` given ``x`` with independent noises."""
    vt = t / kappa(t, T)
    vs = s / kappa(s, T)
    u = xi_t - sigma1 * x * t
    v = xi_s - sigma2 * x * s
    norm = 2.0 * np.pi * np.sqrt(vt) * np.sqrt(vs)
    return np.exp(-0.5 * vs * u**2 / (vt * vs)) * np.exp(-0.5 * vt * v**2 / (vt * vs)) / norm


def joint_likelihood(xi_t, xi_s, x, t, s, sigma1, sigma2, T, rho_hat):
    """Bivariate Gaussian density of ``(xi^1_t, xi^2_s)`` given ``x``.

    ``rho_hat`` is the conditional correlation from :func:`conditional_corr`.
    """
    vt = t / kappa(t, T)
    vs = s / kappa(s, T)
    u = xi_t - sigma1 * x * t
    v = xi_s - sigma2 * x * s
    one_m = 1.0 - rho_hat**2
    denom = one_m * vt * vs
    norm = 2.0 * np.pi * np.sqrt(vt) * np.sqrt(vs) * np.sqrt(one_m)
    return (
        np.exp(-0.5 * vs * u**2 / denom)
        * np.exp(-0.5 * (-2.0 * rho_hat * u * v * np.sqrt(vt) * np.sqrt(vs)) / denom)
        * np.exp(-0.5 * vt * v**2 / denom)
        / norm
    )


def effective_likelihood(x, info: EffectiveInfo):
    """Likelihood of the agent's effective information as a function of ``x``."""
    c = info.counterpart
    if c is None:
        return univariate_likelihood(info.xi, x, info.t, info.sigma, info.T)
    rho_hat = conditional_corr(info.t, c.s, info.T, info.rho)
    return joint_likelihood(info.xi, c.xi, x, info.t, c.s, info.sigma, c.sigma, info.T, rho_hat)


# --------------------------------------------------------------------------
# posteriors


@dataclass(frozen=True)
class GaussianPosterior:
    mean: float
    var: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def pdf(self, x):
        return np.exp(-0.5 * (x - self.mean) ** 2 / self.var) / np.sqrt(2.0 * np.pi * self.var)

    def mass_positive(self) -> float:
        return 0.5 * math.erfc(-self.mean / math.sqrt(2.0 * self.var))


@dataclass(frozen=True)
class GridPosterior:
    """Posterior on a finite support (point masses) or a density grid."""

    kind: str
    support: np.ndarray
    weights: np.ndarray

    @property
    def mean(self) -> float:
        if self.kind == "digital":
            return float(np.sum(self.support * self.weights))
        return float(trapezoid(self.support * self.weights, self.support))

    def total(self) -> float:
        if self.kind == "digital":
            return float(np.sum(self.weights))
        return float(trapezoid(self.weights, self.support))


def _grid_weights(model: PayoffModel, A, B):
    A = np.asarray(A, dtype=float)[..., None]
    B = np.asarray(B, dtype=float)[..., None]
    x = model.support
    expo = B * x - 0.5 * A * x * x
    with np.errstate(divide="ignore"):
        expo = expo + np.log(model.prior)
    shift = np.max(expo, axis=-1, keepdims=True)
    if not np.all(np.isfinite(shift)):
        raise NumericUnderflowError("posterior exponent is not finite")
    w = np.exp(expo - shift)
    total = np.sum(w, axis=-1, keepdims=True) if model.kind == "digital" else trapezoid(w, x, axis=-1)[..., None]
    if np.any(total <= 0) or not np.all(np.isfinite(total)):
        raise NumericUnderflowError("posterior weights underflowed")
    return w / total


def posterior(model: PayoffModel, info: EffectiveInfo):
    """Normalised posterior of ``X`` given the agent's effective information."""
    A, B = info.coefficients()
    if model.kind == "gaussian":
        prec = 1.0 + float(A)
        return GaussianPosterior(float(B) / prec, 1.0 / prec)
    w = _grid_weights(model, A, B)
    return GridPosterior(model.kind, model.support, w)


def posterior_mean(model: PayoffModel, A, B):
    """Undiscounted posterior mean ``E[X | info]`` from likelihood coefficients."""
    if model.kind == "gaussian":
        return np.asarray(B) / (1.0 + np.asarray(A))
    w = _grid_weights(model, A, B)
    if model.kind == "digital":
        return np.sum(w * model.support, axis=-1)
    return trapezoid(w * model.support, model.support, axis=-1)


def posterior_on_truth(model: PayoffModel, A, B, x):
    """Posterior weight (digital) or posterior-to-prior density ratio at ``x``."""
    x = np.asarray(x, dtype=float)
    if model.kind == "gaussian":
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        prec = 1.0 + A
        mean = B / prec
        post = np.sqrt(prec) * np.exp(-0.5 * prec * (x - mean) ** 2)
        prior = np.exp(-0.5 * x * x)
        return post / prior
    w = _grid_weights(model, A, B)
    if model.kind == "digital":
        idx = np.argmin(np.abs(model.support - x[..., None]), axis=-1)
        return np.take_along_axis(w, idx[..., None], axis=-1)[..., 0]
    x = np.broadcast_to(x, w.shape[:-1])
    grid = model.support
    j = np.clip(np.searchsorted(grid, x) - 1, 0, grid.size - 2)
    frac = (x - grid[j]) / (grid[j + 1] - grid[j])
    w_lo = np.take_along_axis(w, j[..., None], axis=-1)[..., 0]
    w_hi = np.take_along_axis(w, j[..., None] + 1, axis=-1)[..., 0]
    post = (1.0 - frac) * w_lo + frac * w_hi
    prior = np.interp(x, grid, model.prior)
    return post / prior


# --------------------------------------------------------------------------
# prices


def gaussian_price(t, xi, sigma, T, r: float = 0.0):
    """Closed-form price for a standard normal prior and a single signal."""
    k = kappa(t, T)
    return math.exp(-r * (T - t)) * sigma * k * xi / (sigma**2 * k * t + 1.0)


def two_source_gaussian_price(t, s, xi_own, xi_other, sigma_own, sigma_other, T, r: float = 0.0):
    """Closed-form price from own ``xi_t`` and the counterpart's ``xi_s``."""
    kt = kappa(t, T)
    ks = kappa(s, T)
    num = sigma_own * kt * xi_own + sigma_other * ks * xi_other
    den = sigma_own**2 * kt * t + sigma_other**2 * ks * s + 1.0
    return math.exp(-r * (T - t)) * num / den


def price(model: PayoffModel, info: EffectiveInfo, numeraire: Numeraire) -> float:
    """Discounted posterior mean of the payoff on the agent's effective information."""
    if numeraire.T != info.T:
        raise ValueError("numeraire and information horizons differ")
    c = info.counterpart
    if model.kind == "gaussian" and (c is None or info.rho == 0.0):
        if c is None:
            return gaussian_price(info.t, info.xi, info.sigma, info.T, numeraire.r)
        return two_source_gaussian_price(info.t, c.s, info.xi, c.xi, info.sigma, c.sigma, info.T, numeraire.r)
    A, B = info.coefficients()
    return numeraire.discount(info.t) * float(posterior_mean(model, A, B))


def _bisect_increasing(func, target, lo, hi, tol: float, max_iter: int = 400):
    """Vectorised bisection for an increasing ``func``; brackets are widened first."""
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(200):
        low_bad = func(lo) > target
        high_bad = func(hi) < target
        if not (np.any(low_bad) or np.any(high_bad)):
            break
        width = hi - lo
        lo = np.where(low_bad, lo - width, lo)
        hi = np.where(high_bad, hi + width, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        go_up = func(mid) < target
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def invert_coefficients(model: PayoffModel, mean, A, b0, b1, tol: float = 1e-12):
    """Solve ``posterior_mean(A, b0 + b1 xi) = mean`` for ``xi``.

    Vectorised over paths. The map is affine for the Gaussian prior; for the
    other kinds it is strictly monotone and solved by bisection.
    """
    b1 = np.asarray(b1, dtype=float)
    if np.any(b1 == 0):
        raise ValueError("price carries no information about the signal (sigma = 0)")
    mean = np.asarray(mean, dtype=float)
    if model.kind == "gaussian":
        return (mean * (1.0 + np.asarray(A)) - b0) / b1
    sign = np.sign(b1)

    def f(xi):
        return sign * posterior_mean(model, A, b0 + b1 * xi)

    # saturated prices have no finite preimage; clamp them to the support edge
    lo_m, hi_m = model.support[0], model.support[-1]
    target = np.clip(mean, lo_m, hi_m)
    return _bisect_increasing(f, sign * target, -1.0, 1.0, tol)


def invert_signal(model: PayoffModel, observed_price, info: EffectiveInfo, numeraire: Numeraire, tol: float = 1e-12):
    """Recover the signal value behind an observed price.

    ``info`` describes the quoting agent with its own ``xi`` unknown (the value
    stored in it is ignored). Accepts an array of prices.
    """
    A, b0 = info.advance(info.t, 0.0).coefficients()
    _, b_one = info.advance(info.t, 1.0).coefficients()
    target = np.asarray(observed_price, dtype=float) / numeraire.discount(info.t)
    out = invert_coefficients(model, target, A, b0, b_one - b0, tol)
    return float(out) if np.ndim(out) == 0 else out


def innovation_increments(path: SignalPath, model: PayoffModel):
    """Discretised innovation increments ``dW`` over each grid interval.

    ``xi`` may hold several paths along its leading axis. Increments are
    returned for the intervals ``[t_i, t_{i+1}]``, ``i = 0 .. m-1``.
    """
    grid = path.grid
    sigma = path.params.sigma
    T = grid.T
    t = grid.times[:-1]
    xi = np.asarray(path.xi, dtype=float)
    xi_now = xi[..., :-1]
    k = T / (T - t)
    if sigma == 0:
        post = np.zeros_like(xi_now)
    else:
        A, B = likelihood_coefficients(t, xi_now, sigma, T)
        post = posterior_mean(model, A, B)
    return k * (xi_now / T - sigma * post) * np.diff(grid.times) + np.diff(xi, axis=-1)


# --------------------------------------------------------------------------
# exponential utility


def _gaussian_moments(info: EffectiveInfo):
    A, B = info.coefficients()
    prec = 1.0 + float(A)
    return float(B) / prec, 1.0 / prec


def cara_quotes(info: EffectiveInfo, lam: float, numeraire: Numeraire) -> tuple[float, float]:
    """Certainty-equivalent bid and ask for a standard normal prior.

    ``bid = M - lam V / 2`` and ``ask = M + lam V / 2`` where ``M`` and ``V``
    are the posterior mean and variance; with no counterpart information
    ``V = 1 / (sigma^2 kappa_t t + 1)``.
    """
    if not lam > 0:
        raise ValueError(f"risk aversion must be positive, got {lam!r}")
    mean, var = _gaussian_moments(info)
    disc = numeraire.discount(info.t)
    half = 0.5 * lam * var
    return disc * (mean - half), disc * (mean + half)


def cara_clearing_price(S1: float, S2: float, lambda1: float, lambda2: float) -> float:
    """Risk-aversion weighted clearing price.

    ``S1`` is the selling agent's ask and ``S2`` the buying agent's bid.
    """
    if not (lambda1 > 0 and lambda2 > 0):
        raise ValueError("risk aversions must be positive")
    w = lambda1 / (lambda1 + lambda2)
    return w * S1 + (1.0 - w) * S2


def cara_expected_utility(q: float, clearing: float, lam: float, mean: float, var: float) -> float:
    """``E[-exp(-lam q (X - clearing))]`` for ``X ~ N(mean, var)``."""
    return -math.exp(-lam * q * (mean - clearing) + 0.5 * lam * lam * q * q * var)
