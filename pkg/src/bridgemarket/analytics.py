"""Ex-ante trade analytics for two agents quoting signal-based prices.

Agent 1 observes ``xi^1`` with signal-to-noise ``sigma1`` and agent 2 observes
``xi^2`` with ``sigma2``. At an auction at time ``t`` each agent also knows
the other's signal value at the last trade time ``s`` (``s = 0`` means no
trade yet). Noises are taken independent and prices undiscounted.

With the fundamental pinned at ``x`` the half price differential
``(S^2 - S^1) / 2`` is Gaussian with mean ``a x`` and standard deviation
``b`` (:func:`ab_coefficients`). Profit is booked in the direction of the
market type: an agent whose own price sits on the correct side of the
clearing price (above it in a high-type market, below it in a low-type one)
gains the distance to the clearing price, otherwise it loses it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import erfc, log_ndtr

from .bridge import TimeGrid, kappa
from .pricing import GaussianPosterior, GridPosterior, PayoffModel
from .quadrature import hermite_rule, legendre_integrate

__all__ = [
    "QualityInputs",
    "ABCoefficients",
    "QualityProbability",
    "TransactionPrices",
    "normal_cdf",
    "ab_coefficients",
    "p_correct_digital",
    "p_correct_gaussian",
    "truncated_mean_positive_part",
    "truncated_conditional_mean",
    "truncated_second_moment",
    "differential_law",
    "directional_profit_kernel",
    "expected_transaction_prices",
    "expected_profit",
    "expected_abs_gaussian",
    "expected_profit_gaussian_closed",
    "profit_variance",
    "profit_to_go",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_WINDOW = 10.0  # posterior standard deviations kept on each half-line


@dataclass(frozen=True)
class QualityInputs:
    t: float
    s: float
    sigma1: float
    sigma2: float
    model: PayoffModel
    T: float

    def __post_init__(self):
        if not 0.0 <= self.s < self.t:
            raise ValueError(f"need 0 <= s < t, got s={self.s}, t={self.t}")
        if not self.t < self.T:
            raise ValueError(f"need t < T, got t={self.t}, T={self.T}")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("signal-to-noise ratios must be positive")

    def at(self, t: float, s: float) -> "QualityInputs":
        return replace(self, t=float(t), s=float(s))


@dataclass(frozen=True)
class ABCoefficients:
    a: float
    b: float


@dataclass(frozen=True)
class QualityProbability:
    """Chance that an agent's price is on the correct side of the clearing price."""

    high: float
    low: float
    total: float


@dataclass(frozen=True)
class TransactionPrices:
    """Expected clearing price by market type and signal correctness."""

    high_correct: float
    high_erroneous: float
    low_correct: float
    low_erroneous: float


def normal_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def _normal_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.asarray(z, dtype=float) ** 2)


def _check_agent(agent: int) -> int:
    if agent not in (1, 2):
        raise ValueError(f"agent must be 1 or 2, got {agent!r}")
    return agent


def _own_sign(agent: int) -> float:
    """Sign of ``a`` in the law of ``(S^own - S^other) / 2``."""
    return -1.0 if _check_agent(agent) == 1 else 1.0


def ab_coefficients(q: QualityInputs) -> ABCoefficients:
    t, s, T = q.t, q.s, q.T
    s1, s2 = q.sigma1**2, q.sigma2**2
    kt = kappa(t, T)
    ks = kappa(s, T)
    d1 = s1 * t * kt + s2 * s * ks + 1.0
    d2 = s2 * t * kt + s1 * s * ks + 1.0
    a = 0.5 * ((s2 * t * kt + s1 * s * ks) / d2 - (s1 * t * kt + s2 * s * ks) / d1)
    u1, v1 = q.sigma1 * kt / d1, q.sigma1 * ks / d2
    u2, v2 = q.sigma2 * kt / d2, q.sigma2 * ks / d1
    var = (
        u1 * u1 * t / kt + v1 * v1 * s / ks - 2.0 * u1 * v1 * s / kt
        + u2 * u2 * t / kt + v2 * v2 * s / ks - 2.0 * u2 * v2 * s / kt
    )
    return ABCoefficients(a=float(a), b=float(0.5 * math.sqrt(var)))


def differential_law(q: QualityInputs, x, agent: int = 1):
    """Mean and sd of ``(S^own - S^other) / 2`` given ``X = x``."""
    ab = ab_coefficients(q)
    return _own_sign(agent) * ab.a * np.asarray(x, dtype=float), ab.b


def p_correct_digital(q: QualityInputs, agent: int = 1) -> float:
    """Directional quality for a two-point payoff; the same in both market types."""
    if q.model.kind != "digital":
        raise ValueError("p_correct_digital needs a digital payoff model")
    spread = float(q.model.support[1] - q.model.support[0])
    d = q.t * kappa(q.t, q.T) - q.s * kappa(q.s, q.T)
    if not d > 0:
        raise ValueError("t kappa_t must exceed s kappa_s")
    z = 0.5 * spread * d * (q.sigma1**2 - q.sigma2**2) / (math.sqrt(q.sigma1**2 + q.sigma2**2) * math.sqrt(d))
    p1 = float(normal_cdf(z))
    return p1 if _check_agent(agent) == 1 else 1.0 - p1


def _half_line_windows(post: GaussianPosterior):
    lo = post.mean - _WINDOW * post.sd
    hi = post.mean + _WINDOW * post.sd
    return (max(lo, 0.0), max(hi, 0.0)), (min(lo, 0.0), min(hi, 0.0))


def _half_integrals(func, post: GaussianPosterior):
    """``(int_{x>0} func pi, int_{x<0} func pi)`` for a Gaussian posterior ``pi``."""
    out = []
    for lo, hi in _half_line_windows(post):
        if hi <= lo:
            out.append(0.0)
            continue
        out.append(float(legendre_integrate(lambda x: func(x) * post.pdf(x), lo, hi)))
    return out


def p_correct_gaussian(q: QualityInputs, posterior: GaussianPosterior, agent: int = 1) -> QualityProbability:
    """Directional quality under a Gaussian effective posterior.

    ``high`` and ``low`` are the conditional probabilities under the
    normalised half posteriors on ``x > 0`` and ``x < 0``; ``total`` mixes them
    with the posterior masses of the two half-lines.
    """
    if q.model.kind != "gaussian":
        raise ValueError("p_correct_gaussian needs the Gaussian payoff model")
    ab = ab_coefficients(q)
    r = ab.a / ab.b
    mass_hi = posterior.mass_positive()
    mass_lo = 1.0 - mass_hi
    hi_int, _ = _half_integrals(lambda x: normal_cdf(-r * x), posterior)
    _, lo_int = _half_integrals(lambda x: normal_cdf(r * x), posterior)
    if mass_hi <= 0.0 and mass_lo <= 0.0:
        raise FloatingPointError("half posteriors are not normalisable")
    high = hi_int / mass_hi if mass_hi > 0 else 0.5
    low = lo_int / mass_lo if mass_lo > 0 else 0.5
    total = hi_int + lo_int
    if _check_agent(agent) == 2:
        return QualityProbability(1.0 - high, 1.0 - low, 1.0 - total)
    return QualityProbability(float(high), float(low), float(total))


# --------------------------------------------------------------------------
# truncated Gaussian kernels


def _check_sd(sd):
    if np.any(np.asarray(sd) <= 0):
        raise ValueError("standard deviation must be positive")


def truncated_mean_positive_part(mean, sd):
    """``E[max(Y, 0)]`` for ``Y ~ N(mean, sd^2)``."""
    _check_sd(sd)
    z = np.asarray(mean, dtype=float) / sd
    out = mean * normal_cdf(z) + sd * _normal_pdf(z)
    return float(out) if np.ndim(out) == 0 else out


def truncated_conditional_mean(mean, sd):
    """``E[Y | Y > 0]`` for ``Y ~ N(mean, sd^2)``, stable deep in the lower tail."""
    _check_sd(sd)
    z = np.asarray(mean, dtype=float) / sd
    mills = np.exp(-0.5 * z * z - 0.5 * math.log(2.0 * math.pi) - log_ndtr(z))
    out = mean + sd * mills
    return float(out) if np.ndim(out) == 0 else out


def truncated_second_moment(mean, sd):
    """``E[Y^2 ; Y > 0]`` for ``Y ~ N(mean, sd^2)``."""
    _check_sd(sd)
    z = np.asarray(mean, dtype=float) / sd
    out = (mean * mean + sd * sd) * normal_cdf(z) + mean * sd * _normal_pdf(z)
    return float(out) if np.ndim(out) == 0 else out


def directional_profit_kernel(mean, sd, x):
    """Expected directional profit given ``X = x``.

    ``mean`` and ``sd`` describe ``(S^own - S^other) / 2``. In a high-type
    market the agent gains that half differential when it is positive
    (correct side) and loses its magnitude otherwise; the low-type case
    mirrors. The two pieces are probability times truncated conditional mean.
    """
    direction = np.sign(x)
    p_up = normal_cdf(mean / sd)
    up = p_up * truncated_conditional_mean(mean, sd)
    down = (1.0 - p_up) * truncated_conditional_mean(-mean, sd)
    return direction * (up - down)


def _directional_second_moment(mean, sd):
    return truncated_second_moment(mean, sd) + truncated_second_moment(-mean, sd)


def expected_transaction_prices(q: QualityInputs, x: float, S_own: float, agent: int = 1) -> TransactionPrices:
    """Expected clearing price given market type and signal correctness.

    High-type values are evaluated at ``|x|`` and low-type values at
    ``-|x|``. The clearing price is the mid of the two quotes, so it sits
    below ``S_own`` exactly when the agent's price is the higher one.
    """
    x = abs(float(x))
    sign = _own_sign(agent)
    ab = ab_coefficients(q)
    b = ab.b

    def above(mu):  # E[D | D > 0] for D = (S_own - S_other) / 2
        return float(truncated_conditional_mean(mu, b))

    def below(mu):  # E[-D | D < 0]
        return float(truncated_conditional_mean(-mu, b))

    mu_hi = sign * ab.a * x
    mu_lo = -mu_hi
    return TransactionPrices(
        high_correct=S_own - above(mu_hi),
        high_erroneous=S_own + below(mu_hi),
        low_correct=S_own + below(mu_lo),
        low_erroneous=S_own - above(mu_lo),
    )


# --------------------------------------------------------------------------
# digital payoff: logits of both prices are jointly Gaussian given x


def _digital_logit_law(q: QualityInputs, x: float):
    x0, x1 = (float(v) for v in q.model.support)
    p0, p1 = (float(v) for v in q.model.prior)
    spread = x1 - x0
    t, s, T = q.t, q.s, q.T
    kt = kappa(t, T)
    ks = kappa(s, T)
    A1 = q.sigma1**2 * kt * t + q.sigma2**2 * ks * s
    A2 = q.sigma2**2 * kt * t + q.sigma1**2 * ks * s
    with np.errstate(divide="ignore"):
        c = math.log(p1) - math.log(p0) if p0 > 0 and p1 > 0 else math.copysign(np.inf, p1 - p0)
    mean = np.array([c + spread * A * x - 0.5 * A * (x1 * x1 - x0 * x0) for A in (A1, A2)])
    # noise order (beta1_t, beta1_s, beta2_t, beta2_s); bridges independent
    K = np.array([[t / kt, s / kt], [s / kt, s / ks]])
    C = np.zeros((4, 4))
    C[:2, :2] = K
    C[2:, 2:] = K
    load = spread * np.array(
        [[q.sigma1 * kt, 0.0, 0.0, q.sigma2 * ks], [0.0, q.sigma1 * ks, q.sigma2 * kt, 0.0]]
    )
    return mean, load @ C @ load.T, x0, spread


def _digital_moments(q: QualityInputs, x: float, agent: int, n: int = 80):
    """``E[D]`` and ``E[D^2]`` for ``D = (S^own - S^other) / 2`` given ``X = x``."""
    mean, cov, _, spread = _digital_logit_law(q, x)
    if not np.all(np.isfinite(mean)):
        return 0.0, 0.0
    z, w = hermite_rule(n)
    chol = np.linalg.cholesky(cov)
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    ww = np.outer(w, w)
    L1 = mean[0] + chol[0, 0] * z1
    L2 = mean[1] + chol[1, 0] * z1 + chol[1, 1] * z2
    p1 = 0.5 * (1.0 + np.tanh(0.5 * L1))
    p2 = 0.5 * (1.0 + np.tanh(0.5 * L2))
    d = 0.5 * spread * (p1 - p2)
    if _check_agent(agent) == 2:
        d = -d
    return float(np.sum(ww * d)), float(np.sum(ww * d * d))


def _digital_masses(posterior) -> tuple[float, float]:
    if isinstance(posterior, GridPosterior):
        w = np.asarray(posterior.weights, dtype=float).reshape(-1)
        return float(w[0]), float(w[1])
    p0, p1 = posterior
    return float(p0), float(p1)


# --------------------------------------------------------------------------
# expected profit and its variance


def expected_profit(q: QualityInputs, posterior, agent: int = 1) -> float:
    """Expected directional profit of ``agent`` from a trade at ``q.t``.

    ``posterior`` is the agent's effective posterior: a
    :class:`GaussianPosterior` for the Gaussian payoff, or a digital
    :class:`GridPosterior` (or the pair of masses on ``(x0, x1)``).
    """
    if q.model.kind == "digital":
        m0, m1 = _digital_masses(posterior)
        x0, x1 = q.model.support
        e1, _ = _digital_moments(q, x1, agent)
        e0, _ = _digital_moments(q, x0, agent)
        return m1 * e1 - m0 * e0
    if q.model.kind != "gaussian":
        raise ValueError("closed-form analytics cover digital and Gaussian payoffs only")
    sign = _own_sign(agent)
    ab = ab_coefficients(q)
    kernel = lambda x: directional_profit_kernel(sign * ab.a * x, ab.b, x)  # noqa: E731
    hi, lo = _half_integrals(kernel, posterior)
    return hi + lo


def expected_abs_gaussian(mean, var):
    """``E|X|`` for ``X ~ N(mean, var)``; vectorised."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(var)
    z = mean / sd
    return mean * (1.0 - 2.0 * normal_cdf(-z)) + 2.0 * sd * _normal_pdf(z)


def expected_profit_gaussian_closed(q: QualityInputs, mean, var, agent: int = 1):
    """Gaussian expected profit in closed form, vectorised over posteriors.

    Given ``x`` the directional profit averages ``a |x|`` with the sign of
    the agent's edge, so only ``E|X|`` under the posterior is needed. Agrees
    with :func:`expected_profit`, which integrates the kernels numerically.
    """
    return _own_sign(agent) * ab_coefficients(q).a * expected_abs_gaussian(mean, var)


def profit_variance(q: QualityInputs, posterior, agent: int = 1) -> float:
    """Variance of the directional profit; clamped at zero."""
    mean = expected_profit(q, posterior, agent)
    if q.model.kind == "digital":
        m0, m1 = _digital_masses(posterior)
        x0, x1 = q.model.support
        _, s1 = _digital_moments(q, x1, agent)
        _, s0 = _digital_moments(q, x0, agent)
        second = m1 * s1 + m0 * s0
    else:
        ab = ab_coefficients(q)
        hi, lo = _half_integrals(lambda x: _directional_second_moment(ab.a * x, ab.b), posterior)
        second = hi + lo
    var = second - mean * mean
    if var < -1e-10:
        raise FloatingPointError(f"negative profit variance {var!r}")
    return max(var, 0.0)


def profit_to_go(
    base: QualityInputs,
    grid: TimeGrid,
    t_index: int,
    s_index: int,
    schedule: Sequence[bool],
    posterior,
    agent: int = 1,
) -> float:
    """Sum of expected profits over the remaining auctions under ``schedule``.

    ``schedule[k]`` says whether the agent trades at auction ``t_index + k``;
    auctions run at grid indices ``1 .. m-1``. Only ``sigma1``, ``sigma2``,
    the model and ``T`` are taken from ``base``. The time-``t`` posterior is
    held fixed for every term.
    """
    m = grid.m
    if not 1 <= t_index <= m - 1:
        raise ValueError(f"auction index must lie in 1..{m - 1}, got {t_index}")
    if not 0 <= s_index < t_index:
        raise ValueError("last-trade index must precede the auction index")
    if len(schedule) != m - t_index:
        raise ValueError(f"schedule needs {m - t_index} entries, got {len(schedule)}")
    total = 0.0
    s = s_index
    for k, trade in enumerate(schedule):
        u = t_index + k
        if trade:
            total += expected_profit(base.at(grid[u], grid[s]), posterior, agent)
            s = u
    return total
