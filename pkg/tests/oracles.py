"""Independent reference computations used by the tests.

Nothing here goes through the ``(A, B)`` likelihood coefficients of the
library: densities are written out from the Gaussian law of the signals and
integrated numerically, or quantities are estimated by simulation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from bridgemarket.bridge import TimeGrid, bridges_from_normals
from bridgemarket.quadrature import adaptive_hermite_expectation, hermite_rule


def mean_se(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def log_signal_density(xi, x, t, sigma, T):
    """log N(xi; sigma t x, t (T - t) / T)."""
    var = t * (T - t) / T
    return -0.5 * (xi - sigma * t * x) ** 2 / var - 0.5 * math.log(2 * math.pi * var)


def log_pair_density(xi_t, xi_s, x, t, s, sigma_t, sigma_s, T, rho):
    """Bivariate normal log density of two signals seen at ``t`` and ``s`` given ``x``.

    The covariance is assembled from the bridge covariance ``s (T - t) / T``
    scaled by the noise correlation ``rho``.
    """
    vt = t * (T - t) / T
    vs = s * (T - s) / T
    c = rho * s * (T - t) / T
    det = vt * vs - c * c
    u = xi_t - sigma_t * t * x
    v = xi_s - sigma_s * s * x
    quad = (vs * u * u - 2 * c * u * v + vt * v * v) / det
    return -0.5 * quad - math.log(2 * math.pi) - 0.5 * math.log(det)


def quadrature_posterior_mean(log_like):
    """Posterior mean of X under a N(0, 1) prior and the given log-likelihood."""
    log_post = lambda x: -0.5 * x * x + log_like(x)  # noqa: E731
    (mean,) = adaptive_hermite_expectation(log_post, [lambda x: x])
    return mean


def quadrature_moments(log_like):
    log_post = lambda x: -0.5 * x * x + log_like(x)  # noqa: E731
    m1, m2 = adaptive_hermite_expectation(log_post, [lambda x: x, lambda x: x * x])
    return m1, m2 - m1 * m1


def cara_certainty_equivalents(mean, var, lam, n=200):
    """Bid ``-log E[e^{-lam X}] / lam`` and ask ``log E[e^{lam X}] / lam`` by quadrature."""
    z, w = hermite_rule(n)
    x = mean + math.sqrt(var) * z
    bid = -math.log(np.sum(w * np.exp(-lam * x))) / lam
    ask = math.log(np.sum(w * np.exp(lam * x))) / lam
    return bid, ask


def utility_root(S1, S2, lam1, lam2, m1, v1, m2, v2):
    """Clearing price equalising the certainty-equivalent utilities of seller and buyer.

    The seller holds ``N(m1, v1)`` beliefs and quotes ``S1``; the buyer
    ``N(m2, v2)`` and ``S2``. Utility levels are compared on the log scale.
    """

    def gap(p):
        seller = lam1 * (m1 - p) + 0.5 * lam1 * lam1 * v1  # log(-E U) for q = -1
        buyer = -lam2 * (m2 - p) + 0.5 * lam2 * lam2 * v2  # log(-E U) for q = +1
        return seller - buyer

    lo, hi = min(S1, S2) - 10.0, max(S1, S2) + 10.0
    return optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def bridge_values(times, n, rng):
    """Exact joint bridge values at ``times`` (first 0, last T), shape ``(n, len(times))``."""
    grid = TimeGrid(np.asarray(times, dtype=float))
    return bridges_from_normals(grid, rng.standard_normal((n, grid.m)))


def pair_signals(t, s, sigma1, sigma2, x, n, rng, T=1.0):
    """Signals ``(xi1_t, xi1_s, xi2_t, xi2_s)`` for independent noises."""
    times = [0.0, t, T] if s == 0 else [0.0, s, t, T]
    b1 = bridge_values(times, n, rng)
    b2 = bridge_values(times, n, rng)
    it = 1 if s == 0 else 2
    x = np.broadcast_to(np.asarray(x, dtype=float), (n,))
    if s == 0:
        b1s = np.zeros(n)
        b2s = np.zeros(n)
    else:
        b1s, b2s = b1[:, 1], b2[:, 1]
    return (
        sigma1 * t * x + b1[:, it],
        sigma1 * s * x + b1s,
        sigma2 * t * x + b2[:, it],
        sigma2 * s * x + b2s,
    )


def two_source_prices(t, s, sigma1, sigma2, xi1_t, xi1_s, xi2_t, xi2_s, T=1.0):
    """Undiscounted Gaussian-prior prices of both agents, written out directly."""
    kt = T / (T - t)
    ks = T / (T - s)
    S1 = (sigma1 * kt * xi1_t + sigma2 * ks * xi2_s) / (sigma1**2 * kt * t + sigma2**2 * ks * s + 1.0)
    S2 = (sigma2 * kt * xi2_t + sigma1 * ks * xi1_s) / (sigma2**2 * kt * t + sigma1**2 * ks * s + 1.0)
    return S1, S2


def brute_force_digital_posterior(support, prior, log_like):
    logs = np.array([math.log(p) + log_like(x) for p, x in zip(prior, support)])
    w = np.exp(logs - logs.max())
    return w / w.sum()
