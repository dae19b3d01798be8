"""Fixed quadrature rules shared by the pricing and analytics code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import optimize

__all__ = ["hermite_rule", "legendre_rule", "legendre_integrate", "adaptive_hermite_expectation"]


@lru_cache(maxsize=None)
def hermite_rule(n: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite nodes and weights normalised to sum to one.

    ``sum(w * f(z))`` approximates ``E[f(Z)]`` for ``Z ~ N(0, 1)``.
    """
    z, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


@lru_cache(maxsize=None)
def legendre_rule(n: int = 200) -> tuple[np.ndarray, np.ndarray]:
    u, w = np.polynomial.legendre.leggauss(n)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def legendre_integrate(func, lo, hi, n: int = 200):
    """Gauss-Legendre integral of a vectorised ``func`` over ``[lo, hi]``.

    ``lo`` and ``hi`` may be arrays; ``func`` then receives nodes with a
    trailing axis of length ``n``.
    """
    u, w = legendre_rule(n)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    x = lo + half * (u + 1.0)
    return np.sum(func(x) * w * half, axis=-1)


def _mode_and_scale(log_density, guess: float = 0.0, span: float = 50.0):
    res = optimize.minimize_scalar(
        lambda x: -log_density(x), bracket=(guess - 1.0, guess + 1.0), tol=1e-12
    )
    mode = float(res.x)
    if not np.isfinite(mode) or abs(mode - guess) > span * 10:
        raise FloatingPointError("could not locate the mode of the integrand")
    h = 1e-4 * max(1.0, abs(mode))
    for _ in range(8):
        curv = -(log_density(mode + h) - 2.0 * log_density(mode) + log_density(mode - h)) / h**2
        if curv > 0 and np.isfinite(curv):
            break
        h *= 10.0
    else:
        raise FloatingPointError("integrand is not log-concave near its mode")
    return mode, 1.0 / np.sqrt(curv)


def adaptive_hermite_expectation(log_density, funcs, n: int = 200, inflate: float = np.sqrt(2.0)):
    """Expectations of ``funcs`` under an unnormalised density on the real line.

    The Hermite rule is centred at the numerically located mode of
    ``log_density`` and scaled by ``inflate`` times the curvature scale there,
    so nothing about the integrand's closed form is assumed.
    """
    mode, scale = _mode_and_scale(log_density)
    scale *= inflate
    z, w = hermite_rule(n)
    x = mode + scale * z
    # undo the N(mode, scale^2) weight built into the rule
    log_r = log_density(x) + 0.5 * z**2
    log_r = log_r - np.max(log_r)
    r = w * np.exp(log_r)
    norm = r.sum()
    return [float(np.sum(r * f(x)) / norm) for f in funcs]
