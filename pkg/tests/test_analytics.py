import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

import oracles
from bridgemarket.analytics import (
    QualityInputs,
    ab_coefficients,
    differential_law,
    directional_profit_kernel,
    expected_abs_gaussian,
    expected_profit,
    expected_profit_gaussian_closed,
    expected_transaction_prices,
    normal_cdf,
    p_correct_digital,
    p_correct_gaussian,
    profit_to_go,
    profit_variance,
    truncated_conditional_mean,
    truncated_mean_positive_part,
    truncated_second_moment,
)
from bridgemarket.bridge import make_grid
from bridgemarket.pricing import GaussianPosterior, PayoffModel, likelihood_coefficients, posterior_mean

GAUSS = PayoffModel.gaussian()
DIGITAL = PayoffModel.digital()
STD = GaussianPosterior(0.0, 1.0)

sig = st.floats(0.3, 2.0)


def q_of(s1, s2, t, s=0.0, model=GAUSS):
    return QualityInputs(t, s, s1, s2, model, 1.0)


def simulated_differential(q, x, n, rng):
    """(S^2 - S^1) / 2 from simulated signals, prices written out directly."""
    xi1t, xi1s, xi2t, xi2s = oracles.pair_signals(q.t, q.s, q.sigma1, q.sigma2, x, n, rng)
    S1, S2 = oracles.two_source_prices(q.t, q.s, q.sigma1, q.sigma2, xi1t, xi1s, xi2t, xi2s)
    return 0.5 * (S2 - S1)


# ---------------------------------------------------------------- inputs and a, b


def test_quality_inputs_validation():
    with pytest.raises(ValueError):
        q_of(1.0, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        q_of(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        q_of(-1.0, 1.0, 0.5)


def test_ab_regression_values():
    ab = ab_coefficients(q_of(0.5, 1.5, 0.5))
    assert ab.a == pytest.approx(0.246153846, abs=1e-9)
    assert ab.b == pytest.approx(0.305375896, abs=1e-9)


def test_ab_matches_simulated_differential():
    q = q_of(0.5, 1.5, 0.5)
    d = simulated_differential(q, 1.0, 1_000_000, np.random.default_rng(21))
    ab = ab_coefficients(q)
    m, se = oracles.mean_se(d)
    assert abs(m - ab.a) < 3 * se
    sd = d.std(ddof=1)
    assert abs(sd - ab.b) < 3 * sd / math.sqrt(2 * d.size)


@pytest.mark.parametrize("t,s", [(0.7, 0.3), (0.9, 0.8)])
def test_ab_with_prior_trade_matches_simulation(t, s):
    q = q_of(0.8, 1.3, t, s)
    d = simulated_differential(q, -0.7, 400_000, np.random.default_rng(22))
    ab = ab_coefficients(q)
    m, se = oracles.mean_se(d)
    assert abs(m - ab.a * -0.7) < 3 * se
    assert d.std() == pytest.approx(ab.b, rel=0.01)


@given(s=sig, t=st.floats(0.01, 0.95), frac=st.floats(0.0, 0.95))
def test_equal_sigmas_give_no_drift(s, t, frac):
    ab = ab_coefficients(q_of(s, s, t, frac * t))
    assert abs(ab.a) < 1e-14 and ab.b > 0


@given(s1=sig, gap=st.floats(0.05, 1.5), t=st.floats(0.01, 0.95), frac=st.floats(0.0, 0.95))
def test_a_positive_when_agent_two_superior(s1, gap, t, frac):
    assert ab_coefficients(q_of(s1, s1 + gap, t, frac * t)).a > 0


def test_differential_law_signs():
    q = q_of(0.5, 1.5, 0.5)
    ab = ab_coefficients(q)
    assert differential_law(q, 2.0, 1) == (pytest.approx(-2 * ab.a), ab.b)
    assert differential_law(q, 2.0, 2) == (pytest.approx(2 * ab.a), ab.b)


# ---------------------------------------------------------------- digital quality


def test_p_correct_digital_examples():
    assert p_correct_digital(q_of(1.0, 1.0, 0.5, model=DIGITAL)) == 0.5
    q = q_of(0.5, 1.5, 0.5, model=DIGITAL)
    z = 0.5 * (0.25 - 2.25) / math.sqrt(2.5)
    assert z == pytest.approx(-0.6325, abs=1e-4)
    assert p_correct_digital(q) == pytest.approx(stats.norm.cdf(z), abs=1e-15)
    assert p_correct_digital(q) == pytest.approx(0.26354, abs=1e-5)
    with pytest.raises(ValueError):
        p_correct_digital(q_of(0.5, 1.5, 0.5))


@given(s1=sig, s2=sig, t=st.floats(0.01, 0.95), frac=st.floats(0.0, 0.95))
def test_digital_complement_identity(s1, s2, t, frac):
    q = q_of(s1, s2, t, frac * t, DIGITAL)
    assert p_correct_digital(q, 1) + p_correct_digital(q, 2) == 1.0


def test_digital_quality_same_in_low_type_market():
    q = q_of(0.6, 1.4, 0.6, 0.2, DIGITAL)
    rng = np.random.default_rng(23)
    xi1t, xi1s, xi2t, xi2s = oracles.pair_signals(q.t, q.s, 0.6, 1.4, 0.0, 100_000, rng)
    S1 = posterior_mean(DIGITAL, *likelihood_coefficients(q.t, xi1t, 0.6, 1.0, q.s, xi2s, 1.4))
    S2 = posterior_mean(DIGITAL, *likelihood_coefficients(q.t, xi2t, 1.4, 1.0, q.s, xi1s, 0.6))
    freq, se = oracles.mean_se(S1 < S2)
    assert abs(freq - p_correct_digital(q, 1)) < 3 * se


def test_digital_quality_monotone_in_edge_and_spread():
    base = [p_correct_digital(q_of(1.0, s2, 0.5, model=DIGITAL), 2) for s2 in np.linspace(1.0, 2.5, 8)]
    assert np.all(np.diff(base) > 0)
    wide = [p_correct_digital(q_of(0.5, 1.5, 0.5, model=PayoffModel.digital(0.0, x1)), 2) for x1 in (0.5, 1.0, 2.0)]
    assert np.all(np.diff(wide) > 0)


@given(s1=sig, gap=st.floats(0.05, 1.5), t=st.floats(0.05, 0.95), frac=st.floats(0.01, 0.95))
def test_refraining_raises_quality(s1, gap, t, frac):
    # superior agent 2: quality is highest with no trade since time 0
    fresh = p_correct_digital(q_of(s1, s1 + gap, t, 0.0, DIGITAL), 2)
    later = p_correct_digital(q_of(s1, s1 + gap, t, frac * t, DIGITAL), 2)
    assert fresh > later


# ---------------------------------------------------------------- Gaussian quality


def test_p_correct_gaussian_symmetric_agents():
    res = p_correct_gaussian(q_of(1.1, 1.1, 0.5), GaussianPosterior(0.4, 0.3))
    assert res.high == pytest.approx(0.5, abs=1e-12) and res.low == pytest.approx(0.5, abs=1e-12)
    assert res.total == pytest.approx(0.5, abs=1e-12)


def test_p_correct_gaussian_high_equals_low_for_symmetric_posterior():
    res = p_correct_gaussian(q_of(0.5, 1.5, 0.5, 0.2), GaussianPosterior(0.0, 0.6))
    assert abs(res.high - res.low) < 1e-10


@given(s1=sig, s2=sig, t=st.floats(0.05, 0.95), m=st.floats(-1, 1), v=st.floats(0.1, 1))
@settings(max_examples=30)
def test_p_correct_gaussian_complement(s1, s2, t, m, v):
    q = q_of(s1, s2, t)
    p = GaussianPosterior(m, v)
    a, b = p_correct_gaussian(q, p, 1), p_correct_gaussian(q, p, 2)
    assert a.total + b.total == pytest.approx(1.0, abs=1e-15)
    assert a.high + b.high == pytest.approx(1.0, abs=1e-15)


def test_p_correct_gaussian_matches_simulation():
    q = q_of(0.5, 1.5, 0.5)
    A, B = likelihood_coefficients(0.5, 0.0, 0.5, 1.0)  # agent 1 saw xi = 0
    post = GaussianPosterior(B / (1 + A), 1 / (1 + A))
    rng = np.random.default_rng(24)
    x = post.mean + post.sd * rng.standard_normal(200_000)
    d = simulated_differential(q, x, x.size, rng)
    correct = np.sign(x) * (-d) > 0  # agent 1 on the right side of the mid price
    freq, se = oracles.mean_se(correct)
    value = p_correct_gaussian(q, post, 1).total
    assert value < 0.5
    assert abs(freq - value) < 3 * se


# ---------------------------------------------------------------- kernels


def test_truncated_mean_examples():
    assert truncated_mean_positive_part(0.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert truncated_mean_positive_part(10.0, 1.0) == pytest.approx(10.0, abs=1e-12)
    assert truncated_mean_positive_part(-1.0, 1.0) == pytest.approx(0.08332, abs=1e-5)
    with pytest.raises(ValueError):
        truncated_mean_positive_part(0.0, 0.0)


@given(m=st.floats(-4, 4), sd=st.floats(0.1, 3))
@settings(max_examples=40)
def test_truncated_kernels_match_numeric_integrals(m, sd):
    pdf = lambda y: stats.norm.pdf(y, m, sd)  # noqa: E731
    hi = max(m, 0) + 12 * sd
    first, _ = integrate.quad(lambda y: y * pdf(y), 0, hi, epsabs=1e-13)
    second, _ = integrate.quad(lambda y: y * y * pdf(y), 0, hi, epsabs=1e-13)
    assert truncated_mean_positive_part(m, sd) == pytest.approx(first, abs=1e-10)
    assert truncated_second_moment(m, sd) == pytest.approx(second, abs=1e-10)
    # conditional mean from the density rescaled by its value at 0, so deep tails stay representable
    shape = lambda y: np.exp(stats.norm.logpdf(y, m, sd) - stats.norm.logpdf(0.0, m, sd))  # noqa: E731
    num, _ = integrate.quad(lambda y: y * shape(y), 0, hi, epsabs=0, epsrel=1e-12, limit=200)
    den, _ = integrate.quad(shape, 0, hi, epsabs=0, epsrel=1e-12, limit=200)
    assert truncated_conditional_mean(m, sd) == pytest.approx(num / den, rel=1e-8)


def test_truncated_conditional_mean_deep_tail_is_stable():
    v = truncated_conditional_mean(-40.0, 1.0)
    assert np.isfinite(v) and 0 < v < 0.03


def test_directional_kernel_mirrors():
    assert directional_profit_kernel(0.3, 0.5, 1.0) == pytest.approx(-directional_profit_kernel(0.3, 0.5, -1.0))
    # E[D] in a high-type market
    assert directional_profit_kernel(0.3, 0.5, 1.0) == pytest.approx(0.3, abs=1e-14)


# ---------------------------------------------------------------- transaction prices


def test_transaction_prices_symmetric_agents():
    q = q_of(1.0, 1.0, 0.5)
    b = ab_coefficients(q).b
    tp = expected_transaction_prices(q, 0.8, 0.6)
    # with no edge each conditional differential is a half-normal mean
    half = b * math.sqrt(2 / math.pi)
    assert tp.high_correct == pytest.approx(0.6 - half)
    assert tp.high_erroneous == pytest.approx(0.6 + half)
    assert tp.low_correct == pytest.approx(0.6 + half)
    assert tp.low_erroneous == pytest.approx(0.6 - half)


def test_transaction_prices_converge_as_x_vanishes():
    q = q_of(0.5, 1.5, 0.5)
    tp = expected_transaction_prices(q, 1e-9, 0.0)
    assert tp.high_correct == pytest.approx(-tp.high_erroneous, abs=1e-8)
    assert tp.low_correct == pytest.approx(-tp.low_erroneous, abs=1e-8)


@pytest.mark.parametrize("agent", [1, 2])
def test_transaction_prices_match_simulation(agent):
    q = q_of(0.7, 1.2, 0.6, 0.3)
    rng = np.random.default_rng(25 + agent)
    x = 0.9
    sign = -1 if agent == 1 else 1  # D_own = sign * (S^2 - S^1) / 2
    d = sign * simulated_differential(q, x, 300_000, rng)
    tp = expected_transaction_prices(q, x, 1.0, agent)
    for value, sample in [(tp.high_correct, 1.0 - d[d > 0]), (tp.high_erroneous, 1.0 - d[d < 0])]:
        m, se = oracles.mean_se(sample)
        assert abs(value - m) < 3 * se


# ---------------------------------------------------------------- expected profit


def test_expected_profit_zero_without_edge():
    assert expected_profit(q_of(1.0, 1.0, 0.5), STD, 1) == pytest.approx(0.0, abs=1e-14)
    assert expected_profit(q_of(1.0, 1.0, 0.5, model=DIGITAL), (0.5, 0.5), 1) == pytest.approx(0.0, abs=1e-14)


@given(s1=sig, gap=st.floats(0.05, 1.5), t=st.floats(0.05, 0.95), frac=st.floats(0.0, 0.9), m=st.floats(-1, 1), v=st.floats(0.05, 1))
@settings(max_examples=40)
def test_inferior_agent_never_expects_profit(s1, gap, t, frac, m, v):
    q = q_of(s1, s1 + gap, t, frac * t)
    assert expected_profit(q, GaussianPosterior(m, v), 1) <= 0
    assert expected_profit(q, GaussianPosterior(m, v), 2) >= 0


@given(s1=sig, s2=sig, t=st.floats(0.05, 0.95), frac=st.floats(0.0, 0.9), m=st.floats(-1.5, 1.5), v=st.floats(0.02, 1))
@settings(max_examples=40)
def test_profit_closed_form_equals_quadrature(s1, s2, t, frac, m, v):
    q = q_of(s1, s2, t, frac * t)
    for agent in (1, 2):
        numeric = expected_profit(q, GaussianPosterior(m, v), agent)
        assert numeric == pytest.approx(float(expected_profit_gaussian_closed(q, m, v, agent)), abs=1e-12)


def test_expected_abs_gaussian():
    assert expected_abs_gaussian(0.0, 1.0) == pytest.approx(math.sqrt(2 / math.pi))
    vals = stats.norm(0.7, 0.4).rvs(size=400_000, random_state=1)
    assert expected_abs_gaussian(0.7, 0.16) == pytest.approx(np.abs(vals).mean(), rel=3e-3)


def _digital_profit_sample(q, masses, n, rng, agent):
    x = np.where(rng.random(n) < masses[1], 1.0, 0.0)
    xi1t, xi1s, xi2t, xi2s = oracles.pair_signals(q.t, q.s, q.sigma1, q.sigma2, x, n, rng)
    S1 = posterior_mean(DIGITAL, *likelihood_coefficients(q.t, xi1t, q.sigma1, 1.0, q.s, xi2s, q.sigma2))
    S2 = posterior_mean(DIGITAL, *likelihood_coefficients(q.t, xi2t, q.sigma2, 1.0, q.s, xi1s, q.sigma1))
    own, other = (S1, S2) if agent == 1 else (S2, S1)
    return np.where(x > 0.5, 1.0, -1.0) * 0.5 * (own - other)


@pytest.mark.parametrize("agent,t,s,masses", [(1, 0.5, 0.0, (0.5, 0.5)), (2, 0.7, 0.4, (0.3, 0.7))])
def test_digital_profit_and_variance_match_simulation(agent, t, s, masses):
    q = q_of(0.5, 1.5, t, s, DIGITAL)
    prof = _digital_profit_sample(q, masses, 200_000, np.random.default_rng(27), agent)
    m, se = oracles.mean_se(prof)
    assert abs(expected_profit(q, masses, agent) - m) < 3 * se
    assert profit_variance(q, masses, agent) == pytest.approx(prof.var(ddof=1), rel=0.05)


def test_profit_variance_matches_simulation_gaussian():
    q = q_of(0.9, 1.4, 0.4, 0.1)
    post = GaussianPosterior(0.2, 0.5)
    rng = np.random.default_rng(28)
    x = post.mean + post.sd * rng.standard_normal(1_000_000)
    prof = np.sign(x) * -simulated_differential(q, x, x.size, rng)
    assert profit_variance(q, post, 1) == pytest.approx(prof.var(ddof=1), rel=0.05)


def test_profit_variance_vanishes_with_degenerate_differential():
    q = QualityInputs(1e-10, 0.0, 1.0, 1.0, GAUSS, 1.0)
    assert profit_variance(q, STD, 1) < 1e-9


@given(s1=sig, s2=sig, t=st.floats(0.01, 0.95), m=st.floats(-2, 2), v=st.floats(0.01, 2))
@settings(max_examples=40)
def test_profit_variance_nonnegative(s1, s2, t, m, v):
    assert profit_variance(q_of(s1, s2, t), GaussianPosterior(m, v), 1) >= 0


# ---------------------------------------------------------------- profit-to-go


def test_profit_to_go_last_auction_and_no_edge():
    grid = make_grid(1.0, 6)
    base = q_of(0.5, 1.5, grid[1])
    single = profit_to_go(base, grid, 5, 2, [True], STD, 2)
    assert single == pytest.approx(expected_profit(base.at(grid[5], grid[2]), STD, 2))
    flat = q_of(1.0, 1.0, grid[1])
    assert profit_to_go(flat, grid, 1, 0, [True] * 5, STD, 1) == pytest.approx(0.0, abs=1e-13)


def test_profit_to_go_all_trade_beats_all_skip_for_superior_agent():
    grid = make_grid(1.0, 8)
    base = q_of(0.5, 1.5, grid[1])
    trade = profit_to_go(base, grid, 1, 0, [True] * 7, STD, 2)
    skip_then_trade = profit_to_go(base, grid, 1, 0, [False] * 6 + [True], STD, 2)
    assert trade > skip_then_trade > 0


def test_profit_to_go_validation():
    grid = make_grid(1.0, 4)
    base = q_of(0.5, 1.5, grid[1])
    with pytest.raises(ValueError):
        profit_to_go(base, grid, 1, 0, [True], STD)
    with pytest.raises(ValueError):
        profit_to_go(base, grid, 4, 0, [], STD)
    with pytest.raises(ValueError):
        profit_to_go(base, grid, 2, 2, [True, True], STD)


def test_normal_cdf_accuracy():
    z = np.linspace(-8, 8, 161)
    assert np.max(np.abs(normal_cdf(z) - stats.norm.cdf(z))) < 1e-15
