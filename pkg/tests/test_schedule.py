import numpy as np
import pytest
from scipy import integrate

from scorelab.errors import DomainError, SingularityError
from scorelab.schedule import (
    NoiseSchedule,
    TimeWindow,
    conditional_score,
    forward_perturb,
    m_sigma,
)


def test_constant_beta_closed_form(const_schedule):
    m, s = m_sigma(const_schedule, np.log(2.0))
    assert m == pytest.approx(0.5, abs=1e-15)
    assert s == pytest.approx(np.sqrt(0.75), abs=1e-15)


def test_t_zero_is_noiseless(const_schedule):
    m, s = m_sigma(const_schedule, 0.0)
    assert (m, s) == (1.0, 0.0)


def test_linear_schedule_matches_quadrature_oracle():
    sched = NoiseSchedule(kind="linear", params=(0.5, 0.5))
    # oracle: numeric integral of beta, independent of the closed form
    integral, _ = integrate.quad(lambda s: 0.5 + 0.5 * s, 0.0, 1.0)
    m, s = m_sigma(sched, 1.0)
    assert m == pytest.approx(np.exp(-integral), rel=1e-12)
    assert m == pytest.approx(np.exp(-0.75), rel=1e-12)
    assert s == pytest.approx(np.sqrt(1.0 - np.exp(-1.5)), rel=1e-12)
    assert s == pytest.approx(0.88139, abs=2e-5)


def test_poly_schedule_integral_matches_scipy():
    sched = NoiseSchedule(kind="poly", params=(1.0, 0.2, 0.05), horizon=5.0)
    for t in (0.3, 1.7, 4.2):
        ref, _ = integrate.quad(lambda s: 1.0 + 0.2 * s + 0.05 * s * s, 0.0, t)
        assert sched.beta_integral(t) == pytest.approx(ref, rel=1e-10)


def test_negative_time_rejected(const_schedule):
    with pytest.raises(DomainError):
        m_sigma(const_schedule, -0.1)


def test_m_sigma_identity_and_monotonicity(const_schedule):
    ts = np.linspace(0.0, 8.0, 1000)
    m, s = m_sigma(const_schedule, ts)
    assert np.max(np.abs(m * m + s * s - 1.0)) < 1e-12
    assert np.all(np.diff(m) < 0)
    assert np.all(np.diff(s[:-100]) > 0)  # sigma saturates at 1 numerically


def test_beta_within_certified_bounds():
    for sched in (
        NoiseSchedule(),
        NoiseSchedule(kind="linear", params=(0.5, 0.5), horizon=5.0),
        NoiseSchedule(kind="poly", params=(1.0, -0.05, 0.02), horizon=5.0),
    ):
        ts = np.linspace(0.0, sched.horizon, 500)
        vals = sched.beta(ts)
        assert np.all(vals <= sched.c2 + 1e-12)
        assert np.all(vals >= 1.0 / sched.c2 - 1e-12)


def test_nonpositive_beta_rejected():
    with pytest.raises(DomainError):
        NoiseSchedule(kind="linear", params=(0.1, -0.5), horizon=5.0)


def test_forward_perturb_small_t_returns_x0(const_schedule):
    rng = np.random.default_rng(0)
    x0 = np.array([0.3, -0.4])
    out = forward_perturb(const_schedule, x0, 1e-14, rng)
    assert np.allclose(out, x0, atol=1e-6)


def test_forward_perturb_variance(const_schedule):
    # chi-square oracle: sample variance of N(0, sigma^2) within 3 SE
    rng = np.random.default_rng(1)
    t = 0.7
    _, sigma = m_sigma(const_schedule, t)
    n = 100_000
    draws = forward_perturb(const_schedule, np.zeros((n, 1)), t, rng)
    var = draws.var()
    se = sigma**2 * np.sqrt(2.0 / (n - 1))
    assert abs(var - sigma**2) < 3 * se


def test_forward_perturb_seeded_reproducible(const_schedule):
    a = forward_perturb(const_schedule, np.ones((5, 2)), 0.5, np.random.default_rng(9))
    b = forward_perturb(const_schedule, np.ones((5, 2)), 0.5, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_conditional_score_zero_at_mean(const_schedule):
    x0 = np.array([0.2, -0.7])
    m, _ = m_sigma(const_schedule, 0.4)
    assert np.allclose(conditional_score(const_schedule, m * x0, x0, 0.4), 0.0)


def test_conditional_score_hand_value(const_schedule):
    # beta=1, t=ln2: m=1/2, sigma^2=3/4; x0=1, x=0 -> -(0-1/2)/(3/4) = 2/3
    val = conditional_score(const_schedule, np.array([0.0]), np.array([1.0]), np.log(2.0))
    assert val[0] == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_conditional_score_matches_log_density_gradient(const_schedule):
    # finite-difference oracle on log N(x; m x0, sigma^2 I)
    t, x0 = 0.35, np.array([0.4, -0.1, 0.6])
    m, sigma = m_sigma(const_schedule, t)

    def logp(x):
        return -0.5 * np.sum((x - m * x0) ** 2) / sigma**2

    x = np.array([0.1, 0.5, -0.3])
    h = 1e-6
    fd = np.array(
        [
            (logp(x + h * e) - logp(x - h * e)) / (2 * h)
            for e in np.eye(3)
        ]
    )
    ana = conditional_score(const_schedule, x, x0, t)
    assert np.allclose(ana, fd, rtol=1e-6, atol=1e-8)


def test_conditional_score_singular_at_zero(const_schedule):
    with pytest.raises(SingularityError):
        conditional_score(const_schedule, np.zeros(1), np.zeros(1), 0.0)


def test_time_window_validation():
    with pytest.raises(DomainError):
        TimeWindow(0.0, 1.0)
    with pytest.raises(DomainError):
        TimeWindow(0.5, 0.5)
