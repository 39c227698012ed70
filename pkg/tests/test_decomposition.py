import numpy as np
import pytest

from scorelab.decomposition import (
    AbsKink,
    CosinePair,
    IntegrationSpec,
    PolyPair,
    ProductDensitySpec,
    SIGMA_GRID_SMALLNESS,
    direct_diffused_density,
    eval_Delta,
    eval_G,
    eval_partial_convolution,
    fit_loglog_slope,
    probe_points,
    spec_cosine_single,
    spec_cosine_two,
    spec_kink_bivariate,
    spec_kink_pair,
    spec_linear,
    spec_quadratic,
    spec_smooth_taylor,
    t_for_sigma,
    taylor_residual_integral,
    verify_delta_refactor,
    verify_identity,
    verify_smallness,
    verify_taylor_refactor,
)
from scorelab.errors import DomainError
from scorelab.schedule import NoiseSchedule, m_sigma


@pytest.fixture(scope="module")
def sched():
    return NoiseSchedule()


def t_at_m(m_target):
    # constant beta = 1: m_t = e^-t
    return -np.log(m_target)


def test_eval_g_empty_subset_is_one(sched):
    spec = spec_cosine_single()
    assert eval_G((), np.array([0.1, 0.2]), 0.3, spec, sched) == 1.0


def test_eval_g_constant_one(sched):
    spec = ProductDensitySpec(
        d=2, pairs=((0, 1),), comps=(PolyPair(coeffs=((0, 0, 1.0),)),)
    )
    assert eval_G((0,), np.array([0.3, -0.2]), 0.4, spec, sched) == pytest.approx(1.0)


def test_eval_g_hand_value(sched):
    # f(u,v) = 1 + 0.1 u v at x=(0.2,-0.4), m=0.8 -> 1 + 0.1*0.25*(-0.5)
    spec = ProductDensitySpec(
        d=2, pairs=((0, 1),), comps=(PolyPair(coeffs=((0, 0, 1.0), (1, 1, 0.1)),),)
    )
    t = t_at_m(0.8)
    val = eval_G((0,), np.array([0.2, -0.4]), t, spec, sched)
    assert val == pytest.approx(0.9875, rel=1e-12)


def test_probe_outside_region_rejected(sched):
    spec = spec_cosine_single()
    t = t_at_m(0.8)
    with pytest.raises(DomainError):
        eval_G((0,), np.array([0.9, 0.0]), t, spec, sched)
    with pytest.raises(DomainError):
        eval_Delta((0,), np.array([0.9, 0.0]), t, spec, sched)


def test_eval_delta_empty_subset(sched):
    assert eval_Delta((), np.zeros(2), 0.5, spec_cosine_single(), sched) == 1.0


def test_eval_delta_vanishes_as_sigma_to_zero(sched):
    spec = spec_cosine_single()
    x = np.array([0.2, -0.3])
    vals = [
        abs(eval_Delta((0,), x, t_for_sigma(sched, s), spec, sched))
        for s in (0.1, 0.01, 0.001)
    ]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-4


def test_eval_delta_linear_f_is_zero_by_symmetry(sched):
    # Gaussian moment oracle: E[sigma~ (a y0 + b y1)] = 0
    spec = spec_linear()
    val = eval_Delta((0,), np.array([0.3, -0.1]), 0.4, spec, sched)
    assert val == pytest.approx(0.0, abs=1e-14)


def test_partial_convolution_empty_is_one(sched):
    assert eval_partial_convolution((), np.zeros(2), 0.5, spec_linear(), sched) == 1.0


@pytest.mark.parametrize(
    "factory", [spec_cosine_single, spec_cosine_two, spec_kink_bivariate]
)
def test_identity_on_shipped_specs(factory, sched):
    spec = factory()
    probes = probe_points(2, per_axis=3)
    t_grid = [t_for_sigma(sched, s) for s in (0.003, 0.03, 0.3)]
    report = verify_identity(spec, sched, probes, t_grid)
    assert report.max_rel_residual < 1e-3


def test_identity_constant_density_exact(sched):
    spec = ProductDensitySpec(
        d=2, pairs=((0, 1),), comps=(PolyPair(coeffs=((0, 0, 1.7),)),)
    )
    probes = probe_points(2, per_axis=3)
    report = verify_identity(spec, sched, probes, [0.05, 0.5])
    assert report.max_rel_residual < 1e-10


def test_identity_binomial_expansion_cross_check(sched):
    # |S|=2: hand expansion over the 4 subsets at one probe reproduces the
    # subset-sum machinery exactly
    spec = spec_cosine_two()
    t = t_for_sigma(sched, 0.1)
    m, _ = m_sigma(sched, t)
    x = np.array([0.3, -0.2]) * m
    g1 = eval_G((0,), x, t, spec, sched)
    g2 = eval_G((1,), x, t, spec, sched)
    g12 = eval_G((0, 1), x, t, spec, sched)
    d1 = eval_Delta((0,), x, t, spec, sched)
    d2 = eval_Delta((1,), x, t, spec, sched)
    d12 = eval_Delta((0, 1), x, t, spec, sched)
    hand = g12 * 1.0 + g2 * d1 + g1 * d2 + 1.0 * d12
    direct = direct_diffused_density(x, t, spec, sched) * m**2
    assert hand == pytest.approx(direct, rel=1e-6)


def test_smallness_univariate_kink_slope_and_constant(sched):
    # at the origin probe Delta_A = a sig~ E|y| exactly, so the ratio matches
    # the certificate l * sqrt(2/pi) / m within 5% and the slope is |A| = 1
    spec = spec_kink_pair()
    probes = probe_points(2, per_axis=3)  # includes the origin
    report = verify_smallness(spec, sched, (0,), probes, SIGMA_GRID_SMALLNESS)
    assert report.slope == pytest.approx(1.0, abs=0.1)
    for ratio, bound in zip(report.ratios, report.certificate_bounds):
        assert ratio <= bound * 1.0 + 1e-12
        assert ratio >= bound * 0.95  # tight at the kink probe
    assert report.fitted_constant <= max(report.certificate_bounds)


def test_smallness_pair_kink_slope_two(sched):
    spec = spec_kink_pair()
    probes = probe_points(2, per_axis=3)
    report = verify_smallness(spec, sched, (0, 1), probes, SIGMA_GRID_SMALLNESS)
    assert report.slope == pytest.approx(2.0, abs=0.1)
    for ratio, bound in zip(report.ratios, report.certificate_bounds):
        assert ratio <= bound + 1e-12


def test_smallness_constant_f_is_identically_zero(sched):
    spec = ProductDensitySpec(
        d=2, pairs=((0, 1),), comps=(PolyPair(coeffs=((0, 0, 2.0),)),)
    )
    probes = probe_points(2, per_axis=3)
    report = verify_smallness(spec, sched, (0,), probes, (0.01, 0.1))
    assert max(report.max_abs_delta) < 1e-14


def test_smallness_halving_sigma_scaling(sched):
    # |A|=2 with shared-coordinate linear factors: Delta_A = b1 b2 sig~^2
    spec = ProductDensitySpec(
        d=3,
        pairs=((0, 1), (1, 2)),
        comps=(
            PolyPair(coeffs=((0, 0, 1.0), (1, 0, 0.2), (0, 1, 0.3))),
            PolyPair(coeffs=((0, 0, 1.0), (1, 0, 0.25), (0, 1, 0.15))),
        ),
    )
    x = np.zeros(3)
    vals = []
    for s in (0.02, 0.01, 0.005):
        t = t_for_sigma(sched, s)
        vals.append(abs(eval_Delta((0, 1), x, t, spec, sched)))
    slope, _ = fit_loglog_slope((0.02, 0.01, 0.005), vals)
    assert slope == pytest.approx(2.0, abs=0.1)
    # Gaussian moment oracle: E[(0.2y0+0.3y1)(0.25y1+0.15y2)] = 0.3*0.25
    t = t_for_sigma(sched, 0.01)
    m, s = m_sigma(sched, t)
    assert vals[1] == pytest.approx(0.3 * 0.25 * (s / m) ** 2, rel=1e-6)


@pytest.mark.parametrize("subset", [(0,), (0, 1)])
def test_delta_refactor_smooth(sched, subset):
    spec = spec_cosine_two()
    probes = probe_points(2, per_axis=3)
    t_grid = [t_for_sigma(sched, s) for s in (0.01, 0.1, 0.3)]
    report = verify_delta_refactor(spec, sched, subset, probes, t_grid)
    tol = 1e-8 if len(subset) == 1 else 1e-3
    assert report.max_residual < tol


def test_delta_refactor_single_pair_directly(sched):
    # |A|=1: Delta = p_{t,{pair}} - G_{pair}
    spec = spec_cosine_single()
    t = t_for_sigma(sched, 0.05)
    m, _ = m_sigma(sched, t)
    x = np.array([0.25, -0.4]) * m
    delta = eval_Delta((0,), x, t, spec, sched)
    p_tb = eval_partial_convolution((0,), x, t, spec, sched)
    g = eval_G((0,), x, t, spec, sched)
    assert delta == pytest.approx(p_tb - g, abs=1e-8)


def test_taylor_refactor_linear_zero_residual(sched):
    spec = spec_linear()
    probes = probe_points(2, per_axis=3)
    t_grid = [t_for_sigma(sched, s) for s in (0.01, 0.1)]
    report = verify_taylor_refactor(spec, sched, (0,), probes, t_grid)
    assert report.max_residual < 1e-8


def test_taylor_refactor_quadratic_hand_value(sched):
    # f = 1 + u^2: Delta_A = sig~^2 exactly; Delta1 = sig~ E[y^2] = sig~
    spec = spec_quadratic()
    for s in (0.02, 0.1, 0.25):
        t = t_for_sigma(sched, s)
        m, sig = m_sigma(sched, t)
        sig_tilde = sig / m
        for frac in (np.array([0.0, 0.0]), np.array([0.4, 0.1]), np.array([-0.6, 0.3])):
            x = frac * m
            delta = eval_Delta((0,), x, t, spec, sched)
            assert delta == pytest.approx(sig_tilde**2, rel=1e-10)
            d1 = taylor_residual_integral(spec, sched, (0,), x, t)
            assert d1 == pytest.approx(sig_tilde, rel=1e-10)
    report = verify_taylor_refactor(
        spec, sched, (0,), probe_points(2, per_axis=3), [t_for_sigma(sched, 0.1)]
    )
    assert report.max_residual < 1e-6


def test_taylor_refactor_smooth_two_pairs(sched):
    spec = spec_smooth_taylor()
    probes = probe_points(2, per_axis=3)
    t_grid = [t_for_sigma(sched, s) for s in (0.01, 0.1, 0.3)]
    report = verify_taylor_refactor(spec, sched, (0, 1), probes, t_grid)
    assert report.max_residual < 1e-3


def test_taylor_residual_vanishes_with_sigma(sched):
    spec = spec_smooth_taylor()
    x = np.zeros(2)
    vals = [
        abs(taylor_residual_integral(spec, sched, (0, 1), x, t_for_sigma(sched, s)))
        for s in (0.1, 0.01, 0.001)
    ]
    assert vals[0] > vals[1] > vals[2]


def test_t_for_sigma_inverts(sched):
    for s in (0.001, 0.05, 0.5):
        t = t_for_sigma(sched, s)
        assert m_sigma(sched, t)[1] == pytest.approx(s, rel=1e-5)


def test_fit_loglog_slope_recovers_power_law():
    xs = np.array([1e-3, 1e-2, 1e-1])
    ys = 3.7 * xs**1.8
    slope, se = fit_loglog_slope(xs, ys)
    assert slope == pytest.approx(1.8, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-10)


def test_abskink_rejected_in_gradient_path(sched):
    from scorelab.errors import UnsupportedError

    spec = spec_kink_bivariate()
    with pytest.raises(UnsupportedError):
        verify_taylor_refactor(
            spec, sched, (0,), probe_points(2, per_axis=3), [0.1]
        )
