from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from nolmswitch.profiles import GAUSSIAN_FWHM_PER_SIGMA, Profile, gaussian_profile, tailed_pulse, uniform_grid
from nolmswitch.switch import (
    FiberParams,
    Port,
    PumpPulse,
    PumpShape,
    Regime,
    SwitchConfig,
    WindowFitError,
    WindowCurve,
    background_probability,
    color_phases,
    config_for_length,
    config_for_walkoff,
    contrast,
    deconvolve_window,
    measured_window,
    peak_phase,
    phase_from_port_powers,
    phase_profile,
    raman_background,
    reflection_profile,
    regime,
    route,
    route_many,
    survival_probability,
    switching_window,
    walkoff,
    window_fwhm,
)

EXTINCTION = 1 / 151


@pytest.mark.parametrize('length_m', [0.0, 2.0, 100.0, 500.0])
def test_walkoff(length_m):
    fiber = FiberParams(length_m=length_m, inv_gv_signal_ps_per_m=4896.0, inv_gv_pump_ps_per_m=4897.7)
    breakdown = walkoff(fiber)
    assert breakdown.tau_s_ps == pytest.approx(length_m * (4897.7 - 4896.0), rel=1e-9, abs=1e-12)
    assert breakdown.t_prime_ps == pytest.approx(length_m * 4897.7)
    assert breakdown.delta_x_m == pytest.approx(length_m * (4897.7 / 4896.0 - 1), abs=1e-12)


def test_fiber_rejects_a_faster_pump():
    with pytest.raises(ValueError):
        FiberParams(inv_gv_signal_ps_per_m=4896.0, inv_gv_pump_ps_per_m=4895.0)


@pytest.mark.parametrize(
    ('tau_s', 'tau_p', 'expected'),
    [
        (3.4, 5.0, Regime.MATCHED),
        (5.0, 5.0, Regime.CRITICAL),
        (170.0, 5.0, Regime.WALKTHROUGH),
    ]
)
def test_regime(tau_s, tau_p, expected):
    assert regime(tau_s, tau_p) is expected


def test_peak_phase():
    assert peak_phase(2.5, 2.5) == pytest.approx(np.pi)
    assert peak_phase(1.25, 2.5) == pytest.approx(np.pi / 2)


def test_config_for_length_uses_measured_losses():
    config = config_for_length(500)
    assert config.fiber.length_m == 500
    assert config.loss_t_db == pytest.approx(1.7)
    assert config.loss_r_db == pytest.approx(2.1)
    assert config.tau_s_ps == pytest.approx(850.0, rel=1e-6)
    assert config_for_length(250).loss_t_db == pytest.approx(SwitchConfig().loss_t_db)


def test_grid_must_resolve_the_pump():
    with pytest.raises(ValueError):
        SwitchConfig(grid_step_ps=2.0)


@pytest.mark.parametrize('length_m', [100, 500])
def test_window_plateau_at_e_pi(length_m):
    config = config_for_length(length_m)
    window = switching_window(config)
    assert window.values.max() == pytest.approx(1 - EXTINCTION, abs=1e-9)
    assert window.values.min() == pytest.approx(EXTINCTION, abs=1e-9)
    assert window_fwhm(config) == pytest.approx(config.tau_s_ps, rel=0.01)
    assert window.peak_time_ps == pytest.approx(config.window_center_ps, abs=config.tau_s_ps / 2)


def test_window_without_pump_is_the_extinction():
    window = switching_window(SwitchConfig().with_energy(0.0))
    np.testing.assert_allclose(window.values, EXTINCTION)


def test_transmission_and_reflection_sum_to_one():
    window = switching_window(SwitchConfig().with_energy(1.7))
    reflection = reflection_profile(window)
    np.testing.assert_allclose(window.values + reflection.values, 1.0, rtol=0, atol=1e-15)
    assert window(-1e6) + reflection(-1e6) == pytest.approx(1.0)


def test_phase_profile_extends_over_the_span():
    config = SwitchConfig()
    phase = phase_profile(config, span=(-500.0, 900.0))
    assert phase.t0_ps <= -500.0
    assert phase.t_end_ps >= 900.0
    assert phase.phi.min() >= 0
    assert phase.phi.max() == pytest.approx(np.pi, rel=1e-9)


def test_sampled_pump_matches_gaussian_pump():
    sampled = PumpPulse(center_ps=10.0, profile=gaussian_profile(0.0, 5.0, 0.05, half_span_fwhm=6.0))
    assert sampled.shape is PumpShape.SAMPLED
    gaussian = SwitchConfig(pump=PumpPulse(center_ps=10.0))
    other = replace(gaussian, pump=sampled)
    assert window_fwhm(other) == pytest.approx(window_fwhm(gaussian), rel=1e-3)


@pytest.mark.parametrize(
    ('loss_db', 'expected'),
    [
        (0.0, 1.0),
        (3.0, 0.501187),
        (10.0, 0.1),
    ]
)
def test_survival_probability(loss_db, expected):
    assert survival_probability(loss_db) == pytest.approx(expected, rel=1e-5)


def test_unpumped_contrast_is_extinction_ratio():
    config = config_for_length(500).with_energy(0.0)
    probe = tailed_pulse().shifted(config.window_center_ps)
    assert contrast(probe, config) == pytest.approx(EXTINCTION / (1 - EXTINCTION), rel=1e-9)


def test_peak_contrast_of_the_long_loop():
    config = config_for_length(500)
    probe = tailed_pulse().shifted(config.window_center_ps)
    assert contrast(probe, config) == pytest.approx(150.0, rel=0.01)
    assert contrast(probe.power(2).normalized(), config) == pytest.approx(150.0, rel=0.01)


@pytest.mark.parametrize('energy_nj', [0.0, 1.25, 2.5, 3.0, 5.0])
@pytest.mark.parametrize('exponent', [1, 2])
def test_contrast_never_exceeds_the_extinction_ceiling(energy_nj, exponent):
    config = config_for_length(500).with_energy(energy_nj)
    probe = tailed_pulse().shifted(config.window_center_ps).power(exponent).normalized()
    assert contrast(probe, config) <= (1 - EXTINCTION) / EXTINCTION * (1 + 1e-12)


def test_short_loop_contrast_is_limited_by_the_tail():
    config = config_for_length(100)
    probe = tailed_pulse().shifted(config.window_center_ps)
    assert contrast(probe, config) < 15.0


def test_contrast_needs_a_probe():
    with pytest.raises(ValueError):
        contrast(Profile(0.0, 1.0, [0.0, 0.0]), SwitchConfig())


def test_route_many_statistics(rng):
    config = config_for_length(500)
    arrivals = np.full(200_000, config.window_center_ps)
    ports = route_many(arrivals, config, rng)
    survival_t = survival_probability(config.loss_t_db)
    expected_t = (1 - EXTINCTION) * survival_t
    assert np.mean(ports == Port.PORT_T) == pytest.approx(expected_t, abs=0.005)
    assert np.mean(ports == Port.LOST) == pytest.approx(1 - expected_t - EXTINCTION * 0.616595, abs=0.005)


def test_route_is_reproducible():
    config = SwitchConfig()
    first = route_many([0.0, 50.0, 100.0], config, np.random.default_rng(7))
    second = route_many([0.0, 50.0, 100.0], config, np.random.default_rng(7))
    np.testing.assert_array_equal(first, second)
    assert isinstance(route(50.0, config, np.random.default_rng(7)), Port)


def test_measured_window_broadens_the_window():
    config = config_for_length(100)
    probe = tailed_pulse()
    delays = uniform_grid(-400.0, 600.0, 5.0)
    curve = measured_window(config, probe, 1, delays)
    assert curve.response.max() < 1 - EXTINCTION
    assert curve.fwhm > window_fwhm(config)


def test_measured_window_rejects_bad_exponents():
    with pytest.raises(ValueError):
        measured_window(SwitchConfig(), tailed_pulse(), 3, [0.0])


@pytest.mark.parametrize('length_m', [100, 500])
def test_deconvolution_recovers_the_intrinsic_width(length_m):
    config = config_for_length(length_m)
    probe = tailed_pulse()
    delays = uniform_grid(-500.0, config.tau_s_ps + 400.0, 5.0)
    measured = measured_window(config, probe, 1, delays)
    assert deconvolve_window(measured, probe, 1, config) == pytest.approx(window_fwhm(config), rel=0.02)


def test_deconvolution_rejects_a_bad_fit():
    config = config_for_length(100)
    delays = uniform_grid(-500.0, 600.0, 5.0)
    # a double-peaked response no single window reproduces
    response = np.exp(-((delays + 300) / 40) ** 2) + np.exp(-((delays - 400) / 40) ** 2)
    with pytest.raises(WindowFitError):
        deconvolve_window(WindowCurve(delays, response), tailed_pulse(), 1, config)


def test_raman_background(rng):
    config = config_for_length(500)
    sample = raman_background(config, 10 ** 9, rng)
    assert sample.expected == pytest.approx(10 ** 9 * 4e-7 * 500)
    assert abs(sample.counts - sample.expected) < 5 * np.sqrt(sample.expected)
    assert raman_background(config, 0, rng).counts == 0


@pytest.mark.parametrize(
    ('length_m', 'gate_ps', 'expected'),
    [
        (50, None, 2e-5),
        (50, 200.0, 2e-5),
        (500, 200.0, 4e-5),
        (500, None, 2e-4),
    ]
)
def test_background_probability(length_m, gate_ps, expected):
    assert background_probability(config_for_length(length_m), gate_ps) == pytest.approx(expected)


@pytest.mark.parametrize('phi', [0.1, np.pi / 2, 2.0, np.pi])
def test_phase_from_port_powers(phi):
    p_t = np.sin(phi / 2) ** 2
    assert phase_from_port_powers(3 * p_t, 3 * (1 - p_t)) == pytest.approx(phi)


def test_phase_from_port_powers_needs_power():
    with pytest.raises(ValueError):
        phase_from_port_powers(0.0, 0.0)


def test_color_phases_at_e_pi():
    config = config_for_length(500)
    phases = color_phases(config.e_pi_nj, config)
    assert phases == pytest.approx((np.pi / 2, np.pi / 2), rel=1e-6)
    skewed = color_phases(config.e_pi_nj, replace(config, color_imbalance=0.2))
    assert skewed[0] == pytest.approx(1.2 * np.pi / 2, rel=1e-6)
    assert skewed[1] == pytest.approx(0.8 * np.pi / 2, rel=1e-6)


def test_walkoff_breakdown_is_consistent():
    rng = np.random.default_rng(1701)
    for _ in range(1000):
        inv_gv_signal = rng.uniform(4800.0, 5000.0)
        fiber = FiberParams(
            length_m=rng.uniform(0.0, 2000.0),
            inv_gv_signal_ps_per_m=inv_gv_signal,
            inv_gv_pump_ps_per_m=inv_gv_signal + rng.uniform(0.0, 5.0),
        )
        breakdown = walkoff(fiber)
        # distance the pump falls behind, at the signal group velocity
        assert breakdown.delta_x_m * inv_gv_signal == pytest.approx(breakdown.tau_s_ps, rel=1e-9, abs=1e-9)
        assert breakdown.t_prime_ps - fiber.length_m * inv_gv_signal == pytest.approx(
            breakdown.tau_s_ps, rel=1e-9, abs=1e-12 * breakdown.t_prime_ps
        )


@pytest.mark.parametrize('energy_nj', [0.0, 0.5, 1.25, 2.5, 3.75, 5.0])
def test_plateau_phase_is_linear_in_energy(energy_nj):
    config = config_for_length(500).with_energy(energy_nj)
    phase = phase_profile(config)
    assert phase.phi.max() == pytest.approx(np.pi * energy_nj / config.e_pi_nj, rel=0.005, abs=1e-12)


def test_plateau_does_not_depend_on_the_pump_shape():
    # asymmetric pump with a slow trailing edge, on a 50-fs grid
    times = np.arange(0.0, 30.0, 0.05)
    sampled = PumpPulse(center_ps=10.0, profile=Profile(0.0, 0.05, times * np.exp(-times / 1.5)))
    gaussian = config_for_length(100).with_pump_center(10.0)
    other = replace(gaussian, pump=sampled)
    assert regime(other.tau_s_ps, other.pump.fwhm_ps) is Regime.WALKTHROUGH

    center = gaussian.window_center_ps
    assert phase_profile(other).phi.max() == pytest.approx(np.pi, rel=0.01)
    assert switching_window(other)(center) == pytest.approx(switching_window(gaussian)(center), rel=0.01)
    assert window_fwhm(other) == pytest.approx(window_fwhm(gaussian), rel=0.01)


def test_critical_phase_matches_direct_integration():
    config = config_for_walkoff(SwitchConfig(), 5.0)
    assert regime(config.tau_s_ps, config.pump.fwhm_ps) is Regime.CRITICAL
    phase = phase_profile(config)
    sigma = config.pump.fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA

    def pump(t):
        return np.exp(-0.5 * (t / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))

    times = phase.times[::10]
    expected = [np.pi * quad(pump, t - config.tau_s_ps, t, epsabs=1e-13, epsrel=1e-12)[0] for t in times]
    np.testing.assert_allclose(phase.phi[::10], expected, rtol=0, atol=1e-8)
    # a pump no longer than the walkoff never reaches the full plateau
    assert phase.phi.max() < 0.8 * np.pi


@pytest.mark.parametrize('case', range(20))
def test_pair_rate_window_is_narrower(case):
    rng = np.random.default_rng(case)
    config = config_for_length(rng.uniform(2.0, 60.0))
    signal = tailed_pulse(
        core_fwhm_ps=rng.uniform(60.0, 140.0),
        tail_fraction=rng.uniform(0.0, 0.2),
        tail_decay_ps=rng.uniform(50.0, 150.0),
    )
    delays = uniform_grid(-400.0, config.tau_s_ps + 500.0, 2.0)
    classical = measured_window(config, signal, 1, delays)
    pair_rate = measured_window(config, signal, 2, delays)
    assert pair_rate.fwhm <= classical.fwhm * (1 + 1e-6)


@pytest.mark.parametrize(
    ('arrival', 'port', 'loss'),
    [
        ('center', Port.PORT_T, 'loss_t_db'),
        ('outside', Port.PORT_R, 'loss_r_db'),
    ]
)
def test_route_many_matches_the_port_probabilities(rng, arrival, port, loss):
    config = config_for_length(500)
    window = switching_window(config, span=(-2000.0, 2000.0))
    time = config.window_center_ps if arrival == 'center' else -1500.0
    n = 1_000_000
    ports = route_many(np.full(n, time), config, rng, window)
    expected = (1 - EXTINCTION) * survival_probability(getattr(config, loss))
    bound = 3 * np.sqrt(expected * (1 - expected) / n)
    assert abs(np.mean(ports == port) - expected) <= bound
