import numpy as np
import pytest

from nolmswitch.profiles import (
    PhaseProfile,
    Profile,
    gaussian_profile,
    level_crossings,
    tailed_pulse,
    uniform_grid,
    width_at,
)


def test_gaussian_profile():
    profile = gaussian_profile(center_ps=40.0, fwhm_ps=100.0, step_ps=0.5)
    assert profile.area == pytest.approx(1.0)
    assert profile.peak_time_ps == pytest.approx(40.0)
    assert profile.fwhm == pytest.approx(100.0, rel=1e-4)


def test_squared_gaussian_narrows_by_root_two():
    profile = gaussian_profile(center_ps=0.0, fwhm_ps=100.0, step_ps=0.5).power(2)
    assert profile.fwhm == pytest.approx(100.0 / np.sqrt(2), rel=1e-4)


@pytest.mark.parametrize(
    ('level', 'expected'),
    [
        (0.5, 2.0),
        (0.25, 3.0),
        (0.75, 1.0),
    ]
)
def test_width_at_triangle(level, expected):
    x = np.arange(0.0, 5.0)
    y = np.array([0.0, 0.5, 1.0, 0.5, 0.0])
    assert width_at(x, y, level) == pytest.approx(expected)


def test_width_is_measured_from_the_minimum():
    x = np.arange(0.0, 5.0)
    y = np.array([1.0, 1.5, 2.0, 1.5, 1.0])
    assert level_crossings(x, y, 0.5) == pytest.approx((1.0, 3.0))


@pytest.mark.parametrize('level', [0.0, 1.0, -0.1])
def test_width_level_must_be_inside_the_range(level):
    with pytest.raises(ValueError):
        width_at(np.arange(3.0), np.array([0.0, 1.0, 0.0]), level)


def test_flat_curve_has_no_width():
    with pytest.raises(ValueError):
        width_at(np.arange(3.0), np.ones(3), 0.5)


def test_profile_interpolation_and_fill():
    profile = Profile(10.0, 1.0, [0.0, 2.0, 4.0], fill=0.25)
    assert profile(11.5) == pytest.approx(3.0)
    assert profile(5.0) == pytest.approx(0.25)
    assert profile(13.0) == pytest.approx(0.25)
    assert profile.t_end_ps == pytest.approx(12.0)
    assert len(profile) == 3


def test_profile_transforms_keep_the_grid():
    profile = Profile(0.0, 0.5, [1.0, 3.0, 1.0], fill=1.0)
    normalized = profile.normalized()
    assert normalized.area == pytest.approx(1.0)
    assert normalized.fill == pytest.approx(1.0 / profile.area)
    shifted = profile.shifted(7.0)
    assert shifted.t0_ps == pytest.approx(7.0)
    np.testing.assert_array_equal(shifted.values, profile.values)
    assert profile.power(2).values == pytest.approx([1.0, 9.0, 1.0])


def test_integrate_against():
    ones = Profile(0.0, 1.0, np.ones(11))
    ramp = Profile(0.0, 1.0, np.arange(11.0))
    assert ones.integrate_against(ramp) == pytest.approx(55.0)
    assert ones.fraction_between(0.0, 4.0) == pytest.approx(5 / 11)


@pytest.mark.parametrize(
    'values',
    [
        [],
        [1.0, np.inf],
    ]
)
def test_invalid_profiles(values):
    with pytest.raises(ValueError):
        Profile(0.0, 1.0, values)


def test_profile_step_must_be_positive():
    with pytest.raises(ValueError):
        Profile(0.0, 0.0, [1.0])


def test_phase_profile_is_nonnegative():
    assert PhaseProfile(0.0, 1.0, [0.0, np.pi]).phi == pytest.approx([0.0, np.pi])
    with pytest.raises(ValueError):
        PhaseProfile(0.0, 1.0, [0.0, -0.1])


@pytest.mark.parametrize(
    ('start', 'end', 'step', 'expected_size'),
    [
        (0.0, 10.0, 1.0, 11),
        (0.0, 10.5, 1.0, 12),
        (5.0, 5.0, 1.0, 1),
        (0.0, 800.0, 5.0, 161),
    ]
)
def test_uniform_grid(start, end, step, expected_size):
    grid = uniform_grid(start, end, step)
    assert grid.size == expected_size
    assert grid[0] == start
    assert grid[-1] >= end - 1e-9


def test_tailed_pulse():
    pulse = tailed_pulse()
    sigma = 100.0 / (2 * np.sqrt(2 * np.log(2)))
    assert pulse.area == pytest.approx(1.0)
    assert pulse.t0_ps == pytest.approx(-3 * sigma)
    assert pulse.t_end_ps - pulse.t0_ps == pytest.approx(370.0, abs=0.5)
    assert pulse.peak_time_ps == pytest.approx(0.0, abs=1.0)
    # the tail makes the pulse asymmetric, with more energy after the peak
    assert pulse.fraction_between(0.0, pulse.t_end_ps) > 0.5


def test_tailed_pulse_without_tail_is_a_truncated_gaussian():
    pulse = tailed_pulse(tail_fraction=0.0)
    assert pulse.area == pytest.approx(1.0)
    assert pulse.fwhm == pytest.approx(100.0, rel=1e-3)


@pytest.mark.parametrize(
    'kwargs',
    [
        {'tail_fraction': 1.0},
        {'core_fwhm_ps': 0.0},
        {'total_width_ps': 100.0},
    ]
)
def test_tailed_pulse_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        tailed_pulse(**kwargs)
