"""
Sagnac-loop (NOLM) switch model.

The pump and the signal co-propagate through the loop fiber; because the signal
is faster, it walks through the pump and accumulates a cross-phase equal to the
pump temporal profile convolved with a square of width tau_s (the walkoff time).
A phase of pi routes the signal from the reflected port R to the transmitted
port T.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from nolmswitch.profiles import (
    GAUSSIAN_FWHM_PER_SIGMA,
    PhaseProfile,
    Profile,
    uniform_grid,
    width_at,
)

logger = logging.getLogger(__name__)

# relative tolerance for the tau_s versus tau_p regime comparison
COMPARISON_EPSILON = 1e-6

DEFAULT_INV_GV_SIGNAL_PS_PER_M = 4896.0
DEFAULT_WALKOFF_PS_PER_M = 1.7

# per-port insertion losses (dB) of the measured loops, keyed by loop length in meters
INSERTION_LOSS_DB = {
    100: {'loss_t_db': 1.3, 'loss_r_db': 1.7},
    500: {'loss_t_db': 1.7, 'loss_r_db': 2.1},
}

# pump extent, in FWHMs, sampled on either side of the walkoff box
PUMP_SPAN_FWHM = 4.0

# fraction of peak at which window base widths are measured
BASE_LEVEL = 0.05

# relative RMS residual above which a window deconvolution is rejected
FIT_RESIDUAL_THRESHOLD = 0.05


class WindowFitError(RuntimeError):
    pass


class Regime(Enum):
    MATCHED = 'matched'
    CRITICAL = 'critical'
    WALKTHROUGH = 'walkthrough'


class Port(IntEnum):
    PORT_T = 0
    PORT_R = 1
    LOST = 2


class PumpShape(Enum):
    GAUSSIAN = 'gaussian'
    SAMPLED = 'sampled'


@dataclass(frozen=True)
class FiberParams:
    length_m: float = 100.0
    inv_gv_signal_ps_per_m: float = DEFAULT_INV_GV_SIGNAL_PS_PER_M
    inv_gv_pump_ps_per_m: float = DEFAULT_INV_GV_SIGNAL_PS_PER_M + DEFAULT_WALKOFF_PS_PER_M

    def __post_init__(self):
        if self.length_m < 0:
            raise ValueError(f'Fiber length must be nonnegative, got {self.length_m}')
        if self.inv_gv_signal_ps_per_m <= 0:
            raise ValueError('Inverse group velocities must be positive')
        if self.inv_gv_pump_ps_per_m < self.inv_gv_signal_ps_per_m:
            raise ValueError('The pump must not be faster than the signal')

    @property
    def walkoff_rate_ps_per_m(self) -> float:
        return self.inv_gv_pump_ps_per_m - self.inv_gv_signal_ps_per_m


@dataclass(frozen=True)
class WalkoffBreakdown:
    t_prime_ps: float
    delta_x_m: float
    tau_s_ps: float


@dataclass(frozen=True, eq=False)
class PumpPulse:
    """
    Pump pulse driving the cross-phase. A Gaussian of `fwhm_ps` unless a sampled
    `profile` is given, in which case the profile's times are taken relative to
    `center_ps` and `fwhm_ps` is only used to size the sampling grid.
    """
    center_ps: float = 0.0
    fwhm_ps: float = 5.0
    energy_nj: float = 2.5
    profile: Optional[Profile] = None

    def __post_init__(self):
        if not self.fwhm_ps > 0:
            raise ValueError(f'Pump FWHM must be positive, got {self.fwhm_ps}')
        if self.energy_nj < 0:
            raise ValueError(f'Pump energy must be nonnegative, got {self.energy_nj}')
        if self.profile is not None:
            if np.any(self.profile.values < 0) or self.profile.area <= 0:
                raise ValueError('Sampled pump profiles must be nonnegative with positive area')

    @property
    def shape(self) -> PumpShape:
        return PumpShape.GAUSSIAN if self.profile is None else PumpShape.SAMPLED

    def cumulative(self, t: np.ndarray) -> np.ndarray:
        """Fraction of the pump energy that has passed by time t."""
        if self.profile is None:
            sigma = self.fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA
            return ndtr((t - self.center_ps) / sigma)
        profile = self.profile.normalized()
        running = np.cumsum(profile.values) * profile.step_ps
        return np.interp(t, profile.times + self.center_ps, running, left=0.0, right=running[-1])

    @property
    def support_ps(self) -> tuple[float, float]:
        if self.profile is None:
            half = PUMP_SPAN_FWHM * self.fwhm_ps
            return self.center_ps - half, self.center_ps + half
        return self.center_ps + self.profile.t0_ps, self.center_ps + self.profile.t_end_ps


@dataclass(frozen=True, eq=False)
class SwitchConfig:
    fiber: FiberParams = field(default_factory=FiberParams)
    pump: PumpPulse = field(default_factory=PumpPulse)
    e_pi_nj: float = 2.5
    extinction: float = 1 / 151
    loss_t_db: float = 1.3
    loss_r_db: float = 1.7
    raman_per_m: float = 4e-7
    raman_per_ps: float = 2e-7
    grid_step_ps: float = 0.5
    color_imbalance: float = 0.0

    def __post_init__(self):
        if not self.e_pi_nj > 0:
            raise ValueError(f'e_pi_nj must be positive, got {self.e_pi_nj}')
        if not 0 <= self.extinction < 0.5:
            raise ValueError(f'extinction must lie in [0, 0.5), got {self.extinction}')
        for name in ('loss_t_db', 'loss_r_db', 'raman_per_m', 'raman_per_ps'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be nonnegative, got {getattr(self, name)}')
        if not self.grid_step_ps > 0:
            raise ValueError(f'grid_step_ps must be positive, got {self.grid_step_ps}')
        check_grid(self)
        if not -1 <= self.color_imbalance <= 1:
            raise ValueError(f'color_imbalance must lie in [-1, 1], got {self.color_imbalance}')

    @property
    def tau_s_ps(self) -> float:
        return walkoff(self.fiber).tau_s_ps

    @property
    def window_center_ps(self) -> float:
        return self.pump.center_ps + self.tau_s_ps / 2

    def with_length(self, length_m: float) -> 'SwitchConfig':
        return replace(self, fiber=replace(self.fiber, length_m=length_m))

    def with_energy(self, energy_nj: float) -> 'SwitchConfig':
        return replace(self, pump=replace(self.pump, energy_nj=energy_nj))

    def with_pump_center(self, center_ps: float) -> 'SwitchConfig':
        return replace(self, pump=replace(self.pump, center_ps=center_ps))


@dataclass(frozen=True, eq=False)
class WindowCurve:
    delays_ps: np.ndarray
    response: np.ndarray

    def width_at(self, level: float) -> float:
        return width_at(self.delays_ps, self.response, level)

    @property
    def fwhm(self) -> float:
        return self.width_at(0.5)


@dataclass(frozen=True)
class BackgroundSample:
    expected: float
    counts: int


def check_grid(config: SwitchConfig):
    if config.grid_step_ps > config.pump.fwhm_ps / 5:
        raise ValueError(
            f'Grid step {config.grid_step_ps} ps does not resolve a {config.pump.fwhm_ps} ps pump '
            f'(at most {config.pump.fwhm_ps / 5} ps)'
        )


def config_for_length(length_m: float, base: Optional[SwitchConfig] = None) -> SwitchConfig:
    """
    `base` (or the default config) for a loop of `length_m` meters. The measured
    insertion losses replace the base losses for the 100-m and 500-m loops.
    """
    base = SwitchConfig() if base is None else base
    return replace(base.with_length(length_m), **INSERTION_LOSS_DB.get(length_m, {}))


def walkoff(fiber: FiberParams) -> WalkoffBreakdown:
    length = fiber.length_m
    if length < 0:
        raise ValueError(f'Fiber length must be nonnegative, got {length}')
    inv_s = fiber.inv_gv_signal_ps_per_m
    inv_p = fiber.inv_gv_pump_ps_per_m
    return WalkoffBreakdown(
        t_prime_ps=length * inv_p,
        delta_x_m=length * (inv_p / inv_s - 1),
        tau_s_ps=length * (inv_p - inv_s),
    )


def regime(tau_s_ps: float, tau_p_ps: float) -> Regime:
    if tau_s_ps < 0 or tau_p_ps < 0:
        raise ValueError('Walkoff and pump durations must be nonnegative')
    if tau_s_ps < tau_p_ps * (1 - COMPARISON_EPSILON):
        return Regime.MATCHED
    if tau_s_ps > tau_p_ps * (1 + COMPARISON_EPSILON):
        return Regime.WALKTHROUGH
    return Regime.CRITICAL


def peak_phase(energy_nj: float, e_pi_nj: float) -> float:
    """Plateau cross-phase reached once the signal has walked through the whole pump."""
    return np.pi * energy_nj / e_pi_nj


def phase_profile(config: SwitchConfig, span: Optional[tuple[float, float]] = None) -> PhaseProfile:
    """
    Cross-phase phi(t) = pi (E / E_pi) (P * box_tau_s)(t), with P the unit-area pump
    profile and box_tau_s the unit-height square on [0, tau_s]. The convolution is
    evaluated as the difference of the pump's cumulative energy at t and t - tau_s.

    The grid runs from the start of the pump to the end of the pump delayed by
    tau_s, extended to cover `span` when one is given. A zero walkoff gives a zero
    phase: E_pi is defined for a fixed walkoff rate, so the phase grows with tau_s.
    """
    check_grid(config)
    tau_s = config.tau_s_ps
    start, end = config.pump.support_ps
    end += tau_s
    if span is not None:
        start = min(start, span[0])
        end = max(end, span[1])
    times = uniform_grid(start, end, config.grid_step_ps)

    pump = config.pump
    fraction = pump.cumulative(times) - pump.cumulative(times - tau_s)
    phi = peak_phase(pump.energy_nj, config.e_pi_nj) * np.clip(fraction, 0, None)
    logger.debug(f'Phase profile over {times.size} samples, tau_s={tau_s:.3f} ps, peak {phi.max():.6f} rad')
    return PhaseProfile(times[0], config.grid_step_ps, phi)


def transmission_profile(phase: PhaseProfile, extinction: float) -> Profile:
    """T(t) = e + (1 - 2e) sin^2(phi / 2); the profile is `e` outside the phase grid."""
    if not 0 <= extinction < 0.5:
        raise ValueError(f'extinction must lie in [0, 0.5), got {extinction}')
    values = extinction + (1 - 2 * extinction) * np.sin(phase.phi / 2) ** 2
    return Profile(phase.t0_ps, phase.step_ps, values, extinction)


def reflection_profile(transmission: Profile) -> Profile:
    return transmission.with_values(1 - transmission.values, 1 - transmission.fill)


def switching_window(config: SwitchConfig, span: Optional[tuple[float, float]] = None) -> Profile:
    return transmission_profile(phase_profile(config, span), config.extinction)


def window_fwhm(config: SwitchConfig) -> float:
    return switching_window(config).fwhm


def survival_probability(loss_db: float) -> float:
    return 10 ** (-loss_db / 10)


def route_many(arrivals_ps: Sequence[float],
               config: SwitchConfig,
               rng: np.random.Generator,
               window: Optional[Profile] = None) -> np.ndarray:
    """
    Route photons arriving at `arrivals_ps` and return their Port codes. Each
    photon draws its port from T(arrival), then survives that port's insertion
    loss or is LOST. Two uniforms are drawn per photon.
    """
    arrivals = np.atleast_1d(np.asarray(arrivals_ps, dtype=float))
    if window is None:
        window = switching_window(config, span=(arrivals.min(), arrivals.max()))
    transmit = window(arrivals)
    port_draw = rng.random(arrivals.size)
    loss_draw = rng.random(arrivals.size)

    to_t = port_draw < transmit
    survival = np.where(to_t, survival_probability(config.loss_t_db), survival_probability(config.loss_r_db))
    ports = np.where(to_t, Port.PORT_T, Port.PORT_R)
    return np.where(loss_draw < survival, ports, Port.LOST).astype(int)


def route(arrival_ps: float, config: SwitchConfig, rng: np.random.Generator,
          window: Optional[Profile] = None) -> Port:
    return Port(route_many([arrival_ps], config, rng, window)[0])


def contrast(probe: Profile, config: SwitchConfig, window: Optional[Profile] = None) -> float:
    """Energy of `probe` routed to T divided by the energy routed to R."""
    if probe.area <= 0:
        raise ValueError('Contrast needs a probe with positive area')
    if window is None:
        window = switching_window(config, span=(probe.t0_ps, probe.t_end_ps))
    transmitted = probe.integrate_against(window)
    reflected = probe.area - transmitted
    if reflected <= 0:
        return float('inf')
    return transmitted / reflected


def measured_window(config: SwitchConfig,
                    signal: Profile,
                    exponent: int,
                    delays_ps: Sequence[float],
                    window: Optional[Profile] = None) -> WindowCurve:
    """
    Window as seen through a finite signal: for each delay d, the integral of
    signal(t - d)^exponent T(t), normalized by the integral of signal^exponent.
    Exponent 1 is a classical power measurement; exponent 2 is the pair-rate
    measurement of an SFWM source.
    """
    delays = np.asarray(delays_ps, dtype=float)
    if delays.size == 0:
        raise ValueError('measured_window needs at least one delay')
    if exponent not in (1, 2):
        raise ValueError(f'exponent must be 1 or 2, got {exponent}')
    weighted = signal.power(exponent)
    if weighted.area <= 0:
        raise ValueError('Signal must have positive area')
    if window is None:
        window = switching_window(config, span=(signal.t0_ps + delays.min(), signal.t_end_ps + delays.max()))

    response = np.array([weighted.shifted(d).integrate_against(window) for d in delays]) / weighted.area
    return WindowCurve(delays, response)


def config_for_walkoff(config: SwitchConfig, tau_s_ps: float) -> SwitchConfig:
    """`config` with the loop length that gives a walkoff of `tau_s_ps`."""
    rate = config.fiber.walkoff_rate_ps_per_m
    if rate <= 0:
        raise ValueError('A walkoff cannot be set on a fiber with matched group velocities')
    return config.with_length(tau_s_ps / rate)


def _fit_residual(measured: WindowCurve, model: np.ndarray) -> float:
    norm = np.dot(model, model)
    amplitude = np.dot(model, measured.response) / norm if norm > 0 else 0.0
    residual = measured.response - amplitude * model
    return float(np.sqrt(np.mean(residual ** 2) / np.mean(measured.response ** 2)))


def deconvolve_window(measured: WindowCurve,
                      signal: Profile,
                      exponent: int,
                      config: SwitchConfig,
                      threshold: float = FIT_RESIDUAL_THRESHOLD) -> float:
    """
    Intrinsic window FWHM recovered from a measured window by a least-squares fit
    of measured_window over tau_s (amplitude fitted analytically), holding the
    pump and signal shapes fixed.
    """
    if not np.any(measured.response > 0):
        raise WindowFitError('Measured window has no positive response')
    delays = measured.delays_ps

    def residual(tau_s: float) -> float:
        trial = config_for_walkoff(config, max(tau_s, 0.0))
        return _fit_residual(measured, measured_window(trial, signal, exponent, delays).response)

    scale = measured.fwhm
    candidates = np.linspace(0, 2 * scale, 41)[1:]
    scores = np.array([residual(tau) for tau in candidates])
    best = int(np.argmin(scores))
    spacing = candidates[1] - candidates[0]
    bounds = (max(candidates[best] - spacing, 0.0), candidates[best] + spacing)
    result = minimize_scalar(residual, bounds=bounds, method='bounded', options={'xatol': 1e-3})
    tau_s = float(result.x) if result.fun <= scores[best] else float(candidates[best])
    score = min(float(result.fun), float(scores[best]))
    logger.debug(f'Window fit tau_s={tau_s:.3f} ps, relative residual {score:.2e}')

    if not np.isfinite(score) or score > threshold:
        raise WindowFitError(f'Window fit residual {score:.3g} exceeds threshold {threshold}')
    return window_fwhm(config_for_walkoff(config, tau_s))


def raman_background(config: SwitchConfig,
                     n_pulses: int,
                     rng: np.random.Generator,
                     window_ps: Optional[float] = None) -> BackgroundSample:
    """
    Raman background photons over `n_pulses`. The per-pulse probability grows
    linearly with loop length; a detection gate of `window_ps` caps it at the
    in-window rate.
    """
    if n_pulses < 0:
        raise ValueError(f'n_pulses must be nonnegative, got {n_pulses}')
    if window_ps is not None and window_ps < 0:
        raise ValueError(f'Gate window must be nonnegative, got {window_ps}')
    expected = n_pulses * background_probability(config, window_ps)
    return BackgroundSample(expected=expected, counts=int(rng.poisson(expected)))


def background_probability(config: SwitchConfig, window_ps: Optional[float] = None) -> float:
    per_pulse = config.raman_per_m * config.fiber.length_m
    if window_ps is not None:
        per_pulse = min(per_pulse, config.raman_per_ps * window_ps)
    return per_pulse


def phase_from_port_powers(p_t: float, p_r: float) -> float:
    if p_t < 0 or p_r < 0:
        raise ValueError('Port powers must be nonnegative')
    total = p_t + p_r
    if total <= 0:
        raise ValueError('At least one port must carry power')
    return float(2 * np.arcsin(np.sqrt(p_t / total)))


def color_phases(energy_nj: float, config: SwitchConfig) -> tuple[float, float]:
    """
    Peak cross-phase imparted by each color of a two-color pump of total energy
    `energy_nj`. Each color carries half the energy, skewed by the configured
    imbalance (first color up, second down).
    """
    share = energy_nj / 2
    scales = (1 + config.color_imbalance, 1 - config.color_imbalance)
    return tuple(float(phase_profile(config.with_energy(share * scale)).phi.max()) for scale in scales)
