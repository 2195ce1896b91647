"""
SFWM entangled-pair source pumped through a Michelson interferometer, giving two
time bins that carry different Bell states, and the demultiplexing of that
stream by the switch.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from nolmswitch.profiles import Profile, gaussian_profile
from nolmswitch.quantum import (
    D,
    R,
    BellState,
    DensityMatrix,
    PolarizationKet,
    bell_state,
)

logger = logging.getLogger(__name__)

# pair states produced by the two supported pump polarizations
PAIR_STATE_FOR_PUMP = {
    'D': (D, BellState.PHI_PLUS),
    'R': (R, BellState.PHI_MINUS),
}

WEIGHT_TOLERANCE = 1e-9
MIN_BIN_SEPARATION_PS = 1.0


class UnsupportedPumpError(ValueError):
    pass


class SpatialMode(Enum):
    T = 'T'
    R = 'R'


@dataclass(frozen=True)
class SourceConfig:
    pump_fwhm_ps: float = 100.0
    rep_rate_mhz: float = 50.0
    pair_prob_per_pulse: float = 0.01
    delta_t_ps: float = 300.0
    c1_over_c2: float = 1.25
    t0_ps: float = 300.0
    visibility: float = 0.9933
    grid_step_ps: float = 0.5

    def __post_init__(self):
        if not self.pump_fwhm_ps > 0:
            raise ValueError(f'pump_fwhm_ps must be positive, got {self.pump_fwhm_ps}')
        if not self.rep_rate_mhz > 0:
            raise ValueError(f'rep_rate_mhz must be positive, got {self.rep_rate_mhz}')
        if not 0 <= self.pair_prob_per_pulse < 0.1:
            raise ValueError(f'pair_prob_per_pulse must lie in [0, 0.1), got {self.pair_prob_per_pulse}')
        if self.delta_t_ps < MIN_BIN_SEPARATION_PS:
            raise ValueError(f'delta_t_ps must be at least {MIN_BIN_SEPARATION_PS}, got {self.delta_t_ps}')
        if not 0 <= self.c1_over_c2 < np.inf:
            raise ValueError(f'c1_over_c2 must be finite and nonnegative, got {self.c1_over_c2}')
        if not 0 <= self.visibility <= 1:
            raise ValueError(f'visibility must lie in [0, 1], got {self.visibility}')
        if not self.grid_step_ps > 0:
            raise ValueError(f'grid_step_ps must be positive, got {self.grid_step_ps}')

    @property
    def channel_times_ps(self) -> tuple[float, float]:
        return self.t0_ps, self.t0_ps + self.delta_t_ps

    @property
    def channel_weights(self) -> tuple[float, float]:
        """(c1^2, c2^2) with c1 / c2 = c1_over_c2 and c1^2 + c2^2 = 1."""
        c2 = 1 / np.sqrt(1 + self.c1_over_c2 ** 2)
        c1 = self.c1_over_c2 * c2
        return float(c1 ** 2), float(c2 ** 2)


@dataclass(frozen=True)
class PumpChannel:
    t_center_ps: float
    amplitude: float
    jones: PolarizationKet

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f'Pump amplitude must be nonnegative, got {self.amplitude}')
        if self.jones.dim != 2:
            raise ValueError('Pump polarization must be a single-qubit ket')


@dataclass(frozen=True, eq=False)
class EntangledChannel:
    t_center_ps: float
    weight: float
    pol_state: PolarizationKet
    temporal_profile: Profile
    spatial_mode: SpatialMode = SpatialMode.T

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f'Channel weight must be nonnegative, got {self.weight}')
        if self.pol_state.dim != 4:
            raise ValueError('Channel polarization states are two-qubit kets')
        if self.temporal_profile.area <= 0:
            raise ValueError('Channel temporal profiles need positive area')

    def shifted(self, delay_ps: float) -> 'EntangledChannel':
        return replace(self, t_center_ps=self.t_center_ps + delay_ps,
                       temporal_profile=self.temporal_profile.shifted(delay_ps))


@dataclass(frozen=True, eq=False)
class MultiplexedStream:
    """
    Five-qubit multiplexed state in factored form: one entry per (time bin,
    spatial mode) branch with its probability weight and polarization state.
    `pair_rate` is the total pair rate relative to the unblocked source.
    """
    channels: tuple[EntangledChannel, ...]
    pair_rate: float = 1.0

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise ValueError('A stream needs at least one channel')
        total = sum(channel.weight for channel in channels)
        if abs(total - 1) > WEIGHT_TOLERANCE:
            raise ValueError(f'Channel weights sum to {total}, not 1')
        for mode in SpatialMode:
            times = sorted(c.t_center_ps for c in channels if c.spatial_mode is mode)
            if np.any(np.diff(times) < MIN_BIN_SEPARATION_PS):
                raise ValueError(f'Time bins in mode {mode.value} must be at least {MIN_BIN_SEPARATION_PS} ps apart')
        object.__setattr__(self, 'channels', channels)

    def __len__(self) -> int:
        return len(self.channels)

    def in_mode(self, mode: SpatialMode) -> list[EntangledChannel]:
        return [channel for channel in self.channels if channel.spatial_mode is mode]

    def weight_in(self, mode: SpatialMode) -> float:
        return sum(channel.weight for channel in self.in_mode(mode))

    def shifted(self, delay_ps: float) -> 'MultiplexedStream':
        return replace(self, channels=tuple(channel.shifted(delay_ps) for channel in self.channels))


def michelson_pump(config: SourceConfig, blocked_arm: Optional[int] = None) -> tuple[PumpChannel, PumpChannel]:
    """
    The two pump pulses leaving the Michelson interferometer: arm 1 diagonal at
    t0, arm 2 right-circular at t0 + delta_t, with amplitudes sqrt(c1) and sqrt(c2).
    A blocked arm (1 or 2) carries zero amplitude.
    """
    if blocked_arm not in (None, 1, 2):
        raise ValueError(f'blocked_arm must be 1, 2 or None, got {blocked_arm}')
    weights = config.channel_weights
    channels = []
    for arm, (t_center, weight, jones) in enumerate(zip(config.channel_times_ps, weights, (D, R)), start=1):
        amplitude = 0.0 if arm == blocked_arm else float(np.sqrt(np.sqrt(weight)))
        channels.append(PumpChannel(t_center_ps=t_center, amplitude=amplitude, jones=jones))
    return tuple(channels)


def _pair_state(jones: PolarizationKet) -> PolarizationKet:
    for name, (pump_state, kind) in PAIR_STATE_FOR_PUMP.items():
        if abs(abs(pump_state.overlap(jones)) ** 2 - 1) <= WEIGHT_TOLERANCE:
            return bell_state(kind)
    raise UnsupportedPumpError(
        f'Pump polarization {np.round(jones.amplitudes, 6)} is not one of the supported states '
        f'({", ".join(PAIR_STATE_FOR_PUMP)})'
    )


def temporal_pair_density(pump_profile: Profile) -> Profile:
    """Pair emission time density: the squared pump intensity, at unit area."""
    if np.any(pump_profile.values < 0):
        raise ValueError('Pump intensity profiles must be nonnegative')
    squared = pump_profile.power(2)
    if squared.area <= 0:
        raise ValueError('Pump intensity profile has zero area')
    return squared.normalized()


def sfwm_channels(pump: Sequence[PumpChannel], config: SourceConfig) -> MultiplexedStream:
    """
    Pair stream generated by the pump channels. Each pump pulse of amplitude
    sqrt(c_k) produces pairs at rate c_k^2 in its time bin; the diagonal pump
    gives Phi+ pairs and the right-circular pump Phi- pairs. Zero-amplitude
    pump channels produce nothing.
    """
    rates = []
    channels = []
    for pulse in pump:
        rate = pulse.amplitude ** 4
        if rate <= 0:
            continue
        intensity = gaussian_profile(pulse.t_center_ps, config.pump_fwhm_ps, config.grid_step_ps)
        rates.append(rate)
        channels.append(EntangledChannel(
            t_center_ps=pulse.t_center_ps,
            weight=rate,
            pol_state=_pair_state(pulse.jones),
            temporal_profile=temporal_pair_density(intensity),
        ))
    if not channels:
        raise ValueError('All pump channels are blocked')
    total = sum(rates)
    channels = [replace(channel, weight=channel.weight / total) for channel in channels]
    logger.debug(f'SFWM stream weights {[round(c.weight, 6) for c in channels]}')
    return MultiplexedStream(tuple(channels), pair_rate=total)


def overlap(channel: EntangledChannel, window: Profile) -> float:
    """Fraction of the channel's pairs transmitted by the window T(t)."""
    profile = channel.temporal_profile
    if profile.t0_ps < window.t0_ps or profile.t_end_ps > window.t_end_ps:
        raise ValueError(
            f'Window grid [{window.t0_ps}, {window.t_end_ps}] ps does not cover the channel at '
            f'{channel.t_center_ps} ps ([{profile.t0_ps}, {profile.t_end_ps}] ps)'
        )
    return float(np.clip(profile.integrate_against(window) / profile.area, 0, 1))


def demultiplex(stream: MultiplexedStream, window: Profile) -> MultiplexedStream:
    """
    Controlled routing of the stream by a switching window: each T-mode channel
    is split into a transmitted part of weight w p_k and a reflected part of
    weight w (1 - p_k), p_k its overlap with T(t). Channels already in mode R are
    left alone; parts of zero weight are dropped.
    """
    channels = []
    for channel in stream.channels:
        if channel.spatial_mode is SpatialMode.R:
            channels.append(channel)
            continue
        p = overlap(channel, window)
        for mode, weight in ((SpatialMode.T, channel.weight * p), (SpatialMode.R, channel.weight * (1 - p))):
            if weight > 0:
                channels.append(replace(channel, weight=weight, spatial_mode=mode))
    return MultiplexedStream(tuple(channels), pair_rate=stream.pair_rate)


def project_and_trace(stream: MultiplexedStream, mode: SpatialMode) -> DensityMatrix:
    """
    Two-qubit polarization state found in spatial `mode` once the time bins are
    traced out. Bins are orthogonal, so the result is the weighted incoherent
    mixture of the branch states.
    """
    selected = stream.in_mode(mode)
    weights = [channel.weight for channel in selected]
    if sum(weights) <= 0:
        raise ValueError(f'No weight in spatial mode {mode.value}')
    return DensityMatrix.mixture(weights, [channel.pol_state for channel in selected])
