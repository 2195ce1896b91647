import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

# FWHM of a Gaussian in units of its standard deviation
GAUSSIAN_FWHM_PER_SIGMA = 2 * np.sqrt(2 * np.log(2))

ArrayLike = Union[float, np.ndarray]


def width_at(x: np.ndarray, y: np.ndarray, level: float) -> float:
    """
    Full width of the curve y(x) where it exceeds `level`, a fraction between the
    curve's minimum (0) and maximum (1).
    """
    left, right = level_crossings(x, y, level)
    return right - left


def level_crossings(x: np.ndarray, y: np.ndarray, level: float) -> tuple[float, float]:
    """
    Outermost points where the curve y(x) crosses `level`, a fraction between the
    curve's minimum (0) and maximum (1). `x` must be increasing; crossings are
    linearly interpolated between neighbouring samples.
    """
    if not 0 < level < 1:
        raise ValueError(f'Width level must lie strictly between 0 and 1, got {level}')
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    low = y.min()
    high = y.max()
    if high <= low:
        raise ValueError('A flat curve has no defined width')
    threshold = low + (high - low) * level
    above = np.flatnonzero(y >= threshold)
    first, last = above[0], above[-1]

    left = x[first]
    if first > 0:
        left -= (x[first] - x[first - 1]) * (y[first] - threshold) / (y[first] - y[first - 1])
    right = x[last]
    if last < y.size - 1:
        right += (x[last + 1] - x[last]) * (y[last] - threshold) / (y[last] - y[last + 1])
    return float(left), float(right)


@dataclass(frozen=True, eq=False)
class Profile:
    """
    A real-valued function of time sampled on a uniform grid.

    The samples sit at `t0_ps + k * step_ps`; between samples the profile is
    linearly interpolated, and outside the grid it takes the constant `fill`
    value. Integrals are Riemann sums over the samples.
    """
    t0_ps: float
    step_ps: float
    values: np.ndarray
    fill: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise ValueError('Profiles need at least one sample')
        if not np.all(np.isfinite(values)):
            raise ValueError('Profile samples must be finite')
        if not self.step_ps > 0:
            raise ValueError(f'Profile step must be positive, got {self.step_ps}')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 't0_ps', float(self.t0_ps))
        object.__setattr__(self, 'step_ps', float(self.step_ps))

    def __len__(self) -> int:
        return self.values.size

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return np.interp(t, self.times, self.values, left=self.fill, right=self.fill)

    @property
    def times(self) -> np.ndarray:
        return self.t0_ps + self.step_ps * np.arange(self.values.size)

    @property
    def t_end_ps(self) -> float:
        return self.t0_ps + self.step_ps * (self.values.size - 1)

    @property
    def area(self) -> float:
        return float(self.values.sum() * self.step_ps)

    @property
    def peak_time_ps(self) -> float:
        return float(self.times[np.argmax(self.values)])

    def with_values(self, values: np.ndarray, fill: Optional[float] = None) -> 'Profile':
        return type(self)(self.t0_ps, self.step_ps, values, self.fill if fill is None else fill)

    def normalized(self) -> 'Profile':
        """Rescaled to unit area."""
        area = self.area
        if area <= 0:
            raise ValueError('Cannot normalize a profile with non-positive area')
        return self.with_values(self.values / area, self.fill / area)

    def power(self, exponent: int) -> 'Profile':
        return self.with_values(self.values ** exponent, self.fill ** exponent)

    def shifted(self, delay_ps: float) -> 'Profile':
        return type(self)(self.t0_ps + delay_ps, self.step_ps, self.values, self.fill)

    def integrate_against(self, other: 'Profile') -> float:
        """Integral of self(t) * other(t) over this profile's grid."""
        return float(np.sum(self.values * other(self.times)) * self.step_ps)

    def fraction_between(self, start_ps: float, end_ps: float) -> float:
        mask = (self.times >= start_ps) & (self.times <= end_ps)
        return float(self.values[mask].sum() * self.step_ps / self.area)

    def width_at(self, level: float) -> float:
        return width_at(self.times, self.values, level)

    @property
    def fwhm(self) -> float:
        return self.width_at(0.5)


@dataclass(frozen=True, eq=False)
class PhaseProfile(Profile):
    """Accumulated cross-phase in radians; never negative."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise ValueError('Cross-phase values must be nonnegative')

    @property
    def phi(self) -> np.ndarray:
        return self.values


def uniform_grid(start_ps: float, end_ps: float, step_ps: float) -> np.ndarray:
    """Grid from `start_ps` with `step_ps` spacing that reaches at least `end_ps`."""
    count = int(np.ceil((end_ps - start_ps) / step_ps - 1e-9)) + 1
    return start_ps + step_ps * np.arange(max(count, 1))


def gaussian_profile(center_ps: float, fwhm_ps: float, step_ps: float, half_span_fwhm: float = 4.0) -> Profile:
    """Unit-area Gaussian sampled out to `half_span_fwhm` FWHMs on each side of the centre."""
    if fwhm_ps <= 0:
        raise ValueError(f'FWHM must be positive, got {fwhm_ps}')
    half_count = int(np.ceil(half_span_fwhm * fwhm_ps / step_ps))
    times = center_ps + step_ps * np.arange(-half_count, half_count + 1)
    sigma = fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA
    values = np.exp(-0.5 * ((times - center_ps) / sigma) ** 2)
    return Profile(times[0], step_ps, values).normalized()


def tailed_pulse(center_ps: float = 0.0,
                 core_fwhm_ps: float = 100.0,
                 total_width_ps: float = 370.0,
                 tail_fraction: float = 0.1,
                 tail_decay_ps: float = 120.0,
                 step_ps: float = 0.5) -> Profile:
    """
    Unit-area test pulse: a Gaussian core at `center_ps` plus an exponential
    tail that starts at the core centre and decays with `tail_decay_ps`. The
    pulse is truncated to `total_width_ps`, starting three core standard
    deviations before the centre; the tail carries `tail_fraction` of the
    total energy.
    """
    if not 0 <= tail_fraction < 1:
        raise ValueError(f'Tail fraction must lie in [0, 1), got {tail_fraction}')
    if core_fwhm_ps <= 0 or tail_decay_ps <= 0:
        raise ValueError('Core FWHM and tail decay must be positive')
    sigma = core_fwhm_ps / GAUSSIAN_FWHM_PER_SIGMA
    start = center_ps - 3 * sigma
    if total_width_ps <= 3 * sigma:
        raise ValueError(f'Total width {total_width_ps} ps does not reach past the core centre')
    times = uniform_grid(start, start + total_width_ps, step_ps)

    core = np.exp(-0.5 * ((times - center_ps) / sigma) ** 2)
    core *= (1 - tail_fraction) / (core.sum() * step_ps)
    tail = np.where(times >= center_ps, np.exp(-(times - center_ps) / tail_decay_ps), 0.0)
    if tail_fraction > 0:
        tail *= tail_fraction / (tail.sum() * step_ps)
    else:
        tail[:] = 0.0
    logger.debug(f'Tailed pulse on {times.size} samples from {start:.1f} ps')
    return Profile(start, step_ps, core + tail)
