"""
Polarization analyzers, coincidence counting, accidental subtraction and
maximum-likelihood reconstruction of two-qubit states.
"""
import logging
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from nolmswitch.quantum import (
    H,
    DensityMatrix,
    EntanglementMetrics,
    JonesOperator,
    PolarizationKet,
    as_density_matrix,
    entanglement_metrics,
)
from nolmswitch.utils import derive_seed, make_rng

logger = logging.getLogger(__name__)

# (QWP, HWP) fast-axis angles in degrees that make the analyzer transmit each state
ANALYZER_ANGLES = {
    'H': (0.0, 0.0),
    'V': (0.0, 45.0),
    'D': (45.0, 22.5),
    'A': (45.0, -22.5),
    'R': (0.0, 22.5),
    'L': (0.0, -22.5),
}

COUNT_FLOOR = 0.5
MAX_ITERATIONS = 100_000
OBJECTIVE_TOLERANCE = 1e-10
DEFAULT_RESAMPLES = 100
MAX_EXCLUDED_FRACTION = 0.1

_DIAGONAL = np.diag_indices(4)
_LOWER = np.tril_indices(4, -1)
_PAULIS = (
    np.eye(2),
    np.array([[0, 1], [1, 0]]),
    np.array([[0, -1j], [1j, 0]]),
    np.array([[1, 0], [0, -1]]),
)
_HERMITIAN_BASIS = np.array([np.kron(a, b) for a, b in product(_PAULIS, repeat=2)], dtype=complex)


class ReconstructionError(RuntimeError):
    pass


def jones_waveplate(theta_deg: float, retardance: float) -> JonesOperator:
    """
    Retarder with its fast axis at `theta_deg` from horizontal:
    R(theta) diag(1, exp(-i retardance)) R(-theta), R the active rotation.
    """
    theta = np.radians(theta_deg)
    c, s = np.cos(theta), np.sin(theta)
    rotation = np.array([[c, -s], [s, c]])
    return JonesOperator(rotation @ np.diag([1, np.exp(-1j * retardance)]) @ rotation.T)


def jones_qwp(theta_deg: float) -> JonesOperator:
    return jones_waveplate(theta_deg, np.pi / 2)


def jones_hwp(theta_deg: float) -> JonesOperator:
    return jones_waveplate(theta_deg, np.pi)


def analyzer_state(qwp_deg: float, hwp_deg: float) -> PolarizationKet:
    """State transmitted by a QWP, then HWP, then a PBS passing H."""
    return (jones_hwp(hwp_deg) @ jones_qwp(qwp_deg)).dagger.apply(H)


@dataclass(frozen=True)
class AnalyzerSetting:
    qwp_signal_deg: float
    hwp_signal_deg: float
    qwp_idler_deg: float
    hwp_idler_deg: float
    label: str = ''

    def __post_init__(self):
        angles = (self.qwp_signal_deg, self.hwp_signal_deg, self.qwp_idler_deg, self.hwp_idler_deg)
        if not np.all(np.isfinite(angles)):
            raise ValueError('Waveplate angles must be finite')

    @property
    def signal_state(self) -> PolarizationKet:
        return analyzer_state(self.qwp_signal_deg, self.hwp_signal_deg)

    @property
    def idler_state(self) -> PolarizationKet:
        return analyzer_state(self.qwp_idler_deg, self.hwp_idler_deg)

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        return self.signal_state.projector(), self.idler_state.projector()

    def projector(self) -> np.ndarray:
        return np.kron(*self.projectors())


def standard_settings() -> list[AnalyzerSetting]:
    """The 36 product settings of {H, V, D, A, R, L}, signal-major; list index is the setting id."""
    return [
        AnalyzerSetting(*ANALYZER_ANGLES[s], *ANALYZER_ANGLES[i], label=s + i)
        for s, i in product(ANALYZER_ANGLES, repeat=2)
    ]


@dataclass(frozen=True)
class NoiseParams:
    dark_prob_per_gate: float = 1e-5
    background_prob_per_gate: float = 0.0
    efficiency_signal: float = 0.2
    efficiency_idler: float = 0.2
    # extra background reaching only the signal detector (switch Raman photons)
    signal_background_per_gate: float = 0.0

    def __post_init__(self):
        for name in ('dark_prob_per_gate', 'background_prob_per_gate', 'signal_background_per_gate'):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f'{name} must lie in [0, 1), got {getattr(self, name)}')
        for name in ('efficiency_signal', 'efficiency_idler'):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f'{name} must lie in (0, 1], got {getattr(self, name)}')

    @property
    def noise_per_gate(self) -> float:
        return self.dark_prob_per_gate + self.background_prob_per_gate


@dataclass(frozen=True)
class CountRecord:
    """
    Counts for one analyzer setting. Simulated records hold integer counts;
    records built from analytic means hold the means themselves.
    """
    setting_id: int
    n_pulses: int
    coincidences_raw: float
    singles_signal: float
    singles_idler: float
    accidentals_est: float = 0.0
    coincidences_corrected: Optional[float] = None

    def __post_init__(self):
        if self.n_pulses < 0:
            raise ValueError(f'n_pulses must be nonnegative, got {self.n_pulses}')
        for name in ('coincidences_raw', 'singles_signal', 'singles_idler', 'accidentals_est'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be nonnegative, got {getattr(self, name)}')
        corrected = self.coincidences_raw - self.accidentals_est
        if self.coincidences_corrected is None:
            object.__setattr__(self, 'coincidences_corrected', corrected)
        elif abs(self.coincidences_corrected - corrected) > 1e-9 * max(1.0, abs(self.coincidences_raw)):
            raise ValueError(
                f'Corrected coincidences {self.coincidences_corrected} differ from raw minus accidentals {corrected}'
            )


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho: DensityMatrix
    objective_value: float
    metrics: EntanglementMetrics
    normalization: float
    metric_uncertainties: dict[str, float] = field(
        default_factory=lambda: {'fidelity_max': 0.0, 'tangle': 0.0, 'linear_entropy': 0.0}
    )
    n_resamples: int = 0


@dataclass(frozen=True)
class _Rates:
    pair: float
    signal: float
    idler: float

    def coincidence_mean(self, n_pulses: int) -> tuple[float, float]:
        """
        (pair coincidences, accidental floor) expected over `n_pulses`. The floor
        counts every uncorrelated click pair, photons of two different pairs
        included, so it matches singles_signal * singles_idler / n_pulses.
        """
        return n_pulses * self.pair, n_pulses * self.signal * self.idler


def _rates(rho: DensityMatrix, setting: AnalyzerSetting, pair_prob: float, noise: NoiseParams) -> _Rates:
    projector_s, projector_i = setting.projectors()
    entries = rho.entries
    joint = np.real(np.trace(entries @ np.kron(projector_s, projector_i)))
    marginal_s = np.real(np.trace(entries @ np.kron(projector_s, np.eye(2))))
    marginal_i = np.real(np.trace(entries @ np.kron(np.eye(2), projector_i)))
    signal_pairs = pair_prob * noise.efficiency_signal * max(marginal_s, 0.0)
    idler_pairs = pair_prob * noise.efficiency_idler * max(marginal_i, 0.0)
    return _Rates(
        pair=pair_prob * noise.efficiency_signal * noise.efficiency_idler * max(joint, 0.0),
        signal=signal_pairs + noise.noise_per_gate + noise.signal_background_per_gate,
        idler=idler_pairs + noise.noise_per_gate,
    )


def expected_counts(rho: DensityMatrix,
                    settings: Sequence[AnalyzerSetting],
                    n_pulses: int,
                    pair_prob: float,
                    noise: NoiseParams) -> np.ndarray:
    """Mean coincidences per setting: pair coincidences plus the accidental floor."""
    rho = as_density_matrix(rho)
    return np.array([sum(_rates(rho, s, pair_prob, noise).coincidence_mean(n_pulses)) for s in settings])


def expected_records(rho: DensityMatrix,
                     settings: Sequence[AnalyzerSetting],
                     n_pulses: int,
                     pair_prob: float,
                     noise: NoiseParams) -> list[CountRecord]:
    """Noise-free records holding the analytic means, with the exact accidental floor subtracted."""
    rho = as_density_matrix(rho)
    records = []
    for setting_id, setting in enumerate(settings):
        rates = _rates(rho, setting, pair_prob, noise)
        pairs, floor = rates.coincidence_mean(n_pulses)
        records.append(CountRecord(
            setting_id=setting_id,
            n_pulses=n_pulses,
            coincidences_raw=pairs + floor,
            singles_signal=n_pulses * rates.signal,
            singles_idler=n_pulses * rates.idler,
            accidentals_est=floor,
        ))
    return records


def simulate_counts(rho: DensityMatrix,
                    settings: Sequence[AnalyzerSetting],
                    n_pulses: int,
                    pair_prob: float,
                    noise: NoiseParams,
                    rng: np.random.Generator) -> list[CountRecord]:
    """
    Poisson-distributed raw coincidences and singles for each setting, in
    setting order. Records are returned before accidental subtraction.
    """
    rho = as_density_matrix(rho)
    if n_pulses < 0:
        raise ValueError(f'n_pulses must be nonnegative, got {n_pulses}')
    records = []
    for setting_id, setting in enumerate(settings):
        rates = _rates(rho, setting, pair_prob, noise)
        mean = sum(rates.coincidence_mean(n_pulses))
        records.append(CountRecord(
            setting_id=setting_id,
            n_pulses=n_pulses,
            coincidences_raw=int(rng.poisson(mean)),
            singles_signal=int(rng.poisson(n_pulses * rates.signal)),
            singles_idler=int(rng.poisson(n_pulses * rates.idler)),
        ))
    return records


def subtract_accidentals(record: CountRecord) -> CountRecord:
    """Accidentals of a pulsed source: singles_signal * singles_idler / n_pulses."""
    if record.n_pulses <= 0:
        raise ValueError('Accidental subtraction needs n_pulses > 0')
    accidentals = record.singles_signal * record.singles_idler / record.n_pulses
    return replace(record, accidentals_est=accidentals, coincidences_corrected=None)


def _unpack(params: np.ndarray) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[_DIAGONAL] = params[:4]
    m[_LOWER] = params[4:10] + 1j * params[10:16]
    return m


def _pack(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m[_DIAGONAL].real, m[_LOWER].real, m[_LOWER].imag])


def _objective(params: np.ndarray, projectors: np.ndarray, counts: np.ndarray) -> tuple[float, np.ndarray]:
    m = _unpack(params)
    gram = m.conj().T @ m
    predicted = np.real(np.einsum('ij,nji->n', gram, projectors))
    residual = predicted - counts
    value = np.sum(residual ** 2 / (2 * np.maximum(predicted, COUNT_FLOOR)))

    above = predicted > COUNT_FLOOR
    safe = np.where(above, predicted, 1.0)
    weights = np.where(above, (predicted ** 2 - counts ** 2) / (2 * safe ** 2), residual / COUNT_FLOOR)
    gradient = 2 * m @ np.einsum('n,nij->ij', weights, projectors)
    return float(value), _pack(gradient)


def _factor(gram: np.ndarray) -> np.ndarray:
    """Lower-triangular M with M^dag M = gram, for a positive semidefinite gram."""
    exchange = np.eye(4)[::-1]
    regularized = gram + 1e-9 * max(np.trace(gram).real, 1.0) * np.eye(4)
    lower = np.linalg.cholesky(exchange @ regularized @ exchange)
    return exchange @ lower.conj().T @ exchange


def _linear_inversion(projectors: np.ndarray, counts: np.ndarray) -> np.ndarray:
    design = np.real(np.einsum('kij,nji->nk', _HERMITIAN_BASIS, projectors))
    coefficients, *_ = np.linalg.lstsq(design, counts, rcond=None)
    gram = np.einsum('k,kij->ij', coefficients, _HERMITIAN_BASIS)
    eigenvalues, eigenvectors = np.linalg.eigh((gram + gram.conj().T) / 2)
    return (eigenvectors * np.clip(eigenvalues, 0, None)) @ eigenvectors.conj().T


def _arrange(records: Sequence[CountRecord], settings: Sequence[AnalyzerSetting]) -> tuple[np.ndarray, np.ndarray]:
    ordered = sorted(records, key=lambda record: record.setting_id)
    try:
        projectors = np.array([settings[record.setting_id].projector() for record in ordered])
    except (IndexError, KeyError) as e:
        raise ValueError(f'Record refers to an unknown setting ({len(settings)} settings given)') from e
    counts = np.array([record.coincidences_corrected for record in ordered], dtype=float)
    design = np.real(np.einsum('kij,nji->nk', _HERMITIAN_BASIS, projectors))
    if np.linalg.matrix_rank(design) < 16:
        raise ValueError('Settings do not contain 16 linearly independent projectors')
    return projectors, counts


def mle_reconstruct(records: Sequence[CountRecord], settings: Sequence[AnalyzerSetting]) -> ReconstructionResult:
    """
    Maximum-likelihood two-qubit state for the corrected counts of `records`,
    each matched to `settings` by its setting id.

    The unnormalized state is M^dag M with M lower triangular, so every iterate
    is a valid state; its trace is the count normalization N, fitted jointly.
    The fit minimizes the Gaussian approximation of the Poisson likelihood with
    the prediction in the variance, floored at 0.5 counts. Descent starts from
    the linear-inversion estimate and from the maximally mixed state.
    """
    projectors, counts = _arrange(records, settings)
    total = np.trace(projectors.sum(axis=0)).real / 4
    scale = max(counts.sum() / total, COUNT_FLOOR)
    starts = [_factor(_linear_inversion(projectors, counts)), np.sqrt(scale / 4) * np.eye(4)]

    best = None
    for start in starts:
        result = minimize(
            _objective,
            _pack(start),
            args=(projectors, counts),
            jac=True,
            method='L-BFGS-B',
            options={
                'maxiter': MAX_ITERATIONS,
                'maxfun': 10 * MAX_ITERATIONS,
                'ftol': OBJECTIVE_TOLERANCE,
                'gtol': 1e-10,
            },
        )
        logger.debug(f'MLE descent: status {result.status} ({result.message}), objective {result.fun:.6g}, '
                     f'{result.nit} iterations')
        if not np.isfinite(result.fun):
            raise ReconstructionError('MLE objective is not finite')
        if result.status == 1:
            raise ReconstructionError(f'MLE hit the iteration cap of {MAX_ITERATIONS} while still descending')
        if result.status != 0:
            logger.warning(f'MLE descent stopped early: status {result.status} ({result.message}), '
                           f'objective {result.fun:.6g}')
        if best is None or result.fun < best.fun - OBJECTIVE_TOLERANCE:
            best = result

    m = _unpack(best.x)
    gram = m.conj().T @ m
    normalization = float(np.trace(gram).real)
    if not normalization > 0:
        raise ReconstructionError('MLE converged to a zero state')
    rho = DensityMatrix(gram / normalization)
    return ReconstructionResult(
        rho=rho,
        objective_value=float(best.fun),
        metrics=entanglement_metrics(rho),
        normalization=normalization,
    )


def _resample(record: CountRecord, rng: np.random.Generator) -> CountRecord:
    resampled = replace(
        record,
        coincidences_raw=int(rng.poisson(record.coincidences_raw)),
        singles_signal=int(rng.poisson(record.singles_signal)),
        singles_idler=int(rng.poisson(record.singles_idler)),
        accidentals_est=0.0,
        coincidences_corrected=None,
    )
    if record.accidentals_est > 0:
        return subtract_accidentals(resampled)
    return resampled


def uncertainties_mc(records: Sequence[CountRecord],
                     settings: Sequence[AnalyzerSetting],
                     n_resamples: int = DEFAULT_RESAMPLES,
                     seed: int = 0,
                     resample: bool = True) -> dict[str, float]:
    """
    Standard deviation of each entanglement metric over `n_resamples` Poisson
    parametric-bootstrap replicates. Replicate k draws from the stream seeded
    with derive_seed(seed, k); records that had accidentals subtracted are
    re-subtracted from their resampled singles. Failed replicates are excluded;
    more than 10 % exclusions is an error. With `resample` off every replicate
    equals the input and the uncertainties are zero.
    """
    if n_resamples < 2:
        raise ValueError(f'n_resamples must be at least 2, got {n_resamples}')
    if not resample:
        return {name: 0.0 for name in mle_reconstruct(records, settings).metrics.as_dict()}

    samples = []
    excluded = 0
    for index in range(n_resamples):
        rng = make_rng(derive_seed(seed, index))
        replicate = [_resample(record, rng) for record in records]
        try:
            samples.append(mle_reconstruct(replicate, settings).metrics.as_dict())
        except ReconstructionError as e:
            excluded += 1
            logger.warning(f'Excluding bootstrap replicate {index}: {e}')
    if excluded > MAX_EXCLUDED_FRACTION * n_resamples:
        raise ReconstructionError(f'{excluded} of {n_resamples} bootstrap replicates failed to reconstruct')
    if len(samples) < 2:
        raise ReconstructionError('Fewer than two bootstrap replicates reconstructed')

    return {name: float(np.std([sample[name] for sample in samples], ddof=1)) for name in samples[0]}


def reconstruct(records: Sequence[CountRecord],
                settings: Sequence[AnalyzerSetting],
                n_resamples: int = DEFAULT_RESAMPLES,
                seed: int = 0,
                resample: bool = True) -> ReconstructionResult:
    result = mle_reconstruct(records, settings)
    uncertainties = uncertainties_mc(records, settings, n_resamples, seed, resample)
    logger.info(
        f'Reconstructed state: F={result.metrics.fidelity_max:.4f} +/- {uncertainties["fidelity_max"]:.4f}, '
        f'T={result.metrics.tangle:.4f}, S_L={result.metrics.linear_entropy:.4f}'
    )
    return replace(result, metric_uncertainties=uncertainties, n_resamples=n_resamples)
