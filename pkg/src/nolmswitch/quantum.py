import logging
from dataclasses import dataclass
from enum import Enum
from functools import cache
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

# absolute tolerance for the normalization, Hermiticity, trace and positivity checks
TOLERANCE = 1e-9

# Euler-angle grid resolution and number of refined grid points for the
# fully entangled fraction search
FEF_GRID_SIZE = 16
FEF_STARTS = 4
FEF_TOLERANCE = 1e-7

SIGMA_Y = np.array([[0, -1j], [1j, 0]])


class InvalidStateError(ValueError):
    pass


def _readonly(values, shape: Optional[tuple] = None) -> np.ndarray:
    array = np.array(values, dtype=complex)
    if shape is not None:
        array = array.reshape(shape)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PolarizationKet:
    """
    Normalized polarization state vector. Basis order is H=0, V=1 for one qubit and
    HH, HV, VH, VV (signal qubit first) for two qubits.
    """
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = _readonly(self.amplitudes).reshape(-1)
        if amplitudes.size not in (2, 4):
            raise ValueError(f'Polarization kets have dimension 2 or 4, not {amplitudes.size}')
        if not np.all(np.isfinite(amplitudes)):
            raise ValueError('Ket amplitudes must be finite')
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1) > TOLERANCE:
            raise ValueError(f'Ket is not normalized (norm {norm})')
        amplitudes.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def normalized(cls, amplitudes: Iterable[complex]) -> 'PolarizationKet':
        vector = np.asarray(list(amplitudes), dtype=complex)
        return cls(vector / np.linalg.norm(vector))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: 'PolarizationKet') -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


H = PolarizationKet([1, 0])
V = PolarizationKet([0, 1])
D = PolarizationKet.normalized([1, 1])
A = PolarizationKet.normalized([1, -1])
R = PolarizationKet.normalized([1, 1j])
L = PolarizationKet.normalized([1, -1j])


@dataclass(frozen=True, eq=False)
class JonesOperator:
    entries: np.ndarray

    def __post_init__(self):
        entries = _readonly(self.entries)
        if entries.shape != (2, 2):
            raise ValueError(f'Jones operators are 2x2, not {entries.shape}')
        if not np.allclose(entries.conj().T @ entries, np.eye(2), rtol=0, atol=TOLERANCE):
            raise ValueError('Jones operator is not unitary')
        object.__setattr__(self, 'entries', entries)

    def __matmul__(self, other: 'JonesOperator') -> 'JonesOperator':
        return JonesOperator(self.entries @ other.entries)

    @property
    def dagger(self) -> 'JonesOperator':
        return JonesOperator(self.entries.conj().T)

    def apply(self, ket: PolarizationKet) -> PolarizationKet:
        if ket.dim != 2:
            raise ValueError('Jones operators act on single-qubit kets')
        return PolarizationKet(self.entries @ ket.amplitudes)


IDENTITY = JonesOperator(np.eye(2))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] not in (2, 4):
            raise InvalidStateError(f'Density matrices are 2x2 or 4x4, not {entries.shape}')
        if not np.all(np.isfinite(entries)):
            raise InvalidStateError('Density matrix entries must be finite')
        if np.max(np.abs(entries - entries.conj().T)) > TOLERANCE:
            raise InvalidStateError('Density matrix is not Hermitian')
        entries = (entries + entries.conj().T) / 2
        trace = np.trace(entries).real
        if abs(trace - 1) > TOLERANCE:
            raise InvalidStateError(f'Density matrix trace is {trace}, not 1')
        smallest = np.linalg.eigvalsh(entries)[0]
        if smallest < -TOLERANCE:
            raise InvalidStateError(f'Density matrix has negative eigenvalue {smallest}')
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def from_ket(cls, ket: PolarizationKet) -> 'DensityMatrix':
        return cls(ket.projector())

    @classmethod
    def mixture(cls, weights: Iterable[float], kets: Iterable[PolarizationKet]) -> 'DensityMatrix':
        """Incoherent mixture of pure states; weights are renormalized to unit sum."""
        weights = np.asarray(list(weights), dtype=float)
        projectors = np.array([ket.projector() for ket in kets])
        if weights.size != len(projectors) or weights.size == 0:
            raise ValueError('Mixtures need one weight per ket')
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError('Mixture weights must be nonnegative with a positive sum')
        return cls(np.einsum('k,kij->ij', weights / weights.sum(), projectors))

    @classmethod
    def maximally_mixed(cls, dim: int = 4) -> 'DensityMatrix':
        return cls(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))


@dataclass(frozen=True)
class EntanglementMetrics:
    fidelity_max: float
    tangle: float
    linear_entropy: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not 0 <= value <= 1:
                raise ValueError(f'{name} must lie in [0, 1], got {value}')

    def as_dict(self) -> dict[str, float]:
        return {
            'fidelity_max': self.fidelity_max,
            'tangle': self.tangle,
            'linear_entropy': self.linear_entropy,
        }


class BellState(Enum):
    PHI_PLUS = (1, 0, 0, 1)
    PHI_MINUS = (1, 0, 0, -1)
    PSI_PLUS = (0, 1, 1, 0)
    PSI_MINUS = (0, 1, -1, 0)


def bell_state(kind: BellState) -> PolarizationKet:
    return PolarizationKet(np.array(kind.value, dtype=complex) / np.sqrt(2))


def tensor(a: PolarizationKet, b: PolarizationKet) -> PolarizationKet:
    """Two-qubit ket in (signal, idler) order."""
    if a.dim != 2 or b.dim != 2:
        raise ValueError(f'tensor() expects two single-qubit kets, got dimensions {a.dim} and {b.dim}')
    return PolarizationKet(np.kron(a.amplitudes, b.amplitudes))


def as_density_matrix(rho) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    return DensityMatrix(rho)


def _two_qubit(rho) -> DensityMatrix:
    rho = as_density_matrix(rho)
    if rho.dim != 4:
        raise InvalidStateError(f'Expected a two-qubit density matrix, got dimension {rho.dim}')
    return rho


def _as_jones(operator) -> JonesOperator:
    if isinstance(operator, JonesOperator):
        return operator
    return JonesOperator(operator)


def apply_local(u_signal, u_idler, rho: DensityMatrix) -> DensityMatrix:
    """Conjugate a two-qubit state by the local unitary U_s (x) U_i."""
    rho = _two_qubit(rho)
    u = np.kron(_as_jones(u_signal).entries, _as_jones(u_idler).entries)
    return DensityMatrix(u @ rho.entries @ u.conj().T)


def fidelity_to_pure(psi: PolarizationKet, rho: DensityMatrix) -> float:
    rho = as_density_matrix(rho)
    if psi.dim != rho.dim:
        raise ValueError(f'Dimension mismatch: ket {psi.dim}, density matrix {rho.dim}')
    value = np.real(np.vdot(psi.amplitudes, rho.entries @ psi.amplitudes))
    return float(np.clip(value, 0, 1))


def _su2(alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Rz(alpha) Ry(beta) Rz(gamma) for arrays of Euler angles, shape (n, 2, 2)."""
    c = np.cos(beta / 2)
    s = np.sin(beta / 2)
    u = np.empty(np.shape(alpha) + (2, 2), dtype=complex)
    u[..., 0, 0] = np.exp(-0.5j * (alpha + gamma)) * c
    u[..., 0, 1] = -np.exp(-0.5j * (alpha - gamma)) * s
    u[..., 1, 0] = np.exp(0.5j * (alpha - gamma)) * s
    u[..., 1, 1] = np.exp(0.5j * (alpha + gamma)) * c
    return u


def _maximally_entangled(u: np.ndarray) -> np.ndarray:
    # (I (x) U)|Phi+> has amplitude U[k, j] / sqrt(2) on basis state |j k>
    return np.swapaxes(u, -1, -2).reshape(u.shape[:-2] + (4,)) / np.sqrt(2)


def _overlaps(vectors: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum('...i,ij,...j->...', vectors.conj(), rho, vectors))


@cache
def _euler_grid() -> tuple[np.ndarray, np.ndarray]:
    alpha = np.linspace(0, 2 * np.pi, FEF_GRID_SIZE, endpoint=False)
    beta = np.linspace(0, np.pi, FEF_GRID_SIZE)
    gamma = np.linspace(0, 2 * np.pi, FEF_GRID_SIZE, endpoint=False)
    angles = np.array(np.meshgrid(alpha, beta, gamma, indexing='ij')).reshape(3, -1).T
    vectors = _maximally_entangled(_su2(angles[:, 0], angles[:, 1], angles[:, 2]))
    angles.setflags(write=False)
    vectors.setflags(write=False)
    return angles, vectors


def fully_entangled_fraction(rho: DensityMatrix) -> float:
    """
    Largest fidelity of a two-qubit state with any maximally entangled state.

    Every maximally entangled state is (I (x) U)|Phi+> for some U in SU(2); the
    overlap is maximized over the three Euler angles of U by a coarse grid
    followed by Nelder-Mead refinement of the best grid points.
    """
    rho = _two_qubit(rho)
    entries = rho.entries
    angles, vectors = _euler_grid()
    values = _overlaps(vectors, entries)
    best = float(values.max())

    def objective(x: np.ndarray) -> float:
        vector = _maximally_entangled(_su2(x[0], x[1], x[2]))
        return -float(_overlaps(vector, entries))

    for start in angles[np.argsort(values)[-FEF_STARTS:]]:
        result = minimize(
            objective,
            start,
            method='Nelder-Mead',
            options={'xatol': FEF_TOLERANCE / 10, 'fatol': FEF_TOLERANCE / 100, 'maxiter': 10_000},
        )
        best = max(best, -float(result.fun))
    logger.debug(f'Fully entangled fraction {best}')
    return float(np.clip(best, 0, 1))


MAGIC_BASIS = np.column_stack([
    bell_state(BellState.PHI_PLUS).amplitudes,
    1j * bell_state(BellState.PHI_MINUS).amplitudes,
    1j * bell_state(BellState.PSI_PLUS).amplitudes,
    bell_state(BellState.PSI_MINUS).amplitudes,
])


def fully_entangled_fraction_magic(rho: DensityMatrix) -> float:
    """
    Closed form of the fully entangled fraction: maximally entangled states are the
    real unit vectors of the magic basis, so the maximum overlap is the largest
    eigenvalue of the real part of rho written in that basis.
    """
    rho = _two_qubit(rho)
    in_magic = MAGIC_BASIS.conj().T @ rho.entries @ MAGIC_BASIS
    return float(np.clip(np.linalg.eigvalsh(in_magic.real)[-1], 0, 1))


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0, None))) @ eigenvectors.conj().T


def concurrence(rho: DensityMatrix) -> float:
    rho = _two_qubit(rho)
    yy = np.kron(SIGMA_Y, SIGMA_Y)
    spin_flipped = yy @ rho.entries.conj() @ yy
    root = _sqrtm_psd(rho.entries)
    # eigenvalues of sqrt(rho) rho~ sqrt(rho) are the squares of Wootters' lambdas
    lambdas = np.sqrt(np.clip(np.linalg.eigvalsh(root @ spin_flipped @ root), 0, None))[::-1]
    return float(np.clip(lambdas[0] - lambdas[1:].sum(), 0, 1))


def tangle(rho: DensityMatrix) -> float:
    return concurrence(rho) ** 2


def linear_entropy(rho: DensityMatrix) -> float:
    rho = _two_qubit(rho)
    value = 4 / 3 * (1 - rho.purity())
    return float(np.clip(value, 0, 1))


def entanglement_metrics(rho: DensityMatrix) -> EntanglementMetrics:
    return EntanglementMetrics(
        fidelity_max=fully_entangled_fraction(rho),
        tangle=tangle(rho),
        linear_entropy=linear_entropy(rho),
    )


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    difference = as_density_matrix(rho).entries - as_density_matrix(sigma).entries
    return float(0.5 * np.abs(np.linalg.eigvalsh(difference)).sum())


def depolarize(rho: DensityMatrix, visibility: float) -> DensityMatrix:
    """Mix `rho` with white noise: visibility * rho + (1 - visibility) * I / d."""
    if not 0 <= visibility <= 1:
        raise ValueError(f'Visibility must lie in [0, 1], got {visibility}')
    rho = as_density_matrix(rho)
    return DensityMatrix(visibility * rho.entries + (1 - visibility) * np.eye(rho.dim) / rho.dim)


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: Optional[int] = None) -> DensityMatrix:
    """Random state from the induced (Ginibre) measure; full rank unless `rank` is given."""
    rank = dim if rank is None else rank
    ginibre = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    matrix = ginibre @ ginibre.conj().T
    return DensityMatrix(matrix / np.trace(matrix).real)


def random_unitary(rng: np.random.Generator) -> JonesOperator:
    return JonesOperator(unitary_group.rvs(2, random_state=rng))
