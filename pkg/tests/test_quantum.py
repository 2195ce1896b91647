import numpy as np
import pytest

from nolmswitch.quantum import (
    D,
    H,
    V,
    BellState,
    DensityMatrix,
    InvalidStateError,
    JonesOperator,
    PolarizationKet,
    apply_local,
    bell_state,
    concurrence,
    depolarize,
    entanglement_metrics,
    fidelity_to_pure,
    fully_entangled_fraction,
    fully_entangled_fraction_magic,
    linear_entropy,
    random_density_matrix,
    random_unitary,
    tangle,
    tensor,
    trace_distance,
)


@pytest.mark.parametrize('kind', list(BellState))
def test_bell_states_are_maximally_entangled(kind):
    rho = DensityMatrix.from_ket(bell_state(kind))
    metrics = entanglement_metrics(rho)
    assert metrics.fidelity_max == pytest.approx(1.0, abs=1e-7)
    assert metrics.tangle == pytest.approx(1.0, abs=1e-6)
    assert metrics.linear_entropy == pytest.approx(0.0, abs=1e-12)


def test_maximally_mixed_state():
    rho = DensityMatrix.maximally_mixed()
    assert fully_entangled_fraction(rho) == pytest.approx(0.25, abs=1e-9)
    assert tangle(rho) == pytest.approx(0.0, abs=1e-12)
    assert linear_entropy(rho) == pytest.approx(1.0)


def test_product_state():
    rho = DensityMatrix.from_ket(tensor(H, V))
    assert fully_entangled_fraction(rho) == pytest.approx(0.5, abs=1e-7)
    assert concurrence(rho) == pytest.approx(0.0, abs=1e-7)
    assert linear_entropy(rho) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize('visibility', [0.0, 0.2, 1 / 3, 0.5, 0.9, 0.9933])
def test_werner_states(phi_plus, visibility):
    rho = depolarize(phi_plus, visibility)
    assert fully_entangled_fraction(rho) == pytest.approx((1 + 3 * visibility) / 4, abs=1e-7)
    assert concurrence(rho) == pytest.approx(max(0.0, (3 * visibility - 1) / 2), abs=1e-7)
    purity = (1 + 3 * visibility ** 2) / 4
    assert linear_entropy(rho) == pytest.approx(4 / 3 * (1 - purity))


@pytest.mark.parametrize('seed', range(8))
def test_fully_entangled_fraction_matches_magic_basis(seed):
    rho = random_density_matrix(np.random.default_rng(seed))
    assert fully_entangled_fraction(rho) == pytest.approx(fully_entangled_fraction_magic(rho), abs=1e-5)


@pytest.mark.parametrize('rank', [1, 2])
def test_fully_entangled_fraction_matches_magic_basis_low_rank(rng, rank):
    rho = random_density_matrix(rng, rank=rank)
    assert fully_entangled_fraction(rho) == pytest.approx(fully_entangled_fraction_magic(rho), abs=1e-5)


@pytest.mark.parametrize('seed', range(100))
def test_local_unitaries_preserve_metrics(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(rng)
    rotated = apply_local(random_unitary(rng), random_unitary(rng), rho)
    assert fully_entangled_fraction(rotated) == pytest.approx(fully_entangled_fraction(rho), abs=1e-7)
    assert tangle(rotated) == pytest.approx(tangle(rho), abs=1e-7)
    assert linear_entropy(rotated) == pytest.approx(linear_entropy(rho), abs=1e-12)


def test_local_unitaries_move_the_state(rng, phi_plus):
    rho = depolarize(phi_plus, 0.8)
    rotated = apply_local(random_unitary(rng), random_unitary(rng), rho)
    assert trace_distance(rho, rotated) > 0.01
    assert fully_entangled_fraction(rotated) == pytest.approx(fully_entangled_fraction(rho), abs=1e-7)


@pytest.mark.parametrize('seed', range(100))
def test_bell_diagonal_fully_entangled_fraction(seed):
    weights = np.random.default_rng(seed).dirichlet(np.ones(4))
    rho = DensityMatrix.mixture(weights, [bell_state(kind) for kind in BellState])
    assert fully_entangled_fraction(rho) == pytest.approx(weights.max(), abs=1e-6)


@pytest.mark.parametrize('seed', range(100))
def test_fully_entangled_fraction_dominates_phi_plus_fidelity(seed):
    rng = np.random.default_rng(seed)
    rank = 1 + seed % 4
    rho = random_density_matrix(rng, rank=rank)
    metrics = entanglement_metrics(rho)
    assert metrics.fidelity_max >= fidelity_to_pure(bell_state(BellState.PHI_PLUS), rho) - 1e-9
    for value in metrics.as_dict().values():
        assert 0 <= value <= 1


def test_phi_minus_and_phi_plus_mixture():
    rho = DensityMatrix.mixture(
        [0.6, 0.4],
        [bell_state(BellState.PHI_PLUS), bell_state(BellState.PHI_MINUS)],
    )
    assert fully_entangled_fraction(rho) == pytest.approx(0.6, abs=1e-7)
    assert concurrence(rho) == pytest.approx(0.2, abs=1e-7)


def test_fidelity_to_pure(phi_plus):
    assert fidelity_to_pure(bell_state(BellState.PHI_PLUS), phi_plus) == pytest.approx(1.0)
    assert fidelity_to_pure(bell_state(BellState.PSI_MINUS), phi_plus) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        fidelity_to_pure(D, phi_plus)


def test_trace_distance(phi_plus):
    assert trace_distance(phi_plus, phi_plus) == pytest.approx(0.0, abs=1e-12)
    orthogonal = DensityMatrix.from_ket(bell_state(BellState.PSI_PLUS))
    assert trace_distance(phi_plus, orthogonal) == pytest.approx(1.0)


@pytest.mark.parametrize(
    'entries',
    [
        np.eye(3) / 3,
        np.array([[1, 1], [0, 0]]),
        np.eye(2),
        np.diag([1.5, -0.5]),
        np.array([[np.nan, 0], [0, 1]]),
    ]
)
def test_invalid_density_matrices(entries):
    with pytest.raises(InvalidStateError):
        DensityMatrix(entries)


def test_density_matrix_is_read_only(phi_plus):
    with pytest.raises(ValueError):
        phi_plus.entries[0, 0] = 0


def test_ket_validation():
    with pytest.raises(ValueError):
        PolarizationKet([1, 1])
    with pytest.raises(ValueError):
        PolarizationKet([1, 0, 0])
    np.testing.assert_allclose(PolarizationKet.normalized([3, 4j]).amplitudes, [0.6, 0.8j])


def test_jones_operator_must_be_unitary():
    with pytest.raises(ValueError):
        JonesOperator(np.array([[1, 1], [0, 1]]))


def test_depolarize_rejects_bad_visibility(phi_plus):
    with pytest.raises(ValueError):
        depolarize(phi_plus, 1.1)
