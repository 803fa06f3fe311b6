import numpy as np
import pytest

from multicharge.errors import NonCommutingHamiltonian, NotInSubspace, ShapeError
from multicharge.microcanonical import SubspaceProjector, build_ams, composite_average, joint_diagonalize
from multicharge.operators import PAULI_X, PAULI_Z
from multicharge.typicality import sample_typicality, time_average_deviation


def _full_space(n):
    eye = np.eye(2**n, dtype=complex)
    return SubspaceProjector(eye, 2**n, (0.0,), 1.0, basis=eye)


def _z_sector(n, value=0.0):
    comp = composite_average([PAULI_Z], n)
    return comp, build_ams(joint_diagonalize(comp), [value], 1e-6)


def _z_field(n, freqs):
    z = PAULI_Z.matrix
    return sum(w * np.kron(np.kron(np.eye(2**l), z), np.eye(2 ** (n - 1 - l))) for l, w in enumerate(freqs))


def test_one_dimensional_subspace():
    _, P = _z_sector(4, 1.0)
    rep = sample_typicality(P, [2] * 4, trials=20, seed=0)
    assert rep.max_deviation < 1e-12


def test_full_four_qubit_space():
    rep = sample_typicality(_full_space(4), [2] * 4, trials=500, seed=1)
    assert rep.bound == 0.5
    assert rep.mean_deviation <= rep.bound + 3 * rep.standard_error
    assert rep.within_bound
    assert 0 <= rep.mean_deviation <= rep.max_deviation <= 1


def test_sampling_is_seeded():
    a = sample_typicality(_full_space(3), [2] * 3, trials=30, seed=5)
    b = sample_typicality(_full_space(3), [2] * 3, trials=30, seed=5)
    assert a == b


def test_deviation_shrinks_with_subspace_dimension():
    means = []
    for n in (3, 4, 5, 6):
        comp = composite_average([PAULI_X, PAULI_Z], n)
        P = build_ams(joint_diagonalize(comp), [0.0, 0.0], 0.5)
        means.append(sample_typicality(P, [2] * n, trials=200, seed=n).mean_deviation)
    assert all(b < a for a, b in zip(means, means[1:]))


def test_site_dims_must_match():
    with pytest.raises(ShapeError):
        sample_typicality(_full_space(3), [2, 2], trials=5)


def test_time_average_zero_hamiltonian():
    comp, P = _z_sector(4)
    psi = P.basis @ np.array([1, 2, 0, 1j, 0, 1]) / np.sqrt(7)
    rep = time_average_deviation(P, np.zeros((16, 16)), psi, np.linspace(0, 10, 5), charges=comp.composite)
    assert np.allclose(rep.running_average, rep.running_average[0])


def test_time_average_sector_hamiltonian():
    comp, P = _z_sector(4)
    h = _z_field(4, [0.7, 1.1, 1.6, 2.3])
    rng = np.random.default_rng(2)
    c = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi = P.basis @ (c / np.linalg.norm(c))
    rep = time_average_deviation(P, h, psi, np.linspace(0, 100, 200), charges=comp.composite)
    assert rep.bound == pytest.approx(2 / np.sqrt(6))
    assert rep.final_average <= rep.bound
    assert rep.max_leakage < 1e-9
    assert rep.max_norm_error < 1e-10


def test_time_average_eigenvector_is_stationary():
    comp, P = _z_sector(4)
    h = _z_field(4, [0.7, 1.1, 1.6, 2.3])
    psi = np.zeros(16)
    psi[0b0011] = 1.0
    rep = time_average_deviation(P, h, psi, np.linspace(0, 50, 20), charges=comp.composite)
    assert np.allclose(rep.running_average, rep.running_average[0], atol=1e-12)


def test_time_average_errors():
    comp, P = _z_sector(2)
    x_field = np.kron(PAULI_X.matrix, np.eye(2))
    psi = P.basis[:, 0]
    with pytest.raises(NonCommutingHamiltonian):
        time_average_deviation(P, x_field, psi, [0.0], charges=comp.composite)
    with pytest.raises(NotInSubspace):
        time_average_deviation(P, np.zeros((4, 4)), np.array([1.0, 0, 0, 0]), [0.0])
