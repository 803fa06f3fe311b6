import math

import numpy as np
import pytest

from multicharge import jacobi
from multicharge.errors import DimCap, EmptyWindow, NonCommuting
from multicharge.gge import ChargeSystem, build_gge, solve_beta
from multicharge.microcanonical import (
    build_ams,
    commutator_decay,
    composite_average,
    exact_microcanonical_reduction,
    exact_sector_projector,
    joint_diagonalize,
    random_subspace_projector,
    reduced_state_scan,
    site_reduced_states,
    verify_ams,
)
from multicharge.operators import PAULI_X, PAULI_Y, PAULI_Z, diag, expectation, random_hermitian, relative_entropy

BACKENDS = ["python"] + (["cython"] if jacobi.BACKEND == "cython" else [])


def test_composite_average_examples():
    comp = composite_average([PAULI_X, PAULI_Z], 1)
    assert np.allclose(comp.composite[0].matrix, PAULI_X.matrix)
    assert np.allclose(composite_average([PAULI_Z], 2).composite[0].matrix, np.diag([1, 0, 0, -1]))
    for n in range(1, 7):
        w = np.linalg.eigvalsh(composite_average([PAULI_Z], n).composite[0].matrix)
        assert np.allclose(np.unique(np.round(w, 12)), np.linspace(-1, 1, n + 1))
    with pytest.raises(DimCap):
        composite_average([PAULI_Z], 11)
    with pytest.raises(DimCap):
        composite_average([diag([0, 1, 2])], 7)


def test_commutator_decay_examples():
    rows = commutator_decay([PAULI_X, PAULI_Y], [2, 4])
    assert math.isclose(rows[0][3], 1.0, rel_tol=1e-12)
    assert math.isclose(rows[1][3], 0.5, rel_tol=1e-12)
    assert all(r[3] == 0 for r in commutator_decay([PAULI_Z, diag([1, 0])], [1, 2, 3]))
    for n, _, _, norm in commutator_decay([PAULI_X, PAULI_Y], range(1, 8)):
        assert abs(norm * n - 2) < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_joint_diagonalize_commuting_is_exact(backend):
    rng = np.random.default_rng(0)
    h = random_hermitian(6, rng).matrix
    _, v = np.linalg.eigh(h)
    mats = [(v * d) @ v.conj().T for d in (rng.normal(size=6), np.repeat([1.0, 2.0, 3.0], 2))]
    basis, rotated, history = jacobi.joint_diagonalize_matrices(mats, backend=backend)
    assert history[-1] < 1e-20
    for m, r in zip(mats, rotated):
        assert np.allclose(basis @ np.diag(np.diag(r)) @ basis.conj().T, m, atol=1e-10)


def test_joint_diagonalize_single_and_commuting_composites():
    comp = composite_average([PAULI_Z, diag([1, 0])], 3)
    approx = joint_diagonalize(comp)
    assert approx.residual < 1e-10
    for j in range(2):
        assert np.allclose(approx.approximant(j), comp.composite[j].matrix, atol=1e-10)
    single = joint_diagonalize(composite_average([PAULI_X], 4))
    assert single.residual < 1e-10


@pytest.mark.parametrize("backend", BACKENDS)
def test_jacobi_sweeps_monotone(backend):
    rng = np.random.default_rng(1)
    mats = [random_hermitian(12, rng).matrix for _ in range(3)]
    basis, rotated, history = jacobi.joint_diagonalize_matrices(mats, backend=backend)
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]
    assert np.linalg.norm(basis @ basis.conj().T - np.eye(12)) < 1e-10
    for m, r in zip(mats, rotated):
        assert np.allclose(basis.conj().T @ m @ basis, r, atol=1e-10)


@pytest.mark.skipif(jacobi.BACKEND != "cython", reason="compiled kernel not built")
def test_backends_agree():
    rng = np.random.default_rng(2)
    mats = [random_hermitian(10, rng).matrix for _ in range(2)]
    _, _, h_py = jacobi.joint_diagonalize_matrices(mats, backend="python")
    _, _, h_cy = jacobi.joint_diagonalize_matrices(mats, backend="cython")
    assert len(h_py) == len(h_cy)
    assert np.allclose(h_py, h_cy, rtol=1e-8, atol=1e-12)


def test_pauli_deviation_shrinks_with_copies():
    dev = [max(joint_diagonalize(composite_average([PAULI_X, PAULI_Z], n)).deviations) for n in range(1, 7)]
    assert all(b <= a for a, b in zip(dev, dev[1:]))
    assert dev[1] < dev[0]


def test_build_ams_examples():
    comp = composite_average([PAULI_Z], 4)
    P = build_ams(joint_diagonalize(comp), [0.0], 0.1)
    assert P.dim_subspace == math.comb(4, 2)
    assert np.linalg.norm(P.projector - exact_sector_projector(comp, [0.0])) < 1e-10
    assert np.allclose(P.projector @ P.projector, P.projector, atol=1e-10)
    top = build_ams(joint_diagonalize(comp), [1.0], 0.05)
    assert top.dim_subspace == 1
    with pytest.raises(EmptyWindow):
        build_ams(joint_diagonalize(comp), [3.0], 0.1)
    pauli = composite_average([PAULI_X, PAULI_Z], 4)
    P = build_ams(joint_diagonalize(pauli), [0.3, 0.3], 0.25)
    assert P.dim_subspace >= 1
    rep = verify_ams(P, pauli, trials=100, seed=0)
    assert rep.sharp


def test_verify_ams_exact_sector_has_no_outside_mass():
    comp = composite_average([PAULI_Z], 4)
    P = build_ams(joint_diagonalize(comp), [0.0], 0.1)
    rep = verify_ams(P, comp, trials=50, seed=1)
    assert rep.worst_outside_mass == [pytest.approx(0, abs=1e-12)]


def test_verify_ams_pauli_and_negative_control():
    comp = composite_average([PAULI_X, PAULI_Z], 6)
    P = build_ams(joint_diagonalize(comp), [0.3, 0.3], 0.25)
    rep = verify_ams(P, comp, trials=200, seed=2)
    assert max(rep.worst_outside_mass) < 0.2
    control = random_subspace_projector(comp.dim, P.dim_subspace, P, seed=3)
    bad = verify_ams(control, comp, trials=200, seed=2)
    assert bad.mean_product_overlap < rep.mean_product_overlap
    assert max(bad.worst_outside_mass) > max(rep.worst_outside_mass)


def test_omega_expectations_inside_window():
    for n in range(2, 7):
        comp = composite_average([PAULI_X, PAULI_Z], n)
        P = build_ams(joint_diagonalize(comp), [0.2, 0.2], 0.25)
        omega = P.state()
        for q, v in zip(comp.composite, P.window_center):
            assert abs(expectation(q, omega) - v) <= P.window_halfwidth + 1e-12


def test_reduced_state_scan_commuting_and_trivial_window():
    rows = reduced_state_scan([PAULI_Z], [0.0], [2, 4, 6], delta=0.05)
    assert all(r.avg_relative_entropy < 1e-10 for r in rows)
    full = reduced_state_scan([PAULI_X, PAULI_Z], [0.0, 0.0], [3], delta=2.0)[0]
    assert full.dim_subspace == 8
    assert abs(full.avg_relative_entropy) < 1e-10
    assert np.allclose(full.beta_star, 0, atol=1e-8)


def test_reduced_state_scan_propagates_empty_window():
    # for these charges the composites obey z = 2 n - 1, so (0.5, 0.25) is unreachable
    with pytest.raises(EmptyWindow):
        reduced_state_scan([PAULI_Z, diag([1, 0])], [0.5, 0.25], [4], delta=1e-6)


def test_reduced_state_scan_permutation_invariant():
    # relabelling copies leaves the composites, hence the scan, unchanged
    base = [PAULI_X, PAULI_Z]
    a = reduced_state_scan(base, [0.2, 0.2], [4], delta=0.25)[0]
    comp = composite_average(base, 4)
    P = build_ams(joint_diagonalize(comp), [0.2, 0.2], 0.25)
    perm = np.arange(16).reshape([2] * 4).transpose(1, 0, 3, 2).ravel()
    omega = P.state().matrix[np.ix_(perm, perm)]
    reduced = site_reduced_states(omega, 2, 4)
    means = [np.mean([expectation(q, r) for r in reduced]) for q in base]
    beta, _ = solve_beta(base, means)
    tau = build_gge(ChargeSystem(base, beta)).state
    avg = np.mean([relative_entropy(r, tau) for r in reduced])
    assert abs(avg - a.avg_relative_entropy) < 1e-9


def test_exact_microcanonical_reduction_examples():
    _, red = exact_microcanonical_reduction([PAULI_Z], [0.0], 4)
    assert np.allclose(red.matrix, np.eye(2) / 2, atol=1e-12)
    _, red = exact_microcanonical_reduction([PAULI_Z], [1.0], 4)
    assert np.allclose(red.matrix, np.diag([1.0, 0.0]), atol=1e-12)
    with pytest.raises(NonCommuting):
        exact_microcanonical_reduction([PAULI_X, PAULI_Z], [0, 0], 2)
    with pytest.raises(EmptyWindow):
        exact_microcanonical_reduction([PAULI_Z], [0.1], 4)


def test_exact_reduction_qutrits_matches_gge():
    h = diag([0.0, 1.0, 2.0])
    n_op = diag([0.0, 1.0, 1.0])
    # total energy 3 and total number 2 over three sites, per-site averages
    _, red = exact_microcanonical_reduction([h, n_op], [1.0, 2 / 3], 3)
    means = [expectation(h, red), expectation(n_op, red)]
    beta, _ = solve_beta([h, n_op], means)
    tau = build_gge(ChargeSystem([h, n_op], beta)).state
    assert relative_entropy(red, tau) < 0.05
