"""N-copy charges, approximate microcanonical subspaces and their checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimCap, EmptyWindow, NonCommuting, ShapeError
from .gge import ChargeSystem, build_gge, solve_beta
from .jacobi import joint_diagonalize_matrices
from .operators import (
    DensityMatrix,
    HermitianOperator,
    UnitaryOperator,
    _hermitian,
    _rng,
    commutator,
    expectation,
    partial_trace,
    relative_entropy,
)

DIM_CAP = 1024
COMMUTE_TOL = 1e-10
SHARPNESS_ETA = 0.2
# fixed weights for the generic linear combination whose eigenbasis seeds the sweeps
_SEED_WEIGHT = 0.6180339887498949


@dataclass(frozen=True)
class CompositeChargeSet:
    base_charges: tuple
    copies: int
    composite: tuple

    @property
    def site_dim(self) -> int:
        return self.base_charges[0].dim

    @property
    def dim(self) -> int:
        return self.composite[0].dim


@dataclass(frozen=True)
class SubspaceProjector:
    projector: np.ndarray
    dim_subspace: int
    window_center: tuple
    window_halfwidth: float
    sharpness_tolerance: float = SHARPNESS_ETA
    basis: np.ndarray = field(default=None, repr=False)

    def state(self) -> DensityMatrix:
        """Omega = P / tr P."""
        return DensityMatrix(self.projector / self.dim_subspace, check=False)


@dataclass(frozen=True)
class CommutingApproximants:
    basis: UnitaryOperator
    diagonals: tuple
    residual: float
    deviations: tuple
    history: tuple = field(default=(), repr=False)

    def approximant(self, j: int) -> np.ndarray:
        v = self.basis.matrix
        return (v * self.diagonals[j]) @ v.conj().T


def _check_cap(d: int, n: int):
    if n < 1:
        raise ShapeError("copies must be at least 1")
    if d**n > DIM_CAP:
        raise DimCap(f"{d}^{n} = {d**n} exceeds the dimension cap {DIM_CAP}")


def composite_average(base: Sequence, N: int) -> CompositeChargeSet:
    """(1/N) sum over copies of each single-copy charge."""
    base = tuple(_hermitian(q) for q in base)
    if not base:
        raise ShapeError("need at least one charge")
    d = base[0].dim
    if any(q.dim != d for q in base):
        raise ShapeError("all base charges must share one dimension")
    _check_cap(d, N)
    out = []
    for q in base:
        total = np.zeros((d**N, d**N), dtype=complex)
        for site in range(N):
            total += np.kron(np.kron(np.eye(d**site), q.matrix), np.eye(d ** (N - 1 - site)))
        out.append(HermitianOperator(total / N, q.unit, check=False))
    return CompositeChargeSet(base, int(N), tuple(out))


def commutator_decay(base: Sequence, N_range: Sequence[int]) -> list[tuple[int, int, int, float]]:
    rows = []
    for n in N_range:
        comp = composite_average(base, n).composite
        for i in range(len(comp)):
            for j in range(i + 1, len(comp)):
                rows.append((int(n), i, j, commutator(comp[i], comp[j]).operator_norm))
    return rows


def joint_diagonalize(composite: CompositeChargeSet, sweeps_tol: float = 1e-12,
                      backend: str | None = None) -> CommutingApproximants:
    """Common eigenbasis of the composites by Jacobi rotations.

    The sweeps start from the eigenbasis of a fixed generic combination of the
    charges: exact for commuting sets up to degeneracies, and away from the
    tied saddle that the computational basis sits on for Pauli-type sets.
    """
    mats = [q.matrix for q in composite.composite]
    combo = sum((1.0 + _SEED_WEIGHT * j) * m for j, m in enumerate(mats))
    _, v0 = np.linalg.eigh(combo)
    rotated = [v0.conj().T @ m @ v0 for m in mats]
    v, stack, history = joint_diagonalize_matrices(rotated, sweeps_tol=sweeps_tol, backend=backend)
    basis = v0 @ v
    diagonals = tuple(np.real(np.diagonal(a)).copy() for a in stack)
    approx = [(basis * dj) @ basis.conj().T for dj in diagonals]
    deviations = tuple(float(np.linalg.norm(y - m, 2)) for y, m in zip(approx, mats))
    return CommutingApproximants(
        UnitaryOperator(basis, check=False),
        diagonals,
        float(np.sqrt(history[-1])),
        deviations,
        tuple(history),
    )


def build_ams(approx: CommutingApproximants, v: Sequence[float], delta: float,
              eta: float = SHARPNESS_ETA) -> SubspaceProjector:
    """Projector onto joint eigenvectors whose eigenvalues all lie within delta of v."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    v = np.asarray(v, dtype=float)
    if v.shape != (len(approx.diagonals),):
        raise ShapeError(f"{len(approx.diagonals)} charges but {v.size} window centres")
    diag = np.array(approx.diagonals)
    inside = np.all(np.abs(diag - v[:, None]) <= delta + 1e-12, axis=0)
    if not inside.any():
        raise EmptyWindow(f"no joint eigenvector within {delta:g} of {v.tolist()}")
    cols = approx.basis.matrix[:, inside]
    p = cols @ cols.conj().T
    return SubspaceProjector(
        (p + p.conj().T) / 2, int(inside.sum()), tuple(v.tolist()), float(delta), float(eta), cols
    )


def _outside_mass(q: np.ndarray, states: np.ndarray, lo: float, hi: float) -> np.ndarray:
    w, u = np.linalg.eigh(q)
    out = (w < lo) | (w > hi)
    amps = u[:, out].conj().T @ states
    return np.sum(np.abs(amps) ** 2, axis=0)


@dataclass
class AMSReport:
    worst_outside_mass: list
    mean_outside_mass: list
    sharp: bool
    worst_product_overlap: float
    mean_product_overlap: float
    verification_halfwidth: float
    eta: float


def _product_state(site: np.ndarray, n: int) -> np.ndarray:
    out = site
    for _ in range(n - 1):
        out = np.kron(out, site)
    return out


def verify_ams(P: SubspaceProjector, composite: CompositeChargeSet, trials: int = 200,
               seed: int = 0, beta_jitter: float = 0.05) -> AMSReport:
    """Sharp statistics inside M, and overlap of near-v product states with M.

    (i) Haar states drawn inside range(P) are measured in the spectral basis of
    each composite; the probability mass outside v_j +- 2 delta is recorded.
    (ii) Product states tau(beta)^N with beta jittered around the MaxEnt fit to v
    report tr(P rho); this is reported only, since at small N concentration is weak.
    """
    if P.projector.shape[0] != composite.dim:
        raise ShapeError("projector and composite charges act on different spaces")
    rng = _rng(seed)
    wide = 2.0 * P.window_halfwidth
    basis = P.basis if P.basis is not None else _range_basis(P.projector)
    coeffs = rng.standard_normal((basis.shape[1], trials)) + 1j * rng.standard_normal((basis.shape[1], trials))
    states = basis @ coeffs
    states /= np.linalg.norm(states, axis=0)
    worst, mean = [], []
    for q, vj in zip(composite.composite, P.window_center):
        mass = _outside_mass(q.matrix, states, vj - wide, vj + wide)
        worst.append(float(mass.max()))
        mean.append(float(mass.mean()))

    beta0, _ = solve_beta(composite.base_charges, P.window_center)
    overlaps = []
    for _ in range(trials):
        beta = beta0 + beta_jitter * rng.standard_normal(beta0.shape)
        site = build_gge(ChargeSystem(composite.base_charges, beta)).state.matrix
        rho = _product_state(site, composite.copies)
        overlaps.append(float(np.real(np.sum(P.projector * rho.T))))
    return AMSReport(
        worst, mean, max(worst) <= P.sharpness_tolerance,
        float(min(overlaps)), float(np.mean(overlaps)), wide, P.sharpness_tolerance,
    )


def _range_basis(p: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(p)
    return u[:, w > 0.5]


def random_subspace_projector(dim: int, rank: int, like: SubspaceProjector, seed) -> SubspaceProjector:
    """A Haar-random projector of the given rank carrying ``like``'s window; a negative control."""
    rng = _rng(seed)
    z = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(z)
    return SubspaceProjector(q @ q.conj().T, rank, like.window_center, like.window_halfwidth,
                             like.sharpness_tolerance, q)


def site_reduced_states(omega, site_dim: int, copies: int) -> list[DensityMatrix]:
    dims = [site_dim] * copies
    return [partial_trace(omega, dims, [site]) for site in range(copies)]


@dataclass
class ScanRow:
    copies: int
    avg_relative_entropy: float
    dim_subspace: int
    beta_star: list
    site_expectations: list


def reduced_state_scan(base: Sequence, v: Sequence[float], N_range: Sequence[int],
                       delta: float = 0.25) -> list[ScanRow]:
    """Average single-site divergence between Omega's marginals and the fitted GGE.

    beta* is the MaxEnt fit to the site-averaged charge expectations of Omega.
    """
    base = tuple(_hermitian(q) for q in base)
    rows = []
    for n in N_range:
        comp = composite_average(base, n)
        P = build_ams(joint_diagonalize(comp), v, delta)
        omega = P.state()
        reduced = site_reduced_states(omega, comp.site_dim, n)
        means = [float(np.mean([expectation(q, r) for r in reduced])) for q in base]
        beta, _ = solve_beta(base, means)
        tau = build_gge(ChargeSystem(base, beta)).state
        avg = float(np.mean([relative_entropy(r, tau) for r in reduced]))
        rows.append(ScanRow(int(n), avg, P.dim_subspace, beta.tolist(), means))
    return rows


def exact_microcanonical_reduction(charges: Sequence, values: Sequence[float], copies: int,
                                   tol: float = 1e-9) -> tuple[DensityMatrix, DensityMatrix]:
    """Maximally mixed state on the exact joint eigenspace of commuting composites.

    Returns (Omega, single-site reduced state of copy 0).
    """
    charges = tuple(_hermitian(q) for q in charges)
    for i in range(len(charges)):
        for j in range(i + 1, len(charges)):
            if commutator(charges[i], charges[j]).operator_norm > COMMUTE_TOL:
                raise NonCommuting(f"charges {i} and {j} do not commute")
    comp = composite_average(charges, copies)
    approx = joint_diagonalize(comp)
    P = build_ams(approx, values, tol)
    omega = P.state()
    return omega, partial_trace(omega, [comp.site_dim] * copies, [0])


def exact_sector_projector(composite: CompositeChargeSet, values: Sequence[float],
                           tol: float = 1e-9) -> np.ndarray:
    """Independent route for commuting charges: spectral projectors multiplied together."""
    p = np.eye(composite.dim, dtype=complex)
    for q, vj in zip(composite.composite, values):
        w, u = np.linalg.eigh(q.matrix)
        cols = u[:, np.abs(w - vj) <= tol]
        p = p @ (cols @ cols.conj().T)
    return p
