"""Generalized Gibbs ensembles, the free entropy, and the MaxEnt inverse map."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import IdentityCheckFailed, Infeasible, ShapeError
from .operators import (
    PAULI_X,
    PAULI_Y,
    DensityMatrix,
    HermitianOperator,
    _density,
    _hermitian,
    expectation,
    relative_entropy,
    von_neumann_entropy,
)

GAP_IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class ChargeSystem:
    """Ordered charges with one inverse temperature each."""

    charges: tuple
    betas: tuple

    def __init__(self, charges: Sequence, betas: Sequence[float]):
        charges = tuple(_hermitian(q) for q in charges)
        betas = tuple(float(b) for b in betas)
        if not charges:
            raise ShapeError("a charge system needs at least one charge")
        if len(charges) != len(betas):
            raise ShapeError(f"{len(charges)} charges but {len(betas)} betas")
        if len({q.dim for q in charges}) != 1:
            raise ShapeError("all charges must share one dimension")
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "betas", betas)

    @property
    def dim(self) -> int:
        return self.charges[0].dim

    @property
    def k(self) -> int:
        return len(self.charges)

    def weighted_charge(self) -> np.ndarray:
        """R = sum_i beta_i Q_i."""
        return sum(b * q.matrix for b, q in zip(self.betas, self.charges))

    def with_betas(self, betas) -> "ChargeSystem":
        return ChargeSystem(self.charges, betas)


@dataclass(frozen=True)
class GGEState:
    charge_system: ChargeSystem
    state: DensityMatrix
    log_partition: float


def _gibbs(r: np.ndarray):
    """Normalized exp(-r) and ln tr exp(-r), shifted for overflow safety."""
    w, v = np.linalg.eigh(r)
    shift = w.min()
    x = np.exp(-(w - shift))
    z = x.sum()
    p = x / z
    rho = (v * p) @ v.conj().T
    return (rho + rho.conj().T) / 2, float(np.log(z) - shift), p, v


def build_gge(cs: ChargeSystem) -> GGEState:
    rho, log_z, _, _ = _gibbs(cs.weighted_charge())
    return GGEState(cs, DensityMatrix(rho, check=False), log_z)


def free_entropy(cs: ChargeSystem, rho) -> float:
    rho = _density(rho)
    if rho.dim != cs.dim:
        raise ShapeError(f"state dim {rho.dim} does not match charge dim {cs.dim}")
    coupling = sum(b * expectation(q, rho) for b, q in zip(cs.betas, cs.charges))
    return coupling - von_neumann_entropy(rho)


def free_entropy_gap(cs: ChargeSystem, rho) -> float:
    """F(rho) - F(tau); cross-checked against D(rho || tau)."""
    rho = _density(rho)
    tau = build_gge(cs).state
    d = relative_entropy(rho, tau)
    if np.isinf(d):
        return d
    gap = free_entropy(cs, rho) - free_entropy(cs, tau)
    if abs(gap - d) > GAP_IDENTITY_TOL:
        raise IdentityCheckFailed(f"free-entropy gap {gap!r} != relative entropy {d!r}")
    return gap


# -- inverse problem -----------------------------------------------------------


@dataclass
class SolveDiagnostics:
    iterations: int
    grad_norm: float
    dual_value: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False)


def dual_objective(charges, targets, betas) -> tuple[float, np.ndarray]:
    """f(beta) = ln Z(beta) + beta.v and its gradient v - <Q>_tau(beta)."""
    mats = [_hermitian(q).matrix for q in charges]
    betas = np.asarray(betas, dtype=float)
    targets = np.asarray(targets, dtype=float)
    r = sum(b * m for b, m in zip(betas, mats))
    _, log_z, p, v = _gibbs(r)
    # <Q_i> = sum_n p_n <n|Q_i|n>
    means = np.array([np.real(np.einsum("in,ij,jn->n", v.conj(), m, v)) @ p for m in mats])
    return log_z + float(betas @ targets), targets - means


def solve_beta(
    charges: Sequence,
    targets: Sequence[float],
    tol: float = 1e-9,
    max_iter: int = 100_000,
    beta_cap: float = 1e3,
    armijo: float = 1e-4,
    shrink: float = 0.5,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Find betas whose GGE reproduces ``targets`` by minimizing the convex dual.

    Gradient descent from beta = 0 with an Armijo backtracking line search.
    Each search starts from the Barzilai-Borwein step built from the last two
    iterates (falling back to twice the last accepted step), which keeps the
    method first-order while coping with badly conditioned charge sets.

    Raises
    ------
    Infeasible
        If |beta| exceeds ``beta_cap`` or ``max_iter`` passes without the
        gradient sup-norm dropping below ``tol``.
    """
    charges = [_hermitian(q) for q in charges]
    targets = np.asarray(targets, dtype=float)
    if len(charges) != len(targets):
        raise ShapeError(f"{len(charges)} charges but {len(targets)} targets")
    if not charges:
        raise ShapeError("need at least one charge")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len({q.dim for q in charges}) != 1:
        raise ShapeError("all charges must share one dimension")

    beta = np.zeros(len(charges))
    f, g = dual_objective(charges, targets, beta)
    step = 1.0
    s_prev = y_prev = None
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm < tol:
            return beta, SolveDiagnostics(it - 1, gnorm, f)
        gg = float(g @ g)
        # near the optimum the Armijo decrease drops below the rounding of f;
        # there a step is accepted when the slope along -g is still non-positive,
        # which by convexity certifies descent without evaluating f
        noise = 1e-14 * max(1.0, abs(f))
        t = 2.0 * step
        if s_prev is not None:
            sy = float(s_prev @ y_prev)
            if sy > 0:
                t = float(s_prev @ s_prev) / sy
        t = min(t, 1e6)
        while True:
            trial = beta - t * g
            f_new, g_new = dual_objective(charges, targets, trial)
            decrease = armijo * t * gg
            if decrease > noise:
                if f_new <= f - decrease:
                    break
            elif float(g_new @ g) >= 0.0:
                break
            t *= shrink
            if t < 1e-300:
                break
        if t < 1e-300:
            break
        s_prev, y_prev = trial - beta, g_new - g
        beta, f, g, step = trial, f_new, g_new, t
        if np.max(np.abs(beta)) > beta_cap:
            raise Infeasible(
                f"|beta| exceeded {beta_cap:g}: targets lie outside the achievable set",
                SolveDiagnostics(it, float(np.max(np.abs(g))), f, converged=False),
            )
    gnorm = float(np.max(np.abs(g)))
    if gnorm < tol:
        return beta, SolveDiagnostics(it, gnorm, f)
    raise Infeasible(
        f"no convergence after {it} iterations (gradient {gnorm:.3g}); "
        "targets are on or beyond the boundary of the achievable set",
        SolveDiagnostics(it, gnorm, f, converged=False),
    )


def forward_map(charges, betas) -> np.ndarray:
    """Charge expectations of the GGE at ``betas``."""
    cs = ChargeSystem(charges, betas)
    tau = build_gge(cs).state
    return np.array([expectation(q, tau) for q in cs.charges])


# -- the pancake map -------------------------------------------------------------


def pancake_map(rho) -> np.ndarray:
    """Project a qubit Bloch vector onto the x-y disk (linear on all 2x2 inputs)."""
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    x, y = PAULI_X.matrix, PAULI_Y.matrix
    return (np.eye(2) * np.trace(m) + x * np.trace(x @ m) + y * np.trace(y @ m)) / 2


def pancake_choi_check() -> tuple[np.ndarray, float]:
    """Normalized Choi matrix of the pancake map and its smallest eigenvalue."""
    choi = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            choi += np.kron(e, pancake_map(e))
    choi /= 2
    return choi, float(np.linalg.eigvalsh(choi)[0])
