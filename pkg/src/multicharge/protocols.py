"""System-plus-bath protocols, first-law bookkeeping and second-law audits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryViolation, NonCommutingBath, ShapeError
from .gge import ChargeSystem, build_gge, free_entropy
from .operators import (
    DensityMatrix,
    HermitianOperator,
    UnitaryOperator,
    _density,
    _hermitian,
    commutator,
    expectation,
    partial_trace,
    relative_entropy,
    tensor_all,
    trace_distance,
    von_neumann_entropy,
)

COMMUTE_TOL = 1e-10


@dataclass(frozen=True)
class BathModel:
    """N independent thermal copies of one bath particle."""

    particle_charges: ChargeSystem
    copies: int = 1

    def __post_init__(self):
        if self.copies < 1:
            raise ShapeError("a bath needs at least one copy")

    @property
    def particle_dim(self) -> int:
        return self.particle_charges.dim

    @property
    def dim(self) -> int:
        return self.particle_dim**self.copies

    @property
    def betas(self) -> tuple:
        return self.particle_charges.betas

    def particle_state(self) -> DensityMatrix:
        return build_gge(self.particle_charges).state

    def state(self) -> DensityMatrix:
        return tensor_all([self.particle_state()] * self.copies)

    def total_charges(self) -> list[np.ndarray]:
        """Sum over copies of each particle charge."""
        d, n = self.particle_dim, self.copies
        out = []
        for q in self.particle_charges.charges:
            total = np.zeros((d**n, d**n), dtype=complex)
            for site in range(n):
                total += np.kron(np.kron(np.eye(d**site), q.matrix), np.eye(d ** (n - 1 - site)))
            out.append(total)
        return out

    def charge_system(self) -> ChargeSystem:
        return ChargeSystem(self.total_charges(), self.betas)


@dataclass
class WorkLedger:
    """Per-charge changes of one step; work is minus the total change."""

    delta_system: np.ndarray
    delta_bath: np.ndarray
    work: np.ndarray
    delta_S_system: float
    delta_S_bath: float
    free_entropy_change_system: float
    free_entropy_change_bath: float
    mutual_information: float = 0.0

    @classmethod
    def from_deltas(cls, delta_system, delta_bath, **kw) -> "WorkLedger":
        ds = np.asarray(delta_system, dtype=float)
        db = np.asarray(delta_bath, dtype=float)
        return cls(ds, db, -ds - db, **kw)

    @classmethod
    def zero(cls, k: int) -> "WorkLedger":
        return cls.from_deltas(np.zeros(k), np.zeros(k), delta_S_system=0.0, delta_S_bath=0.0,
                               free_entropy_change_system=0.0, free_entropy_change_bath=0.0)

    def __add__(self, other: "WorkLedger") -> "WorkLedger":
        return WorkLedger(
            self.delta_system + other.delta_system,
            self.delta_bath + other.delta_bath,
            self.work + other.work,
            self.delta_S_system + other.delta_S_system,
            self.delta_S_bath + other.delta_S_bath,
            self.free_entropy_change_system + other.free_entropy_change_system,
            self.free_entropy_change_bath + other.free_entropy_change_bath,
            self.mutual_information + other.mutual_information,
        )


@dataclass
class ProtocolTrace:
    steps: list
    cumulative: WorkLedger
    second_law_slack: float
    betas: tuple
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_steps(cls, steps: Sequence[WorkLedger], betas, k: int, metadata=None) -> "ProtocolTrace":
        total = WorkLedger.zero(k)
        for s in steps:
            total = total + s
        betas = tuple(float(b) for b in betas)
        slack = -float(np.dot(betas, total.work)) - total.free_entropy_change_system
        return cls(list(steps), total, slack, betas, dict(metadata or {}))

    @property
    def deficit(self) -> float:
        """-dF_s - beta.W, the dissipated free entropy; equal to the slack."""
        return self.second_law_slack

    def rows(self) -> list[dict]:
        out = []
        for n, s in enumerate(self.steps):
            row = {"step": n}
            for i, w in enumerate(s.work):
                row[f"work_{i}"] = float(w)
            row["dF_system"] = s.free_entropy_change_system
            row["dF_bath"] = s.free_entropy_change_bath
            row["slack"] = -float(np.dot(self.betas, s.work)) - s.free_entropy_change_system
            out.append(row)
        return out


# -- checks and single unitaries -------------------------------------------------


def conservation_check(u, totals: Sequence, support=None) -> list[float]:
    """Operator norm of [U, T] for each conserved total.

    With ``support`` (a projector) only the restriction [U, T] P is measured.
    """
    um = u.matrix if isinstance(u, UnitaryOperator) else np.asarray(u, dtype=complex)
    out = []
    for t in totals:
        tm = t.matrix if isinstance(t, HermitianOperator) else np.asarray(t, dtype=complex)
        if tm.shape != um.shape:
            raise ShapeError(f"dimension mismatch: {tm.shape} vs {um.shape}")
        c = um @ tm - tm @ um
        if support is not None:
            c = c @ np.asarray(support)
        out.append(float(np.linalg.norm(c, 2)))
    return out


def _system_charges(system: DensityMatrix, bath: BathModel, system_charges):
    if system_charges is None:
        if system.dim != bath.particle_dim:
            raise ShapeError("system charges are required when the system and bath particle differ in dim")
        return [q.matrix for q in bath.particle_charges.charges]
    mats = [_hermitian(q).matrix for q in system_charges]
    if len(mats) != bath.particle_charges.k:
        raise ShapeError("system and bath must carry the same number of charges")
    if any(m.shape[0] != system.dim for m in mats):
        raise ShapeError("system charges do not match the system dimension")
    return mats


def _mutual_information(joint, dims) -> float:
    a = partial_trace(joint, dims, [0])
    b = partial_trace(joint, dims, [1])
    return von_neumann_entropy(a) + von_neumann_entropy(b) - von_neumann_entropy(joint)


def run_unitary(system, bath: BathModel, u, system_charges=None) -> tuple[DensityMatrix, WorkLedger]:
    """Apply U to system (x) bath^N and book every change from the marginals."""
    system = _density(system)
    u = u if isinstance(u, UnitaryOperator) else UnitaryOperator(u)
    qs = _system_charges(system, bath, system_charges)
    dims = [system.dim, bath.dim]
    if u.dim != system.dim * bath.dim:
        raise ShapeError(f"unitary dim {u.dim} != system {system.dim} x bath {bath.dim}")
    rho_b = bath.state()
    joint = u.conjugate(DensityMatrix(np.kron(system.matrix, rho_b.matrix), check=False))
    s_after = partial_trace(joint, dims, [0])
    b_after = partial_trace(joint, dims, [1])
    qb = bath.total_charges()
    ds = [expectation(q, s_after) - expectation(q, system) for q in qs]
    db = [expectation(q, b_after) - expectation(q, rho_b) for q in qb]
    betas = bath.betas
    cs_s = ChargeSystem(qs, betas)
    cs_b = ChargeSystem(qb, betas)
    ledger = WorkLedger.from_deltas(
        ds, db,
        delta_S_system=von_neumann_entropy(s_after) - von_neumann_entropy(system),
        delta_S_bath=von_neumann_entropy(b_after) - von_neumann_entropy(rho_b),
        free_entropy_change_system=free_entropy(cs_s, s_after) - free_entropy(cs_s, system),
        free_entropy_change_bath=free_entropy(cs_b, b_after) - free_entropy(cs_b, rho_b),
        mutual_information=_mutual_information(joint, dims),
    )
    return joint, ledger


def second_law_audit(trace: ProtocolTrace, betas) -> tuple[float, float, float]:
    """(beta.W, -dF_s, slack); a product-state protocol has slack >= 0."""
    betas = np.asarray(betas, dtype=float)
    if betas.shape != trace.cumulative.work.shape:
        raise ShapeError("one beta per charge is required")
    lhs = float(betas @ trace.cumulative.work)
    rhs = -trace.cumulative.free_entropy_change_system
    return lhs, rhs, rhs - lhs


def single_unitary_trace(system, bath: BathModel, u, system_charges=None) -> ProtocolTrace:
    _, ledger = run_unitary(system, bath, u, system_charges)
    return ProtocolTrace.from_steps([ledger], bath.betas, bath.particle_charges.k)


# -- extraction ------------------------------------------------------------------


def _require_commuting(charges):
    for i in range(len(charges)):
        for j in range(i + 1, len(charges)):
            if commutator(charges[i], charges[j]).operator_norm > COMMUTE_TOL:
                raise NonCommutingBath(f"bath charges {i} and {j} do not commute")


def _common_eigenbasis(mats) -> np.ndarray:
    """Unitary diagonalizing commuting Hermitian matrices (generic combination)."""
    if all(np.allclose(m, np.diag(np.diag(m)), atol=1e-14) for m in mats):
        return np.eye(mats[0].shape[0], dtype=complex)
    weights = 1.0 + 0.6180339887498949 * np.arange(len(mats))
    _, v = np.linalg.eigh(sum(w * m for w, m in zip(weights, mats)))
    return v


def _swap_unitary(d: int, i: int, j: int) -> np.ndarray:
    """Exchange |i, v> and |j, u> on system (x) qubit, with u = 0 and v = 1."""
    u = np.eye(2 * d, dtype=complex)
    a, b = 2 * i + 1, 2 * j + 0
    u[[a, b]] = u[[b, a]]
    return u


def extraction_protocol(system, bath: BathModel, delta_p: float, max_rounds: int = 5000,
                        tol: float = 1e-12) -> ProtocolTrace:
    """Drive a system to its GGE in population steps of at most ``delta_p``.

    Each round couples the most over-populated level i and the most
    under-populated level j (relative to the GGE) to a fresh two-level bath
    particle whose charges are lambda (q(j) - q(i)) on its upper level. lambda is
    chosen so that the particle's thermal ratio sits exactly one step beyond the
    system's, and the swap |i,1> <-> |j,0> then moves min(delta_p, gap) from i
    to j. The mismatch between lambda and 1 is booked as work; the dissipated
    free entropy per round is second order in the step.
    """
    if not 0 < delta_p < 1:
        raise ValueError("delta_p must lie in (0, 1)")
    system = _density(system)
    cs = bath.particle_charges
    if system.dim != cs.dim:
        raise ShapeError("system and bath particle must share a dimension")
    _require_commuting(cs.charges)
    mats = [q.matrix for q in cs.charges]
    basis = _common_eigenbasis(mats)
    meta = {"basis_change": not np.allclose(basis, np.eye(cs.dim)), "rounds": 0}
    qvals = np.array([np.real(np.diag(basis.conj().T @ m @ basis)) for m in mats])  # (k, d)
    betas = np.asarray(cs.betas)
    r = betas @ qvals
    target = np.exp(-(r - r.min()))
    target /= target.sum()
    rho = basis.conj().T @ system.matrix @ basis
    meta["max_coherence"] = float(np.max(np.abs(rho - np.diag(np.diag(rho)))))
    cs_sys = ChargeSystem([np.diag(q) for q in qvals], betas)
    tau_s = DensityMatrix(np.diag(target), check=False)
    d = cs.dim
    steps = []
    for _ in range(max_rounds):
        state = DensityMatrix(rho, check=False)
        if trace_distance(state, tau_s) < delta_p:
            break
        p = np.real(np.diag(rho))
        excess = p - target
        movable = np.abs(r[:, None] - r[None, :]) > tol
        best = None
        for i in np.argsort(-excess, kind="stable"):
            for j in np.argsort(excess, kind="stable"):
                if excess[i] > tol and excess[j] < -tol and movable[i, j]:
                    best = (int(i), int(j))
                    break
            if best:
                break
        if best is None:
            break
        i, j = best
        t = min(delta_p, excess[i], -excess[j])
        # particle populations (y0, y1) so that p_i y1 - p_j y0 = t
        y1 = (t + p[j]) / (p[i] + p[j])
        y0 = 1.0 - y1
        lam = -np.log(y1 / y0) / (r[j] - r[i])
        particle = ChargeSystem([np.diag([0.0, lam * (qvals[k, j] - qvals[k, i])]) for k in range(len(mats))], betas)
        joint, ledger = run_unitary(
            state, BathModel(particle, 1), UnitaryOperator(_swap_unitary(d, i, j), check=False),
            system_charges=cs_sys.charges,
        )
        rho = partial_trace(joint, [d, 2], [0]).matrix
        steps.append(ledger)
    meta["rounds"] = len(steps)
    meta["final_distance"] = trace_distance(DensityMatrix(rho, check=False), tau_s)
    trace = ProtocolTrace.from_steps(steps, betas, len(mats), meta)
    return trace


# -- trading -----------------------------------------------------------------------


def trade_resources(bath: BathModel, level_pair: tuple[int, int]) -> WorkLedger:
    """Swap the populations of two bath eigenlevels on every copy.

    The unitary acts on the bath alone, so the whole charge change is work and,
    being a permutation, it leaves the bath entropy fixed: beta.dQ_b = dF_b.
    """
    cs = bath.particle_charges
    _require_commuting(cs.charges)
    i, j = level_pair
    d = cs.dim
    if not (0 <= i < d and 0 <= j < d):
        raise IndexError(f"levels {level_pair} out of range for dimension {d}")
    mats = [q.matrix for q in cs.charges]
    basis = _common_eigenbasis(mats)
    perm = np.eye(d, dtype=complex)
    perm[[i, j]] = perm[[j, i]]
    single = basis @ perm @ basis.conj().T
    tau = bath.particle_state()
    after = DensityMatrix(single @ tau.matrix @ single.conj().T, check=False)
    n = bath.copies
    db = np.array([n * (expectation(q, after) - expectation(q, tau)) for q in mats])
    ds_b = n * (von_neumann_entropy(after) - von_neumann_entropy(tau))
    df_b = n * (free_entropy(cs, after) - free_entropy(cs, tau))
    return WorkLedger.from_deltas(
        np.zeros(len(mats)), db, delta_S_system=0.0, delta_S_bath=ds_b,
        free_entropy_change_system=0.0, free_entropy_change_bath=df_b,
    )


# -- explicit battery ----------------------------------------------------------------


@dataclass(frozen=True)
class BatteryLadder:
    """A weight on L equally spaced rungs storing one charge type."""

    levels: int
    unit: float = 1.0

    def __post_init__(self):
        if self.levels < 3:
            raise ShapeError("a ladder needs at least three rungs")

    @property
    def position_observable(self) -> HermitianOperator:
        return HermitianOperator(np.diag(self.unit * np.arange(self.levels)), check=False)

    def translation(self, k: int = 1) -> np.ndarray:
        """Cyclic shift |x> -> |x + k mod L>."""
        return np.roll(np.eye(self.levels, dtype=complex), k, axis=0)

    def window_projector(self, window: tuple[int, int]) -> np.ndarray:
        lo, hi = window
        p = np.zeros(self.levels)
        p[lo:hi + 1] = 1.0
        return np.diag(p).astype(complex)

    def position_state(self, x: int) -> DensityMatrix:
        rho = np.zeros((self.levels, self.levels), dtype=complex)
        rho[x, x] = 1.0
        return DensityMatrix(rho, check=False)

    def uniform_state(self, window: tuple[int, int]) -> DensityMatrix:
        p = self.window_projector(window)
        return DensityMatrix(p / np.trace(p).real, check=False)


def build_translation_invariant_unitary(system_bath_dim: int, battery: BatteryLadder,
                                        shift_map: Callable[[int], int] | Sequence[int],
                                        window: tuple[int, int] | None = None,
                                        relabel: Sequence[int] | None = None) -> UnitaryOperator:
    """U = sum_m |sigma(m)><m| (x) Gamma^shift(m), a controlled ladder translation.

    ``relabel`` is the permutation sigma of system-bath labels (identity by
    default). ``window`` is the declared battery support; every shift must keep
    it inside the ladder, otherwise the cyclic wrap would be visible.
    """
    n = int(system_bath_dim)
    shifts = [int(shift_map(m)) if callable(shift_map) else int(shift_map[m]) for m in range(n)]
    sigma = list(range(n)) if relabel is None else [int(s) for s in relabel]
    if sorted(sigma) != list(range(n)):
        raise ShapeError("relabel must be a permutation of the system-bath labels")
    lo, hi = (0, battery.levels - 1) if window is None else window
    if not 0 <= lo <= hi < battery.levels:
        raise BoundaryViolation(f"window {(lo, hi)} is not inside the ladder")
    for m, s in enumerate(shifts):
        if lo + s < 0 or hi + s > battery.levels - 1:
            raise BoundaryViolation(f"label {m} shifts the window {(lo, hi)} by {s} past the ladder ends")
    u = np.zeros((n * battery.levels, n * battery.levels), dtype=complex)
    for m, s in enumerate(shifts):
        ket = np.zeros((n, n))
        ket[sigma[m], m] = 1.0
        u += np.kron(ket, battery.translation(s))
    return UnitaryOperator(u, check=False)


def entropy_monotonicity_check(system_bath, battery_state, u) -> float:
    """S(tr_W U rho U^dag) - S(rho_sb) for a product initial state."""
    rho = _density(system_bath)
    w = _density(battery_state)
    u = u if isinstance(u, UnitaryOperator) else UnitaryOperator(u)
    joint = u.conjugate(DensityMatrix(np.kron(rho.matrix, w.matrix), check=False))
    after = partial_trace(joint, [rho.dim, w.dim], [0])
    return von_neumann_entropy(after) - von_neumann_entropy(rho)


def relative_entropy_to_bath(bath: BathModel, rho_b) -> float:
    return relative_entropy(rho_b, bath.state())
