"""Canonical typicality: random states in a subspace and their marginals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NonCommutingHamiltonian, NotInSubspace, ShapeError
from .microcanonical import SubspaceProjector, _range_basis
from .operators import _as_array, _rng, partial_trace

COMMUTE_TOL = 1e-10
SUBSPACE_TOL = 1e-10


@dataclass
class TypicalityReport:
    trials: int
    mean_deviation: float
    max_deviation: float
    bound: float
    per_site: list
    standard_error: float
    dim_subspace: int
    within_bound: bool = field(default=True)


def _pure_marginal(psi: np.ndarray, site_dims: Sequence[int], site: int) -> np.ndarray:
    t = np.moveaxis(psi.reshape(site_dims), site, 0).reshape(site_dims[site], -1)
    return t @ t.conj().T


def _trace_norm_half(a: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a))))


def _basis(P: SubspaceProjector) -> np.ndarray:
    return P.basis if P.basis is not None else _range_basis(P.projector)


def _check_sites(P: SubspaceProjector, site_dims):
    site_dims = [int(d) for d in site_dims]
    if int(np.prod(site_dims)) != P.projector.shape[0]:
        raise ShapeError(f"site dims {site_dims} do not match the projector dimension")
    return site_dims


def _omega_marginals(P: SubspaceProjector, site_dims):
    omega = P.projector / P.dim_subspace
    return [partial_trace(omega, site_dims, [s]).matrix for s in range(len(site_dims))]


def sample_typicality(P: SubspaceProjector, site_dims: Sequence[int], trials: int = 500,
                      seed: int = 0) -> TypicalityReport:
    """Haar states in range(P) versus Omega = P / tr P, one site at a time.

    Compares the mean trace distance with dim(site) / sqrt(dim M), allowing
    three standard errors of sampling slack.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    site_dims = _check_sites(P, site_dims)
    rng = _rng(seed)
    basis = _basis(P)
    ref = _omega_marginals(P, site_dims)
    dev = np.zeros((trials, len(site_dims)))
    for t in range(trials):
        c = rng.standard_normal(basis.shape[1]) + 1j * rng.standard_normal(basis.shape[1])
        psi = basis @ (c / np.linalg.norm(c))
        for s in range(len(site_dims)):
            dev[t, s] = _trace_norm_half(_pure_marginal(psi, site_dims, s) - ref[s])
    per_trial = dev.mean(axis=1)
    mean = float(per_trial.mean())
    se = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    bound = max(site_dims) / np.sqrt(P.dim_subspace)
    return TypicalityReport(
        trials, mean, float(dev.max()), float(bound), dev.mean(axis=0).tolist(), se,
        P.dim_subspace, bool(mean <= bound + 3 * se),
    )


@dataclass
class TimeAverageReport:
    times: list
    running_average: list
    final_average: float
    standard_error: float
    bound: float
    max_leakage: float
    max_norm_error: float
    within_bound: bool


def time_average_deviation(P: SubspaceProjector, H, psi0, times: Sequence[float] | None = None,
                           site_dims: Sequence[int] | None = None, charges: Sequence = ()) -> TimeAverageReport:
    """Running time average of the site deviation along exp(-iHt) psi0.

    ``charges`` are the composite charges H must conserve; ``site_dims``
    defaults to qubits.
    """
    h = _as_array(H)
    n = P.projector.shape[0]
    if h.shape != (n, n):
        raise ShapeError("Hamiltonian and projector act on different spaces")
    for j, q in enumerate(charges):
        q = _as_array(q)
        if np.linalg.norm(h @ q - q @ h, 2) > COMMUTE_TOL:
            raise NonCommutingHamiltonian(f"Hamiltonian does not conserve charge {j}")
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    psi0 = psi0 / np.linalg.norm(psi0)
    if np.linalg.norm(psi0 - P.projector @ psi0) > SUBSPACE_TOL:
        raise NotInSubspace("initial state has weight outside the subspace")
    if site_dims is None:
        site_dims = [2] * int(round(np.log2(n)))
    site_dims = _check_sites(P, site_dims)
    times = np.linspace(0.0, 100.0, 200) if times is None else np.asarray(times, dtype=float)
    ref = _omega_marginals(P, site_dims)
    w, v = np.linalg.eigh(h)
    amp = v.conj().T @ psi0
    devs, leak, norm_err = [], 0.0, 0.0
    for t in times:
        psi = v @ (np.exp(-1j * w * t) * amp)
        leak = max(leak, float(np.linalg.norm(psi - P.projector @ psi)))
        norm_err = max(norm_err, abs(float(np.linalg.norm(psi)) - 1.0))
        devs.append(np.mean([_trace_norm_half(_pure_marginal(psi, site_dims, s) - ref[s])
                             for s in range(len(site_dims))]))
    devs = np.array(devs)
    running = np.cumsum(devs) / np.arange(1, len(devs) + 1)
    se = float(devs.std(ddof=1) / np.sqrt(len(devs))) if len(devs) > 1 else 0.0
    bound = max(site_dims) / np.sqrt(P.dim_subspace)
    return TimeAverageReport(
        times.tolist(), running.tolist(), float(running[-1]), se, float(bound), leak, norm_err,
        bool(running[-1] <= bound + 3 * se),
    )
