"""Dense finite-dimensional operator algebra.

Observables, states and unitaries are thin immutable wrappers around complex
numpy arrays. Invariants are checked once at construction; every function here
may assume them afterwards. All logarithms are natural, entropies are in nats,
and matrix functions go through the Hermitian eigendecomposition.
"""

from __future__ import annotations

import re
from typing import Sequence

import numpy as np

from .errors import InvalidOperator, KindMismatch, ParseError, ShapeError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
UNITARITY_TOL = 1e-10
EIG_CLAMP = 1e-12


def _as_array(entries) -> np.ndarray:
    if isinstance(entries, _Operator):
        return entries.matrix
    arr = np.array(entries, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    return arr


class _Operator:
    """Common base: a frozen square complex matrix."""

    __slots__ = ("matrix", "unit")
    kind = "operator"

    def __init__(self, entries, unit: str | None = None, *, check: bool = True):
        arr = _as_array(entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ShapeError(f"{self.kind} needs a non-empty square matrix, got shape {arr.shape}")
        if check:
            arr = self._validate(arr)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)
        object.__setattr__(self, "unit", unit)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _validate(self, arr: np.ndarray) -> np.ndarray:
        return arr.copy()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def _check_hermitian(arr: np.ndarray, what: str) -> np.ndarray:
    dev = np.max(np.abs(arr - arr.conj().T))
    if dev > HERMITIAN_TOL:
        raise InvalidOperator(f"{what} is not Hermitian (max deviation {dev:.3g})")
    return (arr + arr.conj().T) / 2


class HermitianOperator(_Operator):
    """A self-adjoint observable: a charge, a Hamiltonian or a battery coordinate."""

    __slots__ = ()
    kind = "hermitian"

    def _validate(self, arr):
        return _check_hermitian(arr, "operator")

    def __add__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        _same_dim(self, other)
        return HermitianOperator(self.matrix + other.matrix, self.unit, check=False)

    def __mul__(self, scalar):
        if not np.isscalar(scalar) or np.iscomplexobj(scalar):
            return NotImplemented
        return HermitianOperator(float(scalar) * self.matrix, self.unit, check=False)

    __rmul__ = __mul__

    def eigh(self):
        return np.linalg.eigh(self.matrix)


class DensityMatrix(_Operator):
    """A unit-trace positive semidefinite operator."""

    __slots__ = ()
    kind = "density"

    def _validate(self, arr):
        arr = _check_hermitian(arr, "density matrix")
        tr = np.trace(arr).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidOperator(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(arr)[0]
        if lo < -POSITIVITY_TOL:
            raise InvalidOperator(f"density matrix has negative eigenvalue {lo:.3g}")
        return arr

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim, check=False)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


class UnitaryOperator(_Operator):
    __slots__ = ()
    kind = "unitary"

    def _validate(self, arr):
        dev = np.linalg.norm(arr @ arr.conj().T - np.eye(arr.shape[0]))
        if dev > UNITARITY_TOL:
            raise InvalidOperator(f"matrix is not unitary (deviation {dev:.3g})")
        return arr.copy()

    @property
    def dagger(self) -> "UnitaryOperator":
        return UnitaryOperator(self.matrix.conj().T, check=False)

    def conjugate(self, rho: "DensityMatrix") -> "DensityMatrix":
        """Return U rho U^dagger."""
        _same_dim(self, rho)
        out = self.matrix @ rho.matrix @ self.matrix.conj().T
        return DensityMatrix((out + out.conj().T) / 2, check=False)


def _same_dim(a, b):
    da = a.dim if isinstance(a, _Operator) else np.shape(a)[0]
    db = b.dim if isinstance(b, _Operator) else np.shape(b)[0]
    if da != db:
        raise ShapeError(f"dimension mismatch: {da} vs {db}")


def _density(x) -> DensityMatrix:
    return x if isinstance(x, DensityMatrix) else DensityMatrix(x)


def _hermitian(x) -> HermitianOperator:
    return x if isinstance(x, HermitianOperator) else HermitianOperator(x)


# -- constants ---------------------------------------------------------------

PAULI_X = HermitianOperator([[0, 1], [1, 0]])
PAULI_Y = HermitianOperator([[0, -1j], [1j, 0]])
PAULI_Z = HermitianOperator([[1, 0], [0, -1]])


def identity(n: int) -> HermitianOperator:
    return HermitianOperator(np.eye(n), check=False)


def diag(values, unit=None) -> HermitianOperator:
    return HermitianOperator(np.diag(np.asarray(values, dtype=float)), unit, check=False)


# -- algebra -----------------------------------------------------------------


def tensor_product(a, b):
    """Kronecker product of two operators of the same kind."""
    if type(a) is not type(b) or not isinstance(a, _Operator):
        raise KindMismatch(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    return type(a)(np.kron(a.matrix, b.matrix), a.unit, check=False)


def tensor_all(ops: Sequence):
    out = ops[0]
    for op in ops[1:]:
        out = tensor_product(out, op)
    return out


def partial_trace(rho, dims: Sequence[int], keep) -> DensityMatrix:
    """Reduced state on the factors listed in ``keep`` (order preserved)."""
    rho = _density(rho)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != rho.dim:
        raise ShapeError(f"factor dims {dims} do not multiply to {rho.dim}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if not keep or keep[0] < 0 or keep[-1] >= len(dims):
        raise ShapeError(f"keep={keep} is not a nonempty subset of factors 0..{len(dims) - 1}")
    n = len(dims)
    if len(keep) == n:
        return rho
    t = rho.matrix.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row index i, column index n+i; traced factors share a label
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for i in traced:
        letters[n + i] = letters[i]
    out_letters = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    spec = "".join(letters) + "->" + "".join(out_letters)
    dk = int(np.prod([dims[i] for i in keep]))
    red = np.einsum(spec, t).reshape(dk, dk)
    return DensityMatrix((red + red.conj().T) / 2, check=False)


class Commutator:
    """The matrix ``ab - ba`` together with its operator norm."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        self.matrix = matrix

    @property
    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def commutator(a, b) -> Commutator:
    a = _as_array(a)
    b = _as_array(b)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return Commutator(a @ b - b @ a)


def matrix_function(a, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigendecomposition."""
    w, v = np.linalg.eigh(_as_array(a))
    return (v * fn(w)) @ v.conj().T


def herm_exp(a) -> np.ndarray:
    return matrix_function(_hermitian(a), np.exp)


def von_neumann_entropy(rho) -> float:
    lam = _density(rho).eigvalsh()
    lam = lam[lam > EIG_CLAMP]
    return float(max(0.0, -np.sum(lam * np.log(lam))))


def relative_entropy(rho, sigma) -> float:
    """D(rho||sigma) in nats; +inf when supp(rho) is not inside supp(sigma)."""
    rho = _density(rho)
    sigma = _density(sigma)
    _same_dim(rho, sigma)
    ws, vs = np.linalg.eigh(sigma.matrix)
    support = ws > EIG_CLAMP
    # weight of rho outside the support of sigma
    vk = vs[:, ~support]
    leak = np.real(np.trace(vk.conj().T @ rho.matrix @ vk)) if vk.size else 0.0
    if leak > EIG_CLAMP:
        return float("inf")
    log_sigma = (vs[:, support] * np.log(ws[support])) @ vs[:, support].conj().T
    cross = np.real(np.trace(rho.matrix @ log_sigma))
    d = -von_neumann_entropy(rho) - cross
    if d < 0 and d > -1e-10:
        d = 0.0
    return float(d)


def trace_distance(rho, sigma) -> float:
    rho = _density(rho)
    sigma = _density(sigma)
    _same_dim(rho, sigma)
    w = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(w))))


def expectation(q, rho) -> float:
    q = _as_array(q)
    rho = _density(rho)
    if q.shape != rho.matrix.shape:
        raise ShapeError(f"dimension mismatch: {q.shape} vs {rho.matrix.shape}")
    val = np.sum(q * rho.matrix.T)  # tr(q rho)
    assert abs(val.imag) < 1e-10, f"expectation has imaginary part {val.imag}"
    return float(val.real)


# -- randomness ----------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_random_state(dim: int, seed) -> np.ndarray:
    """Unit vector drawn from the unitarily invariant measure."""
    if dim < 1:
        raise ShapeError("dim must be positive")
    if dim == 1:
        return np.ones(1, dtype=complex)
    rng = _rng(seed)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_random_unitary(dim: int, seed) -> UnitaryOperator:
    rng = _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return UnitaryOperator(q, check=False)


def random_density_matrix(dim: int, seed, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state; ``rank=1`` gives a Haar pure state."""
    rng = _rng(seed)
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix((rho + rho.conj().T) / 2, check=False)


def random_hermitian(dim: int, seed, scale: float = 1.0) -> HermitianOperator:
    rng = _rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator(scale * (g + g.conj().T) / 2, check=False)


# -- JSON ------------------------------------------------------------------------

_IDENTITY_RE = re.compile(r"^identity\((\d+)\)$")
_NAMED = {"pauli_x": PAULI_X, "pauli_y": PAULI_Y, "pauli_z": PAULI_Z}


def named_operator(name: str) -> HermitianOperator:
    name = name.strip()
    if name in _NAMED:
        return _NAMED[name]
    m = _IDENTITY_RE.match(name)
    if m and int(m.group(1)) >= 1:
        return identity(int(m.group(1)))
    raise KeyError(name)


def to_json(op) -> dict:
    m = _as_array(op)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(obj, path: str = "") -> np.ndarray:
    """Decode ``{"dim", "re", "im"}``, ``{"diag": [...]}`` or a named shorthand."""
    if isinstance(obj, str):
        try:
            return named_operator(obj).matrix.copy()
        except KeyError:
            raise ParseError(path or "/", f"unknown operator name {obj!r}") from None
    if not isinstance(obj, dict):
        raise ParseError(path or "/", "operator must be an object or a named shorthand")
    if "diag" in obj:
        try:
            vals = np.asarray(obj["diag"], dtype=float)
        except (TypeError, ValueError):
            raise ParseError(f"{path}/diag", "expected a list of numbers") from None
        if vals.ndim != 1 or vals.size == 0:
            raise ParseError(f"{path}/diag", "expected a nonempty list of numbers")
        return np.diag(vals).astype(complex)
    for key in ("dim", "re"):
        if key not in obj:
            raise ParseError(f"{path}/{key}", "missing field")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError(f"{path}/dim", "expected a positive integer")
    try:
        re_part = np.asarray(obj["re"], dtype=float)
        im_part = np.asarray(obj.get("im", np.zeros((dim, dim))), dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"{path}/re", "entries must be numbers") from None
    for key, part in (("re", re_part), ("im", im_part)):
        if part.shape != (dim, dim):
            raise ParseError(f"{path}/{key}", f"expected a {dim}x{dim} array, got shape {part.shape}")
    return re_part + 1j * im_part


def operator_from_json(obj, kind=HermitianOperator, path: str = ""):
    m = matrix_from_json(obj, path)
    try:
        return kind(m)
    except InvalidOperator as exc:
        raise ParseError(path or "/", str(exc)) from None
