"""Model documents for the command line: parsing, validation and named scenarios."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidOperator, ParseError
from .operators import DensityMatrix, HermitianOperator, matrix_from_json, operator_from_json


def flywheel_charges(inertia: float = 1.0, lmax: int = 2) -> list[HermitianOperator]:
    """Energy L^2 / 2I and angular momentum L on the truncated ladder -lmax..lmax."""
    ell = np.arange(-lmax, lmax + 1, dtype=float)
    return [
        HermitianOperator(np.diag(ell**2 / (2.0 * inertia)), "energy", check=False),
        HermitianOperator(np.diag(ell), "angular_momentum", check=False),
    ]


SCENARIOS = {
    "spin-xy": {
        "charges": ["pauli_x", "pauli_y"],
        "betas": [0.7071067811865476, 0.7071067811865476],
        "system": "maximally_mixed",
        "bath_copies": 1,
    },
    "flywheel": {
        "charges": "flywheel",
        "betas": [1.0, 0.5],
        "system": "maximally_mixed",
        "bath_copies": 1,
        "inertia": 1.0,
    },
    "two-charge-qubit": {
        "charges": ["pauli_z", {"diag": [1.0, 0.0]}],
        "betas": [0.7, 0.4],
        "system": "maximally_mixed",
        "bath_copies": 1,
    },
    "spin-erasure": {
        # a degenerate Hamiltonian plus a spin charge; the negative spin beta
        # makes the bath favour |0>, so a swap erases towards level 0
        "charges": [{"diag": [0.0, 0.0]}, "pauli_z"],
        "betas": [1.0, -7.6],
        "system": "maximally_mixed",
        "bath_copies": 1,
        "target": 0,
    },
    "pauli-ams": {
        "charges": ["pauli_x", "pauli_z"],
        "betas": [0.0, 0.0],
        "system": "maximally_mixed",
        "bath_copies": 0,
        "values": [0.3, 0.3],
        "delta": 0.25,
    },
}


@dataclass
class ModelSpec:
    charges: list
    betas: list
    system: DensityMatrix
    bath_copies: int = 1
    seed: int = 0
    scenario: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.charges)

    @property
    def dim(self) -> int:
        return self.charges[0].dim


def _parse_system(obj, dim: int, path: str) -> DensityMatrix:
    if obj is None or obj == "maximally_mixed":
        return DensityMatrix.maximally_mixed(dim)
    if isinstance(obj, dict) and "populations" in obj:
        try:
            p = np.asarray(obj["populations"], dtype=float)
        except (TypeError, ValueError):
            raise ParseError(f"{path}/populations", "expected a list of numbers") from None
        if p.shape != (dim,):
            raise ParseError(f"{path}/populations", f"expected {dim} entries")
        obj = {"diag": p.tolist()}
    if isinstance(obj, dict) and "vector" in obj:
        try:
            v = np.asarray(obj["vector"], dtype=complex)
        except (TypeError, ValueError):
            raise ParseError(f"{path}/vector", "expected a list of numbers") from None
        if v.shape != (dim,) or np.linalg.norm(v) == 0:
            raise ParseError(f"{path}/vector", f"expected {dim} entries, not all zero")
        return DensityMatrix.from_vector(v / np.linalg.norm(v))
    m = matrix_from_json(obj, path)
    if m.shape != (dim, dim):
        raise ParseError(path, f"system dim {m.shape[0]} does not match charge dim {dim}")
    try:
        return DensityMatrix(m)
    except InvalidOperator as exc:
        raise ParseError(path, str(exc)) from None


def _int_field(doc, key, default, minimum):
    val = doc.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or val < minimum:
        raise ParseError(f"/{key}", f"expected an integer >= {minimum}")
    return val


def model_from_dict(doc) -> ModelSpec:
    if not isinstance(doc, dict):
        raise ParseError("/", "model must be a JSON object")
    scenario = doc.get("scenario")
    if scenario is not None:
        if scenario not in SCENARIOS:
            raise ParseError("/scenario", f"unknown scenario {scenario!r}")
        doc = {**SCENARIOS[scenario], **doc}
    if "charges" not in doc:
        raise ParseError("/charges", "missing field")
    raw = doc["charges"]
    if raw == "flywheel":
        inertia = doc.get("inertia", 1.0)
        if not isinstance(inertia, (int, float)) or isinstance(inertia, bool) or inertia <= 0:
            raise ParseError("/inertia", "expected a positive number")
        charges = flywheel_charges(float(inertia))
    else:
        if not isinstance(raw, list) or not raw:
            raise ParseError("/charges", "expected a nonempty list")
        charges = [operator_from_json(q, HermitianOperator, f"/charges/{i}") for i, q in enumerate(raw)]
        for i, q in enumerate(charges):
            if q.dim != charges[0].dim:
                raise ParseError(f"/charges/{i}", "dimension differs from the first charge")
    betas = doc.get("betas", [0.0] * len(charges))
    if not isinstance(betas, list) or not all(
        isinstance(b, (int, float)) and not isinstance(b, bool) for b in betas
    ):
        raise ParseError("/betas", "expected a list of numbers")
    if len(betas) != len(charges):
        raise ParseError("/betas", "length mismatch")
    system = _parse_system(doc.get("system"), charges[0].dim, "/system")
    extras = {k: v for k, v in doc.items()
              if k not in {"charges", "betas", "system", "bath_copies", "seed", "scenario"}}
    return ModelSpec(
        charges, [float(b) for b in betas], system,
        _int_field(doc, "bath_copies", 1, 0), _int_field(doc, "seed", 0, 0), scenario, extras,
    )


def parse_model(text) -> ModelSpec:
    """Validate a model document; errors carry a JSON-pointer path."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("/", f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("/", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(doc)
