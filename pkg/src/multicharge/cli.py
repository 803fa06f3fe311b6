"""Command-line front end.

Exit status is 0 on success, 2 on invalid input and 1 when a computation
fails; the error class name is printed on stderr either way.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import errors
from .gge import ChargeSystem, build_gge, forward_map, solve_beta
from .landauer import erase, landauer_bound_check, swap_unitary
from .microcanonical import (
    SubspaceProjector,
    build_ams,
    composite_average,
    joint_diagonalize,
    reduced_state_scan,
    verify_ams,
)
from .models import SCENARIOS, ModelSpec, model_from_dict, parse_model
from .operators import (
    DensityMatrix,
    UnitaryOperator,
    haar_random_unitary,
    matrix_from_json,
    named_operator,
    operator_from_json,
    random_density_matrix,
    to_json,
)
from .protocols import BathModel, extraction_protocol, second_law_audit, single_unitary_trace, trade_resources
from .typicality import sample_typicality, time_average_deviation

VALIDATION_ERRORS = (errors.ParseError, errors.ShapeError, errors.KindMismatch, errors.InvalidOperator)


class UsageError(errors.MultichargeError, ValueError):
    """Bad or missing command-line options."""


# -- output ----------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def _render(payload, rows, fmt: str) -> str:
    if fmt == "csv":
        if rows is None:
            rows = [payload] if isinstance(payload, dict) else payload
            rows = [{k: json.dumps(_clean(v)) if isinstance(v, (list, dict)) else _clean(v)
                     for k, v in r.items()} for r in rows]
        buf = io.StringIO()
        fields = list(rows[0].keys()) if rows else []
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        return buf.getvalue()
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, payload, rows=None, default_fmt="json"):
    fmt = args.format
    if fmt is None:
        fmt = "csv" if args.out and args.out.endswith(".csv") else default_fmt
    text = _render(payload, rows, fmt)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


# -- option helpers --------------------------------------------------------------------


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _n_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--n: expected 'a..b' or a comma list, got {text!r}") from None


def _read_json(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise errors.ParseError("/", f"{path}: {exc}") from None


def _load_model(args) -> ModelSpec:
    if getattr(args, "model", None):
        with open(args.model, "rb") as fh:
            return parse_model(fh.read())
    if getattr(args, "scenario", None):
        return model_from_dict({"scenario": args.scenario})
    raise UsageError("either --model or --scenario is required")


def _charges_from_args(args):
    if getattr(args, "charges", None):
        try:
            return [named_operator(n) for n in args.charges.split(",")]
        except KeyError as exc:
            raise errors.ParseError("/charges", f"unknown operator name {exc.args[0]!r}") from None
    if getattr(args, "base", None):
        doc = _read_json(args.base)
        items = doc.get("charges", doc) if isinstance(doc, dict) else doc
        if not isinstance(items, list) or not items:
            raise errors.ParseError("/charges", "expected a nonempty list")
        return [operator_from_json(q, path=f"/charges/{i}") for i, q in enumerate(items)]
    return _load_model(args).charges


def _bath(model: ModelSpec) -> BathModel:
    return BathModel(ChargeSystem(model.charges, model.betas), max(1, model.bath_copies))


# -- commands ------------------------------------------------------------------------------


def cmd_gge_build(args):
    if args.charges:
        charges = _charges_from_args(args)
        betas = _floats(args.betas or "", "--betas") or [0.0] * len(charges)
    else:
        model = _load_model(args)
        charges, betas = model.charges, model.betas
    g = build_gge(ChargeSystem(charges, betas))
    _emit(args, {
        "betas": list(g.charge_system.betas),
        "log_partition": g.log_partition,
        "eigenvalues": g.state.eigvalsh(),
        "state": to_json(g.state),
    })


def cmd_gge_solve(args):
    charges = _charges_from_args(args)
    targets = _floats(args.targets, "--targets")
    betas, diag = solve_beta(charges, targets, tol=args.tol, max_iter=args.max_iter)
    g = build_gge(ChargeSystem(charges, betas))
    rebuilt = forward_map(charges, betas)
    _emit(args, {
        "betas": betas,
        "log_partition": g.log_partition,
        "iterations": diag.iterations,
        "grad_norm": diag.grad_norm,
        "dual_value": diag.dual_value,
        "targets": targets,
        "rebuild_error": float(np.max(np.abs(rebuilt - np.asarray(targets)))),
    })


def cmd_protocol_extract(args):
    model = _load_model(args)
    trace = extraction_protocol(model.system, _bath(model), args.delta_p, args.rounds)
    lhs, rhs, slack = second_law_audit(trace, model.betas)
    summary = {
        "rounds": len(trace.steps),
        "work": trace.cumulative.work,
        "free_entropy_change_system": trace.cumulative.free_entropy_change_system,
        "free_entropy_change_bath": trace.cumulative.free_entropy_change_bath,
        "weighted_work": lhs,
        "deficit": slack,
        "metadata": trace.metadata,
        "steps": trace.rows(),
    }
    _emit(args, summary, rows=trace.rows())


def cmd_protocol_trade(args):
    model = _load_model(args)
    try:
        pair = tuple(int(x) for x in args.pair.split(","))
    except ValueError:
        raise UsageError("--pair: expected two integers like 0,1") from None
    if len(pair) != 2:
        raise UsageError("--pair: expected two integers like 0,1")
    ledger = trade_resources(_bath(model), pair)
    _emit(args, {
        "pair": list(pair),
        "delta_bath": ledger.delta_bath,
        "work": ledger.work,
        "free_entropy_change_bath": ledger.free_entropy_change_bath,
        "delta_S_bath": ledger.delta_S_bath,
        "weighted_change": float(np.dot(model.betas, ledger.delta_bath)),
    })


def cmd_protocol_audit(args):
    model = _load_model(args)
    bath = _bath(model)
    rng = np.random.default_rng(args.seed)
    d = model.dim
    rows = []
    for trial in range(args.trials):
        u = haar_random_unitary(d * bath.dim, rng)
        rho = random_density_matrix(d, rng)
        tr = single_unitary_trace(rho, bath, u)
        lhs, rhs, slack = second_law_audit(tr, model.betas)
        thermal = single_unitary_trace(bath.particle_state(), bath, u)
        kp, _, _ = second_law_audit(thermal, model.betas)
        rows.append({"trial": trial, "weighted_work": lhs, "minus_dF_system": rhs, "slack": slack,
                     "thermal_weighted_work": kp})
    payload = {
        "trials": args.trials,
        "min_slack": min(r["slack"] for r in rows),
        "max_thermal_weighted_work": max(r["thermal_weighted_work"] for r in rows),
        "rows": rows,
    }
    _emit(args, payload, rows=rows)


def cmd_landauer_erase(args):
    model = _load_model(args)
    bath = _bath(model)
    if args.unitary:
        u = UnitaryOperator(matrix_from_json(_read_json(args.unitary), "/unitary"))
    else:
        if bath.dim != model.dim:
            raise UsageError("the default swap needs a bath as large as the system; pass --unitary")
        u = swap_unitary(model.dim)
    target = args.target if args.target is not None else int(model.extras.get("target", 0))
    report = erase(model.system, bath, u, target)
    lhs, rhs, ok = landauer_bound_check(report)
    _emit(args, {**report.to_dict(), "bound_lhs": lhs, "bound_rhs": rhs, "bound_satisfied": ok})


def _values(args, model_extras=None) -> list[float]:
    if args.values:
        if os.path.exists(args.values):
            doc = _read_json(args.values)
            vals = doc.get("values", doc) if isinstance(doc, dict) else doc
            return [float(v) for v in vals]
        return _floats(args.values, "--values")
    if model_extras and "values" in model_extras:
        return [float(v) for v in model_extras["values"]]
    raise UsageError("--values is required")


def _micro_inputs(args):
    extras = {}
    if not (args.charges or args.base):
        model = _load_model(args)
        extras = model.extras
        charges = model.charges
    else:
        charges = _charges_from_args(args)
    v = _values(args, extras)
    delta = args.delta if args.delta is not None else float(extras.get("delta", 0.25))
    return charges, v, delta


def cmd_micro_ams(args):
    charges, v, delta = _micro_inputs(args)
    comp = composite_average(charges, args.copies)
    approx = joint_diagonalize(comp)
    P = build_ams(approx, v, delta, args.eta)
    report = verify_ams(P, comp, args.trials, args.seed)
    omega = P.state()
    _emit(args, {
        "copies": args.copies,
        "site_dim": comp.site_dim,
        "values": v,
        "delta": delta,
        "eta": args.eta,
        "dim_subspace": P.dim_subspace,
        "deviations": approx.deviations,
        "residual": approx.residual,
        "omega_expectations": [float(np.real(np.sum(q.matrix * omega.matrix.T))) for q in comp.composite],
        "verification": report.__dict__,
        "charges": [to_json(q) for q in charges],
        "basis": {"re": P.basis.real, "im": P.basis.imag},
    })


def cmd_micro_scan(args):
    charges, v, delta = _micro_inputs(args)
    rows = reduced_state_scan(charges, v, _n_range(args.n), delta)
    table = [{"copies": r.copies, "avg_relative_entropy": r.avg_relative_entropy,
              "dim_subspace": r.dim_subspace} for r in rows]
    _emit(args, {"values": v, "delta": delta, "beta_fit": "maxent fit to site-averaged expectations of Omega",
                 "rows": [r.__dict__ for r in rows]}, rows=table, default_fmt="json")


def _load_ams(path: str):
    doc = _read_json(path)
    try:
        basis = np.asarray(doc["basis"]["re"], dtype=float) + 1j * np.asarray(doc["basis"]["im"], dtype=float)
        copies, site = int(doc["copies"]), int(doc["site_dim"])
        values = tuple(float(x) for x in doc["values"])
        delta = float(doc["delta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.ParseError("/basis", f"malformed subspace file: {exc}") from None
    if basis.ndim != 2 or basis.shape[0] != site**copies:
        raise errors.ParseError("/basis", "basis shape does not match copies and site_dim")
    P = basis @ basis.conj().T
    proj = SubspaceProjector((P + P.conj().T) / 2, basis.shape[1], values, delta,
                             float(doc.get("eta", 0.2)), basis)
    charges = [operator_from_json(q, path=f"/charges/{i}") for i, q in enumerate(doc.get("charges", []))]
    return proj, [site] * copies, charges


def cmd_typicality_sample(args):
    P, sites, _ = _load_ams(args.ams)
    rep = sample_typicality(P, sites, args.trials, args.seed)
    _emit(args, rep.__dict__)


def _sector_hamiltonian(sites):
    """sum_l omega_l Z_l with distinct frequencies: conserves any z-type composite."""
    n = len(sites)
    d = sites[0]
    z = np.diag(np.linspace(1.0, -1.0, d))
    freqs = 1.0 + np.arange(n) / (n + np.pi)
    h = np.zeros((d**n, d**n), dtype=complex)
    for l, w in enumerate(freqs):
        h += w * np.kron(np.kron(np.eye(d**l), z), np.eye(d ** (n - 1 - l)))
    return h


def cmd_typicality_evolve(args):
    P, sites, charges = _load_ams(args.ams)
    if args.hamiltonian:
        h = matrix_from_json(_read_json(args.hamiltonian), "/hamiltonian")
    else:
        h = _sector_hamiltonian(sites)
    comp = composite_average(charges, len(sites)).composite if charges else ()
    rng = np.random.default_rng(args.seed)
    c = rng.standard_normal(P.dim_subspace) + 1j * rng.standard_normal(P.dim_subspace)
    psi0 = P.basis @ (c / np.linalg.norm(c))
    times = np.linspace(0.0, args.tmax, args.steps)
    rep = time_average_deviation(P, h, psi0, times, sites, comp)
    payload = dict(rep.__dict__)
    rows = [{"time": t, "running_average": a} for t, a in zip(rep.times, rep.running_average)]
    _emit(args, payload, rows=rows)


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for randomized steps")
    common.add_argument("--out", help="output path (stdout when omitted); written atomically")
    common.add_argument("--format", choices=["json", "csv"], help="output format (default from --out suffix)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="model JSON file")
    model.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in model")

    p = argparse.ArgumentParser(prog="multicharge", description=__doc__.splitlines()[0])
    groups = p.add_subparsers(dest="group", required=True)

    g = groups.add_parser("gge", help="generalized Gibbs states").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("build", parents=[common, model])
    s.add_argument("--charges", help="comma-separated named operators")
    s.add_argument("--betas")
    s.set_defaults(func=cmd_gge_build)
    s = g.add_parser("solve", parents=[common, model])
    s.add_argument("--charges", help="comma-separated named operators")
    s.add_argument("--base", help="JSON file with a list of charges")
    s.add_argument("--targets", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.set_defaults(func=cmd_gge_solve)

    g = groups.add_parser("protocol", help="extraction, trading and audits").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("extract", parents=[common, model])
    s.add_argument("--delta-p", type=float, default=0.01)
    s.add_argument("--rounds", type=int, default=5000)
    s.set_defaults(func=cmd_protocol_extract)
    s = g.add_parser("trade", parents=[common, model])
    s.add_argument("--pair", default="0,1")
    s.set_defaults(func=cmd_protocol_trade)
    s = g.add_parser("audit", parents=[common, model])
    s.add_argument("--trials", type=int, default=100)
    s.set_defaults(func=cmd_protocol_audit)

    g = groups.add_parser("landauer", help="erasure accounting").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("erase", parents=[common, model])
    s.add_argument("--unitary", help="JSON unitary on system (x) bath (default: swap)")
    s.add_argument("--target", type=int)
    s.set_defaults(func=cmd_landauer_erase)

    g = groups.add_parser("micro", help="approximate microcanonical subspaces").add_subparsers(dest="cmd", required=True)
    for name, func in (("ams", cmd_micro_ams), ("scan", cmd_micro_scan)):
        s = g.add_parser(name, parents=[common, model])
        s.add_argument("--base", help="JSON file with a list of single-copy charges")
        s.add_argument("--charges", help="comma-separated named operators")
        s.add_argument("--values", help="window centres, comma-separated or a JSON file")
        s.add_argument("--delta", type=float)
        s.set_defaults(func=func)
    g.choices["ams"].add_argument("--copies", type=int, default=4)
    g.choices["ams"].add_argument("--eta", type=float, default=0.2)
    g.choices["ams"].add_argument("--trials", type=int, default=200)
    g.choices["scan"].add_argument("--n", default="2..6")

    g = groups.add_parser("typicality", help="canonical typicality").add_subparsers(dest="cmd", required=True)
    s = g.add_parser("sample", parents=[common])
    s.add_argument("--ams", required=True, help="subspace file written by 'micro ams'")
    s.add_argument("--trials", type=int, default=500)
    s.set_defaults(func=cmd_typicality_sample)
    s = g.add_parser("evolve", parents=[common])
    s.add_argument("--ams", required=True)
    s.add_argument("--hamiltonian", help="JSON Hamiltonian (default: distinct-frequency z field)")
    s.add_argument("--tmax", type=float, default=100.0)
    s.add_argument("--steps", type=int, default=200)
    s.set_defaults(func=cmd_typicality_evolve)
    return p


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except VALIDATION_ERRORS + (UsageError,) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except errors.MultichargeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
