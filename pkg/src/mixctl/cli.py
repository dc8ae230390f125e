"""``mixctl`` command line.

Exit codes: 0 success, 1 batch had failing entries, 2 input error,
3 not majorized (``majorize``), 4 rho does not majorize sigma,
5 no synthesis route.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import io
from .config import Tolerances
from .ensembles import (
    random_conversion_pair,
    random_dephasing,
    random_planted,
)
from .errors import MajorizationViolated, MixctlError, NoSynthesisRoute, ZeroLindbladian
from .lindblad import DensityMatrix, Lindbladian, classify_dephasing, depolarizing, is_depolarizing, is_unital
from .majorization import (
    ProbVector,
    birkhoff_witness,
    decompose_into_ttransforms,
    first_failing_prefix,
    majorizes,
    prefix_gaps,
)
from .optimality import is_optimal
from .protocols import ConversionPlan, synthesize_any
from .simulator import audit_monotonicity, run_plan_ideal, run_plan_physical

EXIT_OK = 0
EXIT_BATCH_FAILED = 1
EXIT_INPUT = 2
EXIT_NOT_MAJORIZED = 3
EXIT_PRECONDITION = 4
EXIT_NO_ROUTE = 5

AUDIT_ALPHAS = (0.5, 1.0, 2.0, math.inf)


class InputError(Exception):
    pass


def _load(path: str):
    try:
        return io.load_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _prob(data, tol: Tolerances) -> ProbVector:
    if not isinstance(data, list):
        raise InputError("probability vector must be a JSON array")
    checked = ProbVector(np.asarray(data, dtype=float), tol_neg=tol.tol_neg, tol_sum=tol.tol_sum)
    # accepted within tolerance; downstream works with the exactly normalized vector
    return ProbVector(checked.entries / checked.entries.sum())


def _state(data, tol: Tolerances) -> DensityMatrix:
    if isinstance(data, list) and data and not isinstance(data[0], (list, dict)):
        return DensityMatrix.diagonal(_prob(data, tol).entries)
    mat = io.matrix_from_json(data)
    if np.abs(mat - mat.conj().T).max() > tol.tol_herm:
        raise InputError("density matrix is not Hermitian")
    mat = 0.5 * (mat + mat.conj().T)
    if abs(np.trace(mat).real - 1.0) > tol.tol_sum:
        raise InputError("density matrix trace differs from 1")
    return DensityMatrix(mat / np.trace(mat).real)


def _write(obj, output: str | None) -> None:
    text = io.dumps(obj)
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w") as fh:
            fh.write(text)


def _tolerances(args) -> Tolerances:
    return Tolerances.from_env(tol_sum=args.tol_sum, tol_herm=args.tol_herm, seed=args.seed)


def cmd_majorize(args) -> int:
    tol = _tolerances(args)
    p, q = _prob(_load(args.p), tol), _prob(_load(args.q), tol)
    if p.d != q.d:
        raise InputError(f"vectors have lengths {p.d} and {q.d}")
    ok = majorizes(p, q, tol.tol_sum)
    report = {"majorizes": ok, "prefix_gaps": prefix_gaps(p, q).tolist()}
    if ok:
        chain = decompose_into_ttransforms(p, q, tol.tol_sum)
        report["ttransform_chain"] = [t.to_dict() for t in chain]
        report["witness_matrix"] = birkhoff_witness(p, q, tol.tol_sum).entries.tolist()
    else:
        report["first_failing_prefix"] = first_failing_prefix(p, q, tol.tol_sum)
    _write(report, args.output)
    return EXIT_OK if ok else EXIT_NOT_MAJORIZED


def classify_report(lind: Lindbladian, trials: int = 16, seed: int = 0) -> dict:
    try:
        structure = classify_dephasing(lind)
    except ZeroLindbladian:
        structure = None
    dephasing = None
    if structure is not None:
        dephasing = {"ranks": structure.ranks, "basis": io.matrix_to_json(structure.basis)}
    return {
        "unital": is_unital(lind),
        "dephasing": dephasing,
        "optimal": is_optimal(lind, trials=trials, seed=seed).to_dict(),
        "depolarizing": is_depolarizing(lind),
    }


def cmd_classify(args) -> int:
    tol = _tolerances(args)
    lind = io.lindbladian_from_json(_load(args.lindbladian))
    _write(classify_report(lind, args.trials, tol.seed), args.output)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    tol = _tolerances(args)
    lind = io.lindbladian_from_json(_load(args.lindbladian))
    rho, sigma = _state(_load(args.rho), tol), _state(_load(args.sigma), tol)
    if rho.d != lind.d or sigma.d != lind.d:
        raise InputError("state and Lindbladian dimensions differ")
    plan = synthesize_any(
        lind, rho, sigma,
        s_cap_epsilon=args.s_cap, dephase_tol=args.dephase_tol,
        trials=args.trials, seed=tol.seed, maj_tol=tol.tol_sum,
    )
    _write(plan.to_dict(), args.output)
    return EXIT_OK


def simulate(lind, rho, plan, mode: str, steer_dt: float, pulse_tau: float):
    if mode == "ideal":
        return run_plan_ideal(lind, rho, plan)
    return run_plan_physical(lind, rho, plan, pulse_tau=pulse_tau, steer_dt=steer_dt)


def cmd_simulate(args) -> int:
    tol = _tolerances(args)
    lind = io.lindbladian_from_json(_load(args.lindbladian))
    rho = _state(_load(args.rho), tol)
    plan = ConversionPlan.from_dict(_load(args.plan))
    result = simulate(lind, rho, plan, args.mode, args.steer_dt, args.pulse_tau)
    audit = audit_monotonicity(result, AUDIT_ALPHAS).to_dict()
    _write(result.to_dict(traj_stride=args.traj_stride, audit=audit), args.output)
    return EXIT_OK


@dataclass
class BatchEntry:
    name: str
    lind: Lindbladian | None = None
    rho: DensityMatrix | None = None
    sigma: DensityMatrix | None = None
    recipe: dict | None = None
    index: int = 0
    tol: float = 1e-6


def _resolve(value, base: str):
    if isinstance(value, str):
        return _load(value if os.path.isabs(value) else os.path.join(base, value))
    return value


def _recipe_instance(recipe: dict, rng: np.random.Generator):
    kind, d = recipe.get("kind"), int(recipe.get("d", 4))
    if kind == "dephasing":
        lind = random_dephasing(rng, d, ranks=recipe.get("ranks"))
    elif kind == "planted":
        lind = random_planted(rng, d)
    elif kind == "depolarizing":
        lind = depolarizing(d)
    else:
        raise InputError(f"unknown recipe kind {kind!r}")
    rho, sigma = random_conversion_pair(rng, d)
    return lind, rho, sigma


def _parse_manifest(data, base: str, tol: Tolerances) -> list[BatchEntry]:
    if isinstance(data, dict):
        data = data.get("entries")
    if not isinstance(data, list) or not data:
        raise InputError("manifest must be a nonempty list of entries")
    entries: list[BatchEntry] = []
    for k, item in enumerate(data):
        if not isinstance(item, dict):
            raise InputError(f"manifest entry {k} is not an object")
        entry_tol = float(item.get("tol", 1e-6))
        if "recipe" in item:
            recipe = dict(item["recipe"])
            for r in range(int(recipe.get("count", 1))):
                entries.append(
                    BatchEntry(f"{item.get('name', recipe.get('kind'))}[{r}]", recipe=recipe, tol=entry_tol)
                )
        else:
            try:
                lind = io.lindbladian_from_json(_resolve(item["L"], base))
                rho = _state(_resolve(item["rho"], base), tol)
                sigma = _state(_resolve(item["sigma"], base), tol)
            except KeyError as exc:
                raise InputError(f"manifest entry {k} lacks {exc}") from exc
            entries.append(BatchEntry(str(item.get("name", k)), lind, rho, sigma, tol=entry_tol))
    for k, entry in enumerate(entries):
        entry.index = k
    return entries


def _run_entry(entry: BatchEntry, seed: int, args) -> dict:
    row = {"index": entry.index, "name": entry.name, "route": None, "spectral_error": None}
    if entry.recipe is not None:
        entry.lind, entry.rho, entry.sigma = _recipe_instance(entry.recipe, np.random.default_rng([seed, entry.index]))
    try:
        plan = synthesize_any(entry.lind, entry.rho, entry.sigma, s_cap_epsilon=args.s_cap, seed=seed)
    except MajorizationViolated:
        return {**row, "status": "fail-majorization"}
    except NoSynthesisRoute:
        return {**row, "status": "fail-no-route"}
    except MixctlError as exc:
        return {**row, "status": "fail-error", "error": str(exc)}
    result = simulate(entry.lind, entry.rho, plan, args.mode, args.steer_dt, args.pulse_tau)
    ok = result.spectral_error <= entry.tol
    return {
        **row,
        "route": plan.route,
        "spectral_error": result.spectral_error,
        "status": "pass" if ok else "fail-tolerance",
    }


def cmd_verify_batch(args) -> int:
    tol = _tolerances(args)
    entries = _parse_manifest(_load(args.manifest), os.path.dirname(os.path.abspath(args.manifest)), tol)
    if args.jobs < 1:
        raise InputError("--jobs must be >= 1")
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(lambda e: _run_entry(e, tol.seed, args), entries))
    passed = sum(r["status"] == "pass" for r in rows)
    _write({"entries": rows, "passed": passed, "failed": len(rows) - passed, "seed": tol.seed}, args.output)
    return EXIT_OK if passed == len(rows) else EXIT_BATCH_FAILED


def _positive(kind=float):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    common.add_argument("--tol-sum", type=float, default=None)
    common.add_argument("--tol-herm", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)

    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--s-cap", type=_positive(), default=1e-8, help="distance kept from s = 1/2")
    synth.add_argument("--dephase-tol", type=_positive(), default=1e-8)
    synth.add_argument("--trials", type=_positive(int), default=16)

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--mode", choices=["ideal", "physical"], default="ideal")
    sim.add_argument("--steer-dt", type=_positive(), default=1e-3)
    sim.add_argument("--pulse-tau", type=_positive(), default=1e-4)

    parser = argparse.ArgumentParser(prog="mixctl", description="Majorization-based state conversion under Lindblad noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("majorize", parents=[common], help="test p majorizes q")
    p.add_argument("p")
    p.add_argument("q")
    p.set_defaults(func=cmd_majorize)

    p = sub.add_parser("classify", parents=[common], help="classify a Lindbladian")
    p.add_argument("lindbladian")
    p.add_argument("--trials", type=_positive(int), default=16)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("synthesize", parents=[common, synth], help="build a conversion plan")
    p.add_argument("lindbladian")
    p.add_argument("rho")
    p.add_argument("sigma")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", parents=[common, sim], help="run a plan")
    p.add_argument("lindbladian")
    p.add_argument("rho")
    p.add_argument("plan")
    p.add_argument("--traj-stride", type=_positive(int), default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-batch", parents=[common, synth, sim], help="synthesize and simulate a manifest")
    p.add_argument("manifest")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_verify_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MajorizationViolated as exc:
        print(f"mixctl: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NoSynthesisRoute as exc:
        print(f"mixctl: {exc}", file=sys.stderr)
        return EXIT_NO_ROUTE
    except (InputError, MixctlError, ValueError) as exc:
        print(f"mixctl: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
