"""Command-line front end.

Usage examples::

    csma-region solve scenario.json --worse
    csma-region bound --beta 0.75 scenario.json
    csma-region simulate --seed 42 --handshakes 1e6 --compare scenario.json
    csma-region sweep --var beta --start 0.05 --stop 0.95 --num 19 scenario.json
    csma-region zeta --imin 2 --imax 10 --format csv

Relative scenario paths that do not exist in the working directory are
looked up in ``$CSMA_REGION_SCENARIO_DIR``. Exit codes: 0 ok, 1 invalid
input, 2 infeasible scenario, 3 internal invariant violation; errors are
written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds, capture, equilibrium, metrics, simulator
from .errors import CsmaError, InfeasibleLoad, InternalError, InvalidInput, NoSignChange
from .model import NodeProfile, SystemParams, load_scenario, validate

SCENARIO_DIR_ENV = "CSMA_REGION_SCENARIO_DIR"
SWEEP_VARS = ("beta", "b", "scale", "M")


class UsageError(InvalidInput):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    """Make ``obj`` strict-JSON safe: arrays to lists, NaN/inf to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute():
        base = os.environ.get(SCENARIO_DIR_ENV)
        if base and (Path(base) / p).exists():
            return Path(base) / p
    if not p.exists():
        raise InvalidInput(f"scenario file not found: {path}")
    return p


def _scenario(args):
    return load_scenario(_resolve(args.scenario))


def _parse_p(text: str | None, n: int) -> np.ndarray:
    if text is None:
        raise UsageError("--p is required (comma-separated request probabilities)")
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--p must be comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"--p needs {n} entries, got {len(vals)}")
    return np.array(vals)


def _count(text: str) -> int:
    v = float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _tol(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"--tol must be a finite nonnegative number, got {text!r}")
    return v


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


# Commands: each returns (payload, csv_rows, exit_code) --------------------------


def cmd_grant(args):
    params, _ = _scenario(args)
    p = _parse_p(args.p, params.n)
    g = capture.grant_probabilities(p, params)
    rows = [{"node": i, "p": p[i], "grant": g[i]} for i in range(params.n)]
    return {"p": p, "grants": g, "sum": float(g.sum())}, rows, 0


def cmd_perf(args):
    params, profiles = _scenario(args)
    p = _parse_p(args.p, params.n)
    perf = metrics.performance(p, params, profiles)
    rows = [
        {"node": i, "p": p[i], "grant": perf.grants[i], "throughput": perf.throughput[i], "power": perf.power[i]}
        for i in range(params.n)
    ]
    return {"p": p, **perf.to_dict(), "total_power": float(perf.power.sum())}, rows, 0


def _eq_payload(eq, params, profiles):
    if eq is None:
        return None
    return {**eq.to_dict(), "power": metrics.power_at_equilibrium(eq.p, params, profiles)}


def cmd_solve(args):
    params, profiles = _scenario(args)
    verdict = equilibrium.solve(params, profiles, want_worse=args.worse)
    payload = {
        "feasible": verdict.feasible,
        "margin": verdict.margin,
        "better": _eq_payload(verdict.better, params, profiles),
        "worse": _eq_payload(verdict.worse, params, profiles),
    }
    rows = []
    for key in ("better", "worse"):
        eq = payload[key]
        if eq is not None:
            rows += [{"branch": key, "node": i, "p": eq["p"][i], "power": eq["power"][i]} for i in range(params.n)]
    if not verdict.feasible:
        return payload, rows, 2
    if verdict.better.residual > args.tol:
        raise InternalError(f"better equilibrium residual {verdict.better.residual:.3e} exceeds --tol {args.tol}")
    return payload, rows, 0


def cmd_feasible(args):
    params, profiles = _scenario(args)
    verdict = equilibrium.solve(params, profiles, want_worse=args.worse)
    d = verdict.to_dict()
    row = {k: d[k] for k in ("feasible", "margin", "leader", "mode")}
    return d, [row], 0


def cmd_bound(args):
    params, profiles = _scenario(args)
    if args.beta is not None:
        params = dataclasses.replace(params, rts_len=args.beta * params.t0)
    report = bounds.power_bound(params, profiles)
    tight = None
    if report.extremal_p is not None:
        tight = bounds.bound_tightness_check(params, profiles)
    payload = {**report.to_dict(), "beta": params.beta, "tightness": tight}
    row = {k: payload[k] for k in ("beta", "regime", "threshold_low", "threshold_high", "bound", "tightness")}
    return payload, [row], 0


def cmd_zeta(args):
    rows = []
    for i in range(args.imin, args.imax + 1):
        try:
            z, found = bounds.zeta_search(i, tol=args.tol), True
        except NoSignChange as exc:
            z, found = exc.lower_limit, False
        rows.append({"i": i, "zeta": z, "sign_change": found, "crossings": len(bounds.psi_gap_sign_changes(i))})
    return {"zeta": rows}, [{"i": r["i"], "zeta": r["zeta"]} for r in rows], 0


def cmd_lemma1(args):
    res = bounds.lemma1_oracle(args.n, args.b, args.C, grid=args.grid)
    stated = bounds.lemma1_stated_points(args.n, args.b, args.C)
    a = args.b / (1 + args.b)
    payload = {
        **res.to_dict(),
        "stated_min": [{"p": p, "value": float(bounds.sum_normalized_grants(p, a))} for p in stated["min"]],
        "stated_max": [{"p": p, "value": float(bounds.sum_normalized_grants(p, a))} for p in stated["max"]],
    }
    return payload, [{"n": args.n, "b": args.b, "C": args.C, "min": res.min, "max": res.max}], 0


def cmd_simulate(args):
    params, profiles = _scenario(args)
    if args.p is not None:
        p = _parse_p(args.p, params.n)
    else:
        verdict = equilibrium.solve(params, profiles)
        if not verdict.feasible:
            return {"feasible": False, "margin": verdict.margin}, [], 2
        p = verdict.better.p
    cfg = simulator.SimConfig(
        slots=args.slots, seed=args.seed, replications=args.replications, handshakes=args.handshakes
    )
    rep = simulator.simulate(params, profiles, p, cfg, workers=args.workers)
    payload = {"p": p, **rep.to_dict()}
    rows = [{"node": i, "p": p[i]} for i in range(params.n)]
    for key in ("grants", "throughput", "power"):
        for i, row in enumerate(rows):
            row[key] = getattr(rep, key)[i]
            row[f"{key}_se"] = rep.stderr[key][i]
    if args.compare:
        perf = metrics.performance(p, params, profiles)
        analytic = {"grants": perf.grants, "throughput": perf.throughput, "power": perf.power}
        z = {}
        for key, ref in analytic.items():
            se = rep.stderr[key]
            diff = getattr(rep, key) - ref
            with np.errstate(divide="ignore", invalid="ignore"):
                z[key] = np.where(se > 0, diff / se, np.where(np.abs(diff) < 1e-12, 0.0, np.inf))
            for i, row in enumerate(rows):
                row[f"{key}_analytic"] = ref[i]
                row[f"{key}_z"] = z[key][i]
        payload["analytic"] = analytic
        payload["z"] = z
        payload["max_abs_z"] = float(max(np.max(np.abs(v)) for v in z.values()))
    return payload, rows, 0


def _sweep_point(var, value, params, profiles):
    if var == "beta":
        params = dataclasses.replace(params, rts_len=value * params.t0)
    elif var == "b":
        params = dataclasses.replace(params, b=value)
    elif var == "scale":
        profiles = [dataclasses.replace(pr, demand=pr.demand * value) for pr in profiles]
    elif var == "M":
        period = max(1, int(round(value * params.t0)))
        profiles = [dataclasses.replace(pr, period=period) for pr in profiles]
    return params, profiles


def cmd_sweep(args):
    params, profiles = _scenario(args)
    n = params.n
    header = (
        [args.var, "feasible", "sum_p"]
        + [f"p_{i}" for i in range(n)]
        + [f"r_{i}" for i in range(n)]
        + [f"S_{i}" for i in range(n)]
        + ["total_power", "bound"]
    )
    rows = []
    for value in np.linspace(args.start, args.stop, args.num):
        value = float(value)
        row = dict.fromkeys(header)
        row[args.var] = value
        prm, prof = _sweep_point(args.var, value, params, profiles)
        try:
            verdict = equilibrium.solve(prm, prof)
        except InfeasibleLoad:
            verdict = None
        row["feasible"] = bool(verdict and verdict.feasible)
        if row["feasible"]:
            eq = verdict.better
            perf = metrics.performance(eq.p, prm, prof)
            row["sum_p"] = eq.sum_p
            for i in range(n):
                row[f"p_{i}"] = eq.p[i]
                row[f"r_{i}"] = perf.throughput[i]
                row[f"S_{i}"] = perf.power[i]
            row["total_power"] = float(perf.power.sum())
        if prm.b > 2:
            row["bound"] = bounds.power_bound(prm, prof).bound
        rows.append(row)
    return {"var": args.var, "columns": header, "rows": rows}, rows, 0


# Parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--format", choices=("json", "csv"), default=None)
    shared.add_argument("--seed", type=_u64, default=0)
    shared.add_argument("--worse", action="store_true", help="also report the worse equilibrium")
    shared.add_argument("--compare", action="store_true", help="simulate: add analytic values and z-scores")
    shared.add_argument("--tol", type=_tol, default=None)

    parser = _Parser(prog="csma-region", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, scenario=True, **kw):
        sp = sub.add_parser(name, parents=[shared], **kw)
        if scenario:
            sp.add_argument("scenario")
        sp.set_defaults(func=func)
        return sp

    add("grant", cmd_grant, help="grant probabilities").add_argument("--p")
    add("perf", cmd_perf, help="throughput and power").add_argument("--p")
    add("solve", cmd_solve, help="equilibrium request vector")
    add("feasible", cmd_feasible, help="feasibility verdict")
    add("bound", cmd_bound, help="total power bound").add_argument("--beta", type=float)

    sp = add("zeta", cmd_zeta, scenario=False, help="capture-ratio thresholds")
    sp.add_argument("--imin", type=int, default=2)
    sp.add_argument("--imax", type=int, default=10)

    sp = add("lemma1", cmd_lemma1, scenario=False, help="grid extremes of the total grant")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--C", type=float, required=True)
    sp.add_argument("--grid", type=int, default=240)

    sp = add("simulate", cmd_simulate, help="Monte Carlo run")
    sp.add_argument("--p")
    sp.add_argument("--slots", type=_count, default=1_000_000)
    sp.add_argument("--handshakes", type=_count, default=None)
    sp.add_argument("--replications", type=_count, default=1)
    sp.add_argument("--workers", type=_count, default=1)

    sp = add("sweep", cmd_sweep, help="one-parameter sweep")
    sp.add_argument("--var", choices=SWEEP_VARS, required=True)
    sp.add_argument("--start", type=float, required=True)
    sp.add_argument("--stop", type=float, required=True)
    sp.add_argument("--num", type=_count, default=21)
    return parser


_DEFAULT_TOL = {"zeta": 1e-9, "solve": 1e-9}
_DEFAULT_FORMAT = {"sweep": "csv"}


def _render(payload, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    rows = _clean(rows)
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
    return buf.getvalue()


def _fail(exc: Exception, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.tol is None:
            args.tol = _DEFAULT_TOL.get(args.command, 1e-9)
        fmt = args.format or _DEFAULT_FORMAT.get(args.command, "json")
        payload, rows, code = args.func(args)
    except InvalidInput as exc:
        return _fail(exc, 1)
    except InfeasibleLoad as exc:
        return _fail(exc, 2)
    except (InternalError, AssertionError) as exc:
        return _fail(exc, 3)
    except CsmaError as exc:
        return _fail(exc, 1)
    sys.stdout.write(_render(payload, rows, fmt))
    return code


def main() -> None:
    raise SystemExit(run())
