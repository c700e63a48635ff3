"""``qsim`` command line: run, list and validate JSON scenarios.

Exit codes: 0 success, 2 invalid scenario, 3 solver failure. Errors are
written to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import importlib
import io
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import QsimError
from .models import INTEGER_PARAMS, MODELS, REQUIRED, SOLVER_PARAMS, build, finite, model_params
from .rng import default_threads

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

SOLVERS = ("sesolve", "mesolve", "mcsolve", "ssesolve", "smesolve", "dsf_mesolve",
           "dsf_mcsolve", "dfd_mesolve", "steadystate", "steadystate_fourier")
STOCHASTIC = {"mcsolve", "ssesolve", "smesolve", "dsf_mcsolve"}
TOP_KEYS = {"name", "model", "solver", "params", "tlist", "e_ops", "ntraj", "seed",
            "n_threads", "output", "description"}
OUTPUT_KEYS = {"csv_path", "json_path", "store_states", "per_trajectory", "store_measurement"}


class SpecError(Exception):
    def __init__(self, code, message, diagnostics=None):
        super().__init__(message)
        self.code = code
        self.diagnostics = diagnostics or [{"code": code, "message": message}]


# -- built-in scenarios ------------------------------------------------------------


def builtin_names() -> list[str]:
    files = resources.files("qsim").joinpath("scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_builtin(name: str) -> dict:
    path = resources.files("qsim").joinpath("scenarios", f"{name}.json")
    return json.loads(path.read_text())


def load_spec(ref: str) -> dict:
    """Load a scenario from a path, or by built-in name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    elif ref in builtin_names():
        return load_builtin(ref)
    else:
        raise SpecError("file_not_found", f"no scenario file or built-in named {ref!r}")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("invalid_json", str(exc)) from exc
    if not isinstance(spec, dict):
        raise SpecError("invalid_json", "scenario must be a JSON object")
    return spec


# -- validation ---------------------------------------------------------------------


def validate(spec: dict) -> list[dict]:
    """Diagnostics for a scenario; an empty list means it can be run."""
    diags = []

    def add(code, message):
        diags.append({"code": code, "message": message})

    for key in sorted(set(spec) - TOP_KEYS):
        add("unknown_field", f"unknown top-level field {key!r}")
    for key in ("name", "model", "solver", "tlist"):
        if key not in spec:
            add("missing_field", f"missing required field {key!r}")
    model, solver = spec.get("model"), spec.get("solver")
    if model is not None and model not in MODELS:
        add("unknown_model", f"unknown model {model!r}; known: {sorted(MODELS)}")
    if solver is not None and solver not in SOLVERS:
        add("unknown_solver", f"unknown solver {solver!r}; known: {list(SOLVERS)}")
    known_model = model in MODELS
    if known_model and solver in SOLVERS and solver not in MODELS[model].solvers:
        add("unsupported_combination", f"model {model!r} does not support solver {solver!r}")

    params = spec.get("params", {})
    if not isinstance(params, dict):
        add("invalid_params", "params must be an object")
        params = {}
    if known_model:
        declared = MODELS[model].params
        for k, v in declared.items():
            if v is REQUIRED and k not in params:
                add("missing_param", f"model {model!r} needs parameter {k!r}")
        for k in sorted(set(params) - set(declared) - SOLVER_PARAMS):
            add("unknown_param", f"parameter {k!r} is not used by model {model!r}")
    for k, v in params.items():
        if not finite(v):
            add("invalid_param", f"parameter {k!r} must be a finite number")
        elif k in INTEGER_PARAMS and (float(v) != int(v) or v < 0):
            add("invalid_param", f"parameter {k!r} must be a non-negative integer")

    tl = spec.get("tlist")
    if tl is not None:
        if not (isinstance(tl, list) and len(tl) == 3 and all(finite(x) for x in tl)):
            add("invalid_tlist", "tlist must be [t0, tf, n_points]")
        else:
            t0, tf, n = tl
            if tf <= t0:
                add("nonpositive_time_span", f"tf = {tf} must exceed t0 = {t0}")
            if int(n) != n or n < 2:
                add("invalid_tlist", "n_points must be an integer >= 2")

    e_ops = spec.get("e_ops", [])
    if not isinstance(e_ops, list):
        add("invalid_e_ops", "e_ops must be a list of observable names")
    elif known_model:
        for name in e_ops:
            if name not in MODELS[model].observables:
                add("unknown_observable",
                    f"observable {name!r} is not defined for model {model!r}; "
                    f"known: {list(MODELS[model].observables)}")

    for key in ("ntraj", "n_threads"):
        if key in spec and not (isinstance(spec[key], int) and spec[key] >= 1):
            add(f"invalid_{key}", f"{key} must be a positive integer")
    if "seed" in spec and not (isinstance(spec["seed"], int) and spec["seed"] >= 0):
        add("invalid_seed", "seed must be a non-negative integer")
    out = spec.get("output", {})
    if not isinstance(out, dict):
        add("invalid_output", "output must be an object")
    else:
        for key in sorted(set(out) - OUTPUT_KEYS):
            add("unknown_field", f"unknown output field {key!r}")
    return diags


# -- running ------------------------------------------------------------------------


def _tlist(spec):
    t0, tf, n = spec["tlist"]
    return np.linspace(float(t0), float(tf), int(n))


def _options(params):
    from .evolve import SolveOptions

    kw = {}
    if "abstol" in params:
        kw["abstol"] = float(params["abstol"])
    if "reltol" in params:
        kw["reltol"] = float(params["reltol"])
    return SolveOptions(**kw)


def _solve(spec, n_threads):
    """Run the solver; returns ``(times, expect, extra_columns, per_traj, stats, summary)``."""
    from . import dsf, evolve, trajectories
    # the package re-exports a function under the module's name
    ss = importlib.import_module(".steadystate", __package__)
    from .core import expect as expect_value

    model, solver = spec["model"], spec["solver"]
    params = spec.get("params", {})
    names = list(spec.get("e_ops", []))
    setup = build(model, params)
    e_ops = [setup.observables[n] for n in names]
    ntraj = int(spec.get("ntraj", 100))
    seed = int(spec.get("seed", 0))
    out = spec.get("output", {})
    opts = _options(params)
    extra, per_traj, summary = {}, None, {}

    if solver in ("steadystate", "steadystate_fourier"):
        if solver == "steadystate":
            rho = ss.steadystate(setup.H, setup.c_ops)
        else:
            ex = setup.extra
            fss = ss.steadystate_fourier(ex["L0"], ex["L1"], ex["Lm1"], ex["wd"],
                                                  int(params.get("n_max", 2)))
            rho = fss.rho0
            res = ss.fourier_residuals(fss, ex["L0"], ex["L1"], ex["Lm1"])
            summary["max_recursion_residual"] = float(res.max())
        values = np.array([[expect_value(e, rho)] for e in e_ops]).reshape(len(e_ops), 1)
        for n, v in zip(names, values[:, 0]):
            summary[n] = float(v.real)
        if "gradient_h" in params and model == "driven_cavity":
            p = model_params(model, params)
            grad = ss.steadystate_detuning_gradient(
                p["delta"], p["F"], p["gamma"], int(p["N"]), float(params["gradient_h"]))
            extra["dn_ddelta"] = np.array([grad])
            summary["dn_ddelta"] = grad
        return np.array([math.inf]), values, extra, None, {}, summary

    tlist = _tlist(spec)
    if solver == "sesolve":
        r = evolve.sesolve(setup.H, setup.psi0, tlist, e_ops, options=opts)
    elif solver == "mesolve":
        r = evolve.mesolve(setup.H, setup.psi0, tlist, setup.c_ops, e_ops, options=opts)
    elif solver == "mcsolve":
        r = trajectories.mcsolve(setup.H, setup.psi0, tlist, setup.c_ops, e_ops, ntraj=ntraj,
                                 seed=seed, options=opts, n_threads=n_threads)
    elif solver in ("ssesolve", "smesolve"):
        kw = dict(ntraj=ntraj, seed=seed, store_measurement=bool(out.get("store_measurement", True)),
                  dt_max=params.get("dt_max"), n_threads=n_threads)
        sc = setup.sc_ops[0]
        if solver == "ssesolve":
            r = trajectories.ssesolve(setup.H, setup.psi0, tlist, sc, e_ops, **kw)
        else:
            r = trajectories.smesolve(setup.H, setup.psi0, tlist, setup.sme_c_ops, sc, e_ops, **kw)
        if r.measurement:
            binned = np.mean([m.binned(tlist) for m in r.measurement], axis=0)
            for n, row in enumerate(binned, start=1):
                extra[f"J_{n}"] = row
    elif solver in ("dsf_mesolve", "dsf_mcsolve"):
        ex = setup.extra
        idx = [ex["obs_index"][n] for n in names]

        def e_fn(ops, p, _f=ex["e_ops_fn"]):
            full = _f(ops, p)
            return [full[i] for i in idx]

        common = dict(dalpha_max=float(params.get("dalpha_max", 0.1)), options=opts)
        if solver == "dsf_mesolve":
            r = dsf.dsf_mesolve(ex["H_fn"], setup.psi0, tlist, ex["c_ops_fn"], ex["op_list"],
                                [0.0], e_fn, **common)
            summary["shifts"] = len(r.shift_log)
        else:
            r = dsf.dsf_mcsolve(ex["H_fn"], setup.psi0, tlist, ex["c_ops_fn"], ex["op_list"],
                                [0.0], e_fn, ntraj=ntraj, seed=seed, n_threads=n_threads,
                                **common)
            summary["shifts"] = sum(len(s) for s in r.shift_logs)
    elif solver == "dfd_mesolve":
        ex = setup.extra
        idx = [ex["obs_index"][n] for n in names]
        policy_kw = {k: params[k] for k in ("m", "tau_up", "tau_down", "grow", "shrink",
                                             "dim_min", "dim_max") if k in params}
        policy = dsf.DimPolicy(**{k: (int(v) if k in INTEGER_PARAMS else float(v))
                                  for k, v in policy_kw.items()})
        r = dsf.dfd_mesolve(ex["H_dims"], setup.psi0, tlist, ex["c_dims"],
                            lambda dims, p: [ex["e_dims"](dims, p)[i] for i in idx],
                            options=opts, dim_policy=policy)
        summary["max_dims"] = r.max_dims
        summary["dim_changes"] = len(r.dim_log) - 1
    else:  # pragma: no cover - validation rejects unknown solvers
        raise SpecError("unknown_solver", solver)

    expect = np.asarray(r.expect)
    stats = dict(getattr(r, "stats", {}) or {})
    if solver in STOCHASTIC and out.get("per_trajectory"):
        per_traj = r.per_traj_expect
    for n, v in zip(names, expect[:, -1] if expect.size else []):
        summary[f"{n}_final"] = float(v.real)
    return tlist, expect, extra, per_traj, stats, summary


def _fmt(x) -> str:
    return "%.17g" % x


def write_csv(path, times, expect, names, extra) -> None:
    header = ["t"]
    for n in names:
        header += [f"{n}_re", f"{n}_im"]
    header += list(extra)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k, t in enumerate(times):
        row = [_fmt(t)]
        for j in range(len(names)):
            row += [_fmt(expect[j, k].real), _fmt(expect[j, k].imag)]
        row += [_fmt(v[k]) for v in extra.values()]
        w.writerow(row)
    Path(path).write_text(buf.getvalue())


def write_traj_csv(path, times, per_traj, names) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["traj", "t"]
    for n in names:
        header += [f"{n}_re", f"{n}_im"]
    w.writerow(header)
    for i, data in enumerate(per_traj):
        for k, t in enumerate(times):
            row = [str(i), _fmt(t)]
            for j in range(len(names)):
                row += [_fmt(data[j, k].real), _fmt(data[j, k].imag)]
            w.writerow(row)
    Path(path).write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (str, int, bool)) or x is None:
        return x
    return str(x)


def run(spec: dict, out_dir=".", n_threads=None) -> dict:
    """Run a validated scenario, write its outputs and return the JSON sidecar."""
    diags = validate(spec)
    if diags:
        raise SpecError(diags[0]["code"], diags[0]["message"], diags)
    n_threads = n_threads or spec.get("n_threads") or default_threads()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = spec.get("output", {})
    name = spec["name"]
    csv_path = out_dir / out.get("csv_path", f"{name}.csv")
    json_path = out_dir / out.get("json_path", f"{name}.json")
    names = list(spec.get("e_ops", []))
    start = time.perf_counter()
    times, expect, extra, per_traj, stats, summary = _solve(spec, n_threads)
    wall = time.perf_counter() - start
    write_csv(csv_path, times, expect, names, extra)
    files = {"csv": str(csv_path)}
    if per_traj is not None:
        traj_path = csv_path.with_name(csv_path.stem + "_traj.csv")
        write_traj_csv(traj_path, times, per_traj, names)
        files["per_trajectory_csv"] = str(traj_path)
    sidecar = {
        "spec": spec,
        "version": __version__,
        "seed": spec.get("seed", 0),
        "n_threads": n_threads,
        "wall_time_s": wall,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "stats": stats,
        "summary": summary,
        "files": files,
    }
    json_path.write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True) + "\n")
    return sidecar


# -- entry point ----------------------------------------------------------------------


def _error(code, message, diagnostics=None, stream=None):
    payload = {"error": code, "message": message}
    if diagnostics:
        payload["diagnostics"] = diagnostics
    print(json.dumps(payload), file=stream or sys.stderr)


def _parser():
    p = argparse.ArgumentParser(prog="qsim", description="Run open-quantum-system scenarios.")
    p.add_argument("--version", action="version", version=f"qsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or built-in name")
    r.add_argument("spec")
    r.add_argument("--out-dir", default=".")
    r.add_argument("--seed", type=int)
    r.add_argument("--ntraj", type=int)
    r.add_argument("--threads", type=int)
    sub.add_parser("list", help="list built-in scenarios")
    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("spec")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for name in builtin_names():
            desc = load_builtin(name).get("description", "")
            print(f"{name}\t{desc}" if desc else name)
        return EXIT_OK
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        _error(exc.code, str(exc), exc.diagnostics)
        return EXIT_INVALID
    if args.command == "validate":
        diags = validate(spec)
        print(json.dumps(diags, indent=2))
        return EXIT_OK if not diags else EXIT_INVALID
    if args.seed is not None:
        spec["seed"] = args.seed
    if args.ntraj is not None:
        spec["ntraj"] = args.ntraj
    try:
        sidecar = run(spec, args.out_dir, args.threads)
    except SpecError as exc:
        _error(exc.code, str(exc), exc.diagnostics)
        return EXIT_INVALID
    except (QsimError, ValueError, ArithmeticError) as exc:
        _error("solver_failure", f"{type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    summary = sidecar["summary"]
    print(json.dumps({"name": spec["name"], "summary": _jsonable(summary),
                      "files": sidecar["files"]}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
