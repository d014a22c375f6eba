"""Command-line interface: solve densities, tabulate estimators, sweep phase
diagrams, and cross-validate against the finite-N sampler.

Commands write deterministic CSV (a `# {json}` parameter comment, a header
row, then `%.17g` columns) or a single JSON document, plus a JSON sidecar that
re-parses into the exact run specification.  Sweeps fan out over a thread pool
with atomic per-point result files, so an interrupted sweep keeps every
finished point.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .closedform import phase_boundary_massless
from .core import (ModelParams, ONE_CUT, ParamError, PhaseMismatchError,
                   SolverError, Support, TWO_CUT)
from .estimators import dirac_density, estimator_table
from .fredholm import NystromConfig, nystrom_phi, solve_equilibrium
from .mc import McConfig, histogram_density, metropolis_sample

__all__ = ["RunSpec", "build_parser", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

DIAGNOSTIC_MASSES = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)


@dataclass
class RunSpec:
    """Fully resolved description of one CLI run; serialized into every output."""

    command: str
    params: ModelParams
    solver: NystromConfig
    mc: Optional[McConfig]
    output_path: str
    format: str
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "params": self.params.to_json(),
            "solver": asdict(self.solver),
            "mc": asdict(self.mc) if self.mc is not None else None,
            "output_path": self.output_path,
            "format": self.format,
            "extras": dict(sorted(self.extras.items())),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunSpec":
        mc = obj.get("mc")
        return cls(
            command=obj["command"],
            params=ModelParams.from_json(obj["params"]),
            solver=NystromConfig(**obj["solver"]),
            mc=McConfig(**mc) if mc else None,
            output_path=obj["output_path"],
            format=obj["format"],
            extras=dict(obj.get("extras", {})),
        )


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_table(spec: RunSpec, columns, rows, meta: dict) -> None:
    """Emit the main table (csv or json) and the sidecar JSON."""
    out = spec.output_path
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    sidecar = {"spec": spec.to_json(), **meta}
    if spec.format == "csv":
        lines = ["# " + json.dumps(sidecar, sort_keys=True)]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        _atomic_write(out, "\n".join(lines) + "\n")
        side_path = os.path.splitext(out)[0] + ".json"
        if side_path == out:
            side_path = out + ".meta.json"
        _atomic_write(side_path, json.dumps(sidecar, sort_keys=True, indent=1) + "\n")
    else:
        doc = dict(sidecar)
        doc["columns"] = list(columns)
        doc["data"] = [[v if isinstance(v, str) else float(v) for v in row]
                       for row in rows]
        _atomic_write(out, json.dumps(doc, sort_keys=True, indent=1) + "\n")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="fuzzydirac",
        description="Large-N spectral densities and Dirac observables of the "
                    "quartic fermionic matrix ensemble.")
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p, mc_flags=False, t_flags=False, sweep_flags=False):
        g = p.add_argument_group("model")
        g.add_argument("--g4", type=float, default=None)
        g.add_argument("--g2", type=float, default=None)
        g.add_argument("--g2-eff", dest="g2_eff", type=float, default=None,
                       help="quadratic coupling g2 + 2 g4 sum(m^2); "
                            "exclusive with --g2")
        g.add_argument("--beta", type=float, default=None)
        g.add_argument("--beta2", type=float, default=None)
        g.add_argument("--mass", dest="masses", type=float, action="append",
                       default=None, help="fermion mass, repeatable")
        g.add_argument("--trace-reg", dest="trace_reg", type=float, default=None)
        s = p.add_argument_group("solver")
        s.add_argument("--nodes", type=int, default=None,
                       help="quadrature nodes per cut")
        s.add_argument("--tol", type=float, default=None,
                       help="outer nonlinear tolerance")
        o = p.add_argument_group("output")
        o.add_argument("--out", required=False, default=None)
        o.add_argument("--format", choices=("csv", "json"), default=None)
        o.add_argument("--spec", default=None,
                       help="JSON run spec; explicit flags override it")
        if mc_flags:
            m = p.add_argument_group("monte carlo")
            m.add_argument("--n-eigen", dest="n_eigen", type=int, default=None)
            m.add_argument("--sweeps", type=int, default=None)
            m.add_argument("--burn-in", dest="burn_in", type=int, default=None)
            m.add_argument("--seed", type=int, default=None)
            m.add_argument("--thin", type=int, default=None)
            m.add_argument("--step-scale", dest="step_scale", type=float,
                           default=None)
            m.add_argument("--bins", type=int, default=None)
            m.add_argument("--l1-threshold", dest="l1_threshold", type=float,
                           default=None)
        if t_flags:
            tg = p.add_argument_group("t grid")
            tg.add_argument("--t-min", dest="t_min", type=float, default=None)
            tg.add_argument("--t-max", dest="t_max", type=float, default=None)
            tg.add_argument("--t-points", dest="t_points", type=int, default=None)
        if sweep_flags:
            sg = p.add_argument_group("sweep axis")
            sg.add_argument("--sweep-param", dest="sweep_param",
                            choices=("g2", "g2-eff", "mass"), default=None)
            sg.add_argument("--sweep-min", dest="sweep_min", type=float,
                            default=None)
            sg.add_argument("--sweep-max", dest="sweep_max", type=float,
                            default=None)
            sg.add_argument("--sweep-points", dest="sweep_points", type=int,
                            default=None)
            sg.add_argument("--workers", type=int, default=None)

    p_solve = sub.add_parser("solve", help="equilibrium density at one point")
    add_common(p_solve)
    p_solve.add_argument("--diagnostic-phi", dest="diagnostic_phi",
                         action="store_true", default=None,
                         help="emit phi curves on [-2,2] with p = 1 for a "
                              "ladder of masses instead of solving")

    p_est = sub.add_parser("estimators",
                           help="t, d_s, v_s, k_D2 table for one model point")
    add_common(p_est, t_flags=True)

    p_sweep = sub.add_parser("sweep", help="solve along one parameter axis")
    add_common(p_sweep, sweep_flags=True)

    p_pd = sub.add_parser("phase-diagram",
                          help="phase classification over (g2_eff, mass)")
    add_common(p_pd, sweep_flags=True)

    p_mc = sub.add_parser("mc-validate",
                          help="compare the solver density to a finite-N chain")
    add_common(p_mc, mc_flags=True)
    return top


_DEFAULTS = {
    "g4": 1.0, "g2": None, "g2_eff": None, "beta": 2.0, "beta2": 2.0,
    "masses": None, "trace_reg": 1.0,
    "nodes": 128, "tol": 1e-10,
    "out": "out.csv", "format": "csv",
    "n_eigen": 100, "sweeps": 20000, "burn_in": 2000, "seed": 12345,
    "thin": 1, "step_scale": 0.15, "bins": 61, "l1_threshold": 0.05,
    "t_min": 1e-2, "t_max": 1e4, "t_points": 200,
    "sweep_param": "g2-eff", "sweep_min": -6.0, "sweep_max": -3.0,
    "sweep_points": 13, "workers": 4,
    "diagnostic_phi": False,
}

_SPEC_FLAT = {
    # RunSpec JSON path -> flat option name
    ("params", "g4"): "g4", ("params", "g2"): "g2",
    ("params", "g2_eff"): "g2_eff", ("params", "beta"): "beta",
    ("params", "beta2"): "beta2", ("params", "masses"): "masses",
    ("params", "trace_reg"): "trace_reg",
    ("solver", "n_nodes"): "nodes", ("solver", "outer_tol"): "tol",
    ("mc", "n_eigen"): "n_eigen", ("mc", "n_sweeps"): "sweeps",
    ("mc", "burn_in"): "burn_in", ("mc", "seed"): "seed",
    ("mc", "thin"): "thin", ("mc", "step_scale"): "step_scale",
    ("output_path",): "out", ("format",): "format",
}


def _resolve(args) -> dict:
    """Layer hard defaults, then --spec file values, then explicit flags."""
    opts = dict(_DEFAULTS)
    if getattr(args, "spec", None):
        with open(args.spec) as fh:
            doc = json.load(fh)
        if isinstance(doc.get("spec"), dict) and "params" in doc["spec"]:
            doc = doc["spec"]  # accept a result sidecar as a run spec
        for path, name in _SPEC_FLAT.items():
            node = doc
            for key in path:
                if not isinstance(node, dict) or key not in node:
                    node = None
                    break
                node = node[key]
            if node is not None:
                opts[name] = node
        for key, val in doc.get("extras", {}).items():
            if key in opts:
                opts[key] = val
        # a spec file carrying both couplings means g2 is authoritative
        if opts.get("g2") is not None and opts.get("g2_eff") is not None:
            opts["g2_eff"] = None
    if getattr(args, "g2", None) is not None and getattr(args, "g2_eff", None) is not None:
        raise ParamError("--g2 and --g2-eff are mutually exclusive")
    for name in opts:
        val = getattr(args, name, None)
        if val is not None:
            opts[name] = val
    if getattr(args, "g2", None) is not None:
        opts["g2_eff"] = None
    if getattr(args, "g2_eff", None) is not None:
        opts["g2"] = None
    return opts


def _params_from(opts: dict, need_g2: bool = True) -> ModelParams:
    masses = tuple(opts["masses"]) if opts["masses"] else (0.0,)
    common = dict(g4=opts["g4"], beta=opts["beta"], beta2=opts["beta2"],
                  masses=masses, trace_reg=opts["trace_reg"])
    if opts["g2"] is not None:
        return ModelParams(g2=opts["g2"], **common)
    if opts["g2_eff"] is not None:
        return ModelParams.from_g2_eff(g2_eff=opts["g2_eff"], **common)
    if need_g2:
        raise ParamError("one of --g2 or --g2-eff is required")
    return ModelParams(g2=0.0, **common)


def _solver_from(opts: dict) -> NystromConfig:
    return NystromConfig(n_nodes=opts["nodes"], outer_tol=opts["tol"])


def _mc_from(opts: dict) -> McConfig:
    return McConfig(n_eigen=opts["n_eigen"], n_sweeps=opts["sweeps"],
                    burn_in=opts["burn_in"], step_scale=opts["step_scale"],
                    seed=opts["seed"], thin=opts["thin"])


def _solution_meta(sol) -> dict:
    return {
        "phase": sol.phase,
        "support": {"kind": sol.rho_H.support.kind,
                    "a": sol.rho_H.support.a, "b": sol.rho_H.support.b},
        "mu2": sol.mu2,
        "energy": sol.energy,
        "residuals": {k: float(v) for k, v in sol.residuals.items()},
    }


def cmd_solve(args) -> int:
    opts = _resolve(args)
    params = _params_from(opts)
    cfg = _solver_from(opts)
    if opts["diagnostic_phi"]:
        masses = tuple(opts["masses"]) if opts["masses"] else DIAGNOSTIC_MASSES
        support = Support(ONE_CUT, 2.0)
        spec = RunSpec("solve", params, cfg, None, opts["out"], opts["format"],
                       extras={"diagnostic_phi": True,
                               "diagnostic_masses": list(masses)})
        columns = ["x"]
        curves = []
        x_ref = None
        for m in masses:
            pm = replace(params, masses=(float(m),))
            grid = nystrom_phi(support, (1.0,), pm, cfg)
            x_ref = grid.nodes
            curves.append(grid.values)
            columns.append(f"phi[m={m:g}]")
        rows = [[x_ref[i]] + [c[i] for c in curves] for i in range(len(x_ref))]
        _write_table(spec, columns, rows,
                     {"support": {"kind": ONE_CUT, "a": 2.0, "b": 0.0},
                      "p": "1"})
        return EXIT_OK
    spec = RunSpec("solve", params, cfg, None, opts["out"], opts["format"])
    sol = solve_equilibrium(params, cfg)
    rows = [[x, v] for x, v in zip(sol.rho_H.nodes, sol.rho_H.values)]
    _write_table(spec, ["x", "rho"], rows, _solution_meta(sol))
    return EXIT_OK


def cmd_estimators(args) -> int:
    opts = _resolve(args)
    params = _params_from(opts)
    cfg = _solver_from(opts)
    spec = RunSpec("estimators", params, cfg, None, opts["out"], opts["format"],
                   extras={"t_min": opts["t_min"], "t_max": opts["t_max"],
                           "t_points": opts["t_points"]})
    sol = solve_equilibrium(params, cfg)
    ts = np.geomspace(opts["t_min"], opts["t_max"], opts["t_points"])
    rho_d = dirac_density(sol.rho_H)
    k_curve, ds_curve, vs_curve = estimator_table(sol, ts, rho_d)
    rows = [[t, d, v, k] for t, d, v, k in
            zip(ts, ds_curve.values, vs_curve.values, k_curve.values)]
    _write_table(spec, ["t", "d_s", "v_s", "k_D2"], rows, _solution_meta(sol))
    return EXIT_OK


def _sweep_values(opts) -> np.ndarray:
    return np.linspace(opts["sweep_min"], opts["sweep_max"], opts["sweep_points"])


def _point_params(base_opts: dict, sweep_param: str, value: float) -> ModelParams:
    opts = dict(base_opts)
    if sweep_param == "g2":
        opts["g2"], opts["g2_eff"] = float(value), None
    elif sweep_param == "g2-eff":
        opts["g2"], opts["g2_eff"] = None, float(value)
    else:
        opts["masses"] = (float(value),)
    return _params_from(opts)


def _run_pool(tasks, workers: int):
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda f: f(), tasks))


def _point_dir(out: str) -> str:
    d = out + ".points"
    os.makedirs(d, exist_ok=True)
    return d


def cmd_sweep(args) -> int:
    opts = _resolve(args)
    cfg = _solver_from(opts)
    values = _sweep_values(opts)
    base_params = _point_params(opts, opts["sweep_param"], values[0])
    spec = RunSpec("sweep", base_params, cfg, None, opts["out"], opts["format"],
                   extras={"sweep_param": opts["sweep_param"],
                           "sweep_min": opts["sweep_min"],
                           "sweep_max": opts["sweep_max"],
                           "sweep_points": opts["sweep_points"]})
    pdir = _point_dir(opts["out"])

    def make_task(i, val):
        def task():
            params = _point_params(opts, opts["sweep_param"], val)
            try:
                sol = solve_equilibrium(params, cfg)
                row = [float(val), sol.phase, sol.rho_H.support.a,
                       sol.rho_H.support.b, sol.mu2, sol.energy,
                       float(sol.residuals["normalization"])]
                err = None
            except (SolverError, PhaseMismatchError) as exc:
                row, err = [float(val), "failed", math.nan, math.nan,
                            math.nan, math.nan, math.nan], str(exc)
            _atomic_write(os.path.join(pdir, f"point_{i:04d}.json"),
                          json.dumps({"value": float(val), "row": row,
                                      "error": err}, sort_keys=True) + "\n")
            return row, err
        return task

    results = _run_pool([make_task(i, v) for i, v in enumerate(values)],
                        opts["workers"])
    rows = [r for r, _ in results]
    _write_table(spec, ["value", "phase", "a", "b", "mu2", "energy",
                        "normalization_residual"], rows, {})
    if any(err for _, err in results):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    opts = _resolve(args)
    cfg = _solver_from(opts)
    g2e_values = _sweep_values(opts)
    masses = opts["masses"] if opts["masses"] else [0.0, 0.5, 1.0, 2.0, 4.0,
                                                    8.0, 16.0]
    base = _point_params(opts, "g2-eff", g2e_values[0])
    spec = RunSpec("phase-diagram", base, cfg, None, opts["out"],
                   opts["format"],
                   extras={"g2_eff_min": opts["sweep_min"],
                           "g2_eff_max": opts["sweep_max"],
                           "g2_eff_points": opts["sweep_points"],
                           "masses": [float(m) for m in masses]})
    pdir = _point_dir(opts["out"])
    grid = [(i, g2e, m) for i, (g2e, m) in enumerate(
        (g, m) for g in g2e_values for m in masses)]

    def make_task(i, g2e, m):
        def task():
            o = dict(opts)
            o["masses"] = (float(m),)
            params = _point_params(o, "g2-eff", g2e)
            try:
                sol = solve_equilibrium(params, cfg)
                row = [float(g2e), float(m), sol.phase, sol.rho_H.support.a,
                       sol.rho_H.support.b, sol.mu2]
                err = None
            except (SolverError, PhaseMismatchError) as exc:
                row, err = [float(g2e), float(m), "failed", math.nan,
                            math.nan, math.nan], str(exc)
            _atomic_write(os.path.join(pdir, f"point_{i:04d}.json"),
                          json.dumps({"g2_eff": float(g2e), "mass": float(m),
                                      "row": row, "error": err},
                                     sort_keys=True) + "\n")
            return row, err
        return task

    results = _run_pool([make_task(i, g, m) for i, g, m in grid],
                        opts["workers"])
    rows = [r for r, _ in results]
    boundary = phase_boundary_massless(opts["g4"], opts["beta"] + opts["beta2"])
    _write_table(spec, ["g2_eff", "mass", "phase", "a", "b", "mu2"], rows,
                 {"massless_boundary_g2": boundary})
    if any(err for _, err in results):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    opts = _resolve(args)
    params = _params_from(opts)
    cfg = _solver_from(opts)
    mc_cfg = _mc_from(opts)
    spec = RunSpec("mc-validate", params, cfg, mc_cfg, opts["out"],
                   opts["format"],
                   extras={"bins": opts["bins"],
                           "l1_threshold": opts["l1_threshold"]})
    sol = solve_equilibrium(params, cfg)
    chain = metropolis_sample(params, mc_cfg)
    hist = histogram_density(chain, opts["bins"])
    rho_solver = sol.rho_H.density(hist.nodes)
    diff = np.abs(rho_solver - hist.values)
    l1 = float(np.sum(hist.weights * diff))
    rows = [[x, rs, rm, d] for x, rs, rm, d in
            zip(hist.nodes, rho_solver, hist.values, diff)]
    meta = _solution_meta(sol)
    meta.update(l1=l1, l1_threshold=opts["l1_threshold"],
                acceptance_rate=chain.acceptance_rate, seed=mc_cfg.seed)
    _write_table(spec, ["x", "rho_solver", "rho_mc", "abs_diff"], rows, meta)
    print(f"L1(solver, mc) = {l1:.5f} (threshold {opts['l1_threshold']:g}, "
          f"acceptance {chain.acceptance_rate:.3f})")
    if l1 > opts["l1_threshold"]:
        return EXIT_VALIDATION
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "estimators": cmd_estimators,
    "sweep": cmd_sweep,
    "phase-diagram": cmd_phase_diagram,
    "mc-validate": cmd_mc_validate,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except ParamError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, PhaseMismatchError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
