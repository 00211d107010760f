"""Command-line entry point: ``persist-dde <command> --config run.json``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, is_dataclass, replace

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import COMMANDS, RunConfig, load_config
from .core import eval_at, integrate, make_history_constant
from .errors import ConfigError, PersistDDEError
from .guiding import checks
from .guiding.report import FAILS, HOLDS, UNDETERMINED, HypothesisReport
from .periodic import PeriodMapProblem, existence_certificate, find_periodic, orbit_drift
from .persistence import (
    PersistenceConfig,
    classify,
    confirm_attraction,
    default_ensemble,
    h6_ratio_check,
    iterate_attractor,
    run_ensemble,
    uniform_bound,
)

log = logging.getLogger("persist_dde")

EXIT_OK, EXIT_FAIL, EXIT_UNDETERMINED, EXIT_USAGE = 0, 1, 2, 3
HYPOTHESES = ("H1", "H2", "H3", "H4", "H5", "H6", "H7", "H8", "H9")


def jsonable(obj):
    """Recursively convert numpy scalars, arrays, tuples and dataclasses; non-finite floats become strings."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_csv(path, header, rows):
    np.savetxt(path, np.asarray(rows, dtype=float), fmt="%.17g", delimiter=",",
               header=",".join(header), comments="")


def write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")


def _state_header(N):
    return ["t"] + [f"x_{j + 1}" for j in range(N)] + ["v"]


def _seed(cfg: RunConfig, default):
    return int(cfg.analysis.get("seed_grid", default))


def _sampling_kw(an, *keys):
    return {k: an[k] for k in keys if k in an}


# -- commands -----------------------------------------------------------------

def cmd_simulate(cfg: RunConfig):
    an = cfg.analysis
    if "t_end" not in an:
        raise ConfigError("analysis.t_end: required for simulate")
    t_end = float(an["t_end"])
    traj = integrate(cfg.model, cfg.history, t_end, cfg.step)
    if "dt" in an:
        dt = float(an["dt"])
        if not dt > 0:
            raise ConfigError("analysis.dt: must be positive")
        ts = np.append(np.arange(0.0, t_end, dt), t_end)
    else:
        stride = int(an.get("stride", 1))
        if stride < 1:
            raise ConfigError("analysis.stride: must be a positive integer")
        ts = traj.mesh[::stride]
        if ts[-1] != t_end:
            ts = np.append(ts, t_end)
    x = eval_at(traj, ts)
    v = cfg.V(x)
    rows = np.column_stack([ts, x, v])
    path = os.path.join(cfg.out_dir, "trajectory.csv")
    write_csv(path, _state_header(cfg.model.dim), rows)
    result = {"t_end": t_end, "samples": len(ts), "final_state": x[-1], "final_v": float(v[-1]),
              "h": traj.h, "steps_per_delay": traj.steps_per_delay, "backend": traj.backend,
              "files": [path]}
    return result, EXIT_OK


def run_checks(cfg: RunConfig):
    """Run the requested hypothesis checks, feeding r0 from H3 (or the config) into H5 and H7-H9."""
    an = cfg.analysis
    model, V = cfg.model, cfg.V
    wanted = an.get("hypotheses", list(HYPOTHESES))
    if isinstance(wanted, str):
        wanted = [wanted]
    bad = [h for h in wanted if h not in HYPOTHESES]
    if bad:
        raise ConfigError(f"analysis.hypotheses: unknown {bad}")
    cap = float(an.get("cap", 5.0))
    seed = an.get("seed_grid")
    lvl = {"n_levels": int(seed)} if seed is not None else {}
    t_grid = an.get("t_grid")
    reports = []
    r0 = an.get("r0")
    if "H1" in wanted:
        reports.append(checks.check_H1(model, box=cap, t_grid=t_grid))
    if "H2" in wanted:
        reports.append(checks.check_H2(model, V, cap=cap, t_grid=t_grid, **lvl))
    if "H3" in wanted or (r0 is None and any(h in wanted for h in ("H7", "H8", "H9"))):
        rep = checks.check_H3(model, V, cap=cap, t_grid=t_grid, **lvl)
        reports.append(rep)
        if r0 is None and rep.holds("H3"):
            r0 = rep.constants["H3_r0"]
    if "H4" in wanted:
        reports.append(checks.check_H4(model, V, cap=cap, t_grid=t_grid))
    if "H5" in wanted or "H6" in wanted:
        reports.append(checks.check_H5_H6(model, V, t_grid=t_grid, r0=r0, **lvl))
    need_r0 = [h for h in ("H7", "H8", "H9") if h in wanted]
    if need_r0 and r0 is None and "i_grid" not in an:
        rep = HypothesisReport({h: UNDETERMINED for h in need_r0})
        rep.constants["reason"] = "no inner level r0 available (H3 did not hold)"
        reports.append(rep)
        need_r0 = []
    i_grid = an.get("i_grid")
    if "H7" in need_r0:
        reports.append(checks.check_H7(model, V, i_grid=i_grid, r0=r0, t_grid=t_grid))
    if "H8" in need_r0:
        reports.append(checks.check_H8(model, V, i_grid=i_grid, r0=r0, t_grid=t_grid))
    if "H9" in need_r0:
        if r0 is None:
            raise ConfigError("analysis.r0: required for H9 when H3 does not hold")
        reports.append(checks.check_H9(model, V, cfg.a, r0, R_grid=an.get("R_grid")))
    report = HypothesisReport.merge(*reports)
    report.verdicts = {h: report.verdicts[h] for h in HYPOTHESES if h in report.verdicts and h in wanted}
    for lv in an.get("theta_levels", []):
        report.constants[f"theta({lv})"] = checks.theta(model, V, float(lv), t_grid=t_grid)
    return report, r0


def _aggregate(verdicts):
    vals = list(verdicts)
    if FAILS in vals:
        return EXIT_FAIL
    if UNDETERMINED in vals:
        return EXIT_UNDETERMINED
    return EXIT_OK


def cmd_check(cfg: RunConfig):
    report, _ = run_checks(cfg)
    return report.to_dict(), _aggregate(report.verdicts.values())


def _ensemble(cfg: RunConfig, n_default=20):
    an = cfg.analysis
    n = _seed(cfg, an.get("n_histories", n_default))
    return default_ensemble(cfg.model, n, float(an.get("lo", 0.01)), float(an.get("hi", 5.0)), cfg.history.M)


def cmd_persistence(cfg: RunConfig):
    an = cfg.analysis
    pc = PersistenceConfig(cfg.V, _ensemble(cfg), float(an.get("t_end", 100.0)),
                           float(an.get("tail_fraction", 0.8)), float(an.get("margin", 1e-4)),
                           an.get("epsilon"), cfg.step)
    trajs = run_ensemble(cfg.model, pc.ensemble, pc.t_end, pc.step)
    verdict = classify(cfg.model, cfg.V, pc, trajectories=trajs)
    result = verdict.to_dict()
    if an.get("predict", False):
        sub = replace(cfg, analysis={**an, "hypotheses": ["H3", "H4", "H5", "H6"]})
        report, _ = run_checks(sub)
        result["hypotheses"] = report.to_dict()
        try:
            bound = uniform_bound(cfg.model, cfg.V, report)
            result["predicted_bound"] = bound
            k = report.constants.get("H6_k")
            if k is not None:
                checks_ = [h6_ratio_check(tr, cfg.V, k) for tr in trajs]
                result["h6_ratio"] = {"holds": all(c.holds for c in checks_),
                                      "worst_ratio": max(c.worst_ratio for c in checks_),
                                      "bound": checks_[0].bound}
        except PersistDDEError as exc:
            result["predicted_bound"] = None
            result["predicted_bound_reason"] = str(exc)
    code = {"uniform": EXIT_OK, "strong": EXIT_OK, "weak": EXIT_OK, "none": EXIT_FAIL}.get(
        verdict.verdict, EXIT_UNDETERMINED)
    return result, code


def cmd_attractor(cfg: RunConfig):
    an = cfg.analysis
    kw = _sampling_kw(an, "cap", "n_levels", "n_dirs")
    cert = iterate_attractor(cfg.model, cfg.V, cfg.a, float(an.get("R0", 1.0)),
                             int(an.get("max_iter", 40)), float(an.get("tol", 1e-6)),
                             t_grid=an.get("t_grid"), **kw)
    result = {"certificate": cert.to_dict()}
    ok = cert.verdict == "certified"
    if an.get("confirm", True):
        n = _seed(cfg, an.get("n_histories", 20))
        ens = default_ensemble(cfg.model, n, float(an.get("lo", 0.01)), 0.95 * cert.R0, cfg.history.M)
        chk = confirm_attraction(cfg.model, ens, cert, float(an.get("t_end", 400.0)),
                                 float(an.get("confirm_tol", 1e-2)), step=cfg.step)
        result["confirmation"] = chk
        ok = ok and chk.confirmed
    return result, EXIT_OK if ok else EXIT_FAIL


def cmd_periodic(cfg: RunConfig):
    an = cfg.analysis
    model = cfg.model
    problem = PeriodMapProblem(model, M=cfg.history.M, V=cfg.V, r0=an.get("r0"), R=an.get("R"),
                               solver=an.get("solver", "newton"), tol=float(an.get("tol", 1e-10)),
                               max_iter=int(an.get("max_iter", 60)), step=cfg.step, period=an.get("period"))
    if cfg.raw.get("history"):
        seeds = [cfg.history]
    else:
        n = _seed(cfg, 4)
        vals = np.geomspace(float(an.get("lo", 0.1)), float(an.get("hi", 3.0)), n)
        seeds = [make_history_constant(np.full(model.dim, v), model.tau, cfg.history.M) for v in vals]
    attempts = []
    found = None
    for s in seeds:
        res = find_periodic(problem, s)
        attempts.append({"initial": s.values[0], "success": res.success, "reason": res.reason,
                         "residual": res.residual, "iterations": res.iterations})
        log.info("periodic seed %s: %s (residual %.3g)", s.values[0], res.reason, res.residual)
        if res.success:
            found = res
            break
    result = {"period": problem.T, "attempts": attempts}
    files = []
    code = EXIT_FAIL
    if found is not None:
        result["orbit"] = found.to_dict()
        result["drift"] = orbit_drift(model, found.segment, int(an.get("drift_periods", 10)),
                                      cfg.step, T=problem.T)
        traj = found.trajectory
        x = traj.states
        path = os.path.join(cfg.out_dir, "orbit.csv")
        write_csv(path, _state_header(model.dim), np.column_stack([traj.mesh, x, cfg.V(x)]))
        files.append(path)
        v = cfg.V(x)
        r0 = an.get("r0", 0.5 * float(v.min()))
        R = an.get("R", 2.0 * float(v.max()))
        cert = existence_certificate(model, cfg.V, r0, R, cone=model.cone)
        cpath = os.path.join(cfg.out_dir, "certificate.json")
        write_json(cpath, cert.to_dict())
        files.append(cpath)
        result["certificate"] = cert.to_dict()
        code = {"consistent": EXIT_OK, "inconsistent": EXIT_FAIL}.get(cert.verdict, EXIT_UNDETERMINED)
    result["files"] = files
    return result, code


COMMAND_FUNCS = {
    "simulate": cmd_simulate,
    "check": cmd_check,
    "persistence": cmd_persistence,
    "attractor": cmd_attractor,
    "periodic": cmd_periodic,
}


def build_parser():
    p = argparse.ArgumentParser(prog="persist-dde", description="Persistence analysis for delay differential equations.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: output.dir or .)")
    p.add_argument("--seed-grid", type=int, default=None,
                   help="number of seeds: ensemble size, periodic initial guesses or sampling levels")
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config, args.command, args.out, args.seed_grid)
        os.makedirs(cfg.out_dir, exist_ok=True)
        result, code = COMMAND_FUNCS[args.command](cfg)
    except ConfigError as exc:
        print(f"persist-dde: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PersistDDEError as exc:
        print(f"persist-dde: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {
        "command": args.command,
        "exit_code": code,
        "config": cfg.echo(),
        "result": result,
        "provenance": {"tool": "persist-dde", "version": __version__, "backend": BACKEND,
                       "threads": os.environ.get("PERSIST_DDE_THREADS")},
        "wall_time": time.perf_counter() - start,
    }
    path = os.path.join(cfg.out_dir, "report.json")
    write_json(path, report)
    log.info("wrote %s (exit %d)", path, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
