"""Command-line runner: verify | solve | localize | estimate | sweep.

Exit codes: 0 checks pass, 1 checks computed but failed, 2 usage or config
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import constitutive, degiorgi, estimates, solver
from .config import ExperimentConfig, load_config
from .errors import (AUnbounded, ConfigError, FsplabError, InadmissibleLambda,
                     NonMonotoneF, NumericalError)

log = logging.getLogger("fsplab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
HASH_KEY = "config_sha256"
A2_TOL = 1e-8


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


class Outputs:
    """Writes files into the output directory, each stamped with the config hash."""

    def __init__(self, cfg: ExperimentConfig, out: Optional[str]):
        self.cfg = cfg
        self.dir = Path(out) if out else cfg.out_dir
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    @property
    def preamble(self) -> list[str]:
        return [f"{HASH_KEY}: {self.cfg.sha256}"]

    def json(self, name: str, payload: dict) -> Path:
        body = {HASH_KEY: self.cfg.sha256, "config": self.cfg.echo(), **payload}
        p = self.dir / name
        p.write_text(json.dumps(_clean(body), indent=2, sort_keys=True) + "\n")
        self.written.append(name)
        return p

    def path(self, name: str) -> Path:
        self.written.append(name)
        return self.dir / name


def check_provenance(out_dir, expected: Optional[str] = None) -> dict:
    """Every JSON/CSV file in out_dir must carry the same config hash."""
    hashes = {}
    for p in sorted(Path(out_dir).iterdir()):
        if p.suffix == ".json":
            hashes[p.name] = json.loads(p.read_text()).get(HASH_KEY)
        elif p.suffix == ".csv":
            first = p.read_text().splitlines()[:1]
            line = first[0] if first else ""
            hashes[p.name] = line.split(":", 1)[1].strip() if line.startswith(f"# {HASH_KEY}:") else None
    values = set(hashes.values())
    ok = bool(hashes) and None not in values and len(values) == 1
    if ok and expected is not None:
        ok = values == {expected}
    return {"ok": ok, "files": hashes}


# -- shared pieces -----------------------------------------------------------------
def _bundle(cfg: ExperimentConfig):
    prof = cfg.profile()
    if prof.is_calibration:
        return prof
    return constitutive.build_bundle(prof, cfg.Lambda,
                                     n_probe=cfg.integer("constitutive", "probe_points", 200))


def _model(cfg: ExperimentConfig):
    return _bundle(cfg)


def _write_traj(out: Outputs, traj: solver.Trajectory, stem: str = "trajectory") -> None:
    traj.write_csv(out.path(f"{stem}.csv"), out.preamble)
    out.json(f"{stem}.json", traj.metadata())


def _params(cfg: ExperimentConfig, bundle) -> degiorgi.DeGiorgiParams:
    geo = cfg.geometry()
    S = cfg.num("degiorgi", "S") if cfg.has("degiorgi", "S") else None
    return degiorgi.params_for(bundle, geo.N, cfg.num("degiorgi", "R"),
                               cfg.num("degiorgi", "Rprime"), S)


# -- subcommands --------------------------------------------------------------------
def cmd_verify(cfg: ExperimentConfig, out: Outputs) -> int:
    prof = cfg.profile()
    if prof.is_calibration:
        raise ConfigError("verify needs a degenerate profile, not kind = calibration")
    L = cfg.Lambda
    n_probe = cfg.integer("constitutive", "probe_points", 200)
    report = constitutive.analyze_profile(prof, L, n_probe=n_probe)
    payload = {"report": report.to_dict(), "Lambda": L, "lambda": 2.0 / (L + 1.0),
               "A": report.A, "a": report.a, "B": report.B, "C1": report.C1}
    try:
        bundle = constitutive.build_bundle(prof, L, n_probe=n_probe)
    except (InadmissibleLambda, NonMonotoneF, AUnbounded) as exc:
        payload.update(error=type(exc).__name__, message=str(exc), passed=False)
        out.json("report.json", payload)
        return EXIT_FAIL
    grid = np.geomspace(prof.probe_floor(), prof.M, n_probe)
    dev = constitutive.verify_A2(bundle, grid)
    payload.update(A2_deviation=dev, probe_grid={"lo": float(grid[0]), "hi": float(grid[-1]),
                                                 "n": n_probe})
    passed = report.ok and dev <= A2_TOL
    payload["passed"] = passed
    out.json("report.json", payload)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_solve(cfg: ExperimentConfig, out: Outputs) -> int:
    model = _model(cfg)
    traj = solver.solve(model, cfg.geometry(), cfg.solver_config())
    _write_traj(out, traj)
    ok = traj.diagnostics["max_principle"]
    out.json("report.json", {"mode": traj.mode, "epsilon": traj.epsilon, "steps":
                             traj.diagnostics["steps"], "dt": traj.dt, "max_principle": ok,
                             "phi_note": "boundary excess ramps linearly to phi_max over t_ramp"})
    return EXIT_OK if ok else EXIT_FAIL


def _sweep(cfg: ExperimentConfig, model) -> solver.SweepResult:
    return solver.epsilon_sweep(model, cfg.geometry(), cfg.solver_config(), cfg.eps_list(),
                                workers=cfg.integer("solver", "workers", 1))


def cmd_localize(cfg: ExperimentConfig, out: Outputs) -> int:
    model = _model(cfg)
    Rp = cfg.num("degiorgi", "Rprime")
    tol = cfg.num("degiorgi", "tol", 1e-6)
    x0 = cfg.num("degiorgi", "x0", 0.0)
    sweep = _sweep(cfg, model)
    fronts = {}
    for eps, traj in zip(sweep.epsilons, sweep.trajectories):
        fronts[eps] = degiorgi.front_trace(traj, x0, tol)
    smallest = sweep.trajectories[-1]
    ft = fronts[sweep.epsilons[-1]]
    ft.write_csv(out.path("fronts.csv"), out.preamble)
    _write_traj(out, smallest)
    T_loc = {repr(e): f.localization_time(Rp) for e, f in fronts.items()}
    payload = {"epsilons": sweep.epsilons, "localization_time": T_loc, "dt": smallest.dt,
               "sup_differences": sweep.sup_differences,
               "comparison_excess": sweep.comparison_excess, "tol": tol, "Rprime": Rp}
    measured = ft.localization_time(Rp)
    if isinstance(model, constitutive.ConstitutiveBundle):
        params = _params(cfg, model)
        rep = degiorgi.analyze(smallest, model, params,
                               n_max=cfg.integer("degiorgi", "n_max", 8))
        rep.write_ygrid(out.path("ygrid.csv"), out.preamble)
        out.json("degiorgi.json", rep.threshold_json())
        payload.update(T_star=rep.T_star, Y=rep.Y, recursion_ok=rep.recursion.ok(rep.Y))
        ok = rep.T_star > 0 and measured > 0
    else:
        payload["degiorgi"] = "skipped: calibration mode has no constitutive bundle"
        ok = False
    payload["passed"] = ok
    out.json("report.json", payload)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_estimate(cfg: ExperimentConfig, out: Outputs) -> int:
    model = _model(cfg)
    traj = solver.solve(model, cfg.geometry(), cfg.solver_config())
    t_start = cfg.num("estimates", "t_start", 0.0)
    bound = cfg.num("estimates", "energy_bound", 0.05)
    res = {"energy_residual": None, "lemma1_min_gap": None, "lemma2": None, "grad_G": None}
    if isinstance(model, constitutive.ConstitutiveBundle):
        inner = cfg.num("estimates", "theta_inner", 0.85 * traj.geometry.L)
        outer = cfg.num("estimates", "theta_outer", 0.95 * traj.geometry.L)
        params = _params(cfg, model)
        res = estimates.audit(traj, model, params, estimates.radial_cutoff(inner, outer),
                              n_samples=cfg.integer("estimates", "samples", 10_000),
                              seed=cfg.integer("estimates", "seed", 0), t_start=t_start)
        ok = (res["lemma1"]["negative"] == 0 and res["lemma2"]["lhs"] <= res["lemma2"]["rhs"]
              and math.isfinite(res["grad_G"]["c_min"]) and res["energy_residual"] <= bound)
    else:
        res["energy_residual"] = estimates.energy_residual(traj, None, t_start)
        ok = res["energy_residual"] <= bound
    res["energy_note"] = "identity carries the 1/2 factors of its derivation"
    res["passed"] = ok
    out.json("estimates.json", res)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(cfg: ExperimentConfig, out: Outputs) -> int:
    model = _model(cfg)
    sweep = _sweep(cfg, model)
    Rp = cfg.num("degiorgi", "Rprime") if cfg.has("degiorgi", "Rprime") else None
    tol = cfg.num("degiorgi", "tol", 1e-6) if cfg.parser.has_section("degiorgi") else 1e-6
    runs = []
    for k, (eps, traj) in enumerate(zip(sweep.epsilons, sweep.trajectories)):
        _write_traj(out, traj, f"trajectory_{k}")
        row = {"epsilon": eps, "max_principle": traj.diagnostics["max_principle"]}
        if Rp is not None:
            row["localization_time"] = degiorgi.front_trace(traj, 0.0, tol).localization_time(Rp)
        runs.append(row)
    ok = sweep.comparison_ok and all(r["max_principle"] for r in runs)
    out.json("sweep.json", {"runs": runs, "sup_differences": sweep.sup_differences,
                            "comparison_excess": sweep.comparison_excess, "passed": ok})
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "solve": cmd_solve, "localize": cmd_localize,
            "estimate": cmd_estimate, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsplab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI experiment file")
        sp.add_argument("--out", help="output directory (default [output] dir)")
        sp.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override)
        out = Outputs(cfg, args.out)
        code = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FsplabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{args.command}: {'pass' if code == EXIT_OK else 'fail'} -> {out.dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
