"""Stiffness and bond strength intervals from ultrasonic phase data.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 output
write failure, 4 data grid does not match the config grid, 5 solver
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bond import BondPairs, allocate_budget, fit_band, propagate
from .confidence import ConfidenceInterval
from .config import RunConfig, load_config
from .errors import BondgaugeError, BudgetError, ConfigError
from .estimation import fit_linear, fit_nls
from .intervals import LOG_STIFFNESS, _jacobian_scale, ls_interval, ssb_from_linearization
from .model import PARAM_NAMES, FrequencyGrid, linearize
from .simulation import (
    resolve_threads,
    run_bond_sweep,
    run_contraction_experiment,
    run_coverage_experiment,
    sample_phases,
)
from .stats import GaussianStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WRITE = 3
EXIT_GRID = 4
EXIT_SOLVER = 5

log = logging.getLogger("bondgauge")
_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _write_text(path, text: str) -> None:
    try:
        path = Path(path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_WRITE) from exc


def _config(args) -> RunConfig:
    cfg = load_config(args.config, getattr(args, "profile", None))
    if not getattr(args, "verbose", 0):
        log.setLevel(_LEVELS[cfg.verbosity])
    exp = cfg.experiment
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "replications", None) is not None:
        changes["replications"] = args.replications
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = args.alpha
    if getattr(args, "eta", None) is not None:
        changes["eta"] = args.eta
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if changes:
        try:
            exp = replace(exp, **changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    return replace(cfg, experiment=exp)


def _theta_str(theta) -> str:
    return ", ".join(f"{n}={v:.6g}" for n, v in zip(PARAM_NAMES, np.asarray(theta)))


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.sigma < 0:
        raise ConfigError("--sigma must be non-negative")
    exp = cfg.experiment
    y = sample_phases(exp.theta_true, exp.grid, exp.mat, args.sigma, GaussianStream(exp.seed, (0,)))
    lines = ["omega_hz,phase_deg"]
    lines += [f"{f!r},{p!r}" for f, p in zip(exp.grid.hz.tolist(), y.tolist())]
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"theta* ({cfg.profile}): {_theta_str(exp.theta_true)}")
    print(f"wrote {exp.grid.n} rows to {args.out}")
    return EXIT_OK


def read_phase_csv(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"omega_hz", "phase_deg"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: expected columns omega_hz,phase_deg")
            rows = [(float(r["omega_hz"]), float(r["phase_deg"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def _check_grid(hz, grid: FrequencyGrid) -> None:
    if hz.size != grid.n or not np.allclose(hz, grid.hz, rtol=1e-9, atol=0.0):
        raise CliError(
            f"data has {hz.size} frequencies that do not match the config grid "
            f"({grid.n} points, {grid.hz[0]:.6g}-{grid.hz[-1]:.6g} Hz)",
            EXIT_GRID,
        )


def _load_pairs(path) -> BondPairs:
    try:
        return BondPairs.from_csv(path)
    except OSError as exc:
        raise ConfigError(f"cannot read pairs {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _interval_json(ci: ConfidenceInterval) -> dict:
    return {"lower": ci.lower, "upper": ci.upper, "level": ci.level,
            "method": ci.method, "flagged": ci.flagged}


# -- interval ---------------------------------------------------------------

def cmd_interval(args) -> int:
    cfg = _config(args)
    exp = cfg.experiment
    budget = allocate_budget(exp.alpha, exp.eta)
    hz, y = read_phase_csv(args.data)
    _check_grid(hz, exp.grid)
    pairs = _load_pairs(args.pairs) if args.pairs else None
    diagnostics = {}
    try:
        fit = fit_nls(y, exp.grid, exp.box, exp.mat, starts=exp.starts, seed=exp.seed)
        diagnostics["nls_residual"] = fit.residual_norm_sq
        diagnostics["theta_hat"] = fit.theta_hat.tolist()
        lin = linearize(fit.theta_hat, y, exp.grid, exp.mat, scale=_jacobian_scale(exp.box))
        if args.method == "ssb":
            ci = ssb_from_linearization(lin, exp.box, budget.gamma, LOG_STIFFNESS)
            diagnostics["q"] = ci.diagnostics["q"]
            diagnostics["solver_iters"] = ci.diagnostics["solver_iters"]
        else:
            ci = ls_interval(lin, fit_linear(lin), exp.box, budget.gamma, LOG_STIFFNESS)
            diagnostics["q"] = None
            diagnostics["solver_iters"] = 0
    except BondgaugeError as exc:
        extra = getattr(exc, "diagnostics", {})
        diagnostics.update({k: v for k, v in extra.items() if isinstance(v, (int, float, str))})
        print(json.dumps({"error": str(exc), "diagnostics": diagnostics}, indent=2), file=sys.stderr)
        raise CliError(f"solver failure: {exc}", EXIT_SOLVER) from exc
    report = {
        "method": args.method,
        "alpha": budget.alpha,
        "eta": budget.eta,
        "gamma": budget.gamma,
        "stiffness_interval": _interval_json(ci),
        "bond_interval": None,
        "diagnostics": diagnostics,
    }
    if pairs is not None:
        band = fit_band(pairs, budget.eta)
        report["bond_interval"] = _interval_json(propagate(band, ci))
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")
    return EXIT_OK


# -- propagate --------------------------------------------------------------

def cmd_propagate(args) -> int:
    cfg = _config(args)
    exp = cfg.experiment
    if not args.lower <= args.upper:
        raise ConfigError("--lower must not exceed --upper")
    budget = allocate_budget(exp.alpha, exp.eta)
    band = fit_band(_load_pairs(args.pairs), budget.eta)
    stiff = ConfidenceInterval(args.lower, args.upper, 1.0 - budget.gamma, method="given")
    out = propagate(band, stiff)
    report = {
        "eta": budget.eta,
        "band": {"beta0_hat": band.beta0_hat, "beta1_hat": band.beta1_hat,
                 "s": band.s, "n_obs": band.n_obs},
        "stiffness_interval": _interval_json(stiff),
        "bond_interval": _interval_json(out),
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")
    return EXIT_OK


# -- experiment -------------------------------------------------------------

def _summary_table(report) -> str:
    head = f"{'method':<7}{report.label:>10}{'cov':>8}{'cp_lo':>8}{'cov_bond':>10}{'len':>10}{'len_bond':>10}{'fail':>6}"
    lines = [head]
    for c in report.cells:
        lines.append(
            f"{c.method:<7}{c.value:>10.4g}{c.coverage_stiffness:>8.3f}{c.cp_stiffness[0]:>8.3f}"
            f"{c.coverage_bond:>10.3f}{c.mean_len_stiffness:>10.4g}{c.mean_len_bond:>10.4g}{c.failures:>6d}"
        )
    return "\n".join(lines)


def cmd_experiment(args) -> int:
    cfg = _config(args)
    exp = cfg.experiment
    resolve_threads(exp.threads)  # validates BONDGAUGE_THREADS before any work
    out_dir = Path(args.out_dir or cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc}", EXIT_WRITE) from exc
    log.info("running %s with %d replications, seed %d", args.kind, exp.replications, exp.seed)
    if args.kind == "coverage":
        report = run_coverage_experiment(exp)
    elif args.kind == "contraction":
        n = args.max_exponent if args.max_exponent is not None else cfg.max_exponent
        if n < 1:
            raise ConfigError("--max-exponent must be >= 1")
        report = run_contraction_experiment(exp, n)
    else:
        report = run_bond_sweep(exp, cfg.beta1_grid, cfg.sigma_b_grid, cfg.n_grid, method=args.method)
    try:
        paths = report.write(out_dir)
    except OSError as exc:
        raise CliError(f"cannot write report: {exc}", EXIT_WRITE) from exc
    print(_summary_table(report))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bondgauge", description=__doc__.split("\n\n")[0],
        epilog=__doc__.split("\n\n", 1)[1].strip(),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("config", nargs="?", default=None,
                       help="JSON config file (default: shipped defaults)")
        p.add_argument("--profile", help="named truth profile, e.g. typical or boundary")
        if seed:
            p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="write synthetic phase data")
    common(p)
    p.add_argument("--sigma", type=float, required=True, help="noise standard deviation (deg)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("interval", help="stiffness (and bond) interval from phase data")
    common(p)
    p.add_argument("--data", required=True, help="phase CSV with omega_hz,phase_deg")
    p.add_argument("--method", choices=("ssb", "ls"), default="ssb")
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--pairs", help="bond pairs CSV with x,z")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("propagate", help="propagate a stiffness interval through the bond band")
    common(p, seed=False)
    p.add_argument("--pairs", required=True)
    p.add_argument("--lower", type=float, required=True)
    p.add_argument("--upper", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("experiment", help="Monte Carlo experiments")
    p.add_argument("kind", choices=("coverage", "contraction", "bondsweep"))
    common(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--threads", type=int, help="worker processes (BONDGAUGE_THREADS overrides)")
    p.add_argument("--max-exponent", type=int, help="contraction steps (default from config)")
    p.add_argument("--method", choices=("ssb", "ls"), default="ssb", help="stiffness method for bondsweep")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, BudgetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BondgaugeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
