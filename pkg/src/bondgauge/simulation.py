"""Monte Carlo experiments: coverage and length versus noise, box contraction,
and bond-model parameter sweeps.

Every replication draws from its own stream keyed by ``(seed, cell, r)``.
A cell is one noise level (or one contraction exponent); the SSB and LS
methods are evaluated on the same draws inside a cell, so their lengths
are compared on common data. Results are reduced in replication order,
which makes reports independent of the worker count.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bond import BondPairs, allocate_budget, fit_band, propagate
from .confidence import ConfidenceInterval
from .errors import BondgaugeError, ConfigError
from .estimation import DEFAULT_STARTS, fit_linear, fit_nls
from .intervals import LOG_STIFFNESS, _jacobian_scale, ls_interval, ssb_from_linearization
from .model import (
    DEFAULT_BOX,
    DEFAULT_GRID,
    DEFAULT_MATERIAL,
    FrequencyGrid,
    MaterialSpec,
    ParameterBox,
    ParameterVector,
    TYPICAL_THETA,
    linearize,
    phase_response,
)
from .stats import BinomialSummary, GaussianStream, clopper_pearson

METHODS = ("ssb", "ls")
REPORT_COLUMNS = (
    "method", "sigma", "coverage_stiffness", "cp_lo", "cp_hi",
    "coverage_bond", "cp_lo_bond", "cp_hi_bond",
    "mean_len_stiffness", "mean_len_bond", "failures",
)
# stream tags under a replication key
_PHASE, _PAIRS, _STARTS = 0, 1, 2
# cell offsets keep the three experiment kinds on disjoint streams
_CONTRACTION_CELLS = 1 << 20
_SWEEP_CELLS = 2 << 20


@dataclass(frozen=True)
class NoiseGrid:
    sigmas: tuple

    def __post_init__(self):
        sig = tuple(float(s) for s in np.atleast_1d(self.sigmas))
        if not sig:
            raise ValueError("noise grid is empty")
        if any(s <= 0 for s in sig) or any(b <= a for a, b in zip(sig, sig[1:])):
            raise ValueError("noise levels must be positive and strictly increasing")
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def linear(cls, lo: float = 1.0, hi: float = 10.0, n: int = 20) -> "NoiseGrid":
        return cls(tuple(np.linspace(lo, hi, n)))

    @property
    def middle(self) -> float:
        """The ``n // 2``-th level (0-based), 5.7368 for the default grid."""
        return self.sigmas[len(self.sigmas) // 2]

    def __len__(self):
        return len(self.sigmas)


DEFAULT_NOISE = NoiseGrid.linear()


@dataclass(frozen=True)
class BondParams:
    beta1: float = 1.573
    sigma_b: float = 0.630
    n_pairs: int = 60
    x_lo: float = 13.0
    x_hi: float = 17.0

    def x_design(self, n_pairs: int | None = None) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_pairs if n_pairs is None else n_pairs)


@dataclass(frozen=True)
class ExperimentConfig:
    theta_true: ParameterVector = TYPICAL_THETA
    box: ParameterBox = DEFAULT_BOX
    grid: FrequencyGrid = DEFAULT_GRID
    mat: MaterialSpec = DEFAULT_MATERIAL
    noise_grid: NoiseGrid = NoiseGrid((1.0, DEFAULT_NOISE.middle, 10.0))
    replications: int = 500
    alpha: float = 0.05
    eta: float = 0.01
    bond_params: BondParams = BondParams()
    methods: tuple = METHODS
    seed: int = 0
    starts: int = DEFAULT_STARTS
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0.0 < self.eta < self.alpha < 1.0:
            raise ConfigError("need 0 < eta < alpha < 1")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ConfigError(f"unknown or empty methods: {sorted(bad)}")
        if not self.box.contains(np.asarray(self.theta_true)):
            raise ConfigError("theta_true lies outside the box")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in self.methods))

    @property
    def budget(self):
        return allocate_budget(self.alpha, self.eta)

    @property
    def stiffness_truth(self) -> float:
        return float(LOG_STIFFNESS(np.asarray(self.theta_true)))

    @property
    def bond_truth(self) -> float:
        return self.bond_params.beta1 * self.stiffness_truth


@dataclass(frozen=True)
class CellSummary:
    method: str
    label: str
    value: float
    coverage_stiffness: float
    cp_stiffness: tuple
    coverage_bond: float
    cp_bond: tuple
    mean_len_stiffness: float
    mean_len_bond: float
    failures: int
    replications: int
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {
            "method": self.method,
            self.label: self.value,
            "coverage_stiffness": self.coverage_stiffness,
            "cp_lo": self.cp_stiffness[0],
            "cp_hi": self.cp_stiffness[1],
            "coverage_bond": self.coverage_bond,
            "cp_lo_bond": self.cp_bond[0],
            "cp_hi_bond": self.cp_bond[1],
            "mean_len_stiffness": self.mean_len_stiffness,
            "mean_len_bond": self.mean_len_bond,
            "failures": self.failures,
        }
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    label: str
    cells: tuple

    def columns(self) -> list:
        cols = ["method", self.label] + list(REPORT_COLUMNS[2:])
        for cell in self.cells:
            for key in cell.extra:
                if key not in cols:
                    cols.append(key)
        return cols

    def cell(self, method: str, value) -> CellSummary:
        for c in self.cells:
            if c.method == method and c.value == value:
                return c
        raise KeyError((method, value))

    def series(self, method: str, attr: str) -> tuple[np.ndarray, np.ndarray]:
        cells = [c for c in self.cells if c.method == method]
        return np.array([c.value for c in cells]), np.array([getattr(c, attr) for c in cells])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns(), lineterminator="\n")
        writer.writeheader()
        for cell in self.cells:
            writer.writerow({k: _fmt(v) for k, v in cell.row().items()})
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv_text())
        return path

    def plot_data_text(self) -> str:
        """Long-format series for plotting: ``figure,series,x,y,y_lo,y_hi``."""
        buf = io.StringIO()
        buf.write("figure,series,x,y,y_lo,y_hi\n")
        for cell in self.cells:
            x = _fmt(cell.value)
            buf.write(f"coverage_stiffness,{cell.method},{x},{_fmt(cell.coverage_stiffness)},"
                      f"{_fmt(cell.cp_stiffness[0])},{_fmt(cell.cp_stiffness[1])}\n")
            buf.write(f"coverage_bond,{cell.method},{x},{_fmt(cell.coverage_bond)},"
                      f"{_fmt(cell.cp_bond[0])},{_fmt(cell.cp_bond[1])}\n")
            buf.write(f"length_stiffness,{cell.method},{x},{_fmt(cell.mean_len_stiffness)},,\n")
            buf.write(f"length_bond,{cell.method},{x},{_fmt(cell.mean_len_bond)},,\n")
        return buf.getvalue()

    def write(self, out_dir) -> list:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = out_dir / f"{self.kind}.csv"
        plot = out_dir / f"{self.kind}_plot.csv"
        report.write_text(self.to_csv_text())
        plot.write_text(self.plot_data_text())
        return [report, plot]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if np.isfinite(v) else "nan"
    return str(v)


# -- data generation -------------------------------------------------------

def sample_phases(theta_true, grid: FrequencyGrid, mat: MaterialSpec, sigma: float, seed) -> np.ndarray:
    """Noisy phase data ``f(theta) + sigma * e``.

    ``seed`` may be an integer or a :class:`GaussianStream`.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    clean = phase_response(np.asarray(theta_true, dtype=float), grid, mat)
    if sigma == 0:
        return clean
    stream = seed if isinstance(seed, GaussianStream) else GaussianStream(seed)
    return clean + sigma * stream.normal(grid.n)


def sample_bond_pairs(beta1: float, sigma_b: float, n_pairs: int, x_design, seed) -> BondPairs:
    """Pairs from the through-origin line ``z = beta1 x + sigma_b e``."""
    if sigma_b < 0:
        raise ValueError("sigma_b must be non-negative")
    x = np.asarray(x_design, dtype=float)
    if x.size != n_pairs:
        raise ValueError(f"x_design has {x.size} points, expected {n_pairs}")
    stream = seed if isinstance(seed, GaussianStream) else GaussianStream(seed)
    z = beta1 * x
    if sigma_b > 0:
        z = z + sigma_b * stream.normal(n_pairs)
    return BondPairs(x, z)


# -- one replication -------------------------------------------------------

@dataclass(frozen=True)
class _Outcome:
    stiffness: ConfidenceInterval | None
    bond: ConfidenceInterval | None
    failed: bool


def _stiffness_intervals(config: ExperimentConfig, box: ParameterBox, y, start_seed) -> dict:
    gamma = config.budget.gamma
    out = {}
    try:
        fit = fit_nls(y, config.grid, box, config.mat, starts=config.starts, seed=start_seed)
        lin = linearize(fit.theta_hat, y, config.grid, config.mat, scale=_jacobian_scale(box))
    except BondgaugeError:
        return {m: None for m in config.methods}
    for method in config.methods:
        try:
            if method == "ssb":
                out[method] = ssb_from_linearization(lin, box, gamma, LOG_STIFFNESS)
            else:
                out[method] = ls_interval(lin, fit_linear(lin), box, gamma, LOG_STIFFNESS)
        except BondgaugeError:
            out[method] = None
    return out


def _replicate(task) -> dict:
    config, box, sigma, cell, rep = task
    stream = GaussianStream(config.seed, (cell, rep))
    y = sample_phases(config.theta_true, config.grid, config.mat, sigma, stream.child(_PHASE))
    start_seed = int(stream.child(_STARTS).uniform(1)[0] * 2**31)
    intervals = _stiffness_intervals(config, box, y, start_seed)
    bp = config.bond_params
    pairs = sample_bond_pairs(bp.beta1, bp.sigma_b, bp.n_pairs, bp.x_design(), stream.child(_PAIRS))
    band = fit_band(pairs, config.eta)
    outcomes = {}
    for method, ci in intervals.items():
        if ci is None:
            outcomes[method] = _Outcome(None, None, True)
        else:
            outcomes[method] = _Outcome(ci, propagate(band, ci), ci.flagged)
    return outcomes


def _map(func, tasks, threads: int):
    threads = resolve_threads(threads)
    if threads <= 1 or len(tasks) < 2:
        return [func(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks, chunksize=chunk))


def resolve_threads(threads: int | None) -> int:
    """Worker count; ``BONDGAUGE_THREADS`` overrides the argument."""
    env = os.environ.get("BONDGAUGE_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"BONDGAUGE_THREADS must be an integer, got {env!r}") from exc
    if threads is None or threads <= 0:
        threads = os.cpu_count() or 1
    return int(threads)


def _summarize(method, label, value, outcomes, stiff_truth, bond_truth, extra=None) -> CellSummary:
    n = len(outcomes)
    cov_s = cov_b = failures = 0
    len_s, len_b = [], []
    for o in outcomes:
        failures += o.failed
        if o.stiffness is None:
            continue
        cov_s += o.stiffness.contains(stiff_truth)
        cov_b += o.bond.contains(bond_truth)
        len_s.append(o.stiffness.length)
        len_b.append(o.bond.length)
    cp_s = clopper_pearson(BinomialSummary(cov_s, n))
    cp_b = clopper_pearson(BinomialSummary(cov_b, n))
    return CellSummary(
        method, label, value,
        cov_s / n, (cp_s.lower, cp_s.upper),
        cov_b / n, (cp_b.lower, cp_b.upper),
        float(np.mean(len_s)) if len_s else float("nan"),
        float(np.mean(len_b)) if len_b else float("nan"),
        int(failures), n, extra or {},
    )


def _run_cells(config: ExperimentConfig, cells, label: str, kind: str) -> ExperimentReport:
    """``cells`` is a list of ``(cell_index, value, box, sigma)``."""
    tasks = [(config, box, sigma, idx, r) for idx, _, box, sigma in cells for r in range(config.replications)]
    results = _map(_replicate, tasks, config.threads)
    summaries = []
    for method in config.methods:
        for k, (_, value, _, _) in enumerate(cells):
            chunk = results[k * config.replications:(k + 1) * config.replications]
            summaries.append(_summarize(
                method, label, value, [r[method] for r in chunk],
                config.stiffness_truth, config.bond_truth,
            ))
    return ExperimentReport(kind, label, tuple(summaries))


def run_coverage_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Coverage and mean length of each method at every noise level."""
    cells = [(i, s, config.box, s) for i, s in enumerate(config.noise_grid.sigmas)]
    return _run_cells(config, cells, "sigma", "coverage")


def contract_box(box: ParameterBox, theta_true, shrink_exponent: int, protected_coords=(0,)) -> ParameterBox:
    """Halve every unprotected coordinate range ``shrink_exponent`` times.

    Each halving centers the new range on the truth when it fits inside the
    previous range and otherwise pins it against the endpoint it would
    cross, so the truth stays inside.
    """
    if shrink_exponent < 0:
        raise ValueError("shrink_exponent must be >= 0")
    theta = np.asarray(theta_true, dtype=float)
    if not box.contains(theta):
        raise ValueError("theta_true lies outside the box")
    lower, upper = box.lower.copy(), box.upper.copy()
    protected = set(int(j) for j in protected_coords)
    free = [j for j in range(lower.size) if j not in protected]
    for _ in range(shrink_exponent):
        for j in free:
            half = 0.25 * (upper[j] - lower[j])
            lo, hi = theta[j] - half, theta[j] + half
            if lo < lower[j]:
                lo, hi = lower[j], lower[j] + 2 * half
            elif hi > upper[j]:
                lo, hi = upper[j] - 2 * half, upper[j]
            lower[j], upper[j] = lo, hi
    return ParameterBox(lower, upper)


def run_contraction_experiment(config: ExperimentConfig, max_exponent: int = 10,
                               sigma: float | None = None, exponents=None) -> ExperimentReport:
    """Coverage and length as the nuisance ranges shrink by ``2**-i``.

    ``exponents`` restricts the run to a subset of ``range(max_exponent)``;
    each exponent keeps its own random streams, so the rows match those of
    the full run.
    """
    if max_exponent < 1:
        raise ValueError("max_exponent must be >= 1")
    chosen = range(max_exponent) if exponents is None else sorted(set(int(i) for i in exponents))
    if not chosen or min(chosen) < 0 or max(chosen) >= max_exponent:
        raise ValueError(f"exponents must lie in [0, {max_exponent})")
    sigma = config.noise_grid.middle if sigma is None else float(sigma)
    cells = [
        (_CONTRACTION_CELLS + i, i, contract_box(config.box, config.theta_true, i), sigma)
        for i in chosen
    ]
    return _run_cells(config, cells, "exponent", "contraction")


def run_bond_sweep(config: ExperimentConfig, beta1_grid, sigma_b_grid, n_grid,
                   method: str = "ssb", sigma: float | None = None) -> ExperimentReport:
    """Mean propagated length over a grid of bond-model parameters.

    One bank of stiffness intervals (at ``sigma``, by default the middle
    noise level) is computed once and reused in every cell; only the bond
    pairs are redrawn per cell.
    """
    if not (len(beta1_grid) and len(sigma_b_grid) and len(n_grid)):
        raise ValueError("sweep grids must be nonempty")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    sigma = config.noise_grid.middle if sigma is None else float(sigma)
    bank_cfg = replace(config, methods=(method,))
    tasks = [(bank_cfg, config.box, sigma, _SWEEP_CELLS, r) for r in range(config.replications)]
    bank = [res[method].stiffness for res in _map(_replicate, tasks, config.threads)]
    failed_bank = sum(ci is None or ci.flagged for ci in bank)
    truth = config.stiffness_truth
    x_lo, x_hi = config.bond_params.x_lo, config.bond_params.x_hi
    summaries = []
    cell = 0
    for beta1 in beta1_grid:
        for sigma_b in sigma_b_grid:
            for n_pairs in n_grid:
                cell += 1
                x = np.linspace(x_lo, x_hi, int(n_pairs))
                outcomes = []
                for r, ci in enumerate(bank):
                    if ci is None:
                        outcomes.append(_Outcome(None, None, True))
                        continue
                    stream = GaussianStream(config.seed, (_SWEEP_CELLS + cell, r, _PAIRS))
                    band = fit_band(sample_bond_pairs(beta1, sigma_b, int(n_pairs), x, stream), config.eta)
                    outcomes.append(_Outcome(ci, propagate(band, ci), ci.flagged))
                extra = {"beta1": float(beta1), "sigma_b": float(sigma_b), "n_pairs": int(n_pairs)}
                s = _summarize(method, "cell", cell, outcomes, truth, beta1 * truth, extra)
                summaries.append(replace(s, failures=failed_bank))
    return ExperimentReport("bondsweep", "cell", tuple(summaries))


def sweep_matrix(report: ExperimentReport) -> dict:
    """``{(beta1, sigma_b, n_pairs): mean_len_bond}`` from a bond sweep report."""
    return {
        (c.extra["beta1"], c.extra["sigma_b"], c.extra["n_pairs"]): c.mean_len_bond
        for c in report.cells
    }
