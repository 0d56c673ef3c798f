"""Confidence intervals for interfacial stiffness from ultrasonic phase data,
and their propagation to bond strength through a calibration regression."""

from .bond import BandModel, BondPairs, BudgetSplit, allocate_budget, band_at, fit_band, propagate
from .confidence import ConfidenceInterval
from .errors import (
    BondgaugeError,
    BudgetError,
    ConfigError,
    DegenerateDesign,
    DomainError,
    InfeasibleSet,
    JacobianFailure,
    NonFiniteResult,
    OptimizerFailure,
    RankDeficient,
    SolverStall,
)
from .estimation import LinearFit, NlsFit, fit_linear, fit_nls, profile_scan
from .intervals import (
    LOG_STIFFNESS,
    QoiSelector,
    box_constrained_minimum,
    calibrate_q,
    ls_interval,
    ssb_endpoints,
    ssb_from_linearization,
    ssb_interval,
)
from .model import (
    BOUNDARY_THETA,
    DEFAULT_BOX,
    DEFAULT_GRID,
    DEFAULT_MATERIAL,
    TYPICAL_THETA,
    FrequencyGrid,
    LinearizedModel,
    MaterialSpec,
    ParameterBox,
    ParameterVector,
    jacobian,
    linearize,
    phase_response,
    reflection_coefficient,
)
from .simulation import (
    ExperimentConfig,
    ExperimentReport,
    NoiseGrid,
    contract_box,
    run_bond_sweep,
    run_contraction_experiment,
    run_coverage_experiment,
    sample_bond_pairs,
    sample_phases,
)
from .stats import (
    BinomialSummary,
    GaussianStream,
    beta_quantile,
    chi2_quantile,
    clopper_pearson,
    f_quantile,
    t_quantile,
)

__version__ = "0.1.0"
