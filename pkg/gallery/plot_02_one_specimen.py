"""
One specimen, start to finish
=============================

Simulate a noisy phase measurement, fit the model inside the box, build the
strict-bounds and least-squares stiffness intervals, and carry the first one
through a calibration regression to a bond strength interval.
"""

import numpy as np

from bondgauge import (
    DEFAULT_BOX,
    DEFAULT_GRID,
    TYPICAL_THETA,
    allocate_budget,
    fit_band,
    fit_linear,
    fit_nls,
    linearize,
    ls_interval,
    propagate,
    sample_bond_pairs,
    sample_phases,
    ssb_from_linearization,
)
from bondgauge.model import DEFAULT_MATERIAL

sigma = 5.7368
y = sample_phases(TYPICAL_THETA, DEFAULT_GRID, DEFAULT_MATERIAL, sigma, seed=42)

# Overall 95% confidence; one point of the 5% goes to the regression band.
budget = allocate_budget(0.05, 0.01)
print(f"gamma = {budget.gamma:.6f}, so the stiffness interval is a {100 * budget.stiffness_level:.2f}% interval")

fit = fit_nls(y, DEFAULT_GRID, DEFAULT_BOX)
print("constrained fit:", np.array2string(fit.theta_hat, precision=4))
print(f"residual sum of squares {fit.residual_norm_sq:.1f} (expected about {DEFAULT_GRID.n * sigma**2:.0f})")

lin = linearize(fit.theta_hat, y, scale=DEFAULT_BOX.width)
ssb = ssb_from_linearization(lin, DEFAULT_BOX, budget.gamma)
ls = ls_interval(lin, fit_linear(lin), DEFAULT_BOX, budget.gamma)
print(f"SSB stiffness interval [{ssb.lower:.3f}, {ssb.upper:.3f}]  length {ssb.length:.3f}")
print(f"LS  stiffness interval [{ls.lower:.3f}, {ls.upper:.3f}]  length {ls.length:.3f}")
print(f"true log_k0 = {TYPICAL_THETA.log_k0}")

# Calibration pairs: sixty specimens with known stiffness and destructive
# strength tests, slope 1.573.
pairs = sample_bond_pairs(1.573, 0.63, 60, np.linspace(13, 17, 60), seed=7)
band = fit_band(pairs, budget.eta)
print(f"fitted line z = {band.beta0_hat:.3f} + {band.beta1_hat:.4f} x, s = {band.s:.3f}")

bond = propagate(band, ssb)
print(f"bond strength interval [{bond.lower:.2f}, {bond.upper:.2f}] at level {bond.level:.4f}")
print(f"true bond strength {1.573 * TYPICAL_THETA.log_k0:.2f}")
