"""Confidence intervals for a linear functional ``h @ theta``.

Two constructions are provided on top of a linearized forward model:

* the strict-bounds interval, whose endpoints minimize and maximize
  ``h @ theta`` over the box intersected with the calibrated ellipsoid
  ``||y_tilde - K theta||^2 <= q``;
* the classical least-squares interval ``h @ theta_ls +/- t * se``,
  clipped to the range of ``h @ theta`` over the box.

The endpoint programs are solved by a one-dimensional search on the
multiplier of the quadratic constraint. Each inner problem is a
box-constrained convex least-squares problem, solved exactly with a small
primal active-set method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .confidence import ConfidenceInterval
from .errors import DomainError, InfeasibleSet, SolverStall
from .estimation import DEFAULT_STARTS, LinearFit, fit_linear, fit_nls
from .model import DEFAULT_MATERIAL, N_PARAMS, FrequencyGrid, LinearizedModel, MaterialSpec, ParameterBox, linearize
from .stats import f_quantile, t_quantile

CONSTRAINT_RTOL = 1e-8
MAX_MULTIPLIER_STEPS = 300
# outward rounding of reported endpoints, relative to the box range of h @ theta
ENDPOINT_PAD = 1e-9


@dataclass(frozen=True)
class QoiSelector:
    """Coefficients ``h`` of the quantity of interest ``h @ theta``."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).copy()
        if h.ndim != 1 or not np.all(np.isfinite(h)) or not np.any(h != 0):
            raise ValueError("h must be a finite, nonzero vector")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def coordinate(cls, index: int = 0, dim: int = N_PARAMS) -> "QoiSelector":
        h = np.zeros(dim)
        h[index] = 1.0
        return cls(h)

    def __call__(self, theta) -> float:
        return float(self.h @ np.asarray(theta, dtype=float))


LOG_STIFFNESS = QoiSelector.coordinate(0)


def _as_selector(h) -> QoiSelector:
    return h if isinstance(h, QoiSelector) else QoiSelector(h)


def box_lsq(a, r, lo, hi, g=None, weight=1.0, u0=None, max_iter=200):
    """Minimize ``weight * ||r - a u||^2 + g @ u`` subject to ``lo <= u <= hi``.

    Primal active-set method. Working-set variables are pinned to a bound;
    the free block is solved through a QR factorization of its columns, so
    the normal matrix is never formed. ``a`` must have full column rank.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[1]
    g = np.zeros(m) if g is None else np.asarray(g, dtype=float)
    start = 0.5 * (lo + hi) if u0 is None else u0
    u = np.clip(np.asarray(start, dtype=float), lo, hi)
    pinned = (u <= lo) | (u >= hi)
    for _ in range(max_iter):
        free = np.flatnonzero(~pinned)
        if free.size:
            rr = r - a[:, pinned] @ u[pinned]
            q_mat, r_mat = np.linalg.qr(a[:, free])
            rhs = q_mat.T @ rr
            if np.any(g[free]):
                rhs = rhs - np.linalg.solve(r_mat.T, g[free]) / (2.0 * weight)
            d = np.linalg.solve(r_mat, rhs) - u[free]
            # longest feasible fraction of the step
            with np.errstate(divide="ignore", invalid="ignore"):
                room = np.where(d < 0, (lo[free] - u[free]) / d, np.where(d > 0, (hi[free] - u[free]) / d, np.inf))
            k = int(np.argmin(room))
            if room[k] < 1.0:
                u[free] += room[k] * d
                j = free[k]
                u[j] = lo[j] if d[k] < 0 else hi[j]
                pinned[j] = True
                continue
            u[free] += d
            u[free] = np.clip(u[free], lo[free], hi[free])
        grad = -2.0 * weight * (a.T @ (r - a @ u)) + g
        wrong = np.zeros(m)
        lower_pins = pinned & (u <= lo)
        upper_pins = pinned & (u >= hi) & ~lower_pins
        wrong[lower_pins] = np.maximum(-grad[lower_pins], 0.0)
        wrong[upper_pins] = np.maximum(grad[upper_pins], 0.0)
        scale = np.abs(grad).max() + np.abs(g).max() + 1e-300
        j = int(np.argmax(wrong))
        if wrong[j] <= 1e-13 * scale:
            return u
        pinned[j] = False
    raise SolverStall("box least-squares active set did not terminate")


class _UnitBoxLinear:
    """Linearized model restated on the unit cube of the free box coordinates."""

    def __init__(self, lin: LinearizedModel, box: ParameterBox):
        k = np.asarray(lin.k_matrix, dtype=float)
        self.box = box
        self.free = box.width > 0
        self.width = box.width[self.free]
        self.a = k[:, self.free] * self.width
        self.r = lin.y_tilde - k @ box.lower
        m = int(self.free.sum())
        self.lo = np.zeros(m)
        self.hi = np.ones(m)

    def theta(self, u):
        theta = self.box.lower.copy()
        theta[self.free] += u * self.width
        return theta

    def residual_sq(self, u):
        res = self.r - self.a @ u
        return float(res @ res)

    def least_squares(self):
        if self.a.shape[1] == 0:
            return np.empty(0)
        return box_lsq(self.a, self.r, self.lo, self.hi)


def box_constrained_minimum(lin: LinearizedModel, box: ParameterBox):
    """Minimum of ``||y_tilde - K theta||^2`` over the box and its minimizer."""
    prob = _UnitBoxLinear(lin, box)
    u = prob.least_squares()
    return prob.residual_sq(u), prob.theta(u)


def calibrate_q(lin_residual_sq: float, n: int, p: int, gamma: float) -> float:
    """Radius of the confidence ellipsoid with unknown noise variance.

    ``q = S_min * (1 + p / (n - p) * F_gamma(p, n - p))`` where ``S_min`` is
    the box-constrained minimum of the linearized residual sum of squares.
    """
    if not n > p >= 1:
        raise DomainError("need n > p >= 1")
    if lin_residual_sq < 0:
        raise DomainError("residual sum of squares must be nonnegative")
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    return lin_residual_sq * (1.0 + p / (n - p) * f_quantile(p, n - p, gamma))


def _minimize_functional(prob: _UnitBoxLinear, g, q, u_ls, s_min):
    """Minimize ``g @ u`` over the unit box subject to residual <= q.

    Returns ``(u, diagnostics)``.
    """
    lo, hi = prob.lo, prob.hi
    # lam -> 0: g-optimal face; coordinates g does not see are fitted
    corner = np.where(g > 0, lo, hi)
    flat = g == 0
    u0 = corner.copy()
    if np.any(flat):
        sub_r = prob.r - prob.a[:, ~flat] @ corner[~flat]
        u0[flat] = box_lsq(prob.a[:, flat], sub_r, lo[flat], hi[flat])
    res0 = prob.residual_sq(u0)
    if res0 <= q:
        return u0, {"multiplier": 0.0, "steps": 0, "residual_sq": res0}
    if q - s_min <= 1e-14 * max(q, 1e-300):
        # ellipsoid has collapsed onto the box least-squares point
        return u_ls.copy(), {"multiplier": math.inf, "steps": 0, "residual_sq": s_min}

    u_warm = u_ls.copy()

    def solve(log_lam):
        nonlocal u_warm
        u = box_lsq(prob.a, prob.r, lo, hi, g=g, weight=math.exp(log_lam), u0=u_warm)
        u_warm = u
        return u, prob.residual_sq(u) - q

    # bracket: residual is nonincreasing in the multiplier
    scale_g = np.abs(g).sum()
    grad_scale = np.abs(prob.a.T @ prob.r).sum() + np.abs(prob.a).sum() + 1e-300
    s_hi = math.log(max(scale_g / grad_scale, 1e-200)) + 2.0
    u_hi, f_hi = solve(s_hi)
    steps = 1
    while f_hi > 0:
        s_hi += 3.0
        u_hi, f_hi = solve(s_hi)
        steps += 1
        if s_hi > 700:
            raise SolverStall("could not bracket the constraint multiplier", {"steps": steps})
    s_lo = s_hi - 3.0
    u_lo, f_lo = solve(s_lo)
    steps += 1
    while f_lo <= 0:
        s_hi, u_hi, f_hi = s_lo, u_lo, f_lo
        if f_hi >= -CONSTRAINT_RTOL * q:
            return u_hi, {"multiplier": math.exp(s_hi), "steps": steps, "residual_sq": f_hi + q}
        s_lo -= 3.0
        u_lo, f_lo = solve(s_lo)
        steps += 1
        if s_lo < -700:
            raise SolverStall("could not bracket the constraint multiplier", {"steps": steps})
    # Illinois false position on the log multiplier; the feasible end is kept
    side = 0
    w_lo, w_hi = f_lo, f_hi
    while steps < MAX_MULTIPLIER_STEPS:
        if f_hi >= -CONSTRAINT_RTOL * q:
            return u_hi, {"multiplier": math.exp(s_hi), "steps": steps, "residual_sq": f_hi + q}
        s_mid = (s_lo * w_hi - s_hi * w_lo) / (w_hi - w_lo)
        if not (s_lo < s_mid < s_hi) or steps % 8 == 7:
            s_mid = 0.5 * (s_lo + s_hi)
        u_mid, f_mid = solve(s_mid)
        steps += 1
        if f_mid > 0:
            s_lo, u_lo, f_lo, w_lo = s_mid, u_mid, f_mid, f_mid
            if side == -1:
                w_hi *= 0.5
            side = -1
        else:
            s_hi, u_hi, f_hi, w_hi = s_mid, u_mid, f_mid, f_mid
            if side == 1:
                w_lo *= 0.5
            side = 1
        if s_hi - s_lo < 1e-13:
            return u_hi, {"multiplier": math.exp(s_hi), "steps": steps, "residual_sq": f_hi + q}
    raise SolverStall(
        "constraint multiplier search exhausted its budget",
        {"steps": steps, "gap": f_hi, "q": q},
    )


def _kkt_residual(prob, g, u, lam):
    grad = g - 2.0 * lam * (prob.a.T @ (prob.r - prob.a @ u)) if math.isfinite(lam) else np.zeros_like(g)
    # box multipliers absorb gradient components pushing outward at a bound
    free = (u > prob.lo) & (u < prob.hi)
    out = grad.copy()
    out[(u <= prob.lo) & (grad > 0)] = 0.0
    out[(u >= prob.hi) & (grad < 0)] = 0.0
    out[free] = grad[free]
    return float(np.abs(out).max()) if out.size else 0.0


def ssb_endpoints(
    lin: LinearizedModel,
    box: ParameterBox,
    q: float,
    h=LOG_STIFFNESS,
    level: float = 0.95,
    s_min: float | None = None,
) -> ConfidenceInterval:
    """Extremes of ``h @ theta`` over ``{theta in box : ||y_tilde - K theta||^2 <= q}``.

    Raises
    ------
    InfeasibleSet
        If ``q`` is below the box-constrained minimum of the residual.
    SolverStall
        If the multiplier search cannot meet the constraint tolerance.
    """
    sel = _as_selector(h)
    prob = _UnitBoxLinear(lin, box)
    u_ls = prob.least_squares()
    s_box = prob.residual_sq(u_ls)
    if s_min is None:
        s_min = s_box
    if s_box > q * (1.0 + 1e-12) + 1e-300:
        raise InfeasibleSet(f"q = {q:.6g} is below the box minimum {s_box:.6g}")
    const = float(sel.h @ box.lower)
    g = sel.h[prob.free] * prob.width
    if g.size == 0 or not np.any(g):
        value = const + float(g @ u_ls) if g.size else const
        return ConfidenceInterval(value, value, level, method="ssb", diagnostics={"q": q, "s_min": s_box})
    u_min, d_min = _minimize_functional(prob, g, q, u_ls, s_box)
    u_max, d_max = _minimize_functional(prob, -g, q, u_ls, s_box)
    lower = const + float(g @ u_min)
    upper = const + float(g @ u_max)
    diagnostics = {
        "q": q,
        "s_min": s_box,
        "solver_iters": d_min["steps"] + d_max["steps"],
        "kkt_lower": _kkt_residual(prob, g, u_min, d_min["multiplier"]),
        "kkt_upper": _kkt_residual(prob, -g, u_max, d_max["multiplier"]),
        "violation": max(d_min["residual_sq"], d_max["residual_sq"]) - q,
        "theta_lower": prob.theta(u_min),
        "theta_upper": prob.theta(u_max),
    }
    if upper < lower:
        lower = upper = 0.5 * (lower + upper)
    return ConfidenceInterval(lower, upper, level, method="ssb", diagnostics=diagnostics)


def ssb_from_linearization(
    lin: LinearizedModel, box: ParameterBox, gamma: float, h=LOG_STIFFNESS
) -> ConfidenceInterval:
    """Calibrate the ellipsoid radius on the box and solve both endpoints."""
    n, p = lin.k_matrix.shape
    s_min, _ = box_constrained_minimum(lin, box)
    q = calibrate_q(s_min, n, p, gamma)
    ci = ssb_endpoints(lin, box, q, h, level=1.0 - gamma, s_min=s_min)
    return _pad(ci, box, _as_selector(h))


def _pad(ci: ConfidenceInterval, box: ParameterBox, sel) -> ConfidenceInterval:
    # round-off in the fit can put a collapsed interval a few ulps off the truth
    lo, hi = box.project_qoi(sel.h)
    pad = ENDPOINT_PAD * (hi - lo)
    return replace(ci, lower=max(lo, ci.lower - pad), upper=min(hi, ci.upper + pad))


def ssb_interval(
    y,
    grid: FrequencyGrid,
    box: ParameterBox,
    mat: MaterialSpec = DEFAULT_MATERIAL,
    gamma: float = 0.05,
    h=LOG_STIFFNESS,
    seed: int = 0,
    starts: int = DEFAULT_STARTS,
) -> ConfidenceInterval:
    """Strict-bounds interval from raw phase data.

    Fits the box-constrained nonlinear least-squares estimate, linearizes
    the model there, calibrates ``q`` from the box-constrained linear
    minimum with an F quantile, and optimizes ``h @ theta`` over the
    resulting set.
    """
    fit = fit_nls(y, grid, box, mat, starts=starts, seed=seed)
    lin = linearize(fit.theta_hat, y, grid, mat, scale=_jacobian_scale(box))
    ci = ssb_from_linearization(lin, box, gamma, h)
    ci.diagnostics.update(theta_hat=fit.theta_hat, nls_residual=fit.residual_norm_sq)
    return ci


def _jacobian_scale(box: ParameterBox) -> np.ndarray:
    return np.where(box.width > 0, box.width, np.abs(box.lower) + 1.0)


def ls_interval(
    lin: LinearizedModel,
    fit: LinearFit,
    box: ParameterBox,
    gamma: float,
    h=LOG_STIFFNESS,
) -> ConfidenceInterval:
    """Student-t interval around the unconstrained linear fit, clipped to the box.

    When the raw interval misses the box range of ``h @ theta`` entirely,
    the nearest box endpoint is returned as a flagged point interval.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    sel = _as_selector(h)
    n, p = lin.k_matrix.shape
    center = sel(fit.theta_ls)
    se = fit.sigma_hat * math.sqrt(max(float(sel.h @ fit.gram_inverse @ sel.h), 0.0))
    half = t_quantile(n - p, 0.5 * gamma) * se
    raw_lo, raw_hi = center - half, center + half
    box_lo, box_hi = box.project_qoi(sel.h)
    lo, hi = max(raw_lo, box_lo), min(raw_hi, box_hi)
    diagnostics = {"raw": (raw_lo, raw_hi), "se": se}
    if lo > hi:
        point = box_lo if raw_hi < box_lo else box_hi
        return ConfidenceInterval(point, point, 1.0 - gamma, method="ls", flagged=True, diagnostics=diagnostics)
    return ConfidenceInterval(lo, hi, 1.0 - gamma, method="ls", diagnostics=diagnostics)


def ls_interval_from_data(y, grid, box, mat=DEFAULT_MATERIAL, gamma=0.05, h=LOG_STIFFNESS, seed=0, starts=DEFAULT_STARTS):
    fit = fit_nls(y, grid, box, mat, starts=starts, seed=seed)
    lin = linearize(fit.theta_hat, y, grid, mat, scale=_jacobian_scale(box))
    return ls_interval(lin, fit_linear(lin), box, gamma, h)
