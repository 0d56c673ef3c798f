"""Box-constrained nonlinear least squares and the linearized LS fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NonFiniteResult, JacobianFailure, OptimizerFailure, RankDeficient
from .model import (
    DEFAULT_MATERIAL,
    FrequencyGrid,
    LinearizedModel,
    MaterialSpec,
    ParameterBox,
    jacobian,
    phase_response,
    phase_rows,
)
from .stats import GaussianStream

RANK_RTOL = 1e-12
DEFAULT_STARTS = 8
SCAN_SHAPE = (25, 9, 17)
_LHS_BLOCK = 8
_AFFINE = (2, 3)
_NONLINEAR = (0, 1, 4)


@dataclass(frozen=True)
class NlsFit:
    theta_hat: np.ndarray
    residual_norm_sq: float
    converged: bool
    n_starts_used: int
    iterations: int = 0
    start_index: int = 0


@dataclass(frozen=True)
class LinearFit:
    theta_ls: np.ndarray
    residual_norm_sq_lin: float
    gram_inverse: np.ndarray
    sigma_hat: float


def latin_hypercube(n_points: int, dim: int, stream: GaussianStream) -> np.ndarray:
    """Points in the unit cube with one point per stratum along every axis."""
    u = stream.uniform(n_points * dim).reshape(n_points, dim)
    out = np.empty_like(u)
    for j in range(dim):
        perm = np.argsort(stream.uniform(n_points), kind="stable")
        out[:, j] = (perm + u[:, j]) / n_points
    return out


class _ScaledProblem:
    """Residuals of the phase model in unit-box coordinates of the free parameters."""

    def __init__(self, y, grid, box, mat):
        self.y = np.asarray(y, dtype=float)
        self.grid = grid
        self.mat = mat
        self.lower = box.lower
        self.width = box.width
        self.free = self.width > 0
        self.scale = np.where(self.free, self.width, np.abs(box.lower) + 1.0)
        self.n_eval = 0

    def theta(self, u):
        theta = self.lower.copy()
        theta[self.free] += u * self.width[self.free]
        return theta

    def residual(self, u):
        self.n_eval += 1
        return phase_response(self.theta(u), self.grid, self.mat) - self.y

    def jac(self, u):
        k = jacobian(self.theta(u), self.grid, self.mat, scale=self.scale)
        return k[:, self.free] * self.width[self.free]


def _safe_objective(problem, u):
    try:
        r = problem.residual(u)
    except NonFiniteResult:
        return None, np.inf
    s = float(r @ r)
    return (r, s) if np.isfinite(s) else (None, np.inf)


def _local_fit(problem, u0, max_iter=500, gtol=1e-8):
    """One trust-region reflective run on the unit box.

    Returns ``(u, S, converged, iterations)``; ``converged`` reports the
    projected-gradient test ``|P(u - grad) - u|_inf < gtol * (1 + S)`` or a
    tolerance-based stop of the solver.
    """
    u0 = np.clip(u0, 0.0, 1.0)
    _, s0 = _safe_objective(problem, u0)
    if not np.isfinite(s0):
        return u0, np.inf, False, 0
    try:
        sol = optimize.least_squares(
            problem.residual,
            u0,
            jac=problem.jac,
            bounds=(0.0, 1.0),
            method="trf",
            x_scale="jac",
            ftol=1e-9,
            xtol=1e-9,
            gtol=1e-9,
            max_nfev=max_iter,
        )
    except (NonFiniteResult, JacobianFailure, ValueError):
        return u0, s0, False, 0
    u = np.clip(sol.x, 0.0, 1.0)
    r, s = _safe_objective(problem, u)
    if r is None or s > s0:
        return u0, s0, False, sol.nfev
    grad = 2.0 * problem.jac(u).T @ r
    pg = u - np.clip(u - grad, 0.0, 1.0)
    converged = bool(np.max(np.abs(pg)) < gtol * (1.0 + s) or sol.status > 0)
    return u, s, converged, sol.nfev


def profile_scan(y, grid: FrequencyGrid, box: ParameterBox, mat: MaterialSpec = DEFAULT_MATERIAL,
                 shape=SCAN_SHAPE, keep: int = 4) -> np.ndarray:
    """Coarse grid search over the non-affine parameters.

    For each grid node the affine pair ``(a, b)`` is profiled out by linear
    least squares and clipped to the box. Returns up to ``keep`` parameter
    rows, best objective first.
    """
    y = np.asarray(y, dtype=float)
    axes = []
    for j, m in zip(_NONLINEAR, shape):
        lo, hi = box.lower[j], box.upper[j]
        axes.append(np.array([lo]) if hi == lo else lo + (hi - lo) * (np.arange(m) + 0.5) / m)
    mesh = np.meshgrid(*axes, indexing="ij")
    rows = np.tile(box.midpoint, (mesh[0].size, 1))
    for j, values in zip(_NONLINEAR, mesh):
        rows[:, j] = values.ravel()
    resid = y - phase_rows(rows, grid, mat)
    design = np.column_stack([grid.omegas, np.ones(grid.n)])
    coef, *_ = np.linalg.lstsq(design, np.nan_to_num(resid).T, rcond=None)
    coef = np.clip(coef.T, box.lower[list(_AFFINE)], box.upper[list(_AFFINE)])
    rows[:, list(_AFFINE)] = coef
    fitted = resid - coef @ design.T
    obj = np.einsum("ij,ij->i", fitted, fitted)
    obj[~np.isfinite(obj)] = np.inf
    order = np.argsort(obj, kind="stable")[:keep]
    return rows[order[np.isfinite(obj[order])]]


def fit_nls(
    y,
    grid: FrequencyGrid,
    box: ParameterBox,
    mat: MaterialSpec = DEFAULT_MATERIAL,
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    max_iter: int = 500,
    scan: bool = True,
) -> NlsFit:
    """Multistart box-constrained nonlinear least squares.

    Each start runs a bounded trust-region least-squares solve in unit-box
    coordinates. The first start is the box midpoint, up to half of the
    rest come from :func:`profile_scan`, and the remainder are Latin
    hypercube points over the box drawn from ``seed`` in blocks of eight,
    so the starts used for a given count are a prefix of those for any
    larger count. The lowest objective wins,
    ties going to the earliest start. Coordinates with zero box width are
    held fixed.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    problem = _ScaledProblem(y, grid, box, mat)
    dim = int(problem.free.sum())
    if dim == 0:
        theta = box.lower.copy()
        _, s = _safe_objective(problem, np.empty(0))
        if not np.isfinite(s):
            raise OptimizerFailure("model is not finite at the fixed parameter point")
        return NlsFit(theta, s, True, 1)
    inits = [np.full(dim, 0.5)]
    if starts > 1 and scan:
        width = np.where(problem.free, problem.width, 1.0)
        for row in profile_scan(y, grid, box, mat, keep=starts // 2):
            inits.append(((row - problem.lower) / width)[problem.free])
    block = 0
    while len(inits) < starts:
        # fixed-size blocks keep the starts for a smaller count a prefix of a larger one
        pts = latin_hypercube(_LHS_BLOCK, dim, GaussianStream(seed, (0xB0B, block)))
        inits.extend(pts[: starts - len(inits)])
        block += 1
    best = None
    for index, u0 in enumerate(inits):
        u, s, conv, iters = _local_fit(problem, u0, max_iter=max_iter)
        if not np.isfinite(s):
            continue
        if best is None or s < best[1] - 1e-12 * max(1.0, best[1]):
            best = (u, s, conv, iters, index)
    if best is None:
        raise OptimizerFailure("every start produced a non-finite objective")
    u, s, conv, iters, index = best
    theta = box.clip(problem.theta(u))
    return NlsFit(theta, s, conv, len(inits), iters, index)


def _equilibrated_svd(k):
    norms = np.linalg.norm(k, axis=0)
    if np.any(norms == 0):
        raise RankDeficient("linearized forward matrix has a zero column")
    scaled = k / norms
    u, sv, vt = np.linalg.svd(scaled, full_matrices=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(
            f"smallest singular value {sv[-1]:.3e} is below {RANK_RTOL:g} x largest {sv[0]:.3e}"
        )
    return norms, u, sv, vt


def fit_linear(lin: LinearizedModel) -> LinearFit:
    """Unconstrained least squares for the linearized model.

    Columns of ``K`` are equilibrated to unit norm before the SVD so the
    rank test is insensitive to parameter units.
    """
    k = lin.k_matrix
    n, p = k.shape
    if n <= p:
        raise RankDeficient("need more observations than parameters")
    norms, u, sv, vt = _equilibrated_svd(k)
    coef = vt.T @ ((u.T @ lin.y_tilde) / sv)
    theta = coef / norms
    resid = lin.y_tilde - k @ theta
    rss = float(resid @ resid)
    v_over_s = vt.T / sv
    gram_inv = (v_over_s @ v_over_s.T) / np.outer(norms, norms)
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    return LinearFit(theta, rss, gram_inv, float(np.sqrt(rss / (n - p))))
