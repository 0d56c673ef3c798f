"""Tri-layer adhesive bond phase model.

The specimen is an adherend / adhesive / adherend stack with identical
spring-type interfaces of stiffness ``K`` on both sides of the bondline.
The measured quantity is the phase of the normal-incidence reflection
coefficient, swept over a grid of angular frequencies, plus an affine
instrument correction ``a * omega + b``.

Parameter order is fixed::

    theta = (log_k0, alpha0, a, b, l_bl)

``log_k0`` is the base-10 logarithm of the interfacial stiffness (N/m^3),
``alpha0`` the adhesive attenuation (Np/m), ``a`` (deg per rad/s) and
``b`` (deg) the affine phase correction, and ``l_bl`` the bondline
thickness (m).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import JacobianFailure, NonFiniteResult

PARAM_NAMES = ("log_k0", "alpha0", "a", "b", "l_bl")
N_PARAMS = 5

# columns of the Jacobian that enter the phase affinely
_AFFINE = (2, 3)
_NONLINEAR = (0, 1, 4)

_DENOM_FLOOR = 1e-300


@dataclass(frozen=True)
class ParameterVector:
    """Named view of the five physical parameters."""

    log_k0: float
    alpha0: float
    a: float
    b: float
    l_bl: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("parameter components must be finite")

    @classmethod
    def from_array(cls, values) -> "ParameterVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} components, got shape {values.shape}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.log_k0, self.alpha0, self.a, self.b, self.l_bl], dtype=float)

    def __array__(self, dtype=None, copy=None):
        arr = self.as_array()
        return arr if dtype is None else arr.astype(dtype)

    def replace(self, **changes) -> "ParameterVector":
        return replace(self, **changes)


@dataclass(frozen=True)
class ParameterBox:
    """Hyperrectangle of admissible parameters."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).copy()
        upper = np.asarray(self.upper, dtype=float).copy()
        if lower.shape != (N_PARAMS,) or upper.shape != (N_PARAMS,):
            raise ValueError("box bounds must be 5-vectors")
        if np.any(lower > upper):
            raise ValueError("box lower bound exceeds upper bound")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def project_qoi(self, h) -> tuple[float, float]:
        """Range of ``h @ theta`` over the box."""
        h = np.asarray(h, dtype=float)
        lo = np.minimum(h * self.lower, h * self.upper).sum()
        hi = np.maximum(h * self.lower, h * self.upper).sum()
        return float(lo), float(hi)

    def __eq__(self, other):
        if not isinstance(other, ParameterBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class MaterialSpec:
    """Elastic and acoustic constants of the adherend and adhesive.

    The defaults describe an aluminum adherend on an epoxy adhesive. They
    are generic handbook values, not measured properties of any specimen,
    and every field may be overridden from the run configuration.

    ``log_base`` is the base of the stiffness logarithm in ``log_k0``.
    """

    e1: float = 69e9
    c_l1: float = 6320.0
    alpha1: float = 0.0
    e_adh: float = 3.5e9
    c_l_adh: float = 2500.0
    log_base: float = 10.0

    def __post_init__(self):
        for name in ("e1", "c_l1", "e_adh", "c_l_adh", "log_base"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.alpha1 < 0:
            raise ValueError("alpha1 must be nonnegative")


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing angular frequencies (rad/s)."""

    omegas: np.ndarray = field(repr=False)

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float).copy()
        if omegas.ndim != 1 or omegas.size < N_PARAMS + 1:
            raise ValueError(f"frequency grid needs at least {N_PARAMS + 1} points")
        if np.any(omegas <= 0) or not np.all(np.isfinite(omegas)):
            raise ValueError("frequencies must be finite and strictly positive")
        if np.any(np.diff(omegas) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        omegas.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def linear_hz(cls, f_lo: float = 3.25e6, f_hi: float = 13e6, n: int = 100) -> "FrequencyGrid":
        return cls(2 * np.pi * np.linspace(f_lo, f_hi, n))

    @classmethod
    def from_hz(cls, hz) -> "FrequencyGrid":
        return cls(2 * np.pi * np.asarray(hz, dtype=float))

    @property
    def hz(self) -> np.ndarray:
        return self.omegas / (2 * np.pi)

    @property
    def n(self) -> int:
        return self.omegas.size

    def __len__(self):
        return self.omegas.size

    def subset(self, index) -> "FrequencyGrid":
        return FrequencyGrid(self.omegas[index])

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return np.array_equal(self.omegas, other.omegas)

    def __hash__(self):
        return hash(self.omegas.tobytes())


TYPICAL_THETA = ParameterVector(14.85, 8.05e3, 9.62e-6, -42.19, 9.53e-5)
BOUNDARY_THETA = TYPICAL_THETA.replace(alpha0=1e4 - 1e-1)
DEFAULT_BOX = ParameterBox(
    lower=np.array([10.0, 0.0, -3e-5, -100.0, 0.0]),
    upper=np.array([20.0, 1e4, 3e-5, 100.0, 1e-4]),
)
DEFAULT_MATERIAL = MaterialSpec()
DEFAULT_GRID = FrequencyGrid.linear_hz()


def _coefficients(theta, omega, mat: MaterialSpec):
    # theta may be a stack of parameter rows; results broadcast to (..., n)
    theta = np.asarray(theta, dtype=float)
    log_k0, alpha0, l_bl = (theta[..., j, None] if theta.ndim > 1 else theta[j] for j in (0, 1, 4))
    inv_stiffness = mat.log_base ** (-log_k0)
    k1 = omega / mat.c_l1 + 1j * mat.alpha1
    k_adh = omega / mat.c_l_adh + 1j * alpha0
    g1 = mat.e1 * k1
    g_adh = mat.e_adh * k_adh
    g1_k = g1 * inv_stiffness
    g1_sq = g1 * g1
    g_adh_sq = g_adh * g_adh
    cross = g_adh * g1_k
    c_n = g1 * g1_k
    c_d = 2 * g1 * g_adh * (1 + g1_k)
    s_n = g1_sq - g_adh_sq + cross * cross
    s_d = g1_sq + g_adh_sq + cross * g_adh * (2 + g1_k)
    kl = k_adh * l_bl
    return c_n, c_d, s_n, s_d, np.cos(kl), np.sin(kl)


def reflection_coefficient(theta, omega, mat: MaterialSpec = DEFAULT_MATERIAL):
    """Complex reflection coefficient of the bonded stack.

    Parameters
    ----------
    theta : array_like or ParameterVector
        Physical parameters in canonical order.
    omega : float or ndarray
        Angular frequency (rad/s); arrays are evaluated elementwise.
    mat : MaterialSpec
        Layer constants.

    Raises
    ------
    NonFiniteResult
        If the denominator underflows or the result is not finite.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be strictly positive")
    r, ok = _raw_reflection(theta, omega, mat)
    if not np.all(ok):
        raise NonFiniteResult("reflection coefficient denominator underflow or non-finite value")
    return r[()] if r.ndim == 0 else r


def _raw_reflection(theta, omega, mat):
    with np.errstate(all="ignore"):
        c_n, c_d, s_n, s_d, cos_kl, sin_kl = _coefficients(theta, omega, mat)
        num = c_n * cos_kl + 1j * s_n * sin_kl
        den = c_d * cos_kl + 1j * s_d * sin_kl
        r = num / den
    ok = (np.abs(den) >= _DENOM_FLOOR) & np.isfinite(r)
    return r, ok


def _unwrap_deg(phase):
    jumps = np.diff(phase, axis=-1)
    corr = -360.0 * np.round(jumps / 360.0)
    phase[..., 1:] += np.cumsum(corr, axis=-1)
    return phase


def phase_rows(thetas, grid: FrequencyGrid, mat: MaterialSpec = DEFAULT_MATERIAL) -> np.ndarray:
    """Acoustic phase (no affine term) for a stack of parameter rows.

    Rows where the model is not finite come back as NaN instead of raising;
    this is meant for bulk screening.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    r, ok = _raw_reflection(thetas, grid.omegas, mat)
    phase = _unwrap_deg(np.angle(np.where(ok, r, 1.0), deg=True))
    phase[~np.all(ok, axis=-1)] = np.nan
    return phase


def _acoustic_phase(theta, omegas, mat):
    """Unwrapped arg(R) in degrees, before the affine correction."""
    r = reflection_coefficient(theta, omegas, mat)
    return _unwrap_deg(np.angle(r, deg=True))


def phase_response(theta, grid: FrequencyGrid = DEFAULT_GRID, mat: MaterialSpec = DEFAULT_MATERIAL) -> np.ndarray:
    """Phase of the reflection coefficient (deg) over the grid.

    The principal argument is unwrapped along increasing frequency, and
    then ``a * omega + b`` is added. A 2-D ``theta`` (one parameter set
    per row) returns one phase curve per row.
    """
    theta = np.asarray(theta, dtype=float)
    omegas = grid.omegas
    if theta.ndim > 1:
        return _acoustic_phase(theta, omegas, mat) + theta[:, 2, None] * omegas + theta[:, 3, None]
    return _acoustic_phase(theta, omegas, mat) + theta[2] * omegas + theta[3]


def _default_scale() -> np.ndarray:
    return DEFAULT_BOX.width


def jacobian(
    theta,
    grid: FrequencyGrid = DEFAULT_GRID,
    mat: MaterialSpec = DEFAULT_MATERIAL,
    scale=None,
) -> np.ndarray:
    """Jacobian of :func:`phase_response` with respect to ``theta``.

    Columns for ``a`` and ``b`` are exact (``omega`` and ones). The other
    columns use central differences with step
    ``max(|theta_j|, scale_j) * eps**(1/3)``; ``scale`` defaults to the
    width of the default parameter box.
    """
    theta = np.asarray(theta, dtype=float)
    scale = _default_scale() if scale is None else np.asarray(scale, dtype=float)
    omegas = grid.omegas
    jac = np.empty((omegas.size, N_PARAMS))
    jac[:, 2] = omegas
    jac[:, 3] = 1.0
    cbrt_eps = np.finfo(float).eps ** (1.0 / 3.0)
    cols = list(_NONLINEAR)
    h = np.maximum(np.abs(theta[cols]), scale[cols]) * cbrt_eps
    h = np.where(h > 0, h, cbrt_eps)
    stack = np.tile(theta, (2 * len(cols), 1))
    for i, j in enumerate(cols):
        stack[2 * i, j] += h[i]
        stack[2 * i + 1, j] -= h[i]
    try:
        phases = _acoustic_phase(stack, omegas, mat)
    except NonFiniteResult as exc:
        raise JacobianFailure("model not finite near the differencing point") from exc
    for i, j in enumerate(cols):
        step = stack[2 * i, j] - stack[2 * i + 1, j]
        col = (phases[2 * i] - phases[2 * i + 1]) / step
        if not np.all(np.isfinite(col)):
            raise JacobianFailure(f"non-finite difference quotient for {PARAM_NAMES[j]}")
        jac[:, j] = col
    return jac


@dataclass(frozen=True)
class LinearizedModel:
    """First-order expansion of the phase model at ``theta_hat``.

    ``k_matrix @ theta + offset`` approximates the phase response, and
    ``y_tilde = y - offset`` is the observation shifted so that the
    approximate model is purely linear.
    """

    k_matrix: np.ndarray
    offset: np.ndarray
    y_tilde: np.ndarray
    theta_hat: np.ndarray

    def predict(self, theta) -> np.ndarray:
        return self.k_matrix @ np.asarray(theta, dtype=float) + self.offset

    @property
    def n(self) -> int:
        return self.k_matrix.shape[0]


def linearize(
    theta_hat,
    y,
    grid: FrequencyGrid = DEFAULT_GRID,
    mat: MaterialSpec = DEFAULT_MATERIAL,
    scale=None,
) -> LinearizedModel:
    theta_hat = np.asarray(theta_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != grid.omegas.shape:
        raise ValueError("observation length does not match the frequency grid")
    k = jacobian(theta_hat, grid, mat, scale=scale)
    f_hat = phase_response(theta_hat, grid, mat)
    offset = f_hat - k @ theta_hat
    return LinearizedModel(k_matrix=k, offset=offset, y_tilde=y - offset, theta_hat=theta_hat.copy())
