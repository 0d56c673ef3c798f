"""Bond strength regression, its simultaneous band, and interval propagation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .confidence import ConfidenceInterval
from .errors import BudgetError, DegenerateDesign
from .stats import f_quantile


@dataclass(frozen=True)
class BondPairs:
    """Side data: log-stiffness ``x`` and bond strength ``z`` for N specimens."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        z = np.asarray(self.z, dtype=float).ravel()
        if x.size != z.size:
            raise ValueError(f"x has {x.size} entries but z has {z.size}")
        if x.size < 3:
            raise ValueError("at least three pairs are needed")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ValueError("pairs must be finite")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def from_csv(cls, path) -> "BondPairs":
        """Read a two-column CSV with header ``x,z``."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"x", "z"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header with columns x,z")
            rows = [(float(r["x"]), float(r["z"])) for r in reader]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1])

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            fh.write("x,z\n")
            for xi, zi in zip(self.x.tolist(), self.z.tolist()):
                fh.write(f"{xi!r},{zi!r}\n")


@dataclass(frozen=True)
class BandModel:
    beta0_hat: float
    beta1_hat: float
    s: float
    design_gram_inverse: np.ndarray = field(repr=False)
    n_obs: int
    eta: float

    @property
    def multiplier(self) -> float:
        """``sqrt(2 F_eta(2, N-2))``, the Working-Hotelling factor."""
        return math.sqrt(2.0 * f_quantile(2, self.n_obs - 2, self.eta))

    def center(self, x):
        return self.beta0_hat + self.beta1_hat * np.asarray(x, dtype=float)

    def half_width(self, x):
        x = np.asarray(x, dtype=float)
        g = self.design_gram_inverse
        lev = g[0, 0] + 2.0 * g[0, 1] * x + g[1, 1] * x * x
        return self.multiplier * self.s * np.sqrt(np.maximum(lev, 0.0))


def fit_band(pairs: BondPairs, eta: float) -> BandModel:
    """Least-squares line with intercept and its simultaneous band at level ``1 - eta``."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    x, z = pairs.x, pairs.z
    n = x.size
    if np.ptp(x) == 0.0:
        raise DegenerateDesign("stiffness observations have zero variance")
    design = np.column_stack([np.ones(n), x])
    q, r = np.linalg.qr(design)
    coef = np.linalg.solve(r, q.T @ z)
    resid = z - design @ coef
    rss = float(resid @ resid)
    r_inv = np.linalg.solve(r, np.eye(2))
    gram_inv = r_inv @ r_inv.T
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    gram_inv.setflags(write=False)
    return BandModel(float(coef[0]), float(coef[1]), math.sqrt(rss / (n - 2)), gram_inv, n, float(eta))


def band_at(model: BandModel, x: float) -> tuple[float, float]:
    c = float(model.center(x))
    hw = float(model.half_width(x))
    return c - hw, c + hw


@dataclass(frozen=True)
class BudgetSplit:
    alpha: float
    eta: float
    gamma: float

    @property
    def stiffness_level(self) -> float:
        return 1.0 - self.gamma

    @property
    def band_level(self) -> float:
        return 1.0 - self.eta


def allocate_budget(alpha: float, eta: float) -> BudgetSplit:
    """Split the overall miscoverage so that ``(1 - gamma)(1 - eta) = 1 - alpha``.

    The band must be at least as confident as the final interval, so
    ``eta >= alpha`` raises :class:`BudgetError`.
    """
    if not 0.0 < alpha < 1.0:
        raise BudgetError(f"alpha must lie in (0, 1), got {alpha}")
    if not eta > 0.0:
        raise BudgetError(f"eta must be positive, got {eta}")
    if eta >= alpha:
        raise BudgetError(f"eta ({eta}) must be smaller than alpha ({alpha})")
    gamma = (alpha - eta) / (1.0 - eta)
    return BudgetSplit(float(alpha), float(eta), float(gamma))


def propagate(model: BandModel, stiffness_interval: ConfidenceInterval) -> ConfidenceInterval:
    """Map a stiffness interval to a bond strength interval through the band.

    The band is evaluated at both stiffness endpoints; the result spans the
    smaller lower edge and the larger upper edge, which is correct for
    either sign of the fitted slope.
    """
    lo_a, up_a = band_at(model, stiffness_interval.lower)
    lo_b, up_b = band_at(model, stiffness_interval.upper)
    level = stiffness_interval.level * (1.0 - model.eta)
    return ConfidenceInterval(
        min(lo_a, lo_b),
        max(up_a, up_b),
        level,
        method="propagated",
        flagged=stiffness_interval.flagged,
    )
