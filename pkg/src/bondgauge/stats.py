"""Quantiles, exact binomial intervals and seeded normal deviates.

Quantiles are obtained by inverting the regularized incomplete gamma and
beta functions: bisection on a monotone transform of the argument brackets
the root, and a few safeguarded Newton steps polish it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .confidence import ConfidenceInterval
from .errors import DomainError

_BISECT_RTOL = 1e-7
_NEWTON_STEPS = 8


def _check_prob(p, name="upper_tail_prob"):
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {p}")


def _check_dof(*dofs):
    for d in dofs:
        if not d >= 1:
            raise DomainError(f"degrees of freedom must be >= 1, got {d}")


def _invert(func, density_at, target, t_lo, t_hi, to_x, increasing):
    """Solve ``func(x) = target`` for monotone ``func``.

    The search runs over a transformed coordinate ``t`` with ``x = to_x(t)``
    so the bracket can span many orders of magnitude.
    """
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        x_lo, x_hi = to_x(t_lo), to_x(t_hi)
        if abs(x_hi - x_lo) <= _BISECT_RTOL * abs(to_x(t_mid)):
            break
        above = func(to_x(t_mid)) > target
        if above == increasing:
            t_hi = t_mid
        else:
            t_lo = t_mid
    x_lo, x_hi = to_x(t_lo), to_x(t_hi)
    x = 0.5 * (x_lo + x_hi)
    sign = 1.0 if increasing else -1.0
    for _ in range(_NEWTON_STEPS):
        density = density_at(x)
        if not density > 0:
            break
        step = (func(x) - target) / (sign * density)
        x_new = x - step
        if not (x_lo <= x_new <= x_hi):
            break
        x = x_new
        if abs(step) <= 1e-15 * abs(x):
            break
    return x


def _logit_to_unit(t):
    # logistic map that stays accurate near both ends of (0, 1)
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def beta_quantile(a: float, b: float, prob: float, upper: bool = False) -> float:
    """Quantile of Beta(a, b).

    Returns ``w`` with ``P(W <= w) = prob``, or ``P(W > w) = prob`` when
    ``upper`` is true.
    """
    _check_prob(prob, "prob")
    if not (a > 0 and b > 0):
        raise DomainError("beta shape parameters must be positive")
    log_beta = special.betaln(a, b)

    def pdf(w):
        if w <= 0.0 or w >= 1.0:
            return 0.0
        return math.exp((a - 1) * math.log(w) + (b - 1) * math.log1p(-w) - log_beta)

    if upper:
        func = lambda w: float(special.betaincc(a, b, w))  # noqa: E731
        increasing = False
    else:
        func = lambda w: float(special.betainc(a, b, w))  # noqa: E731
        increasing = True
    return _invert(func, pdf, prob, -745.0, 745.0, _logit_to_unit, increasing)


def chi2_quantile(dof: int, upper_tail_prob: float) -> float:
    """Upper-tail quantile ``x`` with ``P(chi2_dof > x) = upper_tail_prob``."""
    _check_dof(dof)
    _check_prob(upper_tail_prob)
    k = 0.5 * dof
    log_gamma_k = special.gammaln(k)

    def sf(x):
        return float(special.gammaincc(k, 0.5 * x))

    def pdf(x):
        if x <= 0.0:
            return 0.0
        return 0.5 * math.exp((k - 1) * math.log(0.5 * x) - 0.5 * x - log_gamma_k)

    return _invert(sf, pdf, upper_tail_prob, -700.0, 700.0, math.exp, increasing=False)


def f_quantile(d1: int, d2: int, upper_tail_prob: float) -> float:
    """Upper-tail quantile of the F(d1, d2) distribution.

    Uses ``P(F > x) = I_w(d2/2, d1/2)`` with ``w = d2 / (d2 + d1 x)``, or
    the complementary variate ``v = 1 - w`` when that one is the smaller,
    so the ratio never suffers cancellation.
    """
    _check_dof(d1, d2)
    _check_prob(upper_tail_prob)
    if upper_tail_prob < 0.5:
        w = beta_quantile(0.5 * d2, 0.5 * d1, upper_tail_prob)
        return d2 * (1.0 - w) / (d1 * w)
    v = beta_quantile(0.5 * d1, 0.5 * d2, upper_tail_prob, upper=True)
    return d2 * v / (d1 * (1.0 - v))


def t_quantile(dof: int, upper_tail_prob: float) -> float:
    """Upper-tail quantile of Student's t with ``dof`` degrees of freedom."""
    _check_dof(dof)
    _check_prob(upper_tail_prob)
    if upper_tail_prob == 0.5:
        return 0.0
    if upper_tail_prob > 0.5:
        return -t_quantile(dof, 1.0 - upper_tail_prob)
    # P(T > t) = I_w(dof/2, 1/2) / 2 with w = dof / (dof + t^2)
    two_p = 2.0 * upper_tail_prob
    if two_p < 0.5:
        w = beta_quantile(0.5 * dof, 0.5, two_p)
        return math.sqrt(dof * (1.0 - w) / w)
    v = beta_quantile(0.5, 0.5 * dof, two_p, upper=True)
    return math.sqrt(dof * v / (1.0 - v))


@dataclass(frozen=True)
class BinomialSummary:
    successes: int
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not 0 <= self.successes <= self.trials:
            raise DomainError("successes must lie in [0, trials]")

    @property
    def fraction(self) -> float:
        return self.successes / self.trials


def clopper_pearson(summary: BinomialSummary, confidence: float = 0.95) -> ConfidenceInterval:
    """Exact two-sided binomial interval from Beta quantiles."""
    _check_prob(confidence, "confidence")
    k, n = summary.successes, summary.trials
    tail = 0.5 * (1.0 - confidence)
    lower = 0.0 if k == 0 else beta_quantile(k, n - k + 1, tail)
    upper = 1.0 if k == n else beta_quantile(k + 1, n - k, tail, upper=True)
    return ConfidenceInterval(lower, upper, confidence, method="cp")


class GaussianStream:
    """Seeded stream of standard normal deviates.

    Uniforms come from a PCG64 generator keyed by ``SeedSequence(seed,
    spawn_key=key)``; pairs of uniforms are mapped to normals by the
    Box-Muller transform. Distinct keys give statistically independent
    streams, which is how replications and experiment cells are separated.
    """

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._rng = np.random.Generator(np.random.PCG64(seq))

    def normal(self, size: int) -> np.ndarray:
        size = int(size)
        m = (size + 1) // 2
        u = self._rng.random((2, m))
        radius = np.sqrt(-2.0 * np.log1p(-u[0]))
        angle = 2.0 * np.pi * u[1]
        out = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return out[:size]

    def uniform(self, size: int) -> np.ndarray:
        return self._rng.random(int(size))

    def child(self, *key) -> "GaussianStream":
        return GaussianStream(self.seed, self.key + tuple(key))


def gaussian_sampler(seed: int, key: tuple = ()) -> GaussianStream:
    return GaussianStream(seed, key)
