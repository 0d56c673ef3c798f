import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from bondgauge.errors import DomainError
from bondgauge.stats import (
    BinomialSummary,
    GaussianStream,
    beta_quantile,
    chi2_quantile,
    clopper_pearson,
    f_quantile,
    gaussian_sampler,
    t_quantile,
)

from oracle_values import CHI2_UPPER, CLOPPER_PEARSON, F_UPPER, T_UPPER


@pytest.mark.parametrize("dof,p,ref", CHI2_UPPER)
def test_chi2_table(dof, p, ref):
    assert chi2_quantile(dof, p) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("d1,d2,p,ref", F_UPPER)
def test_f_table(d1, d2, p, ref):
    assert f_quantile(d1, d2, p) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("dof,p,ref", T_UPPER)
def test_t_table(dof, p, ref):
    assert t_quantile(dof, p) == pytest.approx(ref, rel=1e-8)


def test_closed_forms():
    assert chi2_quantile(2, math.exp(-1)) == pytest.approx(2.0, rel=1e-12)
    assert chi2_quantile(1, 0.05) == pytest.approx(1.959963984540054**2, rel=1e-10)
    assert t_quantile(1, 0.25) == pytest.approx(1.0, rel=1e-12)
    assert t_quantile(7, 0.5) == 0.0
    assert f_quantile(2, 58, 0.01) == pytest.approx(4.988, rel=1e-2)


def test_domain_errors():
    for bad in (0.0, 1.0, -0.1, 1.5, float("nan")):
        with pytest.raises(DomainError):
            chi2_quantile(3, bad)
        with pytest.raises(DomainError):
            f_quantile(2, 3, bad)
        with pytest.raises(DomainError):
            t_quantile(3, bad)
    with pytest.raises(DomainError):
        chi2_quantile(0, 0.5)
    with pytest.raises(DomainError):
        beta_quantile(-1.0, 1.0, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.floats(1e-6, 1 - 1e-6))
def test_f_reciprocal_identity(d1, d2, p):
    assert f_quantile(d1, d2, p) == pytest.approx(1.0 / f_quantile(d2, d1, 1.0 - p), rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.floats(1e-6, 0.4999))
def test_t_symmetry_and_f_relation(dof, p):
    t = t_quantile(dof, p)
    assert t_quantile(dof, 1.0 - p) == pytest.approx(-t, rel=1e-8)
    assert t * t == pytest.approx(f_quantile(1, dof, 2 * p), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 400), st.floats(1e-8, 1 - 1e-8))
def test_chi2_agrees_with_scipy(dof, p):
    assert chi2_quantile(dof, p) == pytest.approx(sps.chi2.isf(p, dof), rel=1e-8)


def test_quantiles_decrease_in_tail_probability():
    ps = np.linspace(0.001, 0.999, 60)
    for f in (lambda p: chi2_quantile(4, p), lambda p: f_quantile(3, 12, p), lambda p: t_quantile(9, p)):
        vals = [f(p) for p in ps]
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_large_denominator_f_approaches_scaled_chi2():
    for dof in (1, 3, 10):
        assert f_quantile(dof, 10**6, 0.05) == pytest.approx(chi2_quantile(dof, 0.05) / dof, rel=1e-2)


@pytest.mark.parametrize("k,n,conf,lo,hi", CLOPPER_PEARSON)
def test_clopper_pearson_table(k, n, conf, lo, hi):
    ci = clopper_pearson(BinomialSummary(k, n), conf)
    assert ci.lower == pytest.approx(lo, abs=1e-4)
    assert ci.upper == pytest.approx(hi, abs=1e-4)


def test_clopper_pearson_boundaries_and_nesting():
    ci = clopper_pearson(BinomialSummary(10, 10))
    assert ci.upper == 1.0 and ci.lower == pytest.approx(0.025**0.1, rel=1e-10)
    assert clopper_pearson(BinomialSummary(0, 10)).lower == 0.0
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(1, 3000))
        k = int(rng.integers(0, n + 1))
        s = BinomialSummary(k, n)
        c95, c99 = clopper_pearson(s, 0.95), clopper_pearson(s, 0.99)
        assert c95.contains(k / n)
        assert c99.lower <= c95.lower and c95.upper <= c99.upper


def test_binomial_summary_validation():
    with pytest.raises(DomainError):
        BinomialSummary(3, 2)
    with pytest.raises(DomainError):
        BinomialSummary(0, 0)


def test_gaussian_stream_determinism_and_sensitivity():
    a = GaussianStream(123).normal(1000)
    b = gaussian_sampler(123).normal(1000)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(GaussianStream(1).normal(10), GaussianStream(2).normal(10))
    assert not np.array_equal(GaussianStream(1, (0,)).normal(10), GaussianStream(1, (1,)).normal(10))
    assert GaussianStream(5).normal(7).shape == (7,)


def test_gaussian_stream_distribution():
    m = 100_000
    x = GaussianStream(2024).normal(m)
    assert abs(x.mean()) < 4 / math.sqrt(m)
    assert abs(x.var() - 1) < 0.1
    ks = sps.kstest(x, "norm").statistic
    assert ks < 0.01
