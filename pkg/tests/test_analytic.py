import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from chargegrid.analytic import (cdf_gap_X, cdf_nearest_charging_given_sd,
                                 cdf_nearest_charging_unconditional,
                                 cdf_nearest_noncharging_given_sd, event_probs, event_probs_T3,
                                 integral_g, leaf_L35_metric_cdf, metric_cdf_given_sd,
                                 pdf_nearest_charging_given_sd, pdf_nearest_noncharging_given_sd)
from chargegrid.errors import ConditioningDegenerate, InvalidParameter, NoClosedForm
from chargegrid.mc import sample_gap, sample_nearest_unconditional, sample_trip_metrics
from chargegrid.placement import SourceDestDistribution, SourceDestPair, UniformDensity
from chargegrid.thinning import Gaussian, MultiCenterPowerLaw, PowerLaw, Uniform, eval_g

# Independent high-precision values (mpmath, 30 digits) for the leaf L3,5 and
# the gap X with PowerLaw(1, 500), lambda = 0.02, source (600, 600), parallel
# destination road at x = 1400, 1000 m up.  The oracle uses the closed-form
# antiderivative of the non-charging density and a single outer quadrature.
ORACLE_SD = SourceDestPair.parallel(600, 1400, 1000)
ORACLE_PSI_DN_300 = 0.929684006921748
ORACLE_PSI_RHO_1300 = 0.00977035687467776
ORACLE_GAP_300 = 0.976090395897933


def _quad_g(spec, a, b):
    g = lambda r: float(eval_g(spec, r))
    pts = [p for p in (-getattr(spec, "r_min", 0), getattr(spec, "r_min", 0)) if a < p < b]
    return integrate.quad(g, a, b, points=pts or None, epsabs=0, epsrel=1e-13, limit=500)[0]


def test_integral_worked_values():
    assert integral_g(PowerLaw(2, 500), -500, 500) == pytest.approx(1000, rel=1e-12)
    assert integral_g(PowerLaw(2, 500), 500, 1000) == pytest.approx(250, rel=1e-12)
    assert integral_g(PowerLaw(1, 500), 500, 1000) == pytest.approx(500 * math.log(2), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 1.0 + 1e-12, 2.0, 2.5])
@pytest.mark.parametrize("a,b", [(-3000, -600), (-800, 200), (-100, 100), (300, 4000), (-5000, 5000)])
def test_integral_matches_quadrature(alpha, a, b):
    spec = PowerLaw(alpha, 500)
    assert integral_g(spec, a, b) == pytest.approx(_quad_g(spec, a, b), rel=1e-9)


def test_gaussian_and_multicenter_integrals():
    spec = Gaussian(700, 0.6)
    assert integral_g(spec, -300, 2500) == pytest.approx(_quad_g(spec, -300, 2500), rel=1e-10)
    mc = MultiCenterPowerLaw(1.3, 200, ((0, 0), (3000, 0)))
    g = lambda r: min(eval_g(PowerLaw(1.3, 200), r), 1) if abs(r) < abs(r - 3000) \
        else eval_g(PowerLaw(1.3, 200), r - 3000)
    ref = integrate.quad(g, -2000, 6000, points=[-200, 200, 1500, 2800, 3200], limit=500,
                         epsrel=1e-12)[0]
    assert integral_g(mc, -2000, 6000, axis=0) == pytest.approx(ref, rel=1e-9)


@given(st.floats(0.1, 5), st.floats(10, 2000), st.floats(-1e4, 1e4),
       st.floats(0, 5e3), st.floats(0, 5e3))
def test_integral_additive(alpha, r_min, a, w1, w2):
    spec = PowerLaw(alpha, r_min)
    b, c = a + w1, a + w1 + w2
    whole = integral_g(spec, a, c)
    assert integral_g(spec, a, b) + integral_g(spec, b, c) == pytest.approx(whole, rel=1e-9, abs=1e-9)
    assert 0 <= whole <= c - a + 1e-9


def test_integral_rejects_reversed_interval():
    with pytest.raises(InvalidParameter):
        integral_g(PowerLaw(1, 500), 10, 0)


def test_nearest_charging_worked_values():
    sd = SourceDestPair.parallel(500, 3000, 0)
    spec = PowerLaw(1, 500)
    assert cdf_nearest_charging_given_sd(spec, 0.01, sd, "vertical", 0.0) == 0.0
    assert cdf_nearest_charging_given_sd(spec, 0.01, sd, "vertical", 500) == \
        pytest.approx(1 - math.exp(-0.01 * 500 * math.log(2)), rel=1e-10)
    assert pdf_nearest_charging_given_sd(spec, 0.01, sd, "vertical", 500) == \
        pytest.approx(0.01 * 0.5 * math.exp(-0.01 * 500 * math.log(2)), rel=1e-10)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_uniform_reductions(p):
    sd = SourceDestPair.parallel(-700, 2500, 0)
    x = np.linspace(0, 3000, 13)
    lam = 0.004
    assert np.allclose(cdf_nearest_charging_given_sd(Uniform(p), lam, sd, "vertical", x),
                       1 - np.exp(-lam * p * x), atol=1e-14)
    assert np.allclose(cdf_nearest_noncharging_given_sd(Uniform(p), lam, sd, "vertical", x),
                       1 - np.exp(-lam * (1 - p) * x), atol=1e-14)


def test_noncharging_zero_inside_plateau():
    sd = SourceDestPair.parallel(-200, 2000, 0)
    assert cdf_nearest_noncharging_given_sd(PowerLaw(1.5, 500), 0.01, sd, "vertical", 700) == 0.0


@pytest.mark.parametrize("spec", [PowerLaw(0.5, 300), PowerLaw(2, 800), Gaussian(900, 0.8)])
@pytest.mark.parametrize("sd", [SourceDestPair.parallel(-1500, 1000, 0),
                                SourceDestPair.parallel(2000, -600, 0)])
def test_pdf_is_derivative_of_cdf(spec, sd):
    h = 1e-3
    for x in (50.0, 333.0, 1234.0):
        for cdf, pdf in ((cdf_nearest_charging_given_sd, pdf_nearest_charging_given_sd),
                         (cdf_nearest_noncharging_given_sd, pdf_nearest_noncharging_given_sd)):
            fd = (cdf(spec, 0.01, sd, "vertical", x + h) - cdf(spec, 0.01, sd, "vertical", x - h)) / (2 * h)
            assert pdf(spec, 0.01, sd, "vertical", x) == pytest.approx(fd, rel=1e-6, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 4), st.floats(50, 2000), st.floats(-5000, 5000), st.floats(-5000, 5000),
       st.lists(st.floats(0, 1e4), min_size=2, max_size=6))
def test_nearest_cdfs_monotone_and_bounded(alpha, r_min, s, d, xs):
    sd = SourceDestPair.parallel(s, d, 0)
    xs = np.sort(np.array(xs))
    for f in (cdf_nearest_charging_given_sd, cdf_nearest_noncharging_given_sd):
        v = f(PowerLaw(alpha, r_min), 0.005, sd, "vertical", xs)
        assert np.all((v >= 0) & (v <= 1))
        assert np.all(np.diff(v) >= -1e-12)


def test_event_probabilities():
    sd = SourceDestPair.parallel(600, 1200, 0)
    ev = event_probs(PowerLaw(1, 500), sd)
    assert ev["T3"] == pytest.approx((1 - 5 / 6) * (5 / 12), rel=1e-12)
    assert sum(ev.values()) == pytest.approx(1.0)
    assert event_probs(Uniform(1), sd)["T3"] == 0.0
    assert event_probs(Uniform(0), sd)["T3"] == 0.0
    perp = SourceDestPair(s=600, d=1800, d_h=400, d_v=1200, orientation="perpendicular")
    ev = event_probs(PowerLaw(1, 500), perp)
    assert sum(ev[k] for k in ("T5", "T6", "T7", "T8")) == pytest.approx(1.0)


@pytest.mark.parametrize("spec,lam", [(PowerLaw(1, 500), 0.02), (PowerLaw(0.5, 200), 0.005),
                                      (Gaussian(1500, 0.9), 0.01)])
def test_t3_leaves_partition_the_event(spec, lam):
    tree = event_probs_T3(spec, lam, ORACLE_SD)
    assert sum(tree.leaves.values()) == pytest.approx(tree.p_t3, rel=1e-7)
    assert all(v >= 0 for v in tree.leaves.values())
    n = tree.nodes
    assert n["T3,1,1"] + n["T3,1,2"] + n["T3,1,3"] + n["T3,1,4"] == pytest.approx(1.0)
    assert n["T3,3,1"] + n["T3,3,2"] == pytest.approx(1.0)


def test_leaf_matches_high_precision_oracle():
    spec = PowerLaw(1, 500)
    assert leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "D_n", 300) == \
        pytest.approx(ORACLE_PSI_DN_300, rel=1e-6)
    assert leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "rho_c", 1300) == \
        pytest.approx(ORACLE_PSI_RHO_1300, rel=1e-5)
    assert cdf_gap_X(spec, 0.02, ORACLE_SD, "horizontal", 300) == \
        pytest.approx(ORACLE_GAP_300, rel=1e-9)


def test_leaf_support():
    spec = PowerLaw(1, 500)
    assert leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "D_n", 1000.5) == 1.0
    assert leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "rho_c", 799) == 0.0
    assert leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "rho_c", 1801) == 1.0
    pct = leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "rho_c", 1300 / 1800 * 100, rho_units="percent")
    assert pct == pytest.approx(ORACLE_PSI_RHO_1300, rel=1e-5)
    xs = np.linspace(0, 1100, 23)
    assert np.all(np.diff(leaf_L35_metric_cdf(spec, 0.02, ORACLE_SD, "D_n", xs)) >= -1e-12)


def test_leaf_degenerate_and_bad_metric():
    with pytest.raises(ConditioningDegenerate):
        leaf_L35_metric_cdf(Uniform(1.0), 0.02, ORACLE_SD, "D_n", 10)
    with pytest.raises(InvalidParameter):
        leaf_L35_metric_cdf(PowerLaw(1, 500), 0.02, ORACLE_SD, "length", 10)


def test_gap_support():
    sd = SourceDestPair.parallel(0, 2000, 0)
    assert cdf_gap_X(Uniform(0.5), 0.01, sd, "vertical", 0) == 0.0
    assert cdf_gap_X(Uniform(0.5), 0.01, sd, "vertical", 2000) == 1.0


def test_gap_matches_conditioned_mc():
    sd = SourceDestPair.parallel(0, 2000, 0)
    mc = sample_gap(Uniform(0.5), 0.01, sd, "vertical", 20000, seed=3)
    for x in (50, 100, 300, 800):
        assert cdf_gap_X(Uniform(0.5), 0.01, sd, "vertical", x) == pytest.approx(mc(x), abs=0.02)


def test_unconditional_matches_mc():
    dist = SourceDestDistribution(UniformDensity(-2000, 2000))
    spec = PowerLaw(1, 500)
    mc = sample_nearest_unconditional(spec, 0.01, dist, 100_000, seed=11, horizon=400)
    assert cdf_nearest_charging_unconditional(spec, 0.01, dist, 300) == pytest.approx(mc(300), abs=0.01)
    assert cdf_nearest_charging_unconditional(Uniform(0.3), 0.01, dist, 300) == \
        pytest.approx(1 - math.exp(-0.003 * 300), rel=1e-8)


def test_analytic_method_only_knows_the_leaf():
    with pytest.raises(NoClosedForm):
        metric_cdf_given_sd(PowerLaw(1, 500), 0.02, ORACLE_SD, "D_n", 100,
                            method="analytic-T3", event="L3,4")
    v = metric_cdf_given_sd(PowerLaw(1, 500), 0.02, ORACLE_SD, "D_n", 300,
                            method="analytic-T3", event="L3,5")
    assert v == pytest.approx(ORACLE_PSI_DN_300, rel=1e-6)


def test_hybrid_agrees_with_monte_carlo():
    spec, lam = PowerLaw(1, 500), 0.005
    sd = SourceDestPair.parallel(600, 1400, 1000)
    xs = np.array([0.0, 200, 600, 1500, 5000])
    kw = dict(n=20000, seed=5)
    mc = metric_cdf_given_sd(spec, lam, sd, "D_n", xs, method="monte-carlo", **kw)
    hy = metric_cdf_given_sd(spec, lam, sd, "D_n", xs, method="hybrid", **kw)
    assert np.max(np.abs(mc - hy)) < 0.015
    big = metric_cdf_given_sd(spec, lam, sd, "rho_c", 100.0, method="hybrid", **kw)
    assert big == pytest.approx(1.0)
