import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from chargegrid.analytic import integral_g
from chargegrid.errors import CalibrationFailure, InvalidParameter
from chargegrid.mplp import (EmpiricalWeights, SimWindow, UniformWeights, avg_charging_fraction,
                             calibrate, sample_mplp, thin)
from chargegrid.thinning import Gaussian, PowerLaw, Uniform


def test_line_counts_are_poisson():
    counts = np.array([len(sample_mplp(0.01, SimWindow(1000), s).vx) for s in range(400)])
    assert counts.mean() == pytest.approx(20, abs=3 * np.sqrt(20 / 400))
    # dispersion index: var/mean of a Poisson sample is chi-square distributed
    stat = counts.var(ddof=1) * (len(counts) - 1) / counts.mean()
    p = stats.chi2.sf(stat, len(counts) - 1)
    assert 0.001 < p < 0.999


def test_lines_are_uniform_in_window():
    city = sample_mplp(0.05, SimWindow(5000), 1)
    assert np.all(np.abs(city.vx) <= 5000) and np.all(np.diff(city.vx) >= 0)
    assert stats.kstest((city.hy + 5000) / 10000, "uniform").pvalue > 1e-3


def test_sampling_is_deterministic_and_rejects_bad_input():
    assert sample_mplp(0.01, SimWindow(1000), 42) == sample_mplp(0.01, SimWindow(1000), 42)
    assert sample_mplp(0.01, SimWindow(1000), 42) != sample_mplp(0.01, SimWindow(1000), 43)
    with pytest.raises(InvalidParameter):
        sample_mplp(0.0, SimWindow(1000), 1)
    with pytest.raises(InvalidParameter):
        SimWindow(-1)


def test_thin_extremes_and_binomial_rate():
    city = sample_mplp(0.05, SimWindow(2000), 3)
    assert thin(city, Uniform(1.0), 0).vc.all()
    assert not thin(city, Uniform(0.0), 0).hc.any()
    lines = type(city)(np.full(100_000, 1000.0), np.zeros(100_000, bool), np.zeros(0),
                       np.zeros(0, bool), 0.05, SimWindow(2000))
    frac = thin(lines, PowerLaw(2, 500), 9).vc.mean()
    assert frac == pytest.approx(0.25, abs=0.01)


def test_thinning_intensity_follows_g():
    # binned charging share against the mean of g in each bin
    spec = PowerLaw(1.0, 300)
    city = thin(sample_mplp(0.5, SimWindow(6000), 2), spec, 2)
    edges = np.linspace(-6000, 6000, 13)
    idx = np.digitize(city.vx, edges) - 1
    for k in range(12):
        sel = idx == k
        expect = integral_g(spec, edges[k], edges[k + 1]) / (edges[k + 1] - edges[k])
        n = sel.sum()
        assert abs(city.vc[sel].mean() - expect) < 4 * np.sqrt(expect * (1 - expect) / n) + 1e-9


def test_avg_fraction_values():
    assert avg_charging_fraction(Uniform(0.2), UniformWeights(0, 7)) == pytest.approx(0.2)
    assert avg_charging_fraction(PowerLaw(1, 500), UniformWeights(0, 2000)) == \
        pytest.approx((500 + 500 * np.log(4)) / 2000, rel=1e-12)
    w = EmpiricalWeights([0, 1000, 2000], [1, 1, 2])
    assert avg_charging_fraction(PowerLaw(1, 500), w) == pytest.approx((1 + 0.5 + 0.5) / 4)
    with pytest.raises(InvalidParameter):
        EmpiricalWeights([])


def test_calibration_examples():
    assert calibrate(Uniform(0.5), 0.2, UniformWeights(0, 10)).p == pytest.approx(0.2, abs=1e-9)
    got = calibrate(PowerLaw(3.0, 500), 0.5966, UniformWeights(0, 2000))
    assert got.alpha == pytest.approx(1.0, abs=0.01)
    with pytest.raises(CalibrationFailure) as err:
        calibrate(PowerLaw(1.0, 500), 0.99, UniformWeights(0, 50_000))
    lo, hi = err.value.achievable
    assert hi < 0.99 and lo < hi


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5), st.floats(50, 1000), st.floats(1000, 30000))
def test_calibration_round_trip(alpha, r_min, hi):
    w = UniformWeights(0, hi)
    target = avg_charging_fraction(PowerLaw(alpha, r_min), w)
    try:
        got = calibrate(PowerLaw(1.0, r_min), target, w)
    except CalibrationFailure:
        return  # outside the search bracket
    assert avg_charging_fraction(got, w) == pytest.approx(target, abs=1e-6)


def test_calibrate_gaussian_width():
    w = UniformWeights(0, 5000)
    got = calibrate(Gaussian(100.0, 1.0), 0.3, w)
    assert avg_charging_fraction(got, w) == pytest.approx(0.3, abs=1e-6)


def test_csv_shape():
    city = thin(sample_mplp(0.01, SimWindow(500), 4), Uniform(0.5), 4)
    lines = city.to_csv().splitlines()
    assert lines[0] == "axis,coord_m,charging" and len(lines) == 1 + city.n_lines
