import numpy as np
import pytest
from hypothesis import given, strategies as st

from chargegrid.errors import InvalidParameter
from chargegrid.evsim import (ChargeConfig, EvModel, compare_strategies, ev_model,
                              simulate_sequence, trip_energy_delta)
from chargegrid.roadnet import Router, TripRecord
from chargegrid.synthetic import mplp_graph, power_law_trips
from chargegrid.thinning import PowerLaw, Uniform

LEAF = ev_model("nissan_leaf")
CFG = ChargeConfig()


def test_trip_energy_examples():
    assert trip_energy_delta(LEAF, CFG, 10, 1.0) == pytest.approx(8.13589)
    assert trip_energy_delta(LEAF, CFG, 10, 0.0) == pytest.approx(-1.86411)
    assert trip_energy_delta(LEAF, CFG, 0, 0.4) == 0.0
    assert 100 * trip_energy_delta(LEAF, CFG, 10, 1.0) / LEAF.capacity == pytest.approx(20.34, abs=0.005)


def test_depletion_point():
    trace = simulate_sequence(LEAF, CFG, [(10.0, 0.0)] * 12)
    assert trace.depletion_km == pytest.approx(0.5 * 40 / 0.186411)
    assert trace.final_soc == 0.0 and all(p.soc == 0 for p in trace.points if p.cumulative_km > 108)


def test_clamp_and_empty_sequence():
    trace = simulate_sequence(LEAF, ChargeConfig(system_power=200), [(10.0, 1.0)] * 3)
    assert [p.soc for p in trace.points[1:]] == [1.0, 1.0, 1.0]
    assert trace.clamp_loss_kwh > 0
    empty = simulate_sequence(LEAF, CFG, [])
    assert len(empty.points) == 1 and empty.final_soc == 0.5


def test_bookkeeping_identity():
    trips = [(3.0, 0.2), (7.5, 0.9), (1.0, 0.0), (12.0, 0.5)]
    trace = simulate_sequence(ev_model("chevrolet_bolt"), ChargeConfig(initial_soc=0.3), trips)
    model = ev_model("chevrolet_bolt")
    net = sum(trip_energy_delta(model, CFG, l, r) for l, r in trips)
    assert trace.final_soc * model.capacity == pytest.approx(0.3 * model.capacity + net - trace.clamp_loss_kwh)
    assert trace.points[-1].cumulative_km == pytest.approx(23.5)


@given(st.lists(st.tuples(st.floats(0, 30), st.floats(0, 1)), max_size=15),
       st.floats(0, 1), st.floats(0, 1))
def test_more_charging_never_hurts(trips, soc, bump):
    low = simulate_sequence(LEAF, ChargeConfig(initial_soc=soc), trips)
    high = simulate_sequence(LEAF, ChargeConfig(initial_soc=soc),
                             [(l, min(1.0, r + bump)) for l, r in trips])
    assert high.final_soc >= low.final_soc - 1e-12
    assert all(0 <= p.soc <= 1 for p in high.points)


def test_validation():
    with pytest.raises(InvalidParameter):
        ev_model("trabant")
    with pytest.raises(InvalidParameter):
        EvModel("x", 0.0, 10)
    with pytest.raises(InvalidParameter):
        simulate_sequence(LEAF, CFG, [(1.0, 1.5)])
    assert simulate_sequence(LEAF, CFG, [{"length_km": 2.0, "rho_c": 0.5}]).points[-1].cumulative_km == 2.0


def test_csv():
    rows = simulate_sequence(LEAF, CFG, [(1.0, 0.0)]).to_csv().splitlines()
    assert rows[0] == "cumulative_km,soc_percent,depleted" and rows[1] == "0.0,50.0,0"


def test_compare_extremes_are_ordered():
    g = mplp_graph(0.004, 3000, 1, blocks_per_road=2)
    trips = power_law_trips(g, 6, 1)
    out = compare_strategies(g, trips, [("none", Uniform(0.0)), ("all", Uniform(1.0))], LEAF, CFG)
    assert out[0].trace.final_soc <= out[1].trace.final_soc
    assert out[1].realized_count_fraction == 1.0


def test_compare_calibrates_to_target():
    g = mplp_graph(0.004, 3000, 2, blocks_per_road=2)
    trips = power_law_trips(g, 4, 2)
    out = compare_strategies(g, trips, [("pl", PowerLaw(1.0, 200)), ("u", Uniform(0.5))],
                             LEAF, CFG, target=0.2, router=Router(g))
    for o in out:
        assert o.avg_fraction == pytest.approx(0.2, abs=1e-6)
    assert set(out[0].summary()) >= {"strategy", "final_soc", "depletion_km"}
