import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixtures import grid3, irregular, square
from oracles import brute_force_graph_route
from chargegrid.errors import IngestionError, RoutingFailure, SnapFailure
from chargegrid.roadnet import (Router, TripRecord, assign_charging, build_graph,
                                center_from_traffic, graph_to_json, load_graph, load_trips,
                                project_lonlat)
from chargegrid.thinning import PowerLaw, Uniform
from chargegrid.traffic import ZoneStats


def with_charging(g, flags):
    from dataclasses import replace
    return replace(g, charging=np.array(flags, bool))


def oracle(g, s, t):
    ch = g.edge_charging()
    edges = [(int(g.eu[k]), int(g.ev[k]), float(g.length[k]), bool(ch[k])) for k in range(g.n_edges)]
    return brute_force_graph_route(edges, g.node_index(s), g.node_index(t))


def test_square_fixture_counts():
    g = square()
    assert (g.n_nodes, g.n_edges, g.n_roads) == (4, 4, 4)
    assert np.allclose(g.length, 100)


@pytest.mark.parametrize("fixture", ["grid3", "irregular"])
def test_routing_equals_enumeration_on_fixtures(fixture):
    g, flags = grid3() if fixture == "grid3" else irregular()
    g = with_charging(g, flags)
    r = Router(g)
    for s in g.node_ids:
        for t in g.node_ids:
            if s == t:
                continue
            res = r.route(TripRecord(s, t))
            assert (res.total_length, res.charged_length) == pytest.approx(oracle(g, s, t))
            assert sum(seg["length"] for seg in res.segments) == pytest.approx(res.total_length)


def test_grid_corner_to_corner_takes_charging_column():
    g, flags = grid3(1)
    res = Router(with_charging(g, flags)).route(TripRecord("00", "22"))
    assert res.total_length == 400 and res.charged_length == 200 and res.d_n == 100
    assert res.rho_c == 50


@settings(max_examples=30, deadline=None)
@given(st.lists(st.booleans(), min_size=6, max_size=6), st.sampled_from(["00", "02", "11"]),
       st.sampled_from(["22", "20", "12"]))
def test_grid_random_charging(flags, s, t):
    g, _ = grid3()
    g = with_charging(g, flags)
    if s == t:
        return
    res = Router(g).route(TripRecord(s, t))
    assert (res.total_length, res.charged_length) == pytest.approx(oracle(g, s, t))


def test_degenerate_and_all_charging_trips():
    g, _ = grid3()
    r = Router(with_charging(g, [True] * g.n_roads))
    assert r.route(TripRecord("11", "11")).total_length == 0
    assert r.route(TripRecord("11", "11")).rho_c == 0
    assert r.route(TripRecord("00", "21")).rho_c == 100


def test_disconnected_and_snap_failures():
    nodes = [{"id": i, "x": 1000 * i, "y": 0} for i in range(4)]
    edges = [{"u": 0, "v": 1}, {"u": 2, "v": 3}]
    r = Router(build_graph(nodes, edges))
    with pytest.raises(RoutingFailure):
        r.route(TripRecord("0", "3"))
    with pytest.raises(SnapFailure):
        r.route(TripRecord((0.0, 900.0), "1"))
    assert r.route(TripRecord((10.0, 5.0), (990.0, 0.0))).total_length == 1000


@pytest.mark.parametrize("nodes,edges,msg", [
    ([{"id": 1, "x": 0, "y": 0}, {"id": 1, "x": 1, "y": 0}], [], "duplicate node"),
    ([{"id": 1, "x": 0, "y": 0}], [{"id": "e", "u": 1, "v": 9}], "missing node '9'"),
    ([{"id": 1, "x": 0, "y": 0}, {"id": 2, "x": 0, "y": 0}], [{"id": "z", "u": 1, "v": 2}],
     "non-positive length"),
    ([{"id": 1, "x": "abc", "y": 0}], [], "non-numeric 'x'"),
])
def test_ingestion_errors_name_the_record(nodes, edges, msg):
    with pytest.raises(IngestionError, match=msg):
        build_graph(nodes, edges)


def test_file_round_trips(tmp_path):
    g, _ = grid3()
    p = tmp_path / "g.json"
    p.write_text(json.dumps(graph_to_json(g)))
    h = load_graph(p)
    assert h.node_ids == g.node_ids and h.road_keys == g.road_keys
    assert np.array_equal(h.length, g.length)
    (tmp_path / "n.csv").write_text("id,x,y\na,0,0\nb,30,40\n")
    (tmp_path / "e.csv").write_text("id,u,v,length,road_key\nq,a,b,,main\n")
    h = load_graph((tmp_path / "n.csv", tmp_path / "e.csv"))
    assert h.length[0] == 50
    with pytest.raises(IngestionError, match="missing.json"):
        load_graph(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{nope")
    with pytest.raises(IngestionError, match="malformed"):
        load_graph(tmp_path / "bad.json")


def test_lonlat_projection_scale():
    x, y = project_lonlat([-74.0, -74.0], [40.700, 40.701], lon0=-74.0, lat0=40.7)
    assert abs(x[1]) < 1e-6 and y[1] - y[0] == pytest.approx(111.19, abs=0.05)
    x, _ = project_lonlat([-74.0, -73.999], [40.7, 40.7], lon0=-74.0, lat0=40.7)
    assert x[1] == pytest.approx(111.19 * math.cos(math.radians(40.7)), rel=1e-3)


def test_assignment_statistics_and_determinism():
    n = 10_000
    nodes = [{"id": i, "x": float(i), "y": 0.0} for i in range(n + 1)]
    edges = [{"id": i, "u": i, "v": i + 1} for i in range(n)]
    g = build_graph(nodes, edges)
    a = assign_charging(g, Uniform(0.2), seed=5)
    assert a.count_fraction == pytest.approx(0.2, abs=0.012)
    assert np.array_equal(a.graph.charging, assign_charging(g, Uniform(0.2), seed=5).graph.charging)
    plateau = assign_charging(g, PowerLaw(2, 300), seed=1).graph
    assert plateau.charging[plateau.center_distance <= 300].all()


def test_zone_trips_and_loading(tmp_path):
    g, flags = grid3()
    r = Router(with_charging(g, flags), zone_seed=3)
    res = r.route(TripRecord(("zone", "A"), ("zone", "B")), trip_index=0)
    assert res.total_length > 0
    with pytest.raises(SnapFailure):
        r.route(TripRecord(("zone", "Q"), "00"))
    (tmp_path / "t.csv").write_text(
        "pickup_id,pickup_x,pickup_y,dropoff_id,dropoff_x,dropoff_y,timestamp\n"
        "00,,,,200,200,t0\n")
    trips = load_trips(tmp_path / "t.csv")
    assert trips == [TripRecord("00", (200.0, 200.0), "t0")]
    (tmp_path / "u.csv").write_text("pickup_id,dropoff_id\n,00\n")
    with pytest.raises(IngestionError, match="trip row 0"):
        load_trips(tmp_path / "u.csv")


def test_center_from_zones():
    z = [ZoneStats("3", (5.0, 5.0), 7), ZoneStats("1", (1.0, 2.0), 10), ZoneStats("2", (0.0, 0.0), 5)]
    assert center_from_traffic(zones=z[:1]) == (5.0, 5.0)
    assert center_from_traffic(zones=z) == (1.0, 2.0)
    tie = [ZoneStats("9", (9.0, 9.0), 4), ZoneStats("4", (4.0, 4.0), 4)]
    assert center_from_traffic(zones=tie) == (4.0, 4.0)
