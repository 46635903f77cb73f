"""Road graphs: ingestion, charging assignment and trip routing."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .errors import IngestionError, InvalidParameter, RoutingFailure, SnapFailure
from .mc import RouteResult
from .rng import keyed_uniform, stream
from .thinning import MultiCenterPowerLaw, eval_g

EARTH_RADIUS_M = 6_371_008.8
DEFAULT_SNAP_RADIUS_M = 250.0


# ---------------------------------------------------------------------------
# graph type
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RoadGraph:
    node_ids: list
    x: np.ndarray
    y: np.ndarray
    edge_ids: list
    eu: np.ndarray          # endpoint indices into the node arrays
    ev: np.ndarray
    length: np.ndarray
    road_of_edge: np.ndarray  # index into road_keys
    road_keys: list
    node_zone: list | None = None
    center_distance: np.ndarray | None = None
    charging: np.ndarray | None = None   # per road
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        self._index = {nid: k for k, nid in enumerate(self.node_ids)}

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_edges(self):
        return len(self.edge_ids)

    @property
    def n_roads(self):
        return len(self.road_keys)

    def node_index(self, node_id):
        try:
            return self._index[node_id]
        except KeyError:
            raise InvalidParameter(f"unknown node id {node_id!r}") from None

    def road_lengths(self):
        return np.bincount(self.road_of_edge, weights=self.length, minlength=self.n_roads)

    def edge_charging(self):
        if self.charging is None:
            return np.zeros(self.n_edges, dtype=bool)
        return self.charging[self.road_of_edge]

    def road_center_distances(self, centers):
        """Per road: minimum over member nodes of the distance to the nearest center."""
        cs = np.asarray(centers, dtype=float).reshape(-1, 2)
        if len(cs) == 0:
            raise InvalidParameter("at least one center is required")
        node_d = np.min(np.hypot(self.x[:, None] - cs[:, 0], self.y[:, None] - cs[:, 1]), axis=1)
        out = np.full(self.n_roads, np.inf)
        np.minimum.at(out, self.road_of_edge, node_d[self.eu])
        np.minimum.at(out, self.road_of_edge, node_d[self.ev])
        return out

    def assignment_csv(self) -> str:
        lines = ["road_key,center_distance_m,charging"]
        for k, key in enumerate(self.road_keys):
            cd = self.center_distance[k] if self.center_distance is not None else float("nan")
            ch = int(self.charging[k]) if self.charging is not None else 0
            lines.append(f"{key},{float(cd)!r},{ch}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def project_lonlat(lon, lat, lon0=None, lat0=None):
    """Spherical transverse Mercator centered on (lon0, lat0); meters."""
    lon = np.radians(np.asarray(lon, dtype=float))
    lat = np.radians(np.asarray(lat, dtype=float))
    l0 = np.radians(lon0) if lon0 is not None else float(np.mean(lon))
    p0 = np.radians(lat0) if lat0 is not None else float(np.mean(lat))
    b = np.cos(lat) * np.sin(lon - l0)
    x = EARTH_RADIUS_M * np.arctanh(b)
    y = EARTH_RADIUS_M * (np.arctan2(np.tan(lat), np.cos(lon - l0)) - p0)
    return x, y


def _num(rec, key, where):
    try:
        v = float(rec[key])
    except (KeyError, TypeError, ValueError):
        raise IngestionError(f"{where}: missing or non-numeric '{key}'") from None
    if not math.isfinite(v):
        raise IngestionError(f"{where}: non-finite '{key}'")
    return v


def build_graph(nodes, edges, source="input") -> RoadGraph:
    """Validate raw node/edge records (dicts) into a :class:`RoadGraph`."""
    if not nodes:
        raise IngestionError(f"{source}: no nodes")
    ids, xs, ys, zones = [], [], [], []
    seen = set()
    geographic = "x" not in nodes[0] and "lon" in nodes[0]
    lon, lat = [], []
    for k, rec in enumerate(nodes):
        where = f"{source}: node record {k}"
        if "id" not in rec or rec["id"] in ("", None):
            raise IngestionError(f"{where}: missing id")
        nid = str(rec["id"])
        if nid in seen:
            raise IngestionError(f"{where}: duplicate node id {nid!r}")
        seen.add(nid)
        ids.append(nid)
        if geographic:
            lon.append(_num(rec, "lon", where))
            lat.append(_num(rec, "lat", where))
        else:
            xs.append(_num(rec, "x", where))
            ys.append(_num(rec, "y", where))
        zones.append(str(rec["zone"]) if rec.get("zone") not in (None, "") else None)
    if geographic:
        x, y = project_lonlat(lon, lat)
    else:
        x, y = np.array(xs), np.array(ys)
    index = {nid: k for k, nid in enumerate(ids)}
    eids, eu, ev, elen, ekey = [], [], [], [], []
    seen_e = set()
    for k, rec in enumerate(edges):
        eid = str(rec.get("id", k))
        where = f"{source}: edge {eid!r}"
        if eid in seen_e:
            raise IngestionError(f"{where}: duplicate edge id")
        seen_e.add(eid)
        u, v = str(rec.get("u", "")), str(rec.get("v", ""))
        for end in (u, v):
            if end not in index:
                raise IngestionError(f"{where}: references missing node {end!r}")
        iu, iv = index[u], index[v]
        if rec.get("length") in (None, ""):
            length = float(math.hypot(x[iu] - x[iv], y[iu] - y[iv]))
        else:
            length = _num(rec, "length", where)
        if not length > 0:
            raise IngestionError(f"{where}: non-positive length {length}")
        key = rec.get("road_key")
        eids.append(eid)
        eu.append(iu)
        ev.append(iv)
        elen.append(length)
        ekey.append(str(key) if key not in (None, "") else f"edge:{eid}")
    road_keys = list(dict.fromkeys(ekey))
    kidx = {key: k for k, key in enumerate(road_keys)}
    return RoadGraph(ids, np.asarray(x, float), np.asarray(y, float), eids,
                     np.array(eu, dtype=np.int64), np.array(ev, dtype=np.int64),
                     np.array(elen), np.array([kidx[k] for k in ekey], dtype=np.int64),
                     road_keys, zones if any(z is not None for z in zones) else None)


def _read_csv(path):
    if not os.path.exists(path):
        raise IngestionError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_graph(source) -> RoadGraph:
    """Load a graph from a JSON document ``{"nodes": [...], "edges": [...]}``
    or from a ``(nodes_csv, edges_csv)`` pair / ``{"nodes": path, "edges": path}``."""
    if isinstance(source, dict) and isinstance(source.get("nodes"), str):
        source = (source["nodes"], source["edges"])
    if isinstance(source, (tuple, list)):
        nodes_path, edges_path = source
        return build_graph(_read_csv(nodes_path), _read_csv(edges_path), source=str(edges_path))
    path = os.fspath(source)
    if not os.path.exists(path):
        raise IngestionError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: malformed JSON ({exc})") from None
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise IngestionError(f"{path}: expected an object with 'nodes' and 'edges'")
    return build_graph(doc["nodes"], doc["edges"], source=path)


def graph_to_json(graph: RoadGraph) -> dict:
    nodes = []
    for k, nid in enumerate(graph.node_ids):
        rec = {"id": nid, "x": float(graph.x[k]), "y": float(graph.y[k])}
        if graph.node_zone is not None and graph.node_zone[k] is not None:
            rec["zone"] = graph.node_zone[k]
        nodes.append(rec)
    edges = [{"id": graph.edge_ids[k], "u": graph.node_ids[graph.eu[k]],
              "v": graph.node_ids[graph.ev[k]], "length": float(graph.length[k]),
              "road_key": graph.road_keys[graph.road_of_edge[k]]} for k in range(graph.n_edges)]
    return {"nodes": nodes, "edges": edges}


# ---------------------------------------------------------------------------
# charging assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    graph: RoadGraph
    count_fraction: float
    length_fraction: float


def assign_charging(graph: RoadGraph, spec, centers=None, seed: int = 0) -> Assignment:
    """Mark each road charging with probability g(center distance).

    The uniform variate of a road depends only on (seed, road key), so two
    strategies run with the same seed share their randomness road by road.
    """
    if centers is None:
        centers = spec.centers if isinstance(spec, MultiCenterPowerLaw) else [(0.0, 0.0)]
    centers = list(centers)
    if not centers:
        raise InvalidParameter("at least one center is required")
    cd = graph.road_center_distances(centers)
    g = eval_g(spec, cd)
    u = np.array([keyed_uniform(seed, key) for key in graph.road_keys])
    charging = u < g
    out = replace(graph, center_distance=cd, charging=charging)
    lengths = graph.road_lengths()
    count_frac = float(charging.mean()) if len(charging) else 0.0
    length_frac = float(lengths[charging].sum() / lengths.sum()) if lengths.sum() > 0 else 0.0
    return Assignment(out, count_frac, length_frac)


# ---------------------------------------------------------------------------
# trips and routing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TripRecord:
    """Endpoints as node ids, planar points (x, y) or ``("zone", id)``."""

    pickup: object
    dropoff: object
    timestamp: str | None = None


def load_trips(path) -> list:
    rows = _read_csv(path)
    out = []
    for k, r in enumerate(rows):
        where = f"{path}: trip row {k}"

        def end(prefix):
            nid = (r.get(f"{prefix}_id") or "").strip()
            if nid:
                return nid
            try:
                return (float(r[f"{prefix}_x"]), float(r[f"{prefix}_y"]))
            except (KeyError, TypeError, ValueError):
                raise IngestionError(f"{where}: {prefix} has neither id nor coordinates") from None

        out.append(TripRecord(end("pickup"), end("dropoff"), r.get("timestamp") or None))
    return out


class Router:
    """Two-stage lexicographic router with a per-(source, target) cache of the
    shortest-path DAG, shared across charging assignments."""

    def __init__(self, graph: RoadGraph, snap_radius: float = DEFAULT_SNAP_RADIUS_M,
                 zone_seed: int = 0):
        self.graph = graph
        self.snap_radius = snap_radius
        self.zone_seed = zone_seed
        n = graph.n_nodes
        u = np.concatenate([graph.eu, graph.ev])
        v = np.concatenate([graph.ev, graph.eu])
        w = np.concatenate([graph.length, graph.length])
        # parallel edges: stage 1 only needs the shortest of each pair
        self._csr = _min_duplicates(u, v, w, n)
        self._du, self._dv, self._dw = u, v, w
        self._dedge = np.concatenate([np.arange(graph.n_edges)] * 2)
        self._tree = cKDTree(np.column_stack([graph.x, graph.y]))
        self._cache = {}
        self._zone_nodes = None

    def resolve(self, end, label="endpoint", trip_index=0):
        g = self.graph
        if isinstance(end, tuple) and len(end) == 2 and end[0] == "zone":
            return self._zone_node(str(end[1]), trip_index, label)
        if isinstance(end, (tuple, list, np.ndarray)):
            dist, idx = self._tree.query([float(end[0]), float(end[1])])
            if dist > self.snap_radius:
                raise SnapFailure(f"{label} {tuple(end)} is {dist:.1f} m from the nearest node "
                                  f"(snap radius {self.snap_radius} m)")
            return int(idx)
        return g.node_index(str(end))

    def _zone_node(self, zone, trip_index, label):
        if self._zone_nodes is None:
            if self.graph.node_zone is None:
                raise InvalidParameter("graph has no zone attribute for zone-based trips")
            self._zone_nodes = {}
            for k, z in enumerate(self.graph.node_zone):
                self._zone_nodes.setdefault(z, []).append(k)
        nodes = self._zone_nodes.get(zone)
        if not nodes:
            raise SnapFailure(f"{label}: zone {zone!r} has no graph nodes")
        rng = stream(self.zone_seed, "zone", trip_index, label)
        return nodes[int(rng.integers(len(nodes)))]

    def _dag(self, s, t):
        key = (s, t)
        if key not in self._cache:
            dist = dijkstra(self._csr, directed=False, indices=[s, t])
            ds, dt = dist[0], dist[1]
            total = ds[t]
            if not np.isfinite(total):
                raise RoutingFailure(f"nodes {self.graph.node_ids[s]!r} and "
                                     f"{self.graph.node_ids[t]!r} are disconnected")
            tol = 1e-9 * max(1.0, total)
            on = ds[self._du] + self._dw + dt[self._dv] <= total + tol
            on &= ds[self._du] < ds[self._dv]
            idx = np.flatnonzero(on)
            self._cache[key] = (total, ds, idx)
        return self._cache[key]

    def route(self, trip: TripRecord, trip_index: int = 0, power_kw=None, speed_kmh=None):
        s = self.resolve(trip.pickup, "pickup", trip_index)
        t = self.resolve(trip.dropoff, "dropoff", trip_index)
        return self.route_nodes(s, t, power_kw, speed_kmh)

    def route_nodes(self, s, t, power_kw=None, speed_kmh=None) -> RouteResult:
        g = self.graph
        if s == t:
            return RouteResult(0.0, 0.0, None, [], 0.0 if power_kw else None)
        total, ds, idx = self._dag(s, t)
        charging = g.edge_charging()
        length, charged, dn, path = dag_route(ds, self._du[idx], self._dv[idx], self._dw[idx],
                                              charging[self._dedge[idx]], s, t)
        edges = [int(self._dedge[idx][k]) for k in path]
        segs = [{"edge": g.edge_ids[e], "road_key": g.road_keys[g.road_of_edge[e]],
                 "length": float(g.length[e]), "charging": bool(charging[e])} for e in edges]
        e_c = None
        if power_kw is not None and speed_kmh is not None:
            e_c = power_kw * (charged / 1000.0) / speed_kmh
        return RouteResult(total, charged, None if dn == math.inf else dn, segs, e_c)


def _min_duplicates(u, v, w, n):
    order = np.lexsort((w, v, u))
    u, v, w = u[order], v[order], w[order]
    first = np.ones(len(u), dtype=bool)
    first[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    return coo_matrix((w[first], (u[first], v[first])), shape=(n, n)).tocsr()


def dag_route(ds, du, dv, dw, dc, s, t):
    """Stage 2: over the shortest-path DAG, maximize charged length, then
    minimize distance before the first charging edge.

    Returns (length, charged, d_n, path as positions into the edge arrays).
    """
    order = np.argsort(ds[du], kind="stable")
    best = {s: (0.0, math.inf, None)}
    for k in order:
        a, b = int(du[k]), int(dv[k])
        if a not in best:
            continue
        c, d, _ = best[a]
        w = float(dw[k])
        if dc[k]:
            if d == math.inf:
                d = float(ds[a])
            c += w
        cur = best.get(b)
        if cur is None or c > cur[0] + 1e-9 or (abs(c - cur[0]) <= 1e-9 and d < cur[1]):
            best[b] = (c, d, k)
    if t not in best:
        raise RoutingFailure("destination not reached in the shortest-path DAG")
    path = []
    node = t
    while node != s:
        k = best[node][2]
        path.append(k)
        node = int(du[k])
    c, d, _ = best[t]
    return float(ds[t]), c, d, path[::-1]


def route_trip(graph: RoadGraph, trip: TripRecord, snap_radius=DEFAULT_SNAP_RADIUS_M,
               power_kw=None, speed_kmh=None) -> RouteResult:
    return Router(graph, snap_radius).route(trip, 0, power_kw, speed_kmh)


# ---------------------------------------------------------------------------
# city center
# ---------------------------------------------------------------------------

def center_from_traffic(zones=None, points=None, eps=200.0, min_pts=50):
    """Centroid of the busiest zone (ties: lowest zone id); without zones,
    the centroid of the largest density cluster of ``points``."""
    if zones:
        def key(z):
            zid = z.zone_id
            return (-z.count, (0, float(zid)) if _is_number(zid) else (1, str(zid)))
        top = min(zones, key=key)
        return tuple(map(float, top.centroid))
    if points is not None and len(points):
        from .traffic import dbscan, top_k_cluster_centers
        clusters = dbscan(points, eps, min_pts)
        centers = top_k_cluster_centers(clusters, 1)
        if centers:
            return centers[0]
        raise InvalidParameter("no density cluster found in the points")
    raise InvalidParameter("center_from_traffic needs zone counts or points")


def _is_number(v):
    try:
        float(v)
        return True
    except (TypeError, ValueError):
        return False
