"""Synthetic stand-ins for proprietary inputs: grid cities and center-heavy traffic."""
from __future__ import annotations

import math

import numpy as np

from .mplp import SimWindow, sample_mplp
from .rng import stream
from .roadnet import RoadGraph, TripRecord, build_graph
from .traffic import ZoneStats


def mplp_graph(lam: float, half_width: float, seed: int, blocks_per_road: int = 1) -> RoadGraph:
    """Road graph of one line-process realization clipped to the window.

    Nodes are the intersections; a road is a run of ``blocks_per_road``
    consecutive blocks along one line (0 means the whole line).
    """
    def key(axis, line, block):
        if blocks_per_road == 0:
            return f"{axis}{line}"
        return f"{axis}{line}_{block // blocks_per_road}"

    city = sample_mplp(lam, SimWindow(half_width), seed)
    nodes = [{"id": f"n{i}_{j}", "x": float(x), "y": float(y)}
             for i, x in enumerate(city.vx) for j, y in enumerate(city.hy)]
    edges = []
    for i, x in enumerate(city.vx):
        for j in range(len(city.hy) - 1):
            edges.append({"id": f"v{i}_{j}", "u": f"n{i}_{j}", "v": f"n{i}_{j + 1}",
                          "length": float(city.hy[j + 1] - city.hy[j]), "road_key": key("v", i, j)})
    for j, y in enumerate(city.hy):
        for i in range(len(city.vx) - 1):
            edges.append({"id": f"h{i}_{j}", "u": f"n{i}_{j}", "v": f"n{i + 1}_{j}",
                          "length": float(city.vx[i + 1] - city.vx[i]), "road_key": key("h", j, i)})
    return build_graph(nodes, edges, source="synthetic")


def sample_radial_points(rng, n, alpha, r0, r_max):
    """Planar points whose areal density is flat up to r0 and falls as
    (r/r0)^-alpha beyond (uniform angle, radius by inverse-CDF on a grid)."""
    grid = np.linspace(0.0, r_max, 4097)
    dens = grid * np.where(grid <= r0, 1.0, (np.maximum(grid, r0) / r0) ** (-alpha))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    r = np.interp(rng.random(n), cdf, grid)
    th = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def power_law_trips(graph: RoadGraph, n: int, seed: int, alpha=2.0, r0=500.0, r_max=None):
    """Trip sequence whose endpoints concentrate around the origin, snapped to nodes."""
    from scipy.spatial import cKDTree

    rng = stream(seed, "synthetic-trips")
    if r_max is None:
        r_max = 0.95 * min(np.abs(graph.x).max(), np.abs(graph.y).max())
    tree = cKDTree(np.column_stack([graph.x, graph.y]))
    trips = []
    while len(trips) < n:
        pts = sample_radial_points(rng, 2, alpha, r0, r_max)
        _, idx = tree.query(pts)
        if idx[0] != idx[1]:
            trips.append(TripRecord(graph.node_ids[idx[0]], graph.node_ids[idx[1]]))
    return trips


def power_law_zones(n_zones, alpha, seed, noise_sigma=0.1, r_lo=500.0, r_hi=20000.0, scale=1e5):
    """Zones at random radii with counts scale * r^-alpha times lognormal noise."""
    rng = stream(seed, "synthetic-zones")
    r = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), n_zones))
    th = rng.uniform(0.0, 2.0 * math.pi, n_zones)
    counts = scale * r ** (-alpha) * np.exp(rng.normal(0.0, noise_sigma, n_zones))
    return [ZoneStats(k, (float(r[k] * math.cos(th[k])), float(r[k] * math.sin(th[k]))),
                      float(counts[k]), float(r[k])) for k in range(n_zones)]
