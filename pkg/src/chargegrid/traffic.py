"""Traffic statistics: log-log power-law fit and density clustering."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .errors import FitFailure, IngestionError, InvalidParameter

NOISE = -1


@dataclass(frozen=True)
class ZoneStats:
    zone_id: object
    centroid: tuple
    count: int
    distance_to_center: float = 0.0


@dataclass(frozen=True)
class PowerLawFit:
    alpha_hat: float
    intercept: float
    r_squared: float
    ci_lo: float
    ci_hi: float
    n_points: int

    def to_dict(self):
        return {"alpha_hat": self.alpha_hat, "intercept": self.intercept,
                "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
                "r_squared": self.r_squared, "n_points": self.n_points}


def zones_with_center(zones, center):
    """Recompute distance_to_center for every zone."""
    cx, cy = center
    return [ZoneStats(z.zone_id, z.centroid, z.count,
                      math.hypot(z.centroid[0] - cx, z.centroid[1] - cy)) for z in zones]


def load_zone_stats(path) -> list:
    import csv
    import os
    if not os.path.exists(path):
        raise IngestionError(f"file not found: {path}")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.DictReader(fh)):
            try:
                out.append(ZoneStats(row["zone_id"], (float(row["centroid_x"]),
                                                      float(row["centroid_y"])),
                                     int(float(row["count"]))))
            except (KeyError, ValueError):
                raise IngestionError(f"{path}: zone row {k} is malformed") from None
            if out[-1].count < 0:
                raise IngestionError(f"{path}: zone row {k} has a negative count")
    return out


def fit_power_law(zones, r_min: float, exclude=(), confidence: float = 0.95) -> PowerLawFit:
    """OLS of ln(count) on ln(distance) over zones farther than ``r_min``.

    ``alpha_hat`` is minus the slope; the interval is the usual t interval on
    the slope (reported for alpha, so the ends are swapped and negated).
    """
    ex = {str(z) for z in exclude}
    r = np.array([z.distance_to_center for z in zones if str(z.zone_id) not in ex], float)
    c = np.array([z.count for z in zones if str(z.zone_id) not in ex], float)
    keep = (r > r_min) & (c > 0)
    n = int(keep.sum())
    if n < 3:
        raise FitFailure(f"need at least 3 zones beyond r_min with positive counts, got {n}")
    x, y = np.log(r[keep]), np.log(c[keep])
    if np.ptp(x) == 0:
        raise FitFailure("all qualifying zones are at the same distance")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = stats.linregress(x, y)
    slope, se = float(res.slope), float(res.stderr)
    q = float(stats.t.ppf(0.5 + confidence / 2.0, n - 2))
    r2 = float(res.rvalue) ** 2 if math.isfinite(res.rvalue) else 1.0
    return PowerLawFit(-slope, float(res.intercept), r2, -slope - q * se, -slope + q * se, n)


# ---------------------------------------------------------------------------
# DBSCAN
# ---------------------------------------------------------------------------

@dataclass
class Clusters:
    labels: np.ndarray        # cluster index per point, -1 for noise
    core: np.ndarray          # bool per point
    points: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if len(self.labels) else 0

    def members(self, k):
        return self.points[self.labels == k]


def dbscan(points, eps: float, min_pts: int) -> Clusters:
    """DBSCAN with Euclidean eps-neighborhoods (a point counts itself).

    Clusters are numbered in the order of their lowest-index core point; a
    border point reachable from several clusters joins the earliest one
    (first core wins).  Core status does not depend on input order.
    """
    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise InvalidParameter(f"min_pts must be at least 1, got {min_pts}")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return Clusters(labels, np.zeros(0, bool), pts)
    nbrs = cKDTree(pts).query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in nbrs])
    cid = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cid
        stack = [i]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if labels[v] == NOISE:
                    labels[v] = cid
                    if core[v]:
                        stack.append(v)
        cid += 1
    return Clusters(labels, core, pts)


def top_k_cluster_centers(clusters: Clusters, k: int) -> list:
    """Centroids of the k largest clusters; equal sizes are ordered by the
    smaller centroid norm, then by cluster number."""
    if clusters.n_clusters == 0:
        warnings.warn("no clusters to choose centers from", RuntimeWarning, stacklevel=2)
        return []
    rows = []
    for c in range(clusters.n_clusters):
        m = clusters.members(c)
        cen = m.mean(axis=0)
        rows.append((-len(m), float(np.hypot(*cen)), c, (float(cen[0]), float(cen[1]))))
    rows.sort()
    return [r[3] for r in rows[:k]]
