"""Monte Carlo estimation of trip metrics on sampled line-process cities.

A trip is routed with the driver model: shortest route first, then the
largest charged length, then (as a last, rarely active tie-break) the
shortest distance before charging starts.  Shortest routes of Manhattan
length are exactly the staircase paths inside the source/destination box,
so routing is a dynamic program over that box; only when no staircase
exists does the search fall back to Dijkstra on a growing neighborhood.

Sampling is done trip by trip, but only the lines that can matter are
drawn: the source and destination roads (added to the realization, the
Palm view of "a trip that starts on a road"), then the lines crossing the
box, and the rest of the window only if the box holds no staircase.  By
the independence of Poisson processes on disjoint sets this is the same
law as drawing the whole window first.
"""
from __future__ import annotations

import heapq
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ecdf import EmpiricalCdf
from .errors import ConditioningDegenerate, InvalidParameter, RoutingFailure
from .mplp import CityRealization
from .placement import PARALLEL, SourceDestPair, TripBatch
from .rng import stream
from .thinning import eval_g_line

CHUNK = 512
COORD_TOL = 1e-7
DEFAULT_POWER_KW = 20.0
DEFAULT_SPEED_KMH = 20.0

NO_ROAD, PLAIN, CHARGING = -1, 0, 1


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class RouteResult:
    total_length: float
    charged_length: float
    d_n: float | None
    segments: list = field(default_factory=list)
    e_c: float | None = None

    @property
    def rho_c(self) -> float:
        if self.total_length <= 0:
            return 0.0
        return min(100.0, 100.0 * self.charged_length / self.total_length)

    @property
    def censored(self) -> bool:
        return self.d_n is None


@dataclass(frozen=True)
class TripSample:
    source: tuple
    dest: tuple
    realization_seed: int | None = None


# ---------------------------------------------------------------------------
# grid construction and search
# ---------------------------------------------------------------------------

def _box_axis(coords, kinds, a, b):
    """Columns from a to b (a <= b): endpoints plus every line strictly inside."""
    m = (coords >= a - COORD_TOL) & (coords <= b + COORD_TOL)
    c, k = coords[m], kinds[m]
    at_a = np.abs(c - a) <= COORD_TOL
    at_b = np.abs(c - b) <= COORD_TOL
    ka = int(k[at_a].max()) if at_a.any() else NO_ROAD
    if b - a <= COORD_TOL:
        return np.array([a]), np.array([ka], dtype=np.int8)
    kb = int(k[at_b].max()) if at_b.any() else NO_ROAD
    inner = ~(at_a | at_b)
    order = np.argsort(c[inner], kind="stable")
    xs = np.concatenate([[a], c[inner][order], [b]])
    ks = np.concatenate([[ka], k[inner][order], [kb]]).astype(np.int8)
    return xs, ks


def _merged_axis(coords, kinds, lo, hi, points):
    """All lines within [lo, hi] plus the given points as pseudo-columns."""
    m = (coords >= lo) & (coords <= hi)
    c = list(zip(coords[m].tolist(), kinds[m].tolist()))
    for p in points:
        if not any(abs(p - x) <= COORD_TOL for x, _ in c):
            c.append((p, NO_ROAD))
    c.sort()
    merged_x, merged_k = [], []
    for x, k in c:
        if merged_x and abs(x - merged_x[-1]) <= COORD_TOL:
            merged_k[-1] = max(merged_k[-1], k)
        else:
            merged_x.append(x)
            merged_k.append(k)
    return np.array(merged_x), np.array(merged_k, dtype=np.int8)


def _index_of(xs, p):
    return int(np.argmin(np.abs(xs - p)))


def _better(a, b):
    """Lexicographic (length, -charged, d_n) with float tolerance."""
    if a[0] < b[0] - 1e-9:
        return True
    if a[0] > b[0] + 1e-9:
        return False
    if a[1] > b[1] + 1e-9:
        return True
    if a[1] < b[1] - 1e-9:
        return False
    return a[2] < b[2] - 1e-9


def _dijkstra_grid(xs, ck, ys, rk, src_ij, dst_ij):
    nx, ny = len(xs), len(ys)
    start = src_ij[1] * nx + src_ij[0]
    goal = dst_ij[1] * nx + dst_ij[0]
    best = {start: (0.0, 0.0, math.inf)}
    pred = {start: None}
    heap = [(0.0, -0.0, math.inf, start)]
    done = set()
    while heap:
        length, negc, dn, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == goal:
            break
        i, j = node % nx, node // nx
        nbrs = []
        if rk[j] >= 0:
            if i > 0:
                nbrs.append((i - 1, j, xs[i] - xs[i - 1], rk[j]))
            if i < nx - 1:
                nbrs.append((i + 1, j, xs[i + 1] - xs[i], rk[j]))
        if ck[i] >= 0:
            if j > 0:
                nbrs.append((i, j - 1, ys[j] - ys[j - 1], ck[i]))
            if j < ny - 1:
                nbrs.append((i, j + 1, ys[j + 1] - ys[j], ck[i]))
        for ni, nj, w, kind in nbrs:
            nb = nj * nx + ni
            if nb in done:
                continue
            c = -negc
            d = dn
            if kind == CHARGING and w > 0:
                if d == math.inf:
                    d = length
                c += w
            lab = (length + w, c, d)
            if nb not in best or _better(lab, best[nb]):
                best[nb] = lab
                pred[nb] = node
                heapq.heappush(heap, (lab[0], -lab[1], lab[2], nb))
    if goal not in done:
        return None
    path = []
    node = goal
    while node is not None:
        path.append((node % nx, node // nx))
        node = pred[node]
    return best[goal], path[::-1]


def _segments(path, col_x, row_y, ck, rk):
    """Merge unit moves of a grid path into per-road segments."""
    segs = []
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        if j0 == j1:
            axis, coord, kind = "horizontal", row_y[j0], rk[j0]
        else:
            axis, coord, kind = "vertical", col_x[i0], ck[i0]
        a = (float(col_x[i0]), float(row_y[j0]))
        b = (float(col_x[i1]), float(row_y[j1]))
        length = abs(b[0] - a[0]) + abs(b[1] - a[1])
        if segs and segs[-1]["axis"] == axis and segs[-1]["coord"] == float(coord):
            segs[-1]["end"] = b
            segs[-1]["length"] += length
        else:
            segs.append({"axis": axis, "coord": float(coord), "start": a, "end": b,
                         "length": length, "charging": bool(kind == CHARGING)})
    return segs


def solve_route(vx, vk, hy, hk, src, dst, want_path=False):
    """Route between two points lying on the given lines.

    Returns ``(length, charged, d_n, segments)``; ``d_n`` is ``inf`` when the
    route never touches a charging road.
    """
    vx = np.asarray(vx, dtype=float)
    hy = np.asarray(hy, dtype=float)
    vk = np.asarray(vk, dtype=np.int8)
    hk = np.asarray(hk, dtype=np.int8)
    sx, sy = float(src[0]), float(src[1])
    dx, dy = float(dst[0]), float(dst[1])
    fx = -1.0 if dx < sx else 1.0
    fy = -1.0 if dy < sy else 1.0
    xs, ck = _box_axis(fx * vx, vk, fx * sx, fx * dx)
    ys, rk = _box_axis(fy * hy, hk, fy * sy, fy * dy)
    if ck[0] < 0 and rk[0] < 0:
        raise InvalidParameter(f"source point {src} is not on a road")
    if ck[-1] < 0 and rk[-1] < 0:
        raise InvalidParameter(f"destination point {dst} is not on a road")
    reach, charged, dn, choice = kernels.route_box(xs, ck, ys, rk, want_path)
    manhattan = abs(dx - sx) + abs(dy - sy)
    if reach:
        segs = []
        if want_path:
            path = kernels.trace_path(choice, len(xs), len(ys))
            segs = _segments(path, fx * xs, fy * ys, ck, rk)
        return manhattan, charged, dn, segs
    return _fallback(vx, vk, hy, hk, (sx, sy), (dx, dy), manhattan, want_path)


def _fallback(vx, vk, hy, hk, src, dst, manhattan, want_path):
    n_lines = len(vx) + len(hy)
    if n_lines == 0:
        raise RoutingFailure("no roads")
    allc = np.concatenate([vx, hy, [src[0], src[1], dst[0], dst[1]]])
    span = float(allc.max() - allc.min()) or 1.0
    margin = max(4.0 * span / max(n_lines, 1), 1e-6)
    xlo, xhi = min(src[0], dst[0]), max(src[0], dst[0])
    ylo, yhi = min(src[1], dst[1]), max(src[1], dst[1])
    while True:
        cols, ck = _merged_axis(vx, vk, xlo - margin, xhi + margin, (src[0], dst[0]))
        rows, rk = _merged_axis(hy, hk, ylo - margin, yhi + margin, (src[1], dst[1]))
        covers = (_within(vx, xlo - margin, xhi + margin)
                  and _within(hy, ylo - margin, yhi + margin))
        found = _dijkstra_grid(cols, ck, rows, rk,
                               (_index_of(cols, src[0]), _index_of(rows, src[1])),
                               (_index_of(cols, dst[0]), _index_of(rows, dst[1])))
        if found is not None:
            (length, charged, dn), path = found
            if length < manhattan + 2.0 * margin - 1e-9 or covers:
                segs = _segments(path, cols, rows, ck, rk) if want_path else []
                return length, charged, dn, segs
        elif covers:
            raise RoutingFailure(f"destination {dst} unreachable from {src}")
        margin *= 2.0


def _within(coords, lo, hi):
    return len(coords) == 0 or (coords.min() >= lo and coords.max() <= hi)


def _line_at(coords, kinds, p):
    hit = np.abs(np.asarray(coords) - p) <= COORD_TOL
    return bool(hit.any())


def route_on_realization(city: CityRealization, trip: TripSample, power_kw=None,
                         speed_kmh=None) -> RouteResult:
    """Route one trip on a realization (both points must sit on its lines)."""
    vk = city.vc.astype(np.int8)
    hk = city.hc.astype(np.int8)
    for name, p in (("source", trip.source), ("destination", trip.dest)):
        if not (_line_at(city.vx, vk, p[0]) or _line_at(city.hy, hk, p[1])):
            raise InvalidParameter(f"{name} point {p} does not lie on a road of the city")
    length, charged, dn, segs = solve_route(city.vx, vk, city.hy, hk, trip.source, trip.dest,
                                            want_path=True)
    e_c = None
    if power_kw is not None and speed_kmh is not None:
        e_c = power_kw * (charged / 1000.0) / speed_kmh
    return RouteResult(length, charged, None if dn == math.inf else dn, segs, e_c)


# ---------------------------------------------------------------------------
# per-trip line sampling
# ---------------------------------------------------------------------------

def _lines(rng, spec, lam, axis, lo, hi):
    if hi <= lo:
        return np.empty(0), np.empty(0, dtype=np.int8)
    n = rng.poisson(lam * (hi - lo))
    c = rng.uniform(lo, hi, n)
    k = (rng.random(n) < eval_g_line(spec, axis, c)).astype(np.int8)
    return c, k


@dataclass
class _Trip:
    src: tuple
    dst: tuple
    s_vert: bool
    d_vert: bool


def _palm_roads(rng, spec, trip: _Trip):
    """Source and destination roads with their own charging draws."""
    v, vk, h, hk = [], [], [], []
    roads = [(trip.s_vert, trip.src), (trip.d_vert, trip.dst)]
    flags = []
    for vert, p in roads:
        axis, coord = (0, p[0]) if vert else (1, p[1])
        same = [f for (a, c, f) in flags if a == axis and abs(c - coord) <= COORD_TOL]
        if same:
            flags.append((axis, coord, same[0]))
            continue
        f = bool(rng.random() < float(eval_g_line(spec, axis, coord)))
        flags.append((axis, coord, f))
        (v if axis == 0 else h).append(coord)
        (vk if axis == 0 else hk).append(int(f))
    return (np.array(v), np.array(vk, dtype=np.int8), np.array(h), np.array(hk, dtype=np.int8),
            flags[0][2], flags[1][2])


def _route_sampled(rng, spec, lam, half_width, trip: _Trip, roads, box_v, box_h):
    """Route with the box lines; draws the rest of the window only if needed."""
    pv, pvk, ph, phk = roads
    vx = np.concatenate([pv, box_v[0]])
    vk = np.concatenate([pvk, box_v[1]])
    hy = np.concatenate([ph, box_h[0]])
    hk = np.concatenate([phk, box_h[1]])
    xlo, xhi = sorted((trip.src[0], trip.dst[0]))
    ylo, yhi = sorted((trip.src[1], trip.dst[1]))
    fx = -1.0 if trip.dst[0] < trip.src[0] else 1.0
    fy = -1.0 if trip.dst[1] < trip.src[1] else 1.0
    xs, ck = _box_axis(fx * vx, vk, fx * trip.src[0], fx * trip.dst[0])
    ys, rk = _box_axis(fy * hy, hk, fy * trip.src[1], fy * trip.dst[1])
    reach, charged, dn, _ = kernels.route_box(xs, ck, ys, rk, False)
    manhattan = (xhi - xlo) + (yhi - ylo)
    if reach:
        return manhattan, charged, dn
    w = half_width
    outside = [_lines(rng, spec, lam, 0, -w, xlo), _lines(rng, spec, lam, 0, xhi, w),
               _lines(rng, spec, lam, 1, -w, ylo), _lines(rng, spec, lam, 1, yhi, w)]
    vx = np.concatenate([vx, outside[0][0], outside[1][0]])
    vk = np.concatenate([vk, outside[0][1], outside[1][1]])
    hy = np.concatenate([hy, outside[2][0], outside[3][0]])
    hk = np.concatenate([hk, outside[2][1], outside[3][1]])
    length, charged, dn, _ = _fallback(vx, vk, hy, hk, trip.src, trip.dst, manhattan, False)
    return length, charged, dn


def _box_lines(rng, spec, lam, trip: _Trip):
    xlo, xhi = sorted((trip.src[0], trip.dst[0]))
    ylo, yhi = sorted((trip.src[1], trip.dst[1]))
    return _lines(rng, spec, lam, 0, xlo, xhi), _lines(rng, spec, lam, 1, ylo, yhi)


# ---------------------------------------------------------------------------
# T3 leaf classification (fixed parallel pair)
# ---------------------------------------------------------------------------

def classify_leaf(sd: SourceDestPair, src_chg, dst_chg, box_v, box_h) -> int:
    """Leaf index k of L3,k (1..10), or 0 when the trip is not in T3."""
    if src_chg or not dst_chg:
        return 0
    t = (box_h[0] - sd.y0) * sd.vdir
    in_span = (t > 0) & (t < sd.d_v)
    t, hk = t[in_span], box_h[1][in_span]
    u = (box_v[0] - sd.s) * sd.hdir
    in_gap = (u > 0) & (u < sd.d_h)
    u, vk = u[in_gap], box_v[1][in_gap]
    vc = u[vk == CHARGING].min() if np.any(vk == CHARGING) else math.inf
    if len(t) == 0:
        return 1
    if not np.any(hk == CHARGING):
        if len(t) == 1:
            return 2
        return 3 if vc == math.inf else 4
    b = t[hk == CHARGING].min()
    a = t[hk != CHARGING].min() if np.any(hk != CHARGING) else math.inf
    if vc == math.inf:
        if a < b:
            return 5 if b - a < sd.d_h else 6
        return 7
    if a < b:
        return 8 if a + vc < b else 9
    return 10


def event_code(sd: SourceDestPair, src_chg, dst_chg) -> int:
    base = 0 if sd.orientation == PARALLEL else 4
    return base + 1 + (0 if src_chg else 2) + (0 if dst_chg else 1)


# ---------------------------------------------------------------------------
# Monte Carlo drivers
# ---------------------------------------------------------------------------

@dataclass
class TripMetrics:
    length: np.ndarray
    charged: np.ndarray
    d_n: np.ndarray          # NaN when censored
    e_c: np.ndarray
    leaf: np.ndarray         # T3 leaf index, 0 otherwise / unclassified
    event: np.ndarray        # T_i index, 0 when not classified
    acceptance_rate: float | None = None
    proposals: int = 0

    @property
    def n(self) -> int:
        return len(self.length)

    @property
    def rho_c(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(self.length > 0, 100.0 * self.charged / self.length, 0.0)
        return np.minimum(out, 100.0)

    @property
    def in_l35(self) -> np.ndarray:
        return self.leaf == 5

    def values(self, metric: str) -> np.ndarray:
        if metric == "D_n":
            return self.d_n
        if metric == "rho_c":
            return self.rho_c
        if metric == "e_c":
            return self.e_c
        raise InvalidParameter(f"unknown metric {metric!r}")

    def cdf(self, metric: str) -> EmpiricalCdf:
        """Empirical CDF; zero-length trips are left out, censored D_n counted in n."""
        keep = self.length > 0
        vals = self.values(metric)[keep]
        return EmpiricalCdf(vals, n=int(keep.sum()), acceptance_rate=self.acceptance_rate)

    def cdfs(self) -> dict:
        return {m: self.cdf(m) for m in ("D_n", "rho_c", "e_c")}

    @staticmethod
    def concat(parts) -> "TripMetrics":
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return TripMetrics(cat("length"), cat("charged"), cat("d_n"), cat("e_c"),
                           cat("leaf"), cat("event"))


def default_half_width(lam, extent) -> float:
    return max(3.0 * extent, 20.0 / lam)


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("CHARGEGRID_THREADS", "1") or 1)
    return max(1, int(threads))


def _run_chunks(fn, n, seed, threads, label):
    sizes = [min(CHUNK, n - k) for k in range(0, n, CHUNK)]
    jobs = [(stream(seed, label, idx), size) for idx, size in enumerate(sizes)]
    t = _threads(threads)
    if t == 1 or len(jobs) <= 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=t) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


def _trips_of(batch: TripBatch):
    for k in range(len(batch)):
        yield _Trip((float(batch.sx[k]), float(batch.sy[k])), (float(batch.dx[k]), float(batch.dy[k])),
                    bool(batch.s_vert[k]), bool(batch.d_vert[k]))


def sample_trip_metrics(spec, lam, placement, n, seed, half_width=None, classify=False,
                        power_kw=DEFAULT_POWER_KW, speed_kmh=DEFAULT_SPEED_KMH,
                        threads=None) -> TripMetrics:
    """Route ``n`` independent (city, trip) pairs and collect the metrics."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    if not lam > 0:
        raise InvalidParameter(f"lambda must be positive, got {lam}")
    fixed = placement if isinstance(placement, SourceDestPair) else None
    if classify and (fixed is None or fixed.orientation != PARALLEL):
        classify = False

    def chunk(rng, size):
        batch = placement.draw(rng, size)
        w = half_width or default_half_width(lam, batch.extent())
        if batch.extent() > w:
            raise InvalidParameter("trip endpoints fall outside the simulation window")
        out = np.empty((size, 5))
        leaf = np.zeros(size, dtype=np.int8)
        event = np.zeros(size, dtype=np.int8)
        for k, trip in enumerate(_trips_of(batch)):
            pv, pvk, ph, phk, s_chg, d_chg = _palm_roads(rng, spec, trip)
            box_v, box_h = _box_lines(rng, spec, lam, trip)
            if fixed is not None:
                event[k] = event_code(fixed, s_chg, d_chg)
                if classify:
                    leaf[k] = classify_leaf(fixed, s_chg, d_chg, box_v, box_h)
            length, charged, dn = _route_sampled(rng, spec, lam, w, trip, (pv, pvk, ph, phk),
                                                 box_v, box_h)
            out[k] = (length, charged, dn, 0.0, 0.0)
        dn = np.where(np.isinf(out[:, 2]), np.nan, out[:, 2])
        e_c = power_kw * (out[:, 1] / 1000.0) / speed_kmh
        return TripMetrics(out[:, 0], out[:, 1], dn, e_c, leaf, event)

    return TripMetrics.concat(_run_chunks(chunk, n, seed, threads, "trips"))


def sample_metric(spec, lam, placement, n, seed, **kw) -> dict:
    """Empirical CDFs of D_n, rho_c and e_c over ``n`` routed trips."""
    return sample_trip_metrics(spec, lam, placement, n, seed, **kw).cdfs()


# ---------------------------------------------------------------------------
# conditioned sampling
# ---------------------------------------------------------------------------

MIN_ACCEPTANCE = 1e-4
MAX_PROPOSALS = 1_000_000
_BATCH = 4096


def _parse_event(event):
    if isinstance(event, str) and event.startswith("L3,"):
        k = int(event.split(",")[1])
        if 1 <= k <= 10:
            return 3, k
    if isinstance(event, str) and event.startswith("T") and event[1:].isdigit():
        k = int(event[1:])
        if 1 <= k <= 8:
            return k, None
    raise InvalidParameter(f"unknown event {event!r}")


class _RateTracker:
    def __init__(self):
        self.proposed = 0
        self.accepted = 0
        self._lock = threading.Lock()

    def add(self, proposed, accepted):
        with self._lock:
            self.proposed += proposed
            self.accepted += accepted
        if self.proposed >= MAX_PROPOSALS and self.accepted < MIN_ACCEPTANCE * self.proposed:
            raise ConditioningDegenerate(
                f"acceptance rate {self.accepted / self.proposed:.3g} after "
                f"{self.proposed} proposals", rate=self.accepted / self.proposed)

    @property
    def rate(self):
        return self.accepted / self.proposed if self.proposed else float("nan")


def _flag_proposals(rng, spec, sd, want, tracker, size):
    """Rejection on the (source, destination) charging flags."""
    g_s = float(eval_g_line(spec, 0, sd.s))
    g_d = float(eval_g_line(spec, 0 if sd.orientation == PARALLEL else 1, sd.d))
    got = 0
    while got < size:
        s = rng.random(_BATCH) < g_s
        d = rng.random(_BATCH) < g_d
        code = (0 if sd.orientation == PARALLEL else 4) + 1 + np.where(s, 0, 2) + np.where(d, 0, 1)
        acc = int(np.sum(code == want))
        tracker.add(_BATCH, acc)
        got += acc
    first = {1: (True, True), 2: (True, False), 3: (False, True), 4: (False, False)}
    return first[(want - 1) % 4 + 1]


def _trip_of_sd(sd):
    return _Trip(sd.source_point(), sd.dest_point(), True, sd.dest_vertical)


def _first_hits_batch(rng, spec, lam, axis, start, direction, length, m):
    """Per-proposal line sets on (0, length) from ``start`` in ``direction``."""
    counts = rng.poisson(lam * length, m)
    t = rng.uniform(0.0, length, counts.sum())
    coord = start + direction * t
    kind = (rng.random(len(t)) < eval_g_line(spec, axis, coord)).astype(np.int8)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    ids = np.repeat(np.arange(m), counts)
    first_c = np.full(m, math.inf)
    first_nc = np.full(m, math.inf)
    np.minimum.at(first_c, ids[kind == CHARGING], t[kind == CHARGING])
    np.minimum.at(first_nc, ids[kind != CHARGING], t[kind != CHARGING])
    return counts, coord, kind, offsets, first_c, first_nc


def sample_metric_conditioned(spec, lam, sd: SourceDestPair, event, n, seed, half_width=None,
                              power_kw=DEFAULT_POWER_KW, speed_kmh=DEFAULT_SPEED_KMH,
                              threads=None) -> TripMetrics:
    """Trips conditioned on an event of the tree; ``acceptance_rate`` estimates
    P(event | S, D).

    T-events are sampled by rejection on the endpoint charging flags.  Leaves
    of T3 add rejection on the in-box lines.  For L3,5 the vertical lines
    between the two roads are drawn conditioned on being non-charging
    (exact: the charging and non-charging lines are independent Poisson
    processes), so only the horizontal configuration is rejection-sampled and
    the acceptance rate is the product of the stage rates and the exact
    probability exp(-lam * int g) of that vertical event.
    """
    ev, leaf = _parse_event(event)
    if sd.orientation == PARALLEL and ev > 4 or sd.orientation != PARALLEL and ev <= 4:
        raise InvalidParameter(f"event {event} is impossible for a {sd.orientation} pair")
    if leaf is not None and sd.orientation != PARALLEL:
        raise InvalidParameter("T3 leaves need a parallel pair")
    from .analytic import axis_law

    trip = _trip_of_sd(sd)
    w = half_width or default_half_width(lam, max(map(abs, trip.src + trip.dst)))
    flags_rate = _RateTracker()
    box_rate = _RateTracker()
    vert_factor = 1.0
    if leaf == 5:
        vert_factor = math.exp(-lam * float(axis_law(spec, lam, sd, "vertical").integral(sd.d_h)))

    def chunk(rng, size):
        s_chg, d_chg = _flag_proposals(rng, spec, sd, ev, flags_rate, size)
        roads = _palm_fixed(sd, s_chg, d_chg)
        out = np.empty((size, 3))
        leaves = np.zeros(size, dtype=np.int8)
        if leaf is None:
            for k in range(size):
                box_v, box_h = _box_lines(rng, spec, lam, trip)
                out[k] = _route_sampled(rng, spec, lam, w, trip, roads, box_v, box_h)
        elif leaf == 5:
            for k, (box_v, box_h) in enumerate(_l35_boxes(rng, spec, lam, sd, trip, size, box_rate)):
                leaves[k] = 5
                out[k] = _route_sampled(rng, spec, lam, w, trip, roads, box_v, box_h)
        else:
            k = 0
            while k < size:
                box_v, box_h = _box_lines(rng, spec, lam, trip)
                hit = classify_leaf(sd, s_chg, d_chg, box_v, box_h) == leaf
                box_rate.add(1, int(hit))
                if hit:
                    leaves[k] = leaf
                    out[k] = _route_sampled(rng, spec, lam, w, trip, roads, box_v, box_h)
                    k += 1
        dn = np.where(np.isinf(out[:, 2]), np.nan, out[:, 2])
        e_c = power_kw * (out[:, 1] / 1000.0) / speed_kmh
        return TripMetrics(out[:, 0], out[:, 1], dn, e_c, leaves, np.full(size, ev, np.int8))

    res = TripMetrics.concat(_run_chunks(chunk, n, seed, threads, f"cond-{event}"))
    rate = flags_rate.rate
    if leaf is not None:
        rate *= box_rate.rate * vert_factor
    res.acceptance_rate = rate
    res.proposals = flags_rate.proposed + box_rate.proposed
    return res


def _palm_fixed(sd, s_chg, d_chg):
    dest_axis = 0 if sd.dest_vertical else 1
    v, vk, h, hk = [sd.s], [int(s_chg)], [], []
    if dest_axis == 0:
        if abs(sd.d - sd.s) > COORD_TOL:
            v.append(sd.d)
            vk.append(int(d_chg))
    else:
        h.append(sd.d)
        hk.append(int(d_chg))
    return (np.array(v), np.array(vk, dtype=np.int8), np.array(h, dtype=float),
            np.array(hk, dtype=np.int8))


def _l35_boxes(rng, spec, lam, sd, trip, size, tracker):
    """Box line sets for L3,5: non-charging verticals between the roads, and
    horizontals with non-charging a before charging b, b - a < d_h."""
    got = []
    while len(got) < size:
        counts, coord, kind, offsets, first_c, first_nc = _first_hits_batch(
            rng, spec, lam, 1, sd.y0, sd.vdir, sd.d_v, _BATCH)
        ok = (first_nc < first_c) & np.isfinite(first_c) & (first_c - first_nc < sd.d_h)
        tracker.add(_BATCH, int(ok.sum()))
        for idx in np.flatnonzero(ok):
            if len(got) == size:
                break
            sl = slice(offsets[idx], offsets[idx + 1])
            got.append((coord[sl], kind[sl]))
    xlo, xhi = sorted((trip.src[0], trip.dst[0]))
    for hc, hk in got:
        vx, vk = _lines(rng, spec, lam, 0, xlo, xhi)
        keep = vk != CHARGING
        yield (vx[keep], vk[keep]), (hc, hk)


# ---------------------------------------------------------------------------
# nearest-road statistics (no routing needed)
# ---------------------------------------------------------------------------

def sample_nearest(spec, lam, sd: SourceDestPair, axis, n, seed, kind="charging",
                   horizon=None) -> EmpiricalCdf:
    """Distance from the source to the first charging (or non-charging) road
    of the given family, looking ``horizon`` meters ahead (default: the
    separation); farther hits are censored."""
    from .analytic import axis_law

    law = axis_law(spec, lam, sd, axis)
    horizon = float(horizon if horizon is not None else sd.frame(axis)[3])
    if not horizon > 0:
        raise InvalidParameter("horizon must be positive")

    def chunk(rng, size):
        *_, first_c, first_nc = _first_hits_batch(rng, spec, lam, law.axis, law.start,
                                                  law.direction, horizon, size)
        return first_c if kind == "charging" else first_nc

    if kind not in ("charging", "noncharging"):
        raise InvalidParameter(f"kind must be 'charging' or 'noncharging', got {kind!r}")
    vals = np.concatenate(_run_chunks(chunk, n, seed, 1, f"nearest-{axis}-{kind}"))
    return EmpiricalCdf(vals, n=n)


def sample_gap(spec, lam, sd: SourceDestPair, axis, n, seed) -> EmpiricalCdf:
    """X = D_C - D_NC given D_NC < D_C < separation, by rejection."""
    from .analytic import axis_law

    law = axis_law(spec, lam, sd, axis)
    sep = sd.frame(axis)[3]
    tracker = _RateTracker()

    def chunk(rng, size):
        vals = []
        while len(vals) < size:
            *_, first_c, first_nc = _first_hits_batch(rng, spec, lam, law.axis, law.start,
                                                      law.direction, sep, _BATCH)
            ok = (first_nc < first_c) & np.isfinite(first_c)
            tracker.add(_BATCH, int(ok.sum()))
            vals.extend((first_c[ok] - first_nc[ok])[: size - len(vals)].tolist())
        return np.array(vals)

    vals = np.concatenate(_run_chunks(chunk, n, seed, 1, f"gap-{axis}"))
    return EmpiricalCdf(vals, acceptance_rate=tracker.rate)


def sample_nearest_unconditional(spec, lam, dist, n, seed, horizon) -> EmpiricalCdf:
    """Nearest charging vertical road from S toward D with S ~ f_S, D ~ f_D."""

    def chunk(rng, size):
        s = dist.f_S.sample(rng, size)
        d = dist.f_D.sample(rng, size)
        direction = np.where(d >= s, 1.0, -1.0)
        counts = rng.poisson(lam * horizon, size)
        t = rng.uniform(0.0, horizon, counts.sum())
        ids = np.repeat(np.arange(size), counts)
        coord = s[ids] + direction[ids] * t
        chg = rng.random(len(t)) < eval_g_line(spec, 0, coord)
        first = np.full(size, math.inf)
        np.minimum.at(first, ids[chg], t[chg])
        return first

    vals = np.concatenate(_run_chunks(chunk, n, seed, 1, "nearest-unconditional"))
    return EmpiricalCdf(vals, n=n)
