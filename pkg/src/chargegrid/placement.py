"""Trip geometry: source/destination pairs and how trips are placed.

Frame convention for a :class:`SourceDestPair`: the source road is the
vertical line ``x = s`` and the source point sits on it at height ``y0``.
For a parallel pair the destination road is the vertical line ``x = d`` (so
``d_h = |d - s|``); for a perpendicular pair it is the horizontal line
``y = d``.  ``y0`` defaults to ``s``, which is the convention the closed-form
expressions are written in.  Any configuration can be brought to this frame
by swapping axes, so nothing is lost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .thinning import PowerLaw, eval_g

PARALLEL = "parallel"
PERPENDICULAR = "perpendicular"


def _sign(v: float) -> int:
    return -1 if v < 0 else 1


@dataclass(frozen=True)
class SourceDestPair:
    s: float
    d: float
    d_h: float
    d_v: float
    orientation: str = PARALLEL
    y0: float | None = None
    hdir: int | None = None
    vdir: int | None = None

    def __post_init__(self):
        if self.d_h < 0 or self.d_v < 0:
            raise InvalidParameter("d_h and d_v must be non-negative")
        if self.orientation not in (PARALLEL, PERPENDICULAR):
            raise InvalidParameter(f"unknown orientation {self.orientation!r}")
        y0 = self.s if self.y0 is None else float(self.y0)
        object.__setattr__(self, "y0", y0)
        tol = 1e-9 * max(1.0, abs(self.s), abs(self.d), self.d_h, self.d_v)
        if self.orientation == PARALLEL:
            if abs(abs(self.d - self.s) - self.d_h) > tol:
                raise InvalidParameter(
                    f"parallel pair needs |d - s| == d_h (got |{self.d} - {self.s}| vs {self.d_h})")
            hdir = _sign(self.d - self.s) if self.hdir is None else self.hdir
            vdir = hdir if self.vdir is None else self.vdir
        else:
            if abs(abs(self.d - y0) - self.d_v) > tol:
                raise InvalidParameter(
                    f"perpendicular pair needs |d - y0| == d_v (got |{self.d} - {y0}| vs {self.d_v})")
            hdir = 1 if self.hdir is None else self.hdir
            vdir = _sign(self.d - y0) if self.vdir is None else self.vdir
        if hdir not in (1, -1) or vdir not in (1, -1):
            raise InvalidParameter("hdir/vdir must be +1 or -1")
        object.__setattr__(self, "hdir", hdir)
        object.__setattr__(self, "vdir", vdir)

    @classmethod
    def parallel(cls, s, d, d_v, y0=None):
        return cls(s=s, d=d, d_h=abs(d - s), d_v=d_v, orientation=PARALLEL, y0=y0)

    def source_point(self):
        return (self.s, self.y0)

    def dest_point(self):
        if self.orientation == PARALLEL:
            return (self.d, self.y0 + self.vdir * self.d_v)
        return (self.s + self.hdir * self.d_h, self.d)

    @property
    def dest_vertical(self) -> bool:
        return self.orientation == PARALLEL

    def frame(self, axis: str):
        """(line axis index, start coordinate, direction, separation).

        ``axis='vertical'`` looks at vertical roads met while moving from the
        source toward the destination horizontally; ``'horizontal'`` at the
        horizontal roads crossed while moving along the source road.
        """
        if axis == "vertical":
            return 0, self.s, self.hdir, self.d_h
        if axis == "horizontal":
            return 1, self.y0, self.vdir, self.d_v
        raise InvalidParameter(f"axis must be 'vertical' or 'horizontal', got {axis!r}")

    def to_dict(self) -> dict:
        return {"s": self.s, "d": self.d, "d_h": self.d_h, "d_v": self.d_v,
                "orientation": self.orientation, "y0": self.y0,
                "hdir": self.hdir, "vdir": self.vdir}

    @classmethod
    def from_dict(cls, d: dict):
        allowed = {"s", "d", "d_h", "d_v", "orientation", "y0", "hdir", "vdir"}
        extra = set(d) - allowed
        if extra:
            raise InvalidParameter(f"unknown source/destination keys: {sorted(extra)}")
        kw = dict(d)
        if "d_h" not in kw and kw.get("orientation", PARALLEL) == PARALLEL:
            kw["d_h"] = abs(kw["d"] - kw["s"])
        return cls(**kw)

    def draw(self, rng, n):
        sx, sy = self.source_point()
        dx, dy = self.dest_point()
        return TripBatch(np.full(n, sx), np.full(n, sy), np.ones(n, bool),
                         np.full(n, dx), np.full(n, dy), np.full(n, self.dest_vertical))


@dataclass
class TripBatch:
    """Column arrays describing ``n`` trips; ``*_vert`` says which road family
    the endpoint sits on (True = vertical line through the point)."""

    sx: np.ndarray
    sy: np.ndarray
    s_vert: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    d_vert: np.ndarray

    def __len__(self):
        return len(self.sx)

    def extent(self) -> float:
        pts = np.abs(np.concatenate([self.sx, self.sy, self.dx, self.dy]))
        return float(pts.max()) if len(pts) else 0.0


class UniformDensity:
    def __init__(self, lo: float, hi: float):
        if not hi > lo:
            raise InvalidParameter("uniform density needs lo < hi")
        self.lo, self.hi = float(lo), float(hi)

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        return np.where((r >= self.lo) & (r <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    @property
    def support(self):
        return self.lo, self.hi

    def breakpoints(self):
        return []

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


class PowerLawDensity:
    """Symmetric density on [-W, W] proportional to the power-law g(r)."""

    def __init__(self, alpha: float, r_min: float, half_width: float):
        from .analytic import integral_g
        self.g = PowerLaw(alpha, r_min)
        self.half_width = float(half_width)
        self.norm = float(integral_g(self.g, -half_width, half_width))

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.abs(r) <= self.half_width
        return np.where(inside, eval_g(self.g, r) / self.norm, 0.0)

    def cdf(self, r):
        from .analytic import integral_g
        r = np.clip(np.asarray(r, dtype=float), -self.half_width, self.half_width)
        return integral_g(self.g, np.full(r.shape, -self.half_width), r) / self.norm

    @property
    def support(self):
        return -self.half_width, self.half_width

    def breakpoints(self):
        return [-self.g.r_min, self.g.r_min]

    def sample(self, rng, n):
        # rejection from the uniform envelope, g <= 1
        out = np.empty(0)
        while len(out) < n:
            m = max(64, int(1.5 * (n - len(out)) * 2 * self.half_width / self.norm))
            r = rng.uniform(-self.half_width, self.half_width, m)
            keep = rng.random(m) < eval_g(self.g, r)
            out = np.concatenate([out, r[keep]])
        return out[:n]

    def to_dict(self):
        return {"kind": "power_law", "alpha": self.g.alpha, "r_min": self.g.r_min,
                "half_width": self.half_width}


def density_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "uniform":
        return UniformDensity(d["lo"], d["hi"])
    if kind == "power_law":
        return PowerLawDensity(d["alpha"], d["r_min"], d["half_width"])
    raise InvalidParameter(f"unknown density kind {kind!r}")


@dataclass
class SourceDestDistribution:
    """Independent densities for the source and destination coordinates.

    Used by the unconditional nearest-road CDF (source road at S, moving
    toward D) and, for Monte Carlo, to place whole trips: each endpoint gets
    both of its coordinates from its density and sits on a road of random
    orientation.
    """

    f_S: object
    f_D: object = field(default=None)

    def __post_init__(self):
        if self.f_D is None:
            self.f_D = self.f_S

    def draw(self, rng, n):
        sx, sy = self.f_S.sample(rng, n), self.f_S.sample(rng, n)
        dx, dy = self.f_D.sample(rng, n), self.f_D.sample(rng, n)
        s_vert = rng.random(n) < 0.5
        d_vert = rng.random(n) < 0.5
        return TripBatch(sx, sy, s_vert, dx, dy, d_vert)


@dataclass(frozen=True)
class AcrossCenter:
    """Trips of fixed Manhattan length whose endpoints mirror each other
    through the city center."""

    length_m: float

    def __post_init__(self):
        if not self.length_m > 0:
            raise InvalidParameter("trip length must be positive")

    def draw(self, rng, n):
        half = 0.5 * self.length_m
        u = rng.random(n)
        qx = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        qy = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        sx, sy = qx * u * half, qy * (1.0 - u) * half
        s_vert = rng.random(n) < 0.5
        d_vert = rng.random(n) < 0.5
        return TripBatch(sx, sy, s_vert, -sx, -sy, d_vert)


_PLACEMENT_KEYS = {"fixed": {"sd"}, "across_center": {"length_m"},
                   "distribution": {"f_S", "f_D"}}


def placement_from_dict(d: dict):
    kind = d.get("kind")
    extra = set(d) - {"kind"} - _PLACEMENT_KEYS.get(kind, set())
    if kind in _PLACEMENT_KEYS and extra:
        raise InvalidParameter(f"unknown placement keys for {kind!r}: {sorted(extra)}")
    if kind == "fixed":
        return SourceDestPair.from_dict(d["sd"])
    if kind == "across_center":
        return AcrossCenter(float(d["length_m"]))
    if kind == "distribution":
        f_s = density_from_dict(d["f_S"])
        f_d = density_from_dict(d["f_D"]) if "f_D" in d else None
        return SourceDestDistribution(f_s, f_d)
    raise InvalidParameter(f"unknown placement kind {kind!r}")


def manhattan(p, q) -> float:
    return math.fabs(p[0] - q[0]) + math.fabs(p[1] - q[1])
