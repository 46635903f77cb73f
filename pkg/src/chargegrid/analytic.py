"""Closed-form and quadrature evaluation of the nearest-road and trip metrics.

All conditional quantities are expressed along one axis of the
:class:`~chargegrid.placement.SourceDestPair` frame: starting at a
coordinate and moving in a direction, the charging lines met form a Poisson
process of intensity ``lam * g(r)`` and the non-charging ones an independent
process of intensity ``lam * (1 - g(r))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import erfc

from .errors import (ConditioningDegenerate, InvalidParameter, NoClosedForm,
                     NumericFailure)
from .placement import PARALLEL, SourceDestPair
from .thinning import Gaussian, MultiCenterPowerLaw, PowerLaw, Uniform, eval_g, eval_g_line

QUAD_LIMIT = 10_000
EPS_ABS = 1e-8
EPS_ABS_DOUBLE = 1e-6
ALPHA_ONE_TOL = 1e-9


# ---------------------------------------------------------------------------
# integral of g
# ---------------------------------------------------------------------------

def _tail(u1, u2, alpha, r_min):
    """int_{u1}^{u2} (u / r_min)^-alpha du for r_min <= u1 <= u2 (arrays)."""
    out = np.zeros(np.shape(u1))
    m = u2 > u1
    if not np.any(m):
        return out
    a, b = u1[m], u2[m]
    log_ratio = np.log(b / a)
    lead = a * (a / r_min) ** (-alpha)
    if abs(1.0 - alpha) < ALPHA_ONE_TOL:
        out[m] = lead * log_ratio
    else:
        out[m] = lead * np.expm1((1.0 - alpha) * log_ratio) / (1.0 - alpha)
    return out


def _integral_power_law(a, b, alpha, r_min):
    # left tail (-inf, -r_min], plateau, right tail [r_min, inf)
    lo = np.minimum(b, -r_min)
    left = _tail(np.maximum(-lo, r_min), np.maximum(-a, r_min), alpha, r_min)
    left = np.where(a < -r_min, left, 0.0)
    plateau = np.clip(np.minimum(b, r_min) - np.maximum(a, -r_min), 0.0, None)
    right = _tail(np.maximum(a, r_min), np.maximum(b, r_min), alpha, r_min)
    return left + plateau + right


def _integral_gaussian(a, b, sigma, peak):
    k = 1.0 / (sigma * math.sqrt(2.0))
    scale = peak * sigma * math.sqrt(math.pi / 2.0)
    # erfc differences on the side away from zero keep far tails accurate
    pos = a >= 0
    neg = b <= 0
    mid = ~(pos | neg)
    out = np.empty(np.shape(a))
    out[pos] = erfc(a[pos] * k) - erfc(b[pos] * k)
    out[neg] = erfc(-b[neg] * k) - erfc(-a[neg] * k)
    out[mid] = 2.0 - erfc(-a[mid] * k) - erfc(b[mid] * k)
    return scale * out


def _integral_multi(a, b, spec, axis):
    cs = np.unique([c[axis] for c in spec.centers])
    edges = np.concatenate([[-np.inf], 0.5 * (cs[1:] + cs[:-1]), [np.inf]])
    total = np.zeros(np.shape(a))
    for k, c in enumerate(cs):
        lo = np.maximum(a, edges[k])
        hi = np.minimum(b, edges[k + 1])
        ok = hi > lo
        part = _integral_power_law(np.where(ok, lo - c, 0.0), np.where(ok, hi - c, 0.0),
                                   spec.alpha, spec.r_min)
        total += np.where(ok, part, 0.0)
    return total


def integral_g(spec, a, b, axis: int = 0):
    """Integral of g over [a, b] in closed form.

    Power law: left tail, plateau and right tail pieces, with the logarithmic
    primitive when alpha == 1.  ``axis`` only matters for the multi-center
    family (whose g along a line depends on the centers' coordinates).
    """
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if np.any(a > b):
        raise InvalidParameter("integral_g needs a <= b")
    if isinstance(spec, Uniform):
        out = spec.p * (b - a)
    elif isinstance(spec, PowerLaw):
        out = _integral_power_law(a, b, spec.alpha, spec.r_min)
    elif isinstance(spec, Gaussian):
        out = _integral_gaussian(a, b, spec.sigma, spec.peak)
    elif isinstance(spec, MultiCenterPowerLaw):
        out = _integral_multi(a, b, spec, axis)
    else:
        raise InvalidParameter(f"unknown thinning spec {spec!r}")
    return float(out) if scalar else out


def kink_points(spec, axis: int = 0):
    """Coordinates where g is not smooth (quadrature split points)."""
    if isinstance(spec, PowerLaw):
        return [-spec.r_min, spec.r_min]
    if isinstance(spec, MultiCenterPowerLaw):
        cs = np.unique([c[axis] for c in spec.centers])
        pts = [c + sgn * spec.r_min for c in cs for sgn in (-1, 1)]
        pts += list(0.5 * (cs[1:] + cs[:-1])) + list(cs)
        return sorted(pts)
    return []


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def quad(f, a, b, points=(), epsabs=EPS_ABS, epsrel=1e-10):
    """Adaptive Gauss-Kronrod (QUADPACK) over [a, b] with split points."""
    if not b > a:
        return 0.0
    pts = sorted({float(p) for p in points if a < p < b})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *msg = integrate.quad(
            f, a, b, points=pts or None, epsabs=epsabs, epsrel=epsrel,
            limit=QUAD_LIMIT, full_output=1)
    if msg and err > max(100 * epsabs, 1e-6 * abs(val)):
        raise NumericFailure(f"quadrature did not converge: {msg[0].strip()[:120]}",
                             error_estimate=err)
    return val


# ---------------------------------------------------------------------------
# one-axis view of the thinned line process
# ---------------------------------------------------------------------------

@dataclass
class AxisLaw:
    """Charging / non-charging line processes met when moving from ``start``
    in direction ``direction`` along one axis."""

    spec: object
    lam: float
    axis: int
    start: float
    direction: int

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        if self.direction > 0:
            return integral_g(self.spec, np.full(t.shape, self.start), self.start + t, self.axis)
        return integral_g(self.spec, self.start - t, np.full(t.shape, self.start), self.axis)

    def g_at(self, t):
        return eval_g_line(self.spec, self.axis, self.start + self.direction * np.asarray(t, float))

    def F_c(self, t):
        return -np.expm1(-self.lam * self.integral(t))

    def f_c(self, t):
        return self.lam * self.g_at(t) * np.exp(-self.lam * self.integral(t))

    def nc_mass(self, t):
        """Length-weighted 1 - g over (0, t); clipped since rounding can push it below 0."""
        t = np.asarray(t, dtype=float)
        return np.maximum(t - self.integral(t), 0.0)

    def F_nc(self, t):
        return -np.expm1(-self.lam * self.nc_mass(t))

    def f_nc(self, t):
        return self.lam * (1.0 - self.g_at(t)) * np.exp(-self.lam * self.nc_mass(t))

    def kinks(self, length):
        out = []
        for r in kink_points(self.spec, self.axis):
            t = (r - self.start) * self.direction
            if 0 < t < length:
                out.append(t)
        return out


def axis_law(spec, lam, sd: SourceDestPair, axis: str) -> AxisLaw:
    if not lam > 0:
        raise InvalidParameter(f"lambda must be positive, got {lam}")
    ax, start, direction, _ = sd.frame(axis)
    return AxisLaw(spec, lam, ax, start, direction)


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidParameter("distance x must be non-negative")
    return x


def _out(x, val):
    return float(val) if np.ndim(x) == 0 else val


# ---------------------------------------------------------------------------
# nearest-road distributions given S, D
# ---------------------------------------------------------------------------

def cdf_nearest_charging_given_sd(spec, lam, sd, axis, x, clamp=False):
    """P(nearest charging road of the axis family lies within x) = 1 - exp(-lam int_A g)."""
    xa = _check_x(x)
    law = axis_law(spec, lam, sd, axis)
    if clamp:
        xa = np.minimum(xa, sd.frame(axis)[3])
    return _out(x, law.F_c(xa))


def pdf_nearest_charging_given_sd(spec, lam, sd, axis, x):
    xa = _check_x(x)
    return _out(x, axis_law(spec, lam, sd, axis).f_c(xa))


def cdf_nearest_noncharging_given_sd(spec, lam, sd, axis, x, clamp=False):
    xa = _check_x(x)
    law = axis_law(spec, lam, sd, axis)
    if clamp:
        xa = np.minimum(xa, sd.frame(axis)[3])
    return _out(x, law.F_nc(xa))


def pdf_nearest_noncharging_given_sd(spec, lam, sd, axis, x):
    xa = _check_x(x)
    return _out(x, axis_law(spec, lam, sd, axis).f_nc(xa))


# ---------------------------------------------------------------------------
# unconditional nearest vertical road (source road at S, heading toward D)
# ---------------------------------------------------------------------------

def cdf_nearest_charging_unconditional(spec, lam, dist, x, charging=True):
    """Average of the conditional CDF over S ~ f_S, D ~ f_D.

    The two half planes D > S and D < S are integrated separately; nothing
    is assumed about symmetry of f_S, f_D.
    """
    xa = _check_x(x)
    if not lam > 0:
        raise InvalidParameter(f"lambda must be positive, got {lam}")
    lo_s, hi_s = dist.f_S.support
    lo_d, hi_d = dist.f_D.support
    pts_s = list(dist.f_S.breakpoints()) + kink_points(spec, 0)
    pts_d = list(dist.f_D.breakpoints())

    def survivor(s, xv, direction):
        if direction > 0:
            i = integral_g(spec, s, s + xv)
        else:
            i = integral_g(spec, s - xv, s)
        mass = i if charging else max(xv - i, 0.0)
        return math.exp(-lam * mass)

    def one(xv):
        if xv == 0:
            return 0.0

        def outer(s):
            fs = float(dist.f_S.pdf(s))
            if fs == 0.0:
                return 0.0
            above = quad(lambda d: float(dist.f_D.pdf(d)), max(s, lo_d), hi_d,
                         points=pts_d, epsabs=EPS_ABS_DOUBLE * 1e-2)
            below = quad(lambda d: float(dist.f_D.pdf(d)), lo_d, min(s, hi_d),
                         points=pts_d, epsabs=EPS_ABS_DOUBLE * 1e-2)
            return fs * (above * survivor(s, xv, +1) + below * survivor(s, xv, -1))

        pts = pts_s + [p + xv for p in kink_points(spec, 0)] + [p - xv for p in kink_points(spec, 0)]
        return 1.0 - quad(outer, lo_s, hi_s, points=pts, epsabs=EPS_ABS_DOUBLE)

    vals = np.array([one(float(v)) for v in np.atleast_1d(xa)])
    return _out(x, vals.reshape(np.shape(xa)))


# ---------------------------------------------------------------------------
# gap between the nearest non-charging road and the next charging one
# ---------------------------------------------------------------------------

def _gap_cdf_scalar(law: AxisLaw, sep: float, x: float) -> float:
    if x <= 0:
        return 0.0
    if x >= sep:
        return 1.0
    kinks = law.kinks(sep)
    both = lambda t: float(law.F_nc(t) * law.f_c(t))
    den = quad(both, 0.0, sep, points=kinks)
    if den <= 0:
        raise ConditioningDegenerate("both road types never precede the separation")
    head = quad(both, 0.0, x, points=kinks)
    tail = quad(lambda t: float((law.F_nc(t) - law.F_nc(t - x)) * law.f_c(t)), x, sep,
                points=kinks + [k + x for k in kinks])
    return min(1.0, max(0.0, (head + tail) / den))


def cdf_gap_X(spec, lam, sd, axis, x):
    """CDF of (nearest charging) - (nearest non-charging) along ``axis``,
    given non-charging < charging < separation."""
    xa = _check_x(x)
    law = axis_law(spec, lam, sd, axis)
    sep = sd.frame(axis)[3]
    if not sep > 0:
        raise InvalidParameter("separation along the axis must be positive")
    vals = np.array([_gap_cdf_scalar(law, sep, float(v)) for v in np.atleast_1d(xa)])
    return _out(x, vals.reshape(np.shape(xa)))


# ---------------------------------------------------------------------------
# event tree
# ---------------------------------------------------------------------------

EVENTS = tuple(f"T{i}" for i in range(1, 9))
T3_LEAVES = tuple(f"L3,{i}" for i in range(1, 11))


def event_probs(spec, sd: SourceDestPair) -> dict:
    """P(T_i | S, D) for the eight orientation x charging-status events."""
    gs = float(eval_g_line(spec, 0, sd.s))
    if sd.orientation == PARALLEL:
        gd = float(eval_g_line(spec, 0, sd.d))
        base = 0
    else:
        gd = float(eval_g_line(spec, 1, sd.d))
        base = 4
    out = dict.fromkeys(EVENTS, 0.0)
    out[EVENTS[base + 0]] = gs * gd
    out[EVENTS[base + 1]] = gs * (1 - gd)
    out[EVENTS[base + 2]] = (1 - gs) * gd
    out[EVENTS[base + 3]] = (1 - gs) * (1 - gd)
    return out


@dataclass
class T3Tree:
    """Conditional node probabilities of the T3 tree and its ten leaves
    (absolute, i.e. already multiplied down from P(T3 | S, D))."""

    p_t3: float
    nodes: dict = field(default_factory=dict)
    leaves: dict = field(default_factory=dict)

    @property
    def p_l35(self) -> float:
        return self.leaves["L3,5"]


def _require_parallel(sd):
    if sd.orientation != PARALLEL:
        raise InvalidParameter("the T3 tree needs parallel source and destination roads")


def event_probs_T3(spec, lam, sd: SourceDestPair) -> T3Tree:
    _require_parallel(sd)
    hor = axis_law(spec, lam, sd, "horizontal")
    ver = axis_law(spec, lam, sd, "vertical")
    d_h, d_v = sd.d_h, sd.d_v

    p3 = event_probs(spec, sd)["T3"]
    lam_c = lam * float(hor.integral(d_v))
    lam_nc = max(lam * d_v - lam_c, 0.0)
    lam_vc = lam * float(ver.integral(d_h))

    n = {}
    n["T3,1,1"] = math.exp(-lam * d_v)
    n["T3,1,2"] = lam_nc * math.exp(-lam_nc) * math.exp(-lam_c)
    n["T3,1,3"] = math.exp(-lam_c) * (-math.expm1(-lam_nc) - lam_nc * math.exp(-lam_nc))
    n["T3,1,4"] = -math.expm1(-lam_c)
    n["T3,2,1"] = n["T3,2,3"] = math.exp(-lam_vc)
    n["T3,2,2"] = n["T3,2,4"] = -math.expm1(-lam_vc)

    kinks = hor.kinks(d_v)
    Fc_dv = float(hor.F_c(d_v))
    if Fc_dv > 0:
        n331 = quad(lambda a: float(hor.F_nc(a) * hor.f_c(a)), 0, d_v, points=kinks) / Fc_dv
        n332 = quad(lambda a: float((1 - hor.F_nc(a)) * hor.f_c(a)), 0, d_v, points=kinks) / Fc_dv
    else:
        n331, n332 = 0.0, 0.0
    n["T3,3,1"] = n["T3,3,3"] = n331
    n["T3,3,2"] = n["T3,3,4"] = n332
    # take the charging horizontal road iff it beats the non-charging detour
    n341 = cdf_gap_X(spec, lam, sd, "horizontal", d_h) if n331 > 0 and d_v > 0 else 0.0
    n["T3,4,1"], n["T3,4,2"] = n341, 1.0 - n341
    n343 = _p_take_vertical(hor, ver, d_h, d_v) if n331 > 0 and n["T3,2,4"] > 0 else 0.0
    n["T3,4,3"], n["T3,4,4"] = n343, 1.0 - n343

    L = {}
    L["L3,1"] = p3 * n["T3,1,1"]
    L["L3,2"] = p3 * n["T3,1,2"]
    L["L3,3"] = p3 * n["T3,1,3"] * n["T3,2,1"]
    L["L3,4"] = p3 * n["T3,1,3"] * n["T3,2,2"]
    L["L3,5"] = p3 * n["T3,1,4"] * n["T3,2,3"] * n["T3,3,1"] * n["T3,4,1"]
    L["L3,6"] = p3 * n["T3,1,4"] * n["T3,2,3"] * n["T3,3,1"] * n["T3,4,2"]
    L["L3,7"] = p3 * n["T3,1,4"] * n["T3,2,3"] * n["T3,3,2"]
    L["L3,8"] = p3 * n["T3,1,4"] * n["T3,2,4"] * n["T3,3,3"] * n["T3,4,3"]
    L["L3,9"] = p3 * n["T3,1,4"] * n["T3,2,4"] * n["T3,3,3"] * n["T3,4,4"]
    L["L3,10"] = p3 * n["T3,1,4"] * n["T3,2,4"] * n["T3,3,4"]
    return T3Tree(p_t3=p3, nodes=n, leaves=L)


def _p_take_vertical(hor: AxisLaw, ver: AxisLaw, d_h, d_v):
    """P(a + c < b | a < b < d_v, c < d_h) with a, b the nearest non-charging /
    charging horizontal roads and c the nearest charging vertical road."""
    kinks_h = hor.kinks(d_v)
    den_h = quad(lambda b: float(hor.F_nc(b) * hor.f_c(b)), 0, d_v, points=kinks_h)
    Fvc = float(ver.F_c(d_h))
    if den_h <= 0 or Fvc <= 0:
        return 0.0

    def inner(c):
        if c >= d_v:
            return 0.0
        pts = kinks_h + [k + c for k in kinks_h]
        return quad(lambda b: float(hor.F_nc(b - c) * hor.f_c(b)), c, d_v, points=pts)

    top = min(d_h, d_v)
    num = quad(lambda c: float(ver.f_c(c)) * inner(c), 0, top, points=ver.kinks(top),
               epsabs=EPS_ABS_DOUBLE)
    return min(1.0, max(0.0, num / (Fvc * den_h)))


# ---------------------------------------------------------------------------
# leaf L3,5 metric distributions
# ---------------------------------------------------------------------------

def _leaf_parts(spec, lam, sd):
    _require_parallel(sd)
    hor = axis_law(spec, lam, sd, "horizontal")
    d_h, d_v = sd.d_h, sd.d_v
    kinks = hor.kinks(d_v)

    def window(t, hi):
        return float(hor.F_c(min(t + d_h, hi)) - hor.F_c(t))

    den = quad(lambda t: window(t, d_v) * float(hor.f_nc(t)), 0, d_v,
               points=kinks + [d_v - d_h])
    if not den > 0:
        raise ConditioningDegenerate("leaf L3,5 has zero probability for this pair")
    return hor, d_h, d_v, kinks, den


def _psi_dn(spec, lam, sd, x):
    hor, d_h, d_v, kinks, den = _leaf_parts(spec, lam, sd)

    def one(xv):
        if xv <= 0:
            return 0.0
        if xv >= d_v:
            return 1.0
        num = quad(lambda t: float(hor.F_c(min(t + d_h, xv)) - hor.F_c(t)) * float(hor.f_nc(t)),
                   0, xv, points=kinks + [xv - d_h])
        return min(1.0, max(0.0, num / den))

    return np.array([one(float(v)) for v in np.atleast_1d(x)])


def _psi_rho(spec, lam, sd, z):
    hor, d_h, d_v, kinks, den = _leaf_parts(spec, lam, sd)

    def one(zv):
        if zv <= d_h:
            return 0.0
        if zv >= d_h + d_v:
            return 1.0
        q = d_h + d_v - zv  # charged length above zv  <=>  D_N-HC > q

        def integrand(t):
            w = float(hor.F_c(min(d_v, t + d_h)) - hor.F_c(max(q, t)))
            return max(w, 0.0) * float(hor.f_nc(t))

        num = quad(integrand, max(d_v - zv, 0.0), d_v, points=kinks + [q, q - d_h, d_v - d_h])
        return min(1.0, max(0.0, num / den))

    return np.array([one(float(v)) for v in np.atleast_1d(z)])


def leaf_L35_metric_cdf(spec, lam, sd, metric, x, rho_units="m"):
    """P(metric < x | L3,5, S, D).

    ``metric='D_n'``: x in meters.  ``metric='rho_c'``: x is the charged
    length in meters by default; pass ``rho_units='percent'`` to give a
    percentage of the (minimal) route length d_h + d_v instead.
    """
    xa = _check_x(x)
    if metric == "D_n":
        vals = _psi_dn(spec, lam, sd, xa)
    elif metric == "rho_c":
        if rho_units == "percent":
            xa = xa * (sd.d_h + sd.d_v) / 100.0
        elif rho_units != "m":
            raise InvalidParameter(f"rho_units must be 'm' or 'percent', got {rho_units!r}")
        vals = _psi_rho(spec, lam, sd, xa)
    else:
        raise InvalidParameter(f"metric must be 'D_n' or 'rho_c', got {metric!r}")
    return _out(x, vals.reshape(np.shape(xa)))


# ---------------------------------------------------------------------------
# full conditional metric CDF
# ---------------------------------------------------------------------------

METHODS = ("analytic-T3", "monte-carlo", "hybrid")


def metric_cdf_given_sd(spec, lam, sd, metric, x, method="hybrid", event=None,
                        n=20_000, seed=0, half_width=None):
    """P(metric <= x | S, D).  ``rho_c`` is in percent here.

    * ``analytic-T3`` only knows the leaf L3,5 (``event='L3,5'``); every
      other event raises :class:`NoClosedForm`.
    * ``monte-carlo`` routes ``n`` sampled realizations.
    * ``hybrid`` keeps the Monte Carlo samples outside L3,5 and replaces the
      L3,5 share by P(L3,5 | S, D) times the closed-form leaf CDF.
    """
    if method not in METHODS:
        raise InvalidParameter(f"method must be one of {METHODS}")
    xa = _check_x(x)
    if method == "analytic-T3":
        if event != "L3,5":
            raise NoClosedForm(
                f"no closed form for event {event!r}; only the L3,5 leaf is derived")
        units = "percent" if metric == "rho_c" else "m"
        return leaf_L35_metric_cdf(spec, lam, sd, metric, x, rho_units=units)
    if event is not None:
        raise InvalidParameter("event conditioning is only available with analytic-T3")

    from .mc import sample_trip_metrics
    res = sample_trip_metrics(spec, lam, sd, n, seed, half_width=half_width, classify=True)
    vals = res.values(metric)
    flat = np.atleast_1d(xa)
    if method == "monte-carlo":
        out = np.array([np.sum(vals <= v) for v in flat]) / res.n
        return _out(x, out.reshape(np.shape(xa)))
    keep = vals[~res.in_l35]
    tree = event_probs_T3(spec, lam, sd) if sd.orientation == PARALLEL else None
    p35 = tree.p_l35 if tree is not None else 0.0
    units = "percent" if metric == "rho_c" else "m"
    leaf = (leaf_L35_metric_cdf(spec, lam, sd, metric, flat, rho_units=units)
            if p35 > 0 else np.zeros(len(flat)))
    out = np.array([np.sum(keep <= v) for v in flat]) / res.n + p35 * leaf
    return _out(x, np.clip(out, 0.0, 1.0).reshape(np.shape(xa)))
