"""Deployment density functions g(r).

g(r) is the probability that a road at distance r from the city center is
equipped with dynamic charging.  Four families are supported; all of them
are symmetric in r and take values in [0, 1].
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from .errors import InvalidParameter


def _check(cond, msg):
    if not cond:
        raise InvalidParameter(msg)


@dataclass(frozen=True)
class Uniform:
    p: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        _check(0.0 <= self.p <= 1.0, f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class PowerLaw:
    """g = 1 on the plateau |r| <= r_min, (|r|/r_min)^-alpha outside."""

    alpha: float
    r_min: float
    kind: ClassVar[str] = "power_law"

    def __post_init__(self):
        _check(self.alpha > 0, f"alpha must be positive, got {self.alpha}")
        _check(self.r_min > 0, f"r_min must be positive, got {self.r_min}")


@dataclass(frozen=True)
class Gaussian:
    """g = peak * exp(-r^2 / (2 sigma^2))."""

    sigma: float
    peak: float = 1.0
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _check(self.sigma > 0, f"sigma must be positive, got {self.sigma}")
        _check(0.0 < self.peak <= 1.0, f"peak must lie in (0, 1], got {self.peak}")


@dataclass(frozen=True)
class MultiCenterPowerLaw:
    """Power law in the distance to the nearest of several centers."""

    alpha: float
    r_min: float
    centers: tuple = ((0.0, 0.0),)
    kind: ClassVar[str] = "multi_center_power_law"

    def __post_init__(self):
        _check(self.alpha > 0, f"alpha must be positive, got {self.alpha}")
        _check(self.r_min > 0, f"r_min must be positive, got {self.r_min}")
        centers = tuple((float(c[0]), float(c[1])) for c in self.centers)
        _check(len(centers) >= 1, "at least one center is required")
        object.__setattr__(self, "centers", centers)

    def as_power_law(self) -> PowerLaw:
        return PowerLaw(self.alpha, self.r_min)


ThinningSpec = Union[Uniform, PowerLaw, Gaussian, MultiCenterPowerLaw]

_KINDS = {cls.kind: cls for cls in (Uniform, PowerLaw, Gaussian, MultiCenterPowerLaw)}

# parameter varied by calibrate() when the caller does not name one
FREE_PARAMETER = {"uniform": "p", "power_law": "alpha", "gaussian": "sigma",
                  "multi_center_power_law": "alpha"}


def _power_law(r, alpha, r_min):
    a = np.abs(np.asarray(r, dtype=float))
    out = np.ones_like(a)
    tail = a > r_min
    out[tail] = (a[tail] / r_min) ** (-alpha)
    return out


def eval_g(spec: ThinningSpec, r):
    """Charging probability at signed distance ``r`` (scalar or array).

    For the multi-center family ``r`` is taken to be the distance to the
    nearest center already.
    """
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if isinstance(spec, Uniform):
        out = np.full(r.shape, spec.p)
    elif isinstance(spec, (PowerLaw, MultiCenterPowerLaw)):
        out = _power_law(r, spec.alpha, spec.r_min)
    elif isinstance(spec, Gaussian):
        out = spec.peak * np.exp(-(r * r) / (2.0 * spec.sigma**2))
    else:
        raise InvalidParameter(f"unknown thinning spec {spec!r}")
    return float(out) if scalar else out


def line_distance(spec: ThinningSpec, axis: int, coord):
    """Distance from an axis-parallel line to the (nearest) center.

    ``axis`` 0 means a vertical line ``x = coord``; 1 a horizontal one.
    """
    coord = np.asarray(coord, dtype=float)
    if isinstance(spec, MultiCenterPowerLaw):
        cs = np.array([c[axis] for c in spec.centers])
        return np.min(np.abs(coord[..., None] - cs), axis=-1)
    return np.abs(coord)


def eval_g_line(spec: ThinningSpec, axis: int, coord):
    return eval_g(spec, line_distance(spec, axis, coord))


def eval_g_point(spec: ThinningSpec, point):
    """g evaluated at the planar distance from ``point`` to the nearest center."""
    p = np.asarray(point, dtype=float)
    if isinstance(spec, MultiCenterPowerLaw):
        cs = np.asarray(spec.centers)
        r = np.min(np.linalg.norm(p[..., None, :] - cs, axis=-1), axis=-1)
    else:
        r = np.linalg.norm(p, axis=-1)
    return eval_g(spec, r)


def with_param(spec: ThinningSpec, name: str, value: float) -> ThinningSpec:
    return dataclasses.replace(spec, **{name: value})


def spec_to_dict(spec: ThinningSpec) -> dict:
    out = {"kind": spec.kind}
    for f in dataclasses.fields(spec):
        v = getattr(spec, f.name)
        out[f.name] = [list(c) for c in v] if f.name == "centers" else float(v)
    return out


def spec_from_dict(d: dict) -> ThinningSpec:
    """Inverse of :func:`spec_to_dict`; unknown keys are rejected."""
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidParameter("thinning spec needs a 'kind' field")
    cls = _KINDS.get(d["kind"])
    if cls is None:
        raise InvalidParameter(f"unknown thinning kind {d['kind']!r}")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(d) - names - {"kind"}
    if extra:
        raise InvalidParameter(f"unknown keys for {d['kind']}: {sorted(extra)}")
    kwargs = {k: v for k, v in d.items() if k != "kind"}
    if "centers" in kwargs:
        kwargs["centers"] = tuple(tuple(c) for c in kwargs["centers"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidParameter(str(exc)) from None


