"""Empirical CDFs with Dvoretzky-Kiefer-Wolfowitz confidence bands."""
from __future__ import annotations

import io
import math

import numpy as np

from .errors import InvalidParameter

DKW_CONFIDENCE = 0.99


def dkw_half_width(n: int, confidence: float = DKW_CONFIDENCE) -> float:
    if n <= 0:
        return 1.0
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


class EmpiricalCdf:
    """Right-continuous step CDF.

    ``n`` counts every sample, including censored ones that carry no finite
    value; the CDF of a censored quantity therefore plateaus at the
    uncensored share instead of reaching 1.
    """

    def __init__(self, values, n: int | None = None, acceptance_rate: float | None = None):
        v = np.asarray(values, dtype=float).ravel()
        v = np.sort(v[np.isfinite(v)])
        self.values = v
        self.n = int(len(v) if n is None else n)
        if self.n < len(v):
            raise InvalidParameter("sample count smaller than the number of finite values")
        self.acceptance_rate = acceptance_rate

    @property
    def band(self) -> float:
        return dkw_half_width(self.n)

    @property
    def n_censored(self) -> int:
        return self.n - len(self.values)

    def __call__(self, x):
        if self.n == 0:
            return np.zeros(np.shape(x)) if np.ndim(x) else 0.0
        out = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right") / self.n
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, q):
        """Smallest sample value v with F(v) >= q (NaN when beyond the plateau)."""
        q = np.asarray(q, dtype=float)
        k = np.clip(np.ceil(q * self.n).astype(int) - 1, 0, None)
        out = np.full(k.shape, np.nan)
        ok = k < len(self.values)
        out[ok] = self.values[k[ok]]
        return float(out) if out.ndim == 0 else out

    def merge(self, other: "EmpiricalCdf") -> "EmpiricalCdf":
        return EmpiricalCdf(np.concatenate([self.values, other.values]), self.n + other.n)

    def ks_distance(self, cdf, grid_size: int | None = None) -> float:
        """Sup distance to a continuous reference CDF.

        The reference is evaluated at every jump when it is cheap (vectorized
        closed forms); callers with expensive references pass ``grid_size``
        and the supremum is taken over that many empirical quantiles.
        """
        return ks_distance(self, cdf, grid_size)

    def to_csv(self, grid=None) -> str:
        xs = np.unique(self.values) if grid is None else np.asarray(grid, dtype=float)
        buf = io.StringIO(newline="")
        buf.write("value,F,band_lo,band_hi\n")
        band = self.band
        for x, f in zip(xs, np.atleast_1d(self(xs))):
            buf.write(f"{float(x)!r},{float(f)!r},{max(0.0, f - band)!r},{min(1.0, f + band)!r}\n")
        return buf.getvalue()


def ks_distance(ecdf: EmpiricalCdf, cdf, grid_size: int | None = None) -> float:
    v = ecdf.values
    if len(v) == 0:
        return 1.0
    if grid_size is None or len(v) <= grid_size:
        xs, counts = np.unique(v, return_counts=True)
        ref = np.asarray(cdf(xs), dtype=float)
        hi = np.cumsum(counts) / ecdf.n
        lo = hi - counts / ecdf.n
        return float(max(np.max(np.abs(hi - ref)), np.max(np.abs(lo - ref))))
    qs = (np.arange(grid_size) + 0.5) / grid_size * (len(v) / ecdf.n)
    xs = np.unique(ecdf.quantile(qs))
    ref = np.asarray(cdf(xs), dtype=float)
    after = ecdf(xs)
    before = np.searchsorted(v, xs, side="left") / ecdf.n
    return float(max(np.max(np.abs(after - ref)), np.max(np.abs(before - ref))))
