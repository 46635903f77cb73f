"""Pure-Python routing kernels (reference implementation and fallback).

Grid convention shared with the compiled module: ``xs``/``ys`` ascending
column/row coordinates, ``ck``/``rk`` their road kinds (-1 no road,
0 non-charging, 1 charging).  The source is node (0, 0), the destination
(nx-1, ny-1).  Moving along row j needs ``rk[j] >= 0``; along column i
needs ``ck[i] >= 0``.
"""
from __future__ import annotations

import math

import numpy as np

TIE_EPS = 1e-9
INF = math.inf

FROM_NONE, FROM_LEFT, FROM_BELOW = 0, 1, 2


def route_box(xs, ck, ys, rk, want_path=False):
    """Best monotone (staircase) route from (0,0) to (nx-1, ny-1).

    Objective: maximal charged length, then minimal distance before the
    first charging edge.  Returns ``(reachable, charged, d_n, choice)``
    where ``d_n`` is ``inf`` when nothing is charged and ``choice`` is the
    back-pointer table (only with ``want_path``).
    """
    nx, ny = len(xs), len(ys)
    reach = [False] * nx
    best_c = [0.0] * nx
    best_d = [INF] * nx
    choice = np.zeros((ny, nx), dtype=np.int8) if want_path else None
    x0, y0 = xs[0], ys[0]
    for j in range(ny):
        row_ok = rk[j] >= 0
        row_chg = rk[j] == 1
        for i in range(nx):
            if i == 0 and j == 0:
                reach[0], best_c[0], best_d[0] = True, 0.0, INF
                continue
            # candidate from below: previous row values still in the arrays
            ok = False
            c = 0.0
            d = INF
            how = FROM_NONE
            if j > 0 and reach[i] and ck[i] >= 0:
                w = ys[j] - ys[j - 1]
                c = best_c[i]
                d = best_d[i]
                if ck[i] == 1 and w > 0:
                    if d == INF:
                        d = (xs[i] - x0) + (ys[j - 1] - y0)
                    c += w
                ok = True
                how = FROM_BELOW
            if i > 0 and reach[i - 1] and row_ok:
                w = xs[i] - xs[i - 1]
                c2 = best_c[i - 1]
                d2 = best_d[i - 1]
                if row_chg and w > 0:
                    if d2 == INF:
                        d2 = (xs[i - 1] - x0) + (ys[j] - y0)
                    c2 += w
                if not ok or c2 > c + TIE_EPS or (abs(c2 - c) <= TIE_EPS and d2 < d):
                    c, d, how = c2, d2, FROM_LEFT
                    ok = True
            reach[i] = ok
            best_c[i] = c
            best_d[i] = d
            if want_path:
                choice[j, i] = how
    return reach[nx - 1], best_c[nx - 1], best_d[nx - 1], choice


def trace_path(choice, nx, ny):
    """Node sequence (i, j) from source to destination."""
    i, j = nx - 1, ny - 1
    out = [(i, j)]
    while (i, j) != (0, 0):
        how = choice[j, i]
        if how == FROM_LEFT:
            i -= 1
        elif how == FROM_BELOW:
            j -= 1
        else:
            raise RuntimeError("broken back-pointer table")
        out.append((i, j))
    return out[::-1]
