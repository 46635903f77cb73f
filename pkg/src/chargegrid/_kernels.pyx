# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled routing kernel; same contract as ``_kernels_py.route_box``."""
import numpy as np

from libc.math cimport INFINITY, fabs
from libc.stdlib cimport free, malloc

cdef double TIE_EPS = 1e-9


def route_box(double[::1] xs, signed char[::1] ck, double[::1] ys, signed char[::1] rk,
              want_path=False):
    if want_path:
        from ._kernels_py import route_box as py_route_box
        return py_route_box(np.asarray(xs), np.asarray(ck), np.asarray(ys), np.asarray(rk), True)
    cdef Py_ssize_t nx = xs.shape[0], ny = ys.shape[0], i, j
    cdef double x0 = xs[0], y0 = ys[0], w, c, d, c2, d2
    cdef bint ok
    cdef char *reach = <char *> malloc(nx * sizeof(char))
    cdef double *best_c = <double *> malloc(nx * sizeof(double))
    cdef double *best_d = <double *> malloc(nx * sizeof(double))
    if reach == NULL or best_c == NULL or best_d == NULL:
        free(reach); free(best_c); free(best_d)
        raise MemoryError()
    with nogil:
        for i in range(nx):
            reach[i] = 0
            best_c[i] = 0.0
            best_d[i] = INFINITY
        for j in range(ny):
            for i in range(nx):
                if i == 0 and j == 0:
                    reach[0] = 1
                    best_c[0] = 0.0
                    best_d[0] = INFINITY
                    continue
                ok = False
                c = 0.0
                d = INFINITY
                if j > 0 and reach[i] and ck[i] >= 0:
                    w = ys[j] - ys[j - 1]
                    c = best_c[i]
                    d = best_d[i]
                    if ck[i] == 1 and w > 0:
                        if d == INFINITY:
                            d = (xs[i] - x0) + (ys[j - 1] - y0)
                        c += w
                    ok = True
                if i > 0 and reach[i - 1] and rk[j] >= 0:
                    w = xs[i] - xs[i - 1]
                    c2 = best_c[i - 1]
                    d2 = best_d[i - 1]
                    if rk[j] == 1 and w > 0:
                        if d2 == INFINITY:
                            d2 = (xs[i - 1] - x0) + (ys[j] - y0)
                        c2 += w
                    if (not ok) or c2 > c + TIE_EPS or (fabs(c2 - c) <= TIE_EPS and d2 < d):
                        c = c2
                        d = d2
                        ok = True
                reach[i] = ok
                best_c[i] = c
                best_d[i] = d
    res = (bool(reach[nx - 1]), best_c[nx - 1], best_d[nx - 1], None)
    free(reach); free(best_c); free(best_d)
    return res
