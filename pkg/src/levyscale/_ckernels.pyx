# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled drop-mode path kernel; mirrors ``_pykernels.run_paths``."""
from libc.math cimport exp, log, log1p, sqrt, cos, sin, fabs, M_PI
from libc.stdlib cimport malloc, free
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

import numpy as np

cdef double LN2 = 0.6931471805599453
cdef double TWO_PI = 2.0 * M_PI

cdef enum:
    NO_TARGET = 0
    ANNULUS = 1
    EXTERIOR = 2


cdef inline double _p1(double x, double beta) noexcept nogil:
    return x * x / beta - 2.0 * x / (beta * beta) + 2.0 / (beta * beta * beta)


cdef double _family1_x(double beta, double y) noexcept nogil:
    cdef double c0 = _p1(LN2, beta)
    cdef double rhs = beta * LN2 + log(y + c0)
    cdef double lo = LN2
    cdef double hi = (rhs + 3.0 * log(beta)) / beta + 1.0
    cdef double x, xn, P, h, dh
    cdef int it
    if hi < LN2 + 1.0:
        hi = LN2 + 1.0
    x = 0.5 * (lo + hi)
    for it in range(200):
        P = _p1(x, beta)
        h = beta * x + log(P) - rhs
        dh = beta + (2.0 * x / beta - 2.0 / (beta * beta)) / P
        if h < 0.0:
            lo = x
        elif h > 0.0:
            hi = x
        xn = x - h / dh
        if xn <= lo or xn >= hi:
            xn = 0.5 * (lo + hi)
        if fabs(xn - x) <= 4e-16 * xn:
            return xn
        x = xn
    return x


cdef inline double _radius(int row, double beta, double y) noexcept nogil:
    cdef double gap
    if row == 2:
        return exp(-log1p(beta * y) / beta)
    if row == 4:
        return exp(-y)
    if row == 3:
        return 2.0 * exp(-sqrt(2.0 * y + LN2 * LN2))
    if row == 5:
        return 2.0 * exp(-LN2 * exp(y))
    if row == 6:
        gap = 1.0 / LN2 - y
        if gap <= 0.0:
            return 0.0
        return 2.0 * exp(-1.0 / gap)
    return 2.0 * exp(-_family1_x(beta, y))


cdef int _path(bitgen_t* g, int row, double beta, double L_eps, double rate, int d,
               double* pos, double* pre, double* c, double r2,
               int tkind, double* tc, double tin2, double tout2, bint half,
               long long max_events, double* t_out, long long* n_out) noexcept nogil:
    # 1 = target hit, 0 = ball exit, -1 = event cap
    cdef double t = 0.0, u, rho, z, s, th, dist2, tdist2, diff
    cdef double dirv[3]
    cdef long long n = 0
    cdef int j
    cdef bint hit
    while True:
        if n >= max_events:
            t_out[0] = t
            n_out[0] = n
            for j in range(d):
                pre[j] = pos[j]
            return -1
        u = g.next_double(g.state)
        t += -log1p(-u) / rate
        u = g.next_double(g.state)
        rho = _radius(row, beta, (1.0 - u) * L_eps)
        if d == 1:
            u = g.next_double(g.state)
            dirv[0] = 1.0 if u < 0.5 else -1.0
        elif d == 2:
            th = TWO_PI * g.next_double(g.state)
            dirv[0] = cos(th)
            dirv[1] = sin(th)
        else:
            z = 2.0 * g.next_double(g.state) - 1.0
            th = TWO_PI * g.next_double(g.state)
            s = 1.0 - z * z
            s = sqrt(s) if s > 0.0 else 0.0
            dirv[0] = s * cos(th)
            dirv[1] = s * sin(th)
            dirv[2] = z
        for j in range(d):
            pre[j] = pos[j]
            pos[j] = pos[j] + rho * dirv[j]
        n += 1
        if tkind != NO_TARGET:
            tdist2 = 0.0
            for j in range(d):
                diff = pos[j] - tc[j]
                tdist2 += diff * diff
            if tkind == EXTERIOR:
                hit = tdist2 >= tout2
            else:
                hit = tdist2 >= tin2 and tdist2 < tout2 and (not half or pos[0] - tc[0] >= 0.0)
            if hit:
                t_out[0] = t
                n_out[0] = n
                return 1
        dist2 = 0.0
        for j in range(d):
            diff = pos[j] - c[j]
            dist2 += diff * diff
        if dist2 >= r2:
            t_out[0] = t
            n_out[0] = n
            return 0


def run_paths(bitgens, int row, double beta, double L_eps, double rate, int d,
              starts, center, double radius,
              int tkind, tcenter, double t_in, double t_out, bint half,
              long long max_events):
    """Drop-mode compound Poisson paths until target hit or ball exit.

    Same contract as ``_pykernels.run_paths`` for built-in profile rows.
    """
    cdef Py_ssize_t n = len(bitgens), i
    cdef double[:, ::1] st = np.ascontiguousarray(starts, dtype=np.float64).reshape(n, d)
    cdef double[::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef double[::1] tc = np.ascontiguousarray(tcenter, dtype=np.float64)
    ot = np.zeros(n)
    opos = np.zeros((n, d))
    opre = np.zeros((n, d))
    ojumps = np.zeros(n, dtype=np.int64)
    ohit = np.zeros(n, dtype=np.int8)
    ook = np.ones(n, dtype=np.bool_)
    cdef double[::1] vt = ot
    cdef double[:, ::1] vpos = opos
    cdef double[:, ::1] vpre = opre
    cdef long long[::1] vj = ojumps
    cdef bitgen_t** gens = <bitgen_t**>malloc(max(n, 1) * sizeof(bitgen_t*))
    if gens == NULL:
        raise MemoryError()
    capsules = [bg.capsule for bg in bitgens]
    cdef int[::1] vstatus = np.zeros(n, dtype=np.intc)
    try:
        for i in range(n):
            gens[i] = <bitgen_t*>PyCapsule_GetPointer(capsules[i], "BitGenerator")
            vpos[i, :] = st[i, :]
        with nogil:
            for i in range(n):
                vstatus[i] = _path(gens[i], row, beta, L_eps, rate, d,
                                   &vpos[i, 0], &vpre[i, 0], &c[0], radius * radius,
                                   tkind, &tc[0], t_in * t_in, t_out * t_out, half,
                                   max_events, &vt[i], &vj[i])
    finally:
        free(gens)
    status_arr = np.asarray(vstatus)
    ohit[:] = (status_arr == 1)
    ook[:] = status_arr >= 0
    return ot, opos, opre, ojumps, ohit, ook
