# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Signatures mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, fmin

cnp.import_array()


def holder_shell_max(const double[:, ::1] values, const double[::1] w, const long[:, ::1] offsets,
                     int d, int n, double h, double alpha, bint wrap):
    cdef Py_ssize_t ncomp = values.shape[0]
    cdef Py_ssize_t npts = values.shape[1]
    cdef Py_ssize_t noff = offsets.shape[0]
    cdef Py_ssize_t o, p, c, a, q
    cdef long idx[3]
    cdef long j
    cdef long stride[3]
    cdef double best = 0.0, dist, diff, s, ratio, norm
    cdef bint ok
    stride[d - 1] = 1
    for a in range(d - 2, -1, -1):
        stride[a] = stride[a + 1] * n
    for o in range(noff):
        s = 0.0
        for a in range(d):
            s += offsets[o, a] * offsets[o, a]
        dist = pow(h * sqrt(s), alpha)
        for p in range(npts):
            ok = True
            q = 0
            for a in range(d):
                idx[a] = (p // stride[a]) % n
                j = idx[a] + offsets[o, a]
                if j < 0 or j >= n:
                    if not wrap:
                        ok = False
                        break
                    j = ((j % n) + n) % n
                q += j * stride[a]
            if not ok:
                continue
            norm = 0.0
            for c in range(ncomp):
                diff = values[c, q] - values[c, p]
                norm += diff * diff
            ratio = sqrt(norm) / (w[p] * dist)
            if ratio > best:
                best = ratio
    return best


cdef inline double _rhs(double h, double a, double b, double f, int mode) nogil:
    cdef double base = -a * h * h + f * h
    if mode == 0 or h >= b:
        return base
    if mode == 1:
        return fmin(base, 0.0)
    return fabs(base) + 1.0


def riccati_integrate(a, b, h0, fvals, T, int sub, int mode, double courant):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(h0, dtype=np.float64)
    cdef double[:, ::1] fv = np.ascontiguousarray(fvals, dtype=np.float64)
    cdef double[::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t N = fv.shape[0], M = fv.shape[1]
    cdef Py_ssize_t nout = M * sub
    out_arr = np.empty((N, nout + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double h, f, remaining, dt, k1, k2, k3, k4, ai, bi, span
    with nogil:
        for i in range(N):
            h = hv[i]
            ai = av[i]
            bi = bv[i]
            out[i, 0] = h
            span = Tv[i] / nout
            for j in range(nout):
                f = fv[i, j // sub]
                remaining = span
                while remaining > 1e-15 * Tv[i]:
                    dt = fmin(remaining, courant / (ai * fabs(h) + fabs(f) + 1.0))
                    k1 = _rhs(h, ai, bi, f, mode)
                    k2 = _rhs(h + 0.5 * dt * k1, ai, bi, f, mode)
                    k3 = _rhs(h + 0.5 * dt * k2, ai, bi, f, mode)
                    k4 = _rhs(h + dt * k3, ai, bi, f, mode)
                    h = h + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                    remaining -= dt
                out[i, j + 1] = h
    return out_arr
