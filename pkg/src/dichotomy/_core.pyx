# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Stratonovich Heun kernel for the catalog systems.

Fields and Jacobians are hand-coded per system code:
0 electrodynamics, 1 electrodynamics+extra, 2 example1, 3 example2.
"""
from libc.math cimport sin, cos, sqrt, log, atan2, fmod, isfinite, M_PI

cdef extern from *:
    """
    #ifndef _GNU_SOURCE
    #define _GNU_SOURCE
    #endif
    #include <math.h>
    static inline void dch_sincos(double a, double *s, double *c) {
    #if defined(__GLIBC__)
        sincos(a, s, c);
    #else
        *s = sin(a); *c = cos(a);
    #endif
    }
    """
    void dch_sincos(double a, double* s, double* c) noexcept nogil

cdef double TWO_PI = 2.0 * M_PI

DEF NMAX = 3


cdef inline double _wrap(double a) noexcept nogil:
    cdef double r
    # one step moves far less than a period, so try a single shift first
    if 0.0 <= a < TWO_PI:
        return a
    if TWO_PI <= a < 2.0 * TWO_PI:
        return a - TWO_PI
    if -TWO_PI <= a < 0.0:
        r = a + TWO_PI
        return 0.0 if r >= TWO_PI else r
    r = fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


cdef inline void _eval(int code, double s, double dt, const double* x,
                       const double* dw, int r, double* b, double* G) noexcept nogil:
    """Base increment b and tangent increment matrix G (row-major n x n)."""
    cdef double s1, s2, c1, c2, s3, c3, s12, c12
    cdef int i
    if code <= 1:
        for i in range(9):
            G[i] = 0.0
        dch_sincos(x[0], &s1, &c1)
        dch_sincos(x[1], &s2, &c2)
        dch_sincos(x[2], &s3, &c3)
        b[0] = c3 * dt
        b[1] = s3 * dt
        b[2] = dt + s * (dw[0] + s1 * dw[1] + c1 * dw[2] + s2 * dw[3] + c2 * dw[4])
        G[2] = -s3 * dt
        G[5] = c3 * dt
        G[6] = s * (c1 * dw[1] - s1 * dw[2])
        G[7] = s * (c2 * dw[3] - s2 * dw[4])
        if code == 1:
            # angle addition avoids a fourth trig call
            s12 = s1 * c2 + c1 * s2
            c12 = c1 * c2 - s1 * s2
            b[2] += s * s12 * dw[5]
            G[6] += s * c12 * dw[5]
            G[7] += s * c12 * dw[5]
    else:
        dch_sincos(x[0], &s1, &c1)
        dch_sincos(x[1], &s2, &c2)
        b[0] = s * (dw[0] + s2 * dw[2])
        b[1] = s * (dw[1] + s1 * dw[3])
        G[0] = 0.0
        G[1] = s * c2 * dw[2]
        G[2] = s * c1 * dw[3]
        G[3] = 0.0
        if code == 3:
            b[0] += s2 * dt
            G[1] += c2 * dt


cdef inline int _gram_schmidt(int n, int m, double* U, double* logacc) noexcept nogil:
    """Orthonormalize the m rows of U in place; add log of the R diagonal."""
    cdef int i, j, k
    cdef double d, nrm
    for j in range(m):
        for i in range(j):
            d = 0.0
            for k in range(n):
                d += U[j * n + k] * U[i * n + k]
            for k in range(n):
                U[j * n + k] -= d * U[i * n + k]
        nrm = 0.0
        for k in range(n):
            nrm += U[j * n + k] * U[j * n + k]
        nrm = sqrt(nrm)
        if not (nrm > 1e-300) or not isfinite(nrm):
            return -1
        logacc[j] += log(nrm)
        for k in range(n):
            U[j * n + k] /= nrm
    return 0


def advance(int code, double sqrt_eps, double dt,
            double[::1] x, double[:, ::1] U, const double[:, ::1] dW,
            int renorm_interval, double[::1] logacc, double[::1] divacc,
            long long[:, :, ::1] hist=None, int bins=0,
            double[:, ::1] out=None, int stride=1, long long offset=0):
    """Advance (x, U) through all rows of dW; return the number of rows in ``out`` filled.

    Samples are taken when (step + 1 + offset) is a multiple of ``stride``;
    their last column is the log growth since the start of the call.
    Raises FloatingPointError if the state becomes non-finite.
    """
    cdef int n = x.shape[0]
    cdef int m = U.shape[0]
    cdef int r = dW.shape[1]
    cdef Py_ssize_t steps = dW.shape[0]
    cdef double xs[NMAX]
    cdef double xp[NMAX]
    cdef double b0[NMAX]
    cdef double b1[NMAX]
    cdef double G0[NMAX * NMAX]
    cdef double G1[NMAX * NMAX]
    cdef double Us[NMAX * NMAX]
    cdef double Up[NMAX * NMAX]
    cdef double la[NMAX]
    cdef double tmp[NMAX]
    cdef double acc = divacc[0]
    cdef double h = TWO_PI / bins if bins > 0 else 1.0
    cdef bint do_hist = hist is not None
    cdef bint do_out = out is not None
    cdef Py_ssize_t nout = 0, t
    cdef int i, j, k, ib0, ib1, ib2, status = 0
    cdef double g, psi

    if n > NMAX or U.shape[1] != n or m > n or logacc.shape[0] < m:
        raise ValueError("unsupported dimensions")
    if code < 0 or code > 3:
        raise ValueError(f"unknown system code {code}")
    if (code <= 1) != (n == 3):
        raise ValueError("state dimension does not match system code")
    if r < (6 if code == 1 else 5 if code == 0 else 4):
        raise ValueError("noise array has too few channels")
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    if hist is not None and (n != 2 or bins < 1):
        raise ValueError("histogram requires a two-dimensional system and bins >= 1")
    if out is not None and (out.shape[1] < 2 * n + 1 or stride < 1):
        raise ValueError("output buffer too narrow")
    for i in range(n):
        xs[i] = x[i]
    for j in range(m):
        la[j] = 0.0
        for k in range(n):
            Us[j * n + k] = U[j, k]

    with nogil:
        for t in range(steps):
            _eval(code, sqrt_eps, dt, xs, &dW[t, 0], r, b0, G0)
            for i in range(n):
                xp[i] = xs[i] + b0[i]
            for j in range(m):
                for i in range(n):
                    g = 0.0
                    for k in range(n):
                        g += G0[i * n + k] * Us[j * n + k]
                    Up[j * n + i] = Us[j * n + i] + g
            _eval(code, sqrt_eps, dt, xp, &dW[t, 0], r, b1, G1)
            for i in range(n):
                xs[i] = _wrap(xs[i] + 0.5 * (b0[i] + b1[i]))
                acc += 0.5 * (G0[i * n + i] + G1[i * n + i])
            for j in range(m):
                for i in range(n):
                    g = 0.0
                    for k in range(n):
                        g += G0[i * n + k] * Us[j * n + k] + G1[i * n + k] * Up[j * n + k]
                    tmp[i] = Us[j * n + i] + 0.5 * g
                for i in range(n):
                    Us[j * n + i] = tmp[i]
            if not isfinite(xs[0] + xs[n - 1] + Us[0]):
                status = -2
                break
            if (t + 1) % renorm_interval == 0 or t == steps - 1:
                if _gram_schmidt(n, m, Us, la) != 0:
                    status = -1
                    break
            if do_hist:
                ib0 = <int>(xs[0] / h)
                ib1 = <int>(xs[1] / h)
                psi = atan2(Us[1], Us[0])
                if psi < 0.0:
                    psi += TWO_PI
                ib2 = <int>(psi / h)
                if ib0 >= bins: ib0 = bins - 1
                if ib1 >= bins: ib1 = bins - 1
                if ib2 >= bins: ib2 = bins - 1
                hist[ib0, ib1, ib2] += 1
            if do_out and (t + 1 + offset) % stride == 0 and nout < out.shape[0]:
                for i in range(n):
                    out[nout, i] = xs[i]
                g = 0.0
                for k in range(n):
                    g += Us[k] * Us[k]
                g = sqrt(g)
                for k in range(n):
                    out[nout, n + k] = Us[k] / g
                out[nout, 2 * n] = la[0] + log(g)
                nout += 1

    if status == -2:
        raise FloatingPointError("non-finite state in Heun step")
    if status == -1:
        raise FloatingPointError("degenerate tangent frame during renormalization")
    for i in range(n):
        x[i] = xs[i]
    for j in range(m):
        logacc[j] += la[j]
        for k in range(n):
            U[j, k] = Us[j * n + k]
    divacc[0] = acc
    return nout
