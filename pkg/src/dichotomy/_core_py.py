"""Pure-Python Heun kernel with the same contract as the compiled ``_core.advance``.

Fields come from the generic descriptors in ``vector_fields`` rather than
hand-coded formulas, so comparing the two backends also cross-checks the
compiled field code.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi

_SYSTEM_BY_CODE = {0: "electrodynamics", 1: "electrodynamics+extra", 2: "example1", 3: "example2"}
_cache: dict = {}


def _fields(code):
    if code not in _cache:
        from .vector_fields import get_system

        try:
            spec = get_system(_SYSTEM_BY_CODE[code])
        except KeyError:
            raise ValueError(f"unknown system code {code}") from None
        _cache[code] = spec
    return _cache[code]


def _wrap(a):
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


def _eval(spec, s, dt, x, dw):
    n = spec.dim
    xl = list(x)
    f0 = spec.fields[0].f(xl)
    J0 = spec.fields[0].jac_f(xl)
    b = [f0[i] * dt for i in range(n)]
    G = [[J0[i][j] * dt for j in range(n)] for i in range(n)]
    for k in range(1, len(spec.fields)):
        c = s * dw[k - 1]
        fk = spec.fields[k].f(xl)
        Jk = spec.fields[k].jac_f(xl)
        for i in range(n):
            b[i] += fk[i] * c
            row = Jk[i]
            for j in range(n):
                G[i][j] += row[j] * c
    return np.array(b, dtype=float), np.array(G, dtype=float)


def _gram_schmidt(U, logacc):
    m = U.shape[0]
    for j in range(m):
        for i in range(j):
            U[j] -= np.dot(U[j], U[i]) * U[i]
        nrm = math.sqrt(float(np.dot(U[j], U[j])))
        if not nrm > 1e-300 or not math.isfinite(nrm):
            raise FloatingPointError("degenerate tangent frame during renormalization")
        logacc[j] += math.log(nrm)
        U[j] /= nrm


def advance(code, sqrt_eps, dt, x, U, dW, renorm_interval, logacc, divacc,
            hist=None, bins=0, out=None, stride=1, offset=0):
    spec = _fields(code)
    n = x.shape[0]
    m = U.shape[0]
    if n != spec.dim or U.shape[1] != n or m > n or logacc.shape[0] < m:
        raise ValueError("unsupported dimensions")
    if dW.shape[1] < spec.r:
        raise ValueError("noise array has too few channels")
    if renorm_interval < 1:
        raise ValueError("renorm_interval must be >= 1")
    if hist is not None and (n != 2 or bins < 1):
        raise ValueError("histogram requires a two-dimensional system and bins >= 1")
    if out is not None and (out.shape[1] < 2 * n + 1 or stride < 1):
        raise ValueError("output buffer too narrow")

    xs = x.astype(float).copy()
    Us = U.astype(float).copy()
    la = np.zeros(m)
    acc = float(divacc[0])
    h = TWO_PI / bins if bins > 0 else 1.0
    nout = 0
    steps = dW.shape[0]
    for t in range(steps):
        dw = dW[t]
        b0, G0 = _eval(spec, sqrt_eps, dt, xs, dw)
        xp = xs + b0
        Up = Us + Us @ G0.T
        b1, G1 = _eval(spec, sqrt_eps, dt, xp, dw)
        xs = np.array([_wrap(v) for v in xs + 0.5 * (b0 + b1)])
        acc += 0.5 * (float(np.trace(G0)) + float(np.trace(G1)))
        Us = Us + 0.5 * (Us @ G0.T + Up @ G1.T)
        if not (math.isfinite(xs[0] + xs[n - 1]) and math.isfinite(Us[0, 0])):
            raise FloatingPointError("non-finite state in Heun step")
        if (t + 1) % renorm_interval == 0 or t == steps - 1:
            _gram_schmidt(Us, la)
        if hist is not None:
            psi = math.atan2(Us[0, 1], Us[0, 0])
            if psi < 0.0:
                psi += TWO_PI
            idx = [min(int(c / h), bins - 1) for c in (xs[0], xs[1], psi)]
            hist[idx[0], idx[1], idx[2]] += 1
        if out is not None and (t + 1 + offset) % stride == 0 and nout < out.shape[0]:
            g = float(np.linalg.norm(Us[0]))
            out[nout, :n] = xs
            out[nout, n:2 * n] = Us[0] / g
            out[nout, 2 * n] = la[0] + math.log(g)
            nout += 1

    x[:] = xs
    U[:, :] = Us
    logacc[:m] += la
    divacc[0] = acc
    return nout
