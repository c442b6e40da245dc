"""Forward-mode derivatives with tagged dual numbers.

Each ``Dual`` carries one infinitesimal component tagged with the seeding
that created it.  Tags keep nested derivatives (brackets of brackets)
from mixing perturbations: an operation always splits its operands at the
highest tag present and treats everything else as a constant.
"""
from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

_tags = itertools.count(1)


def _tag(a) -> int:
    return a.tag if isinstance(a, Dual) else 0


def _split(a, t):
    if isinstance(a, Dual) and a.tag == t:
        return a.re, a.eps
    return a, 0.0


class Dual:
    __slots__ = ("re", "eps", "tag")

    def __init__(self, re, eps, tag: int):
        self.re = re
        self.eps = eps
        self.tag = tag

    def __repr__(self):
        return f"Dual({self.re!r}, {self.eps!r}, tag={self.tag})"

    def __add__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(self, t)
        br, be = _split(other, t)
        return Dual(ar + br, ae + be, t)

    __radd__ = __add__

    def __sub__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(self, t)
        br, be = _split(other, t)
        return Dual(ar - br, ae - be, t)

    def __rsub__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(other, t)
        br, be = _split(self, t)
        return Dual(ar - br, ae - be, t)

    def __mul__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(self, t)
        br, be = _split(other, t)
        return Dual(ar * br, ar * be + ae * br, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(self, t)
        br, be = _split(other, t)
        return Dual(ar / br, (ae * br - ar * be) / (br * br), t)

    def __rtruediv__(self, other):
        t = max(self.tag, _tag(other))
        ar, ae = _split(other, t)
        br, be = _split(self, t)
        return Dual(ar / br, (ae * br - ar * be) / (br * br), t)

    def __neg__(self):
        return Dual(-self.re, -self.eps, self.tag)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k == 0:
            return 1.0
        if k < 0:
            return 1.0 / self ** (-k)
        out = self
        for _ in range(k - 1):
            out = out * self
        return out


# scalars go through math, arrays through numpy, Duals recurse


def sin(a):
    if isinstance(a, Dual):
        return Dual(sin(a.re), a.eps * cos(a.re), a.tag)
    if isinstance(a, (float, int)):
        return math.sin(a)
    return np.sin(a)


def cos(a):
    if isinstance(a, Dual):
        return Dual(cos(a.re), -(a.eps * sin(a.re)), a.tag)
    if isinstance(a, (float, int)):
        return math.cos(a)
    return np.cos(a)


def sqrt(a):
    if isinstance(a, Dual):
        r = sqrt(a.re)
        return Dual(r, a.eps / (2.0 * r), a.tag)
    if isinstance(a, (float, int)):
        return math.sqrt(a)
    return np.sqrt(a)


def real(a) -> float:
    """Strip all infinitesimal parts."""
    while isinstance(a, Dual):
        a = a.re
    return float(a)


def directional(f: Callable[[list], Sequence], x: Sequence, d: Sequence) -> list:
    """Derivative of ``f`` at ``x`` in direction ``d``; entries of x, d may be Duals."""
    t = next(_tags)
    xs = [Dual(xi, di, t) for xi, di in zip(x, d)]
    return [_split(yi, t)[1] for yi in f(xs)]


def jacobian(f: Callable[[list], Sequence], x: Sequence[float]) -> list[list[float]]:
    """Row-major Jacobian J[i][j] = d f_i / d x_j at a float point."""
    n = len(x)
    cols = []
    for j in range(n):
        e = [0.0] * n
        e[j] = 1.0
        cols.append([real(c) for c in directional(f, x, e)])
    m = len(cols[0])
    return [[cols[j][i] for j in range(n)] for i in range(m)]
