"""Exact arithmetic in Q(sqrt 3): numbers a + b sqrt(3) with rational a, b."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Rat = Union[int, Fraction]


class QuadExtScalar:
    __slots__ = ("a", "b")

    def __init__(self, a: Rat | str = 0, b: Rat | str = 0):
        self.a = Fraction(a)
        self.b = Fraction(b)

    @staticmethod
    def coerce(x) -> "QuadExtScalar":
        if isinstance(x, QuadExtScalar):
            return x
        if isinstance(x, (int, Fraction)):
            return QuadExtScalar(x, 0)
        raise TypeError(f"cannot use {type(x).__name__} in exact arithmetic")

    # field operations
    def __add__(self, o):
        o = QuadExtScalar.coerce(o)
        return QuadExtScalar(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, o):
        o = QuadExtScalar.coerce(o)
        return QuadExtScalar(self.a - o.a, self.b - o.b)

    def __rsub__(self, o):
        return QuadExtScalar.coerce(o) - self

    def __neg__(self):
        return QuadExtScalar(-self.a, -self.b)

    def __mul__(self, o):
        o = QuadExtScalar.coerce(o)
        return QuadExtScalar(self.a * o.a + 3 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadExtScalar":
        return QuadExtScalar(self.a, -self.b)

    def norm(self) -> Fraction:
        """a^2 - 3 b^2; zero only for zero since sqrt 3 is irrational."""
        return self.a * self.a - 3 * self.b * self.b

    def inverse(self) -> "QuadExtScalar":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt 3)")
        return QuadExtScalar(self.a / n, -self.b / n)

    def __truediv__(self, o):
        return self * QuadExtScalar.coerce(o).inverse()

    def __rtruediv__(self, o):
        return QuadExtScalar.coerce(o) * self.inverse()

    def __eq__(self, o):
        try:
            o = QuadExtScalar.coerce(o)
        except TypeError:
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(3.0)

    def __repr__(self):
        return f"QuadExtScalar({self.a}, {self.b})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        mag = abs(self.b)
        if mag == 1:
            s3 = "√3"
        elif mag.denominator == 1:
            s3 = f"{mag}√3"
        else:
            s3 = f"({mag})√3"
        if self.a == 0:
            return ("-" if self.b < 0 else "") + s3
        return f"{self.a} {'-' if self.b < 0 else '+'} {s3}"


SQRT3 = QuadExtScalar(0, 1)
ZERO = QuadExtScalar(0, 0)
ONE = QuadExtScalar(1, 0)


def q(a: Rat | str = 0, b: Rat | str = 0) -> QuadExtScalar:
    return QuadExtScalar(a, b)
