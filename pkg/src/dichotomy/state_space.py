"""Points on the flat torus, unit tangent directions, and the sphere bundle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap(angle: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    if not math.isfinite(angle):
        raise ValueError(f"cannot wrap non-finite angle {angle!r}")
    r = math.fmod(angle, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    # fmod of a tiny negative number can round back up to exactly 2*pi
    if r >= TWO_PI:
        r = 0.0
    return r


def wrap_array(a: np.ndarray) -> np.ndarray:
    out = np.mod(a, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def tangent_project(v: Sequence[float], u: Sequence[float]) -> np.ndarray:
    """Remove the component of ``u`` along the unit vector ``v``."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if v.shape != u.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {u.shape}")
    return u - np.dot(v, u) * v


def renormalize(v: Sequence[float]) -> "UnitVector":
    a = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(a))
    if not norm > 1e-300:
        raise ValueError("cannot renormalize a zero vector")
    return UnitVector(tuple(float(c) for c in a / norm))


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) not in (2, 3):
            raise ValueError("torus dimension must be 2 or 3")
        object.__setattr__(self, "coords", tuple(wrap(float(c)) for c in self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class UnitVector:
    comps: tuple[float, ...]

    def __post_init__(self):
        a = np.asarray(self.comps, dtype=float)
        n = float(np.linalg.norm(a))
        if not n > 1e-300:
            raise ValueError("unit vector cannot be zero")
        if abs(n - 1.0) > 1e-12:
            a = a / n
        object.__setattr__(self, "comps", tuple(float(c) for c in a))

    @property
    def dim(self) -> int:
        return len(self.comps)

    def array(self) -> np.ndarray:
        return np.array(self.comps)


@dataclass(frozen=True)
class BundleState:
    x: TorusPoint
    v: UnitVector

    def __post_init__(self):
        if self.x.dim != self.v.dim:
            raise ValueError(f"base dimension {self.x.dim} != fibre dimension {self.v.dim}")

    @property
    def dim(self) -> int:
        return self.x.dim

    @classmethod
    def from_arrays(cls, x: Sequence[float], v: Sequence[float]) -> "BundleState":
        return cls(TorusPoint(tuple(x)), UnitVector(tuple(v)))

    def array(self) -> np.ndarray:
        """Ambient coordinates (x_1..x_n, v_1..v_n)."""
        return np.concatenate([self.x.array(), self.v.array()])


def random_unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        g = rng.standard_normal(n)
        nrm = np.linalg.norm(g)
        if nrm > 1e-12:
            return g / nrm


def random_bundle_state(rng: np.random.Generator, n: int, exclusion: float = 0.0) -> BundleState:
    """Uniform base point and uniform direction, rejecting |v_n| > 1 - exclusion."""
    x = rng.uniform(0.0, TWO_PI, n)
    while True:
        v = random_unit_vector(rng, n)
        if exclusion <= 0.0 or abs(v[-1]) <= 1.0 - exclusion:
            break
    return BundleState.from_arrays(x, v)
