"""Catalog of analytic vector fields on T^2 and T^3 and their projective lifts.

Every field is written once as a pair of generic functions (value and
closed-form Jacobian) that accept floats, numpy arrays, or Duals, so the
same code serves simulation set-up, grid evaluation, and exact
derivative checks.

Bundle fields live in ambient coordinates ``w = (x_1..x_n, v_1..v_n)`` and
are extended off the unit sphere by the lift formula itself,

    X~(x, v) = (X(x), J(x) v - (v . J(x) v) v),

which is tangent to the sphere bundle.  Two divergences are offered:

* ``ambient_divergence`` -- the trace of the 2n x 2n Jacobian of that
  extension.  This is the convention of the printed closed forms (factor
  n + 2 in front of ``v . J v``).
* ``chart_divergence`` -- the Riemannian divergence on the sphere bundle,
  computed in spherical coordinates.  It has factor n instead, and it is
  the one the stationary density and Fisher information need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dual
from .dual import cos, sin
from .state_space import BundleState

Generic = Callable[[Sequence], list]


@dataclass(frozen=True)
class FieldDescriptor:
    id: str
    dim: int
    f: Generic            # x -> list of n components
    jac_f: Generic        # x -> n x n nested list, J[i][j] = d f_i / d x_j

    def value(self, x) -> np.ndarray:
        return np.array([float(c) for c in self.f(list(x))])

    def jacobian(self, x) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.jac_f(list(x))])

    def divergence(self, x) -> float:
        return float(np.trace(self.jacobian(x)))


@dataclass(frozen=True)
class BundleFieldValue:
    base_part: np.ndarray
    sphere_part: np.ndarray


@dataclass(frozen=True)
class SystemSpec:
    id: str
    dim: int
    fields: tuple[FieldDescriptor, ...]   # index 0 is the drift
    kernel_code: int
    closed_divergences: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.fields) - 1

    @property
    def drift(self) -> FieldDescriptor:
        return self.fields[0]

    @property
    def diffusion(self) -> tuple[FieldDescriptor, ...]:
        return self.fields[1:]

    def bundle_field(self, k: int) -> Generic:
        return bundle_field(self.fields[k])


# -- generic helpers -------------------------------------------------------

def _zeros(n):
    return [[0.0] * n for _ in range(n)]


def _const(vals):
    n = len(vals)
    return (lambda x: list(vals)), (lambda x: _zeros(n))


def bundle_field(fd: FieldDescriptor) -> Generic:
    """Ambient-coordinate lift of ``fd`` as a generic function of w."""
    n = fd.dim

    def F(w):
        x, v = w[:n], w[n:]
        X = fd.f(x)
        J = fd.jac_f(x)
        Jv = [sum(J[i][j] * v[j] for j in range(n)) for i in range(n)]
        s = sum(v[i] * Jv[i] for i in range(n))
        return list(X) + [Jv[i] - s * v[i] for i in range(n)]

    return F


def lift(fd: FieldDescriptor, w: BundleState) -> BundleFieldValue:
    if fd.dim != w.dim:
        raise ValueError(f"field {fd.id} has dim {fd.dim}, state has dim {w.dim}")
    x, v = w.x.array(), w.v.array()
    J = fd.jacobian(x)
    Jv = J @ v
    return BundleFieldValue(fd.value(x), Jv - np.dot(v, Jv) * v)


# -- Electrodynamics on T^3: x = (x, y, theta) -----------------------------

def _ed_x0(x):
    return [cos(x[2]), sin(x[2]), 1.0]


def _ed_j0(x):
    J = _zeros(3)
    J[0][2] = -sin(x[2])
    J[1][2] = cos(x[2])
    return J


def _theta_field(b, db1, db2):
    def f(x):
        return [0.0, 0.0, b(x)]

    def jf(x):
        J = _zeros(3)
        J[2][0] = db1(x)
        J[2][1] = db2(x)
        return J

    return f, jf


_ED = [
    FieldDescriptor("X0", 3, _ed_x0, _ed_j0),
    FieldDescriptor("X1", 3, *_const([0.0, 0.0, 1.0])),
    FieldDescriptor("X2", 3, *_theta_field(lambda x: sin(x[0]), lambda x: cos(x[0]), lambda x: 0.0)),
    FieldDescriptor("X3", 3, *_theta_field(lambda x: cos(x[0]), lambda x: -sin(x[0]), lambda x: 0.0)),
    FieldDescriptor("X4", 3, *_theta_field(lambda x: sin(x[1]), lambda x: 0.0, lambda x: cos(x[1]))),
    FieldDescriptor("X5", 3, *_theta_field(lambda x: cos(x[1]), lambda x: 0.0, lambda x: -sin(x[1]))),
]
_ED_EXTRA = FieldDescriptor(
    "X6", 3,
    *_theta_field(lambda x: sin(x[0] + x[1]), lambda x: cos(x[0] + x[1]), lambda x: cos(x[0] + x[1])),
)


def alpha(w: BundleState) -> float:
    """The scalar v . (grad X0) v of the electrodynamics drift."""
    if w.dim != 3:
        raise ValueError("alpha is defined on the three-dimensional system only")
    x3 = w.x.coords[2]
    v1, v2, v3 = w.v.comps
    return -v3 * v1 * np.sin(x3) + v3 * v2 * np.cos(x3)


def _ed_divergences():
    def d0(w):
        x, v = w[:3], w[3:]
        return 5.0 * v[2] * (v[0] * sin(x[2]) - v[1] * cos(x[2]))

    return {
        0: d0,
        1: lambda w: 0.0,
        2: lambda w: -5.0 * w[5] * w[3] * cos(w[0]),
        3: lambda w: 5.0 * w[5] * w[3] * sin(w[0]),
        4: lambda w: -5.0 * w[5] * w[4] * cos(w[1]),
        5: lambda w: 5.0 * w[5] * w[4] * sin(w[1]),
    }


# -- Appendix examples on T^2 ---------------------------------------------

def _ex_x3():
    def f(x):
        return [sin(x[1]), 0.0]

    def jf(x):
        J = _zeros(2)
        J[0][1] = cos(x[1])
        return J

    return f, jf


def _ex_x4():
    def f(x):
        return [0.0, sin(x[0])]

    def jf(x):
        J = _zeros(2)
        J[1][0] = cos(x[0])
        return J

    return f, jf


_EX_NOISE = [
    FieldDescriptor("X1", 2, *_const([1.0, 0.0])),
    FieldDescriptor("X2", 2, *_const([0.0, 1.0])),
    FieldDescriptor("X3", 2, *_ex_x3()),
    FieldDescriptor("X4", 2, *_ex_x4()),
]


def _ex_div3(w):
    return -4.0 * w[2] * w[3] * cos(w[1])


def _ex_div4(w):
    return -4.0 * w[2] * w[3] * cos(w[0])


_EX_DIVS = {1: lambda w: 0.0, 2: lambda w: 0.0, 3: _ex_div3, 4: _ex_div4}

CATALOG: dict[str, SystemSpec] = {
    "electrodynamics": SystemSpec("electrodynamics", 3, tuple(_ED), 0, _ed_divergences()),
    "electrodynamics+extra": SystemSpec(
        "electrodynamics+extra", 3, tuple(_ED) + (_ED_EXTRA,), 1, _ed_divergences()
    ),
    "example1": SystemSpec(
        "example1", 2,
        (FieldDescriptor("X0", 2, *_const([0.0, 0.0])),) + tuple(_EX_NOISE), 2,
        {0: lambda w: 0.0, **_EX_DIVS},
    ),
    "example2": SystemSpec(
        "example2", 2,
        (FieldDescriptor("X0", 2, *_ex_x3()),) + tuple(_EX_NOISE), 3,
        {0: _ex_div3, **_EX_DIVS},
    ),
}


def get_system(system_id: str) -> SystemSpec:
    try:
        return CATALOG[system_id]
    except KeyError:
        raise KeyError(f"unknown system {system_id!r}; known: {sorted(CATALOG)}") from None


# -- divergences on the bundle --------------------------------------------

def _check_index(system: SystemSpec, k: int):
    if not 0 <= k <= system.r:
        raise IndexError(f"field index {k} out of range 0..{system.r} for {system.id}")


def ambient_divergence(system: SystemSpec, k: int, w: BundleState) -> float:
    """Trace of the ambient Jacobian of the lifted field, by exact derivatives."""
    _check_index(system, k)
    F = system.bundle_field(k)
    p = list(w.array())
    m = len(p)
    total = 0.0
    for i in range(m):
        e = [0.0] * m
        e[i] = 1.0
        total += dual.real(dual.directional(F, p, e)[i])
    return total


def bundle_divergence(system: SystemSpec, k: int, w: BundleState) -> float:
    """Closed-form divergence where one exists, otherwise the ambient trace."""
    _check_index(system, k)
    closed = system.closed_divergences.get(k)
    if closed is not None:
        return float(closed(list(w.array())))
    return ambient_divergence(system, k, w)


def _sphere_chart(n):
    if n == 2:
        def embed(q):
            return [cos(q[0]), sin(q[0])]
    else:
        def embed(q):
            phi, psi = q
            return [sin(psi) * cos(phi), sin(psi) * sin(phi), cos(psi)]
    return embed


def chart_field(system: SystemSpec, k: int) -> Generic:
    """Lifted field in chart coordinates (x, psi) for n=2 or (x, phi, psi) for n=3."""
    fd = system.fields[k]
    n = fd.dim
    F = bundle_field(fd)
    embed = _sphere_chart(n)

    def G(q):
        x, ang = q[:n], q[n:]
        v = embed(ang)
        out = F(list(x) + v)
        X, V = out[:n], out[n:]
        if n == 2:
            return list(X) + [-sin(ang[0]) * V[0] + cos(ang[0]) * V[1]]
        phi, psi = ang
        dphi = (-sin(phi) * V[0] + cos(phi) * V[1]) / sin(psi)
        dpsi = cos(psi) * cos(phi) * V[0] + cos(psi) * sin(phi) * V[1] - sin(psi) * V[2]
        return list(X) + [dphi, dpsi]

    return G


def chart_coordinates(w: BundleState) -> list[float]:
    n = w.dim
    v = w.v.array()
    if n == 2:
        return list(w.x.coords) + [float(np.arctan2(v[1], v[0]))]
    psi = float(np.arccos(np.clip(v[2], -1.0, 1.0)))
    phi = float(np.arctan2(v[1], v[0]))
    return list(w.x.coords) + [phi, psi]


def chart_divergence(system: SystemSpec, k: int, w: BundleState) -> float:
    """Riemannian divergence on the sphere bundle (volume dx dpsi, or dx sin(psi) dphi dpsi)."""
    _check_index(system, k)
    n = system.dim
    G = chart_field(system, k)
    q = chart_coordinates(w)
    m = len(q)
    total = 0.0
    for i in range(m):
        e = [0.0] * m
        e[i] = 1.0
        total += dual.real(dual.directional(G, q, e)[i])
    if n == 3:
        psi = q[-1]
        # d/dpsi of log sin(psi) times the psi-component
        total += np.cos(psi) / np.sin(psi) * dual.real(G(q)[-1])
    return float(total)
