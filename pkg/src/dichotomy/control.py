"""Deterministic control replays for the electrodynamics system.

The controlled field is X~0 + sum_k alpha_k X~k with piecewise-constant
alpha in R^5 (channels 1..5).  Base-only runs integrate x in T^3; bundle
runs integrate (x, v) in T^3 x S^2.  Integration is classical RK4, batched
over independent runs so scans stay fast.

Sphere coordinates used by the constructions: v = (cos l cos m, cos l sin m, sin l)
with latitude l and longitude m.  Along a meridian Y1 moves tan(l) at rate
cos(m), Y2 at rate sin(m); with x3 held at m (or m + pi) the drift moves
the longitude at rate +tan(l) (or -tan(l)) without changing latitude.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .sde import config_line
from .state_space import BundleState, TorusPoint, wrap, wrap_array

TWO_PI = 2.0 * math.pi
GAMMA_CAP = 1e4
CHANNELS = 5


# -- schedules -------------------------------------------------------------

@dataclass(frozen=True)
class ControlSchedule:
    """Breakpoints 0 = t_0 < t_1 < ... < t_P and one alpha in R^5 per interval."""
    breakpoints: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        b = self.breakpoints
        if len(b) != len(self.values) + 1:
            raise ValueError("need one more breakpoint than control values")
        if len(b) < 1 or b[0] != 0.0:
            raise ValueError("breakpoints must start at 0")
        if any(not t2 > t1 for t1, t2 in zip(b, b[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(len(v) != CHANNELS for v in self.values):
            raise ValueError(f"each control value needs {CHANNELS} channels")
        if any(not math.isfinite(c) for v in self.values for c in v):
            raise ValueError("control values must be finite")
        if self.labels and len(self.labels) != len(self.values):
            raise ValueError("one label per piece")

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[float, Sequence[float]]],
                    labels: Sequence[str] = ()) -> "ControlSchedule":
        """Build from (duration, alpha) pairs; zero-length pieces are dropped."""
        bps = [0.0]
        vals = []
        labs = []
        for i, (d, a) in enumerate(pieces):
            if d < 0:
                raise ValueError("piece durations must be nonnegative")
            if d == 0:
                continue
            bps.append(bps[-1] + float(d))
            vals.append(tuple(float(c) for c in a))
            if labels:
                labs.append(labels[i])
        return cls(tuple(bps), tuple(vals), tuple(labs))

    @property
    def duration(self) -> float:
        return self.breakpoints[-1]

    @property
    def pieces(self) -> int:
        return len(self.values)

    def concat(self, other: "ControlSchedule") -> "ControlSchedule":
        d = self.duration
        labs = (self.labels or ("",) * self.pieces) + (other.labels or ("",) * other.pieces)
        return ControlSchedule(self.breakpoints + tuple(d + t for t in other.breakpoints[1:]),
                               self.values + other.values, labs if any(labs) else ())


def constant(alpha: Sequence[float], T: float) -> ControlSchedule:
    return ControlSchedule((0.0, float(T)), (tuple(float(a) for a in alpha),))


def _alpha(**kw) -> tuple[float, ...]:
    a = [0.0] * CHANNELS
    for k, v in kw.items():
        a[int(k[1:]) - 1] = float(v)
    return tuple(a)


# -- controlled fields (batched) ------------------------------------------

def _theta_rate(x, a):
    s1, c1, s2, c2 = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1])
    return 1.0 + a[:, 0] + a[:, 1] * s1 + a[:, 2] * c1 + a[:, 3] * s2 + a[:, 4] * c2


def base_rhs(y: np.ndarray, a: np.ndarray) -> np.ndarray:
    out = np.empty_like(y)
    out[:, 0] = np.cos(y[:, 2])
    out[:, 1] = np.sin(y[:, 2])
    out[:, 2] = _theta_rate(y, a)
    return out


def bundle_rhs(y: np.ndarray, a: np.ndarray) -> np.ndarray:
    x, v = y[:, :3], y[:, 3:]
    out = np.empty_like(y)
    out[:, :3] = base_rhs(x, a)
    s1, c1, s2, c2 = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1])
    s3, c3 = np.sin(x[:, 2]), np.cos(x[:, 2])
    # J v for J = J0 + sum alpha_k J_k; only the theta row of J_k is nonzero
    Jv = np.empty_like(v)
    Jv[:, 0] = -s3 * v[:, 2]
    Jv[:, 1] = c3 * v[:, 2]
    Jv[:, 2] = (a[:, 1] * c1 - a[:, 2] * s1) * v[:, 0] + (a[:, 3] * c2 - a[:, 4] * s2) * v[:, 1]
    dot = np.sum(v * Jv, axis=1, keepdims=True)
    out[:, 3:] = Jv - dot * v
    return out


def _rk4(f, y, a, h):
    k1 = f(y, a)
    k2 = f(y + 0.5 * h * k1, a)
    k3 = f(y + 0.5 * h * k2, a)
    k4 = f(y + h * k3, a)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _piece_steps(dur: np.ndarray, a: np.ndarray, dt: float) -> int:
    # resolve fast pieces: step scaled inversely with the control magnitude
    rate = 1.0 + np.sum(np.abs(a), axis=1)
    h = np.minimum(dt, 0.05 / rate)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(dur > 0, np.ceil(dur / h - 1e-9), 0)
    return int(max(1, n.max())) if n.size else 1


def integrate_batch(y0: np.ndarray, alphas: np.ndarray, durations: np.ndarray, dt: float,
                    bundle: bool, record: bool = False):
    """RK4 through P pieces for B runs at once.

    y0 (B, d); alphas (B, P, 5); durations (B, P).  Each run takes the
    same number of steps per piece with its own step length.
    """
    y = np.array(y0, dtype=float, copy=True)
    f = bundle_rhs if bundle else base_rhs
    B, P = durations.shape
    traj_t = [np.zeros(B)]
    traj_y = [y.copy()]
    t = np.zeros(B)
    for p in range(P):
        a = alphas[:, p, :]
        dur = durations[:, p]
        n = _piece_steps(dur, a, dt)
        h = (dur / n)[:, None]
        for _ in range(n):
            y = _rk4(f, y, a, h)
            if bundle:
                y[:, 3:] /= np.linalg.norm(y[:, 3:], axis=1, keepdims=True)
            if record:
                t = t + h[:, 0]
                traj_t.append(t.copy())
                traj_y.append(y.copy())
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite state in controlled integration")
    if record:
        return y, np.stack(traj_t, axis=1), np.stack(traj_y, axis=1)
    return y


@dataclass
class ControlledTrajectory:
    t: np.ndarray           # (N,)
    y: np.ndarray           # (N, d), base coordinates unwrapped
    breakpoints: tuple[float, ...]

    def final(self) -> np.ndarray:
        return self.y[-1]


def apply_control(schedule: ControlSchedule, w0, dt: float = 1e-3, system: str = "electrodynamics"):
    """Integrate the controlled ODE from w0 (TorusPoint for base, BundleState for bundle)."""
    if system != "electrodynamics":
        raise ValueError("control replays are implemented for the electrodynamics system")
    if not dt > 0:
        raise ValueError("dt must be positive")
    bundle = isinstance(w0, BundleState)
    y0 = (w0.array() if bundle else np.asarray(w0.coords if isinstance(w0, TorusPoint) else w0, dtype=float))
    y0 = np.asarray(y0, dtype=float)[None, :]
    if schedule.pieces == 0:
        return ControlledTrajectory(np.zeros(1), y0.copy(), schedule.breakpoints)
    alphas = np.array(schedule.values)[None, :, :]
    durs = np.diff(np.array(schedule.breakpoints))[None, :]
    ts, ys = [0.0], [y0[0]]
    y = y0
    t0 = 0.0
    for p in range(schedule.pieces):
        # fixed step dt within each piece; last step shortened to land on the breakpoint
        n = max(1, int(math.ceil(durs[0, p] / dt - 1e-9)))
        f = bundle_rhs if bundle else base_rhs
        a = alphas[:, p, :]
        h = durs[0, p] / n
        for i in range(n):
            y = _rk4(f, y, a, h)
            if bundle:
                y[:, 3:] /= np.linalg.norm(y[:, 3:])
            ts.append(t0 + (i + 1) * h)
            ys.append(y[0].copy())
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite state in controlled integration")
        t0 = schedule.breakpoints[p + 1]
        ts[-1] = t0
    return ControlledTrajectory(np.array(ts), np.array(ys), schedule.breakpoints)


# -- closed-form circle ----------------------------------------------------

@dataclass(frozen=True)
class CircleCurve:
    c: float
    start: tuple[float, float, float]

    @property
    def center(self) -> tuple[float, float]:
        x1, x2, x3 = self.start
        return (x1 - math.sin(x3) / self.c, x2 + math.cos(x3) / self.c)

    @property
    def radius(self) -> float:
        return 1.0 / abs(self.c)

    @property
    def period(self) -> float:
        return TWO_PI / abs(self.c)

    def __call__(self, t):
        """Unwrapped (x1, x2, x3) at time(s) t."""
        x1, x2, x3 = self.start
        t = np.asarray(t, dtype=float)
        c = self.c
        return np.stack([x1 - math.sin(x3) / c + np.sin(x3 + c * t) / c,
                         x2 + math.cos(x3) / c - np.cos(x3 + c * t) / c,
                         x3 + c * t], axis=-1)

    def schedule(self, T: float) -> ControlSchedule:
        """Constant control on channel 1 with value c - 1 for time T."""
        return constant(_alpha(a1=self.c - 1.0), T)


def circle_maneuver(c: float, x_start: TorusPoint) -> CircleCurve:
    if c == 0 or not math.isfinite(c):
        raise ValueError("circle maneuver needs finite c != 0")
    return CircleCurve(float(c), tuple(float(v) for v in x_start.coords))


def circle_gap(c: float, x_start: TorusPoint, dt: float = 1e-4, periods: float = 1.0) -> float:
    """Sup-norm gap between the closed-form circle and the integrator."""
    curve = circle_maneuver(c, x_start)
    T = periods * curve.period
    tr = apply_control(curve.schedule(T), x_start, dt)
    return float(np.max(np.abs(tr.y - curve(tr.t))))


# -- auxiliary sphere fields ----------------------------------------------

def _proj(v, u):
    return u - np.dot(v, u) * v


def _y0k(theta):
    s, c = math.sin(theta), math.cos(theta)
    return lambda v: _proj(v, np.array([-v[2] * s, v[2] * c, 0.0]))


SPHERE_FIELDS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "Y01": _y0k(0.0),
    "Y02": _y0k(math.pi / 2),
    "Y03": _y0k(math.pi),
    "Y04": _y0k(3 * math.pi / 2),
    "Y1": lambda v: v[0] * np.array([-v[2] * v[0], -v[2] * v[1], 1.0 - v[2] ** 2]),
    "Y2": lambda v: v[1] * np.array([-v[2] * v[0], -v[2] * v[1], 1.0 - v[2] ** 2]),
}


def sphere_flow(name: str, v0, T: float, dt: float = 1e-3, speed: float = 1.0) -> np.ndarray:
    """RK4 orbit of speed * Y on S^2, renormalized each step; rows are v(t_i)."""
    if name not in SPHERE_FIELDS:
        raise ValueError(f"unknown sphere field {name!r}; known: {sorted(SPHERE_FIELDS)}")
    v = np.asarray(v0.comps if hasattr(v0, "comps") else v0, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("initial vector must be a unit vector")
    if T < 0:
        raise ValueError("T must be nonnegative")
    Y = SPHERE_FIELDS[name]
    n = max(1, int(math.ceil(T / dt - 1e-9))) if T > 0 else 0
    h = T / n if n else 0.0
    out = np.empty((n + 1, 3))
    out[0] = v
    for i in range(n):
        k1 = speed * Y(v)
        k2 = speed * Y(v + 0.5 * h * k1)
        k3 = speed * Y(v + 0.5 * h * k2)
        k4 = speed * Y(v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        v = v / np.linalg.norm(v)
        out[i + 1] = v
    return out


def sphere_jacobian_norm(name: str, v: np.ndarray, h: float = 1e-6) -> float:
    """Spectral norm of DY at v by central differences (used for Gronwall envelopes)."""
    Y = SPHERE_FIELDS[name]
    J = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        J[:, j] = (Y(v + e) - Y(v - e)) / (2 * h)
    return float(np.linalg.norm(J, 2))


# -- hit estimate ----------------------------------------------------------

@dataclass(frozen=True)
class HitResult:
    eps: float
    t_hit: float
    v1_at_hit: float
    t_bound: float
    v1_bound: float
    monotone: bool

    @property
    def ok(self) -> bool:
        return self.v1_at_hit < self.v1_bound and self.t_hit <= self.t_bound and self.monotone


def _projected(y):
    v1, v3 = y
    return np.array([-v3 * v1 * v1, v1 * (1.0 - v3 * v3)])


def hit_estimate_check(eps: float, dt: float = 1e-4) -> HitResult:
    """First equator crossing of the (v1, v3) system from (eps, -eps)."""
    if not (0.0 < eps < 1.0 / 3.0):
        raise ValueError(f"epsilon must lie in (0, 1/3), got {eps}")
    bound_t = eps / (eps * (1.0 - eps * eps))
    y = np.array([eps, -eps])
    t = 0.0
    limit = 10.0 * bound_t
    monotone = True

    def step(y, h):
        k1 = _projected(y)
        k2 = _projected(y + 0.5 * h * k1)
        k3 = _projected(y + 0.5 * h * k2)
        k4 = _projected(y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    while t < limit:
        y_new = step(y, dt)
        if not y_new[1] > y[1]:
            monotone = False
        if y_new[1] >= 0.0:
            lo, hi = 0.0, dt
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if step(y, mid)[1] >= 0.0:
                    hi = mid
                else:
                    lo = mid
            yh = step(y, hi)
            return HitResult(eps, t + hi, float(yh[0]), bound_t, 3.0 * eps, monotone)
        y = y_new
        t += dt
    raise RuntimeError(f"no equator crossing within {limit} (10x the time bound) for eps={eps}")


# -- Gronwall comparisons --------------------------------------------------

@dataclass(frozen=True)
class GronwallCheck:
    gap: float
    bound: float
    M: float
    L: float

    @property
    def ok(self) -> bool:
        return self.gap <= self.bound


def gronwall_drift(k: int, w: BundleState, t: float, delta: float, v_ref=None, dt: float = 1e-4) -> GronwallCheck:
    """Steer x3 to the k-th quarter angle in time delta, hold it, compare v with Y0k."""
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be 1..4")
    theta = (k - 1) * math.pi / 2
    x3 = w.x.coords[2]
    d = math.remainder(theta - x3, TWO_PI)
    sched = ControlSchedule.from_pieces([(delta, _alpha(a1=d / delta - 1.0)), (t, _alpha(a1=-1.0))])
    tr = apply_control(sched, w, dt)
    v_ref = np.asarray(v_ref if v_ref is not None else w.v.comps, dtype=float)
    ref = sphere_flow(f"Y0{k}", v_ref, t, dt)
    mask = tr.t >= delta - 1e-12
    got = tr.y[mask, 3:]
    m = min(len(got), len(ref))
    gap = float(np.max(np.linalg.norm(got[:m] - ref[:m], axis=1)))
    # measured constants: M bounds the sphere speed during the steering piece,
    # L the Jacobian of Y0k along the reference orbit
    sp = np.array([np.linalg.norm(bundle_rhs(y[None, :], np.zeros((1, 5)))[0, 3:]) for y in tr.y[~mask]] or [0.0])
    M = float(sp.max()) if sp.size else 0.0
    L = max(sphere_jacobian_norm(f"Y0{k}", v) for v in ref[:: max(1, len(ref) // 200)])
    bound = (float(np.linalg.norm(w.v.array() - v_ref)) + delta * max(M, 1.0)) * math.exp(L * t)
    return GronwallCheck(gap, bound, M, L)


def gronwall_fast(w: BundleState, t: float, gamma: float, dt: float = 1e-5) -> GronwallCheck:
    """Drive channel 2 at gamma / cos x1 and compare v with the gamma-accelerated Y1 flow."""
    c1 = math.cos(w.x.coords[0])
    if abs(c1) < 0.5:
        raise ValueError("choose a start with |cos x1| >= 1/2 (use Y2 otherwise)")
    T = t / gamma
    sched = constant(_alpha(a2=gamma / c1), T)
    tr = apply_control(sched, w, dt)
    ref = sphere_flow("Y1", w.v.comps, T, dt, speed=gamma)
    m = min(len(ref), len(tr.y))
    gap = float(np.max(np.linalg.norm(tr.y[:m, 3:] - ref[:m], axis=1)))
    M = float(max(np.linalg.norm(bundle_rhs(y[None, :], np.zeros((1, 5)))[0]) for y in tr.y[::max(1, m // 50)]))
    L = max(sphere_jacobian_norm("Y1", v) for v in ref[:: max(1, m // 100)])
    bound = (M * t / gamma) * math.exp(2 * L * t)
    return GronwallCheck(gap, bound, M, L)


# -- reachability ----------------------------------------------------------

@dataclass(frozen=True)
class TargetBox:
    """Axis-aligned box: base coordinates compared on the torus, v coordinates in R^3."""
    center: tuple[float, ...]
    half: tuple[float, ...]

    def __post_init__(self):
        if len(self.center) not in (3, 6) or len(self.half) != len(self.center):
            raise ValueError("box needs 3 (base) or 6 (bundle) coordinates")

    @classmethod
    def cube(cls, center: Sequence[float], side: float, v_side: Optional[float] = None) -> "TargetBox":
        c = tuple(float(x) for x in center)
        half = [side / 2] * 3 + ([(v_side if v_side is not None else side) / 2] * 3 if len(c) == 6 else [])
        return cls(c, tuple(half))

    @property
    def bundle(self) -> bool:
        return len(self.center) == 6

    def contains(self, y: np.ndarray) -> bool:
        y = np.asarray(y, dtype=float)
        for i in range(3):
            if abs(math.remainder(y[i] - self.center[i], TWO_PI)) >= self.half[i]:
                return False
        if self.bundle:
            for i in range(3, 6):
                if abs(y[i] - self.center[i]) >= self.half[i]:
                    return False
        return True


@dataclass
class ReachabilityReport:
    start: tuple[float, ...]
    target: TargetBox
    reached: bool
    schedule: ControlSchedule
    final: tuple[float, ...]
    elapsed: float
    stage: str = "done"

    def __post_init__(self):
        if self.reached and not self.target.contains(np.array(self.final)):
            raise AssertionError("reached flag set for a final state outside the target")


def _spin(dtheta: float, gamma: float) -> tuple[float, tuple]:
    """Fast X~1 piece changing x3 by dtheta in time 1/gamma (base moves at most 1/gamma)."""
    return 1.0 / gamma, _alpha(a1=gamma * dtheta - 1.0)


def base_plan(x: Sequence[float], target: Sequence[float], gamma: float = 1e3) -> list[tuple[float, tuple, str]]:
    """Pieces moving (x1, x2) to the target by a circle arc, then fixing x3 by a fast spin."""
    x1, x2, x3 = x
    d = np.array([math.remainder(target[0] - x1, TWO_PI), math.remainder(target[1] - x2, TWO_PI)])
    dist = float(np.hypot(*d))
    pieces = []
    theta = x3
    if dist > 1e-12:
        heading = math.atan2(d[1], d[0])
        beta = math.remainder(heading - theta, TWO_PI)
        if abs(beta) > 3 * math.pi / 4:
            dur, a = _spin(beta, gamma)
            pieces.append((dur, a, "face"))
            theta += beta
            # the spin drifts the base by at most 1/gamma; aim from the predicted point
            p = np.array([x1, x2]) + np.array(_spin_shift(x3, beta, gamma))
            d = np.array([math.remainder(target[0] - p[0], TWO_PI), math.remainder(target[1] - p[1], TWO_PI)])
            dist = float(np.hypot(*d))
            heading = math.atan2(d[1], d[0])
            beta = math.remainder(heading - theta, TWO_PI)
        if abs(beta) < 1e-9:
            pieces.append((dist, _alpha(a1=-1.0), "straight"))
        else:
            c = 2.0 * math.sin(beta) / dist
            pieces.append((2.0 * beta / c, _alpha(a1=c - 1.0), "arc"))
            theta += 2.0 * beta
    dth = math.remainder(target[2] - theta, TWO_PI)
    if abs(dth) > 1e-12:
        dur, a = _spin(dth, gamma)
        pieces.append((dur, a, "spin"))
    return pieces


def _spin_shift(x3: float, dtheta: float, gamma: float) -> tuple[float, float]:
    """Exact base displacement during a spin piece (heading sweeps linearly)."""
    T = 1.0 / gamma
    if abs(dtheta) < 1e-12:
        return (T * math.cos(x3), T * math.sin(x3))
    r = dtheta / T
    return ((math.sin(x3 + dtheta) - math.sin(x3)) / r, (math.cos(x3) - math.cos(x3 + dtheta)) / r)


def _latlon(v):
    return math.asin(max(-1.0, min(1.0, v[2]))), math.atan2(v[1], v[0])


def _meridian(v, lat_to: float, gamma: float, x):
    """Fast Y1/Y2 piece from the latitude of v to lat_to along its meridian (x3 held)."""
    lat, lon = _latlon(v)
    dtan = math.tan(lat_to) - math.tan(lat)
    if abs(dtan) < 1e-15:
        return []
    use_y1 = abs(math.cos(lon)) >= abs(math.sin(lon))
    rate = math.cos(lon) if use_y1 else math.sin(lon)
    g = math.copysign(gamma, dtan * rate)
    dur = abs(dtan) / (gamma * abs(rate))
    if use_y1:
        a = _alpha(a1=-1.0, a2=g * math.cos(x[0]), a3=-g * math.sin(x[0]))
    else:
        a = _alpha(a1=-1.0, a4=g * math.cos(x[1]), a5=-g * math.sin(x[1]))
    return [(dur, a, "meridian")]


class _Runner:
    """Apply pieces one at a time so each plan step sees the actual state."""

    def __init__(self, y0, dt):
        self.y = np.array(y0, dtype=float)
        self.dt = dt
        self.pieces: list[tuple[float, tuple, str]] = []

    def run(self, pieces):
        for dur, a, lab in pieces:
            if dur <= 0:
                continue
            self.y = integrate_batch(self.y[None, :], np.array(a)[None, None, :], np.array([[dur]]),
                                     self.dt, bundle=self.y.size == 6)[0]
            self.pieces.append((dur, a, lab))

    @property
    def elapsed(self) -> float:
        return sum(p[0] for p in self.pieces)

    def schedule(self) -> ControlSchedule:
        return ControlSchedule.from_pieces([(d, a) for d, a, _ in self.pieces], [l for _, _, l in self.pieces])


def reach_base(start: Sequence[float], target: TargetBox, budget: float = 50.0, dt: float = 1e-3,
               gamma: float = 1e3) -> ReachabilityReport:
    gamma = min(gamma, GAMMA_CAP)
    start = tuple(float(s) for s in start)
    if target.contains(np.array(start)):
        return ReachabilityReport(start, target, True, ControlSchedule((0.0,), ()), start, 0.0, "start inside")
    r = _Runner(start, dt)
    r.run([(d, a, l) for d, a, l in base_plan(start, target.center, gamma)])
    stage = "base"
    return _finish(start, target, r, budget, stage)


def _finish(start, target, r: _Runner, budget, stage):
    final = tuple(float(c) for c in r.y)
    ok = target.contains(r.y) and r.elapsed <= budget
    if ok:
        stage = "done"
    elif r.elapsed > budget:
        stage = f"{stage}: over budget ({r.elapsed:.3g} > {budget})"
    else:
        stage = f"{stage}: final state outside target"
    return ReachabilityReport(start, target, ok, r.schedule(), final, r.elapsed, stage)


def reach_bundle(start: BundleState, target: TargetBox, budget: float = 50.0, dt: float = 1e-3,
                 gamma: float = 1e3, mid_latitude: float = math.pi / 4) -> ReachabilityReport:
    """Equator staging: set longitude, drop to the equator, steer the base, rise, fix x3."""
    if not target.bundle:
        raise ValueError("bundle reach needs a six-coordinate target")
    gamma = min(gamma, GAMMA_CAP)
    y0 = start.array()
    s0 = tuple(float(c) for c in y0)
    if target.contains(y0):
        return ReachabilityReport(s0, target, True, ControlSchedule((0.0,), ()), s0, 0.0, "start inside")
    r = _Runner(y0, dt)
    vt = np.array(target.center[3:])
    vt = vt / np.linalg.norm(vt)
    lat_t, lon_t = _latlon(vt)
    pole_target = math.cos(lat_t) < 1e-9

    # stage 0: leave a pole (Y0,1 has speed |v3| there)
    if math.cos(_latlon(r.y[3:])[0]) < 1e-3:
        r.run([(0.1, _alpha(a1=-1.0), "off-pole")])
    # stage 1: longitude at mid-latitude, drift with x3 tracking the longitude
    if not pole_target:
        lat, lon = _latlon(r.y[3:])
        hemi = 1.0 if lat >= 0 else -1.0
        r.run(_meridian(r.y[3:], hemi * mid_latitude, gamma, r.y))
        lat, lon = _latlon(r.y[3:])
        dlon = math.remainder(lon_t - lon, TWO_PI)
        if abs(dlon) > 1e-9:
            rate = math.tan(lat)
            # x3 = lon moves east at +tan(lat); x3 = lon + pi moves at -tan(lat)
            face = lon if dlon * rate > 0 else lon + math.pi
            dur, a = _spin(math.remainder(face - r.y[2], TWO_PI), gamma)
            r.run([(dur, a, "align x3")])
            lat, lon = _latlon(r.y[3:])
            dlon = math.remainder(lon_t - lon, TWO_PI)
            speed = abs(rate)
            r.run([(abs(dlon) / speed, _alpha(a1=math.copysign(speed, dlon) - 1.0), "longitude")])
    # stage 2: equator
    r.run(_meridian(r.y[3:], 0.0, gamma, r.y))
    # stage 3: base steering on the equator, where the sphere parts of X~0, X~1 vanish
    r.run(base_plan(r.y[:3], target.center[:3], gamma))
    # stage 4: rise to the target latitude; a pole target only needs to enter the box
    goal = lat_t if not pole_target else math.copysign(math.acos(min(0.5 * target.half[3], 0.5)), lat_t)
    r.run(_meridian(r.y[3:], goal, gamma, r.y))
    # stage 5: fix x3
    dth = math.remainder(target.center[2] - r.y[2], TWO_PI)
    if abs(dth) > 1e-12:
        dur, a = _spin(dth, gamma)
        r.run([(dur, a, "spin")])
    return _finish(s0, target, r, budget, "bundle")


def base_grid(k: int = 4) -> list[tuple[float, float, float]]:
    c = (np.arange(k) + 0.5) * TWO_PI / k
    return [(a, b, d) for a in c for b in c for d in c]


def default_targets(side: float = math.pi / 4) -> list[TargetBox]:
    c = (np.arange(2) + 0.25) * math.pi
    return [TargetBox.cube((a, b, d), side) for a in c for b in c for d in c]


def _reach_base_batch(starts, targets, budget, dt, gamma) -> list[ReachabilityReport]:
    """Base plans padded to a common piece layout and integrated together."""
    plans = []
    for s, tg in zip(starts, targets):
        plans.append([] if tg.contains(np.array(s)) else base_plan(s, tg.center, gamma))
    P = max((len(p) for p in plans), default=0)
    B = len(plans)
    finals = np.array(starts, dtype=float)
    if P:
        alphas = np.zeros((B, P, CHANNELS))
        durs = np.zeros((B, P))
        for i, pl in enumerate(plans):
            for j, (d, a, _) in enumerate(pl):
                alphas[i, j] = a
                durs[i, j] = d
        finals = integrate_batch(finals, alphas, durs, dt, bundle=False)
    out = []
    for s, tg, pl, y in zip(starts, targets, plans, finals):
        s = tuple(float(c) for c in s)
        if not pl:
            out.append(ReachabilityReport(s, tg, True, ControlSchedule((0.0,), ()), s, 0.0, "start inside"))
            continue
        r = _Runner(y, dt)
        r.pieces = list(pl)
        r.y = y
        out.append(_finish(s, tg, r, budget, "base"))
    return out


def reach_scan(starts: Sequence, targets: Sequence[TargetBox], budget: float = 50.0, dt: float = 1e-3,
               gamma: float = 1e3, threads: int = 1) -> list[ReachabilityReport]:
    """Every (start, target) pair; base or bundle variant chosen by the target dimension."""
    pairs = [(s, tg) for s in starts for tg in targets]
    if pairs and not any(tg.bundle for _, tg in pairs):
        return _reach_base_batch([tuple(s.coords) if isinstance(s, TorusPoint) else tuple(s) for s, _ in pairs],
                                 [tg for _, tg in pairs], budget, dt, min(gamma, GAMMA_CAP))

    def one(p):
        s, tg = p
        if tg.bundle:
            w = s if isinstance(s, BundleState) else BundleState.from_arrays(s[:3], s[3:])
            return reach_bundle(w, tg, budget, dt, gamma)
        return reach_base(s.coords if isinstance(s, TorusPoint) else s, tg, budget, dt, gamma)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, pairs))
    return [one(p) for p in pairs]


def write_reach_csv(path, reports: Sequence[ReachabilityReport], config: Optional[dict] = None) -> None:
    with open(path, "w", newline="") as fh:
        if config is not None:
            fh.write(config_line(config) + "\n")
        wr = csv.writer(fh)
        wr.writerow(["start", "target", "reached", "control_time", "pieces", "stage"])
        for r in reports:
            wr.writerow([" ".join(f"{c:.6g}" for c in r.start), " ".join(f"{c:.6g}" for c in r.target.center),
                         int(r.reached), repr(r.elapsed), r.schedule.pieces, r.stage])
