"""Stratonovich Heun integration of the base and projective processes.

The state carried along is the base point x and a block of m tangent vectors
U (m = 1 for the top exponent, m = n for the full spectrum).  All trajectory
work goes through the kernel chosen in ``backend``; ``heun_step`` is a
one-step reference built directly on the field descriptors.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend
from .state_space import BundleState, TorusPoint, random_bundle_state, wrap
from .vector_fields import SystemSpec, get_system

IC_CHANNEL = 1000


class NumericalAbort(FloatingPointError):
    """A trajectory produced a non-finite state or lost rank in its frame."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    scheme: str = "heun"
    seed: int = 0
    renorm_interval: int = 16
    chunk: int = 1 << 16       # steps of noise generated per kernel call

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme != "heun":
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        if self.renorm_interval < 1:
            raise ValueError("renorm_interval must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")


@dataclass(frozen=True)
class NoiseDraw:
    increments: np.ndarray      # shape (r,), each N(0, dt)


@dataclass
class TangentCarrier:
    u: np.ndarray               # (m, n), rows renormalized only at renorm steps
    log_accum: np.ndarray       # (m,)

    @classmethod
    def from_vector(cls, v) -> "TangentCarrier":
        v = np.asarray(v, dtype=float)
        return cls(v.reshape(1, -1).copy(), np.zeros(1))


class NoiseSource:
    """Gaussian increments from one counter-based stream per (trajectory, channel)."""

    def __init__(self, r: int, dt: float, seed: int, traj: int = 0):
        self.r = r
        self.scale = math.sqrt(dt)
        self._gens = [
            np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(traj, k))))
            for k in range(r)
        ]

    def draw(self, steps: int) -> np.ndarray:
        cols = np.empty((self.r, steps))
        for k, g in enumerate(self._gens):
            g.standard_normal(steps, out=cols[k])
        cols *= self.scale
        return np.ascontiguousarray(cols.T)


def coarsen(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive groups of ``factor`` increments (same Brownian path, larger dt)."""
    steps = dW.shape[0] - dW.shape[0] % factor
    return dW[:steps].reshape(steps // factor, factor, dW.shape[1]).sum(axis=1)


def initial_state(system: SystemSpec, seed: int, traj: int = 0, exclusion: float = 0.0) -> BundleState:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(traj, IC_CHANNEL))))
    return random_bundle_state(rng, system.dim, exclusion)


def complete_frame(v: np.ndarray, m: int) -> np.ndarray:
    """m orthonormal rows whose first row is v."""
    n = v.shape[0]
    M = np.eye(n)
    M[:, 0] = v
    # put v first, then the coordinate axes least aligned with it
    order = np.argsort(np.abs(v))
    M[:, 1:] = np.eye(n)[:, order[: n - 1]]
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    return Q.T[:m].copy()


def _resolve(system) -> SystemSpec:
    return get_system(system) if isinstance(system, str) else system


def _check_eps(eps: float):
    if not (eps >= 0 and math.isfinite(eps)):
        raise ValueError(f"epsilon must be finite and >= 0, got {eps}")


class Trajectory:
    """A resumable trajectory; ``run`` advances it by a number of steps."""

    def __init__(self, system, eps: float, config: IntegratorConfig, *, traj: int = 0,
                 w0: Optional[BundleState] = None, frame: int = 1, hist_bins: int = 0,
                 backend_name: Optional[str] = None):
        self.system = _resolve(system)
        _check_eps(eps)
        if not 1 <= frame <= self.system.dim:
            raise ValueError(f"frame size must be in 1..{self.system.dim}")
        self.eps = eps
        self.config = config
        self.traj = traj
        self.noise = NoiseSource(self.system.r, config.dt, config.seed, traj)
        w0 = w0 if w0 is not None else initial_state(self.system, config.seed, traj)
        if w0.dim != self.system.dim:
            raise ValueError("initial state dimension does not match system")
        self.w0 = w0
        self.x = w0.x.array()
        self.U = complete_frame(w0.v.array(), frame)
        self.logacc = np.zeros(frame)
        self.divacc = np.zeros(1)
        self.steps = 0
        self.hist = np.zeros((hist_bins,) * 3, dtype=np.int64) if hist_bins else None
        self.bins = hist_bins
        self._advance = backend.get(backend_name)
        self._sqrt_eps = math.sqrt(eps)

    @property
    def t(self) -> float:
        return self.steps * self.config.dt

    def run(self, steps: int, dW: Optional[np.ndarray] = None, stride: int = 0) -> Optional[np.ndarray]:
        """Advance ``steps`` steps; optionally return samples every ``stride`` steps.

        Noise is drawn from the trajectory's streams unless ``dW`` is given.
        Samples have columns t, x_1..x_n, v_1..v_n, log_accum.
        """
        if dW is not None:
            dW = np.ascontiguousarray(dW, dtype=float)
            steps = dW.shape[0]
        n = self.system.dim
        chunk = self.config.chunk
        ri = self.config.renorm_interval
        chunk = max(ri, chunk - chunk % ri)
        rows = []
        done = 0
        while done < steps:
            k = min(chunk, steps - done)
            block = dW[done:done + k] if dW is not None else self.noise.draw(k)
            out = None
            if stride:
                count = (self.steps + k) // stride - self.steps // stride
                out = np.empty((count, 2 * n + 1))
            base = float(self.logacc[0])
            t0 = self.steps
            try:
                filled = self._advance(self.system.kernel_code, self._sqrt_eps, self.config.dt,
                                       self.x, self.U, block, ri, self.logacc, self.divacc,
                                       self.hist, self.bins, out, max(stride, 1), t0 % max(stride, 1))
            except FloatingPointError as exc:
                raise NumericalAbort(
                    f"{self.system.id}, eps={self.eps}, trajectory {self.traj}, "
                    f"steps {t0}..{t0 + k}: {exc}") from exc
            if stride:
                out = out[:filled]
                first = (t0 // stride + 1) * stride
                tt = (first + stride * np.arange(filled)) * self.config.dt
                out[:, 2 * n] += base
                rows.append(np.column_stack([tt, out]))
            self.steps += k
            done += k
        if not stride:
            return None
        return np.concatenate(rows) if rows else np.empty((0, 2 * n + 2))

    def state(self) -> BundleState:
        u = self.U[0] / np.linalg.norm(self.U[0])
        return BundleState.from_arrays(self.x, u)

    def carrier(self) -> TangentCarrier:
        return TangentCarrier(self.U.copy(), self.logacc.copy())


def heun_step(system, eps: float, state: tuple[TorusPoint, TangentCarrier],
              draw: NoiseDraw, dt: float) -> tuple[TorusPoint, TangentCarrier]:
    """One predictor-corrector step of base point and tangent block, no renormalization."""
    from ._core_py import _eval

    system = _resolve(system)
    _check_eps(eps)
    x, carrier = state
    dw = np.asarray(draw.increments, dtype=float)
    if dw.shape != (system.r,):
        raise ValueError(f"expected {system.r} increments, got shape {dw.shape}")
    s = math.sqrt(eps)
    x0 = x.array()
    U = np.asarray(carrier.u, dtype=float).reshape(-1, system.dim)
    b0, G0 = _eval(system, s, dt, x0, dw)
    xp = x0 + b0
    Up = U + U @ G0.T
    b1, G1 = _eval(system, s, dt, xp, dw)
    x1 = x0 + 0.5 * (b0 + b1)
    U1 = U + 0.5 * (U @ G0.T + Up @ G1.T)
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(U1))):
        raise NumericalAbort(f"non-finite state after Heun step from x={x0.tolist()}")
    return TorusPoint(tuple(wrap(float(c)) for c in x1)), TangentCarrier(U1, carrier.log_accum.copy())


@dataclass
class SimulationResult:
    samples: np.ndarray          # columns t, x.., v.., log_accum
    final: BundleState
    carrier: TangentCarrier
    log_det: float               # accumulated log-determinant integrand
    steps: int


def simulate(system, eps: float, T: float, config: IntegratorConfig, *, w0: Optional[BundleState] = None,
             stride: int = 0, traj: int = 0, frame: int = 1, backend_name: Optional[str] = None) -> SimulationResult:
    """Run one trajectory for time T; samples every ``stride`` steps when stride > 0."""
    if not T > 0:
        raise ValueError("T must be positive")
    tr = Trajectory(system, eps, config, traj=traj, w0=w0, frame=frame, backend_name=backend_name)
    steps = int(round(T / config.dt))
    samples = tr.run(steps, stride=stride)
    if samples is None:
        samples = np.empty((0, 2 * tr.system.dim + 2))
    return SimulationResult(samples, tr.state(), tr.carrier(), float(tr.divacc[0]), tr.steps)


def config_line(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, default=str)


def write_trajectory_csv(path, result: SimulationResult, config: Optional[dict] = None) -> None:
    n = result.final.dim
    with open(path, "w", newline="") as fh:
        if config is not None:
            fh.write(config_line(config) + "\n")
        wr = csv.writer(fh)
        wr.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["log_accum"])
        for row in result.samples:
            wr.writerow([repr(float(c)) for c in row])
