"""Lyapunov exponent estimates by batch means along long trajectories."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .sde import IntegratorConfig, Trajectory, _resolve, config_line
from .state_space import BundleState

MIN_BATCHES = 8


@dataclass(frozen=True)
class ExponentEstimate:
    lam: float
    stderr: float
    batches: int
    T: float
    dt: float
    seed: int
    eps: float = float("nan")
    system: str = ""
    batch_values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be >= 0")
        if self.batches < MIN_BATCHES:
            raise ValueError(f"an estimate needs at least {MIN_BATCHES} batches")

    def z(self) -> float:
        """Estimate in units of its standard error (inf when stderr is 0 and lam != 0)."""
        if self.stderr == 0:
            return 0.0 if self.lam == 0 else math.copysign(math.inf, self.lam)
        return self.lam / self.stderr


def batch_stats(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite batch value")
    m = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return m, se


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DICHOTOMY_THREADS", "1")))
    except ValueError:
        return 1


def _batched_run(system, eps, T, config, *, frame, batches, burn_in, traj, w0):
    """Per-batch growth rates of each frame vector and of the log-determinant."""
    if batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches, got {batches}")
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in must be a fraction in [0, 1)")
    if not T > 0:
        raise ValueError("T must be positive")
    tr = Trajectory(system, eps, config, traj=traj, w0=w0, frame=frame)
    total = int(round(T / config.dt))
    burn = int(round(burn_in * total))
    per = (total - burn) // batches
    if per < 1:
        raise ValueError("horizon too short for the requested batches")
    tr.run(burn)
    rates = np.empty((batches, frame))
    drates = np.empty(batches)
    span = per * config.dt
    for b in range(batches):
        l0 = tr.logacc.copy()
        d0 = float(tr.divacc[0])
        tr.run(per)
        rates[b] = (tr.logacc - l0) / span
        drates[b] = (float(tr.divacc[0]) - d0) / span
    return rates, drates, per * batches * config.dt


def _estimate(values, batches, T, config, eps, system) -> ExponentEstimate:
    m, se = batch_stats(values)
    return ExponentEstimate(m, se, batches, T, config.dt, config.seed, eps, system.id, tuple(map(float, values)))


def _replicated(system, eps, T, config, replicas, threads, frame, burn_in, w0) -> list:
    def one(k):
        return _batched_run(system, eps, T, config, frame=frame, batches=MIN_BATCHES, burn_in=burn_in,
                            traj=k, w0=w0)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, range(replicas)))
    return [one(k) for k in range(replicas)]


def top_exponent(system, eps: float, T: float, config: IntegratorConfig, *, batches: int = 16,
                 burn_in: float = 0.1, traj: int = 0, w0: Optional[BundleState] = None,
                 replicas: int = 0, threads: int = 1) -> ExponentEstimate:
    """Top exponent from log growth of one tangent vector.

    With ``replicas`` > 0 the error bar comes from that many independent
    trajectories (each of horizon T) instead of batch means on one trajectory.
    """
    system = _resolve(system)
    if replicas:
        if replicas < MIN_BATCHES:
            raise ValueError(f"need at least {MIN_BATCHES} replicas")
        runs = _replicated(system, eps, T, config, replicas, threads, 1, burn_in, w0)
        vals = np.array([r[0][:, 0].mean() for r in runs])
        return _estimate(vals, replicas, sum(r[2] for r in runs), config, eps, system)
    rates, _, span = _batched_run(system, eps, T, config, frame=1, batches=batches, burn_in=burn_in,
                                  traj=traj, w0=w0)
    return _estimate(rates[:, 0], batches, span, config, eps, system)


def sum_exponent(system, eps: float, T: float, config: IntegratorConfig, *, batches: int = 16,
                 burn_in: float = 0.1, traj: int = 0, w0: Optional[BundleState] = None) -> ExponentEstimate:
    """Growth rate of log det from the accumulated divergence integrand."""
    system = _resolve(system)
    _, drates, span = _batched_run(system, eps, T, config, frame=1, batches=batches, burn_in=burn_in,
                                   traj=traj, w0=w0)
    return _estimate(drates, batches, span, config, eps, system)


def spectrum_qr(system, eps: float, T: float, config: IntegratorConfig, *, batches: int = 16,
                burn_in: float = 0.1, traj: int = 0, w0: Optional[BundleState] = None) -> list[ExponentEstimate]:
    """All n exponents from a Gram-Schmidt-renormalized frame, sorted descending."""
    system = _resolve(system)
    rates, _, span = _batched_run(system, eps, T, config, frame=system.dim, batches=batches,
                                  burn_in=burn_in, traj=traj, w0=w0)
    ests = [_estimate(rates[:, j], batches, span, config, eps, system) for j in range(system.dim)]
    return sorted(ests, key=lambda e: -e.lam)


def combined(ests: Sequence[ExponentEstimate]) -> ExponentEstimate:
    """Sum of exponents from one run, with the error bar of the batch-wise sums."""
    vals = np.sum([e.batch_values for e in ests], axis=0)
    e0 = ests[0]
    m, se = batch_stats(vals)
    return ExponentEstimate(m, se, e0.batches, e0.T, e0.dt, e0.seed, e0.eps, e0.system, tuple(map(float, vals)))


def joint_stderr(*ests: ExponentEstimate) -> float:
    return math.sqrt(sum(e.stderr ** 2 for e in ests))


@dataclass(frozen=True)
class SweepRow:
    eps: float
    lambda1: float
    stderr: float
    ratio: float
    T: float
    dt: float
    seed: int

    @property
    def ratio_stderr(self) -> float:
        return self.stderr / self.eps


@dataclass(frozen=True)
class SweepResult:
    system: str
    rows: tuple[SweepRow, ...]

    def __post_init__(self):
        eps = [r.eps for r in self.rows]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("sweep rows must have strictly decreasing epsilon")

    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    def ratio_stderrs(self) -> np.ndarray:
        return np.array([r.ratio_stderr for r in self.rows])

    def write_csv(self, path, config: Optional[dict] = None) -> None:
        with open(path, "w", newline="") as fh:
            if config is not None:
                fh.write(config_line(config) + "\n")
            wr = csv.writer(fh)
            wr.writerow(["epsilon", "lambda1", "stderr", "ratio", "T", "dt", "seed"])
            for r in self.rows:
                wr.writerow([repr(r.eps), repr(r.lambda1), repr(r.stderr), repr(r.ratio), repr(r.T),
                             repr(r.dt), r.seed])


def epsilon_sweep(system, eps_list: Sequence[float], T0: float, config: IntegratorConfig, *,
                  batches: int = 16, burn_in: float = 0.1, threads: int = 1) -> SweepResult:
    """Top exponent per epsilon with horizon T0/eps; rows run concurrently when threads > 1."""
    system = _resolve(system)
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("epsilon list must be non-empty and positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly decreasing")

    def one(e):
        return top_exponent(system, e, T0 / e, config, batches=batches, burn_in=burn_in)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            ests = list(ex.map(one, eps_list))
    else:
        ests = [one(e) for e in eps_list]
    rows = tuple(SweepRow(e, est.lam, est.stderr, est.lam / e, T0 / e, config.dt, config.seed)
                 for e, est in zip(eps_list, ests))
    return SweepResult(system.id, rows)
