"""Occupation histograms of the projective process on T^2 x S^1 and the Fisher identity.

Coordinates are (x1, x2, psi) with v = (cos psi, sin psi); densities are
normalized to unit mass on the chart volume dx1 dx2 dpsi.  The adjoint of
a lifted field is applied in divergence form, X* f = -div(f X), with the
chart divergence, which matches that volume.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dual
from .sde import IntegratorConfig, Trajectory, _resolve, config_line
from .vector_fields import SystemSpec, chart_field

TWO_PI = 2.0 * math.pi
MIN_HITS = 50


class CoverageWarning(UserWarning):
    pass


@dataclass
class HistogramDensity:
    """Occupation counts on a B^3 grid; ``shards`` keeps per-trajectory counts when available."""
    bins: int
    counts: np.ndarray                     # (B, B, B) int64
    shards: Optional[np.ndarray] = None    # (S, B, B, B) int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def h(self) -> float:
        return TWO_PI / self.bins

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def density(self, counts: Optional[np.ndarray] = None) -> np.ndarray:
        c = self.counts if counts is None else counts
        tot = c.sum()
        if tot <= 0:
            raise ValueError("empty histogram")
        return c / (tot * self.cell_volume)

    def centers(self) -> np.ndarray:
        return (np.arange(self.bins) + 0.5) * self.h

    def base_marginal(self) -> np.ndarray:
        """Density of (x1, x2) alone, unit mass on dx1 dx2."""
        return self.density().sum(axis=2) * self.h

    def min_hits(self) -> int:
        return int(self.counts.min())

    def merge(self, other: "HistogramDensity") -> "HistogramDensity":
        if other.bins != self.bins:
            raise ValueError("cannot merge histograms with different bins")
        shards = None
        if self.shards is not None and other.shards is not None:
            shards = np.concatenate([self.shards, other.shards])
        return HistogramDensity(self.bins, self.counts + other.counts, shards)

    def write_csv(self, path, config: Optional[dict] = None) -> None:
        f = self.density()
        c = self.centers()
        with open(path, "w", newline="") as fh:
            if config is not None:
                fh.write(config_line(config) + "\n")
            wr = csv.writer(fh)
            wr.writerow(["x1", "x2", "psi", "density"])
            for i in range(self.bins):
                for j in range(self.bins):
                    for k in range(self.bins):
                        wr.writerow([repr(c[i]), repr(c[j]), repr(c[k]), repr(float(f[i, j, k]))])


def accumulate(system, eps: float, T: float, config: IntegratorConfig, bins: int = 32, *,
               shards: int = 1, burn_in: float = 0.1, threads: int = 1) -> HistogramDensity:
    """Occupation-time histogram of (x1, x2, psi) over ``shards`` independent trajectories.

    The total horizon T is split evenly across shards; each shard discards
    its own burn-in.  Bins with fewer than 50 hits raise a CoverageWarning.
    """
    system = _resolve(system)
    if system.dim != 2:
        raise ValueError("density accumulation is implemented for two-dimensional systems")
    if not eps > 0:
        raise ValueError("epsilon must be positive: at epsilon = 0 the process is frozen")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if shards < 1:
        raise ValueError("shards must be >= 1")
    steps = int(round(T / config.dt / shards))
    burn = int(round(burn_in * steps))

    def one(s):
        tr = Trajectory(system, eps, config, traj=s)
        tr.run(burn)
        tr.hist = np.zeros((bins,) * 3, dtype=np.int64)
        tr.bins = bins
        tr.run(steps - burn)
        return tr.hist

    if threads > 1 and shards > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, range(shards)))
    else:
        parts = [one(s) for s in range(shards)]
    stack = np.stack(parts)
    hd = HistogramDensity(bins, stack.sum(axis=0), stack)
    low = hd.min_hits()
    if low < MIN_HITS:
        empty = int(np.sum(hd.counts == 0))
        warnings.warn(f"coverage: least-visited bin has {low} hits (< {MIN_HITS}); {empty} empty bins",
                      CoverageWarning, stacklevel=2)
    return hd


# -- smoothing and derivatives on the periodic grid ------------------------

def gaussian_smooth(f: np.ndarray, sigma_cells: float) -> np.ndarray:
    """Periodic Gaussian filter, applied exactly in Fourier space."""
    if sigma_cells <= 0:
        return f.copy()
    out = np.fft.fftn(f)
    for ax, n in enumerate(f.shape):
        k = np.fft.fftfreq(n) * TWO_PI        # radians per cell
        shape = [1] * f.ndim
        shape[ax] = n
        out *= np.exp(-0.5 * (sigma_cells * k) ** 2).reshape(shape)
    return np.real(np.fft.ifftn(out))


def symmetrize(f: np.ndarray) -> np.ndarray:
    """Average f(psi) with f(psi + pi); the tangent dynamics is linear, so v and -v are equivalent."""
    B = f.shape[2]
    if B % 2:
        return f.copy()
    return 0.5 * (f + np.roll(f, B // 2, axis=2))


def _ddx(F: np.ndarray, ax: int, h: float) -> np.ndarray:
    return (np.roll(F, -1, axis=ax) - np.roll(F, 1, axis=ax)) / (2.0 * h)


def chart_field_grid(system: SystemSpec, k: int, bins: int) -> np.ndarray:
    """Components of the lifted field k in (x1, x2, psi) at cell centers, shape (3, B, B, B)."""
    c = (np.arange(bins) + 0.5) * (TWO_PI / bins)
    X1, X2, PSI = np.meshgrid(c, c, c, indexing="ij")
    G = chart_field(system, k)
    comps = G([X1, X2, PSI])
    out = np.empty((3, bins, bins, bins))
    for i, comp in enumerate(comps):
        out[i] = np.broadcast_to(np.asarray(dual.real(comp) if isinstance(comp, dual.Dual) else comp,
                                            dtype=float), X1.shape)
    return out


def adjoint(f: np.ndarray, Xg: np.ndarray, h: float) -> np.ndarray:
    """X* f = -div(f X) by central differences."""
    return -sum(_ddx(Xg[i] * f, i, h) for i in range(3))


@dataclass(frozen=True)
class FisherEstimate:
    value: float
    contributions: tuple[float, ...]   # channel k = 1..r
    bins: int
    method: str

    def table(self) -> str:
        lines = ["channel,contribution"]
        lines += [f"X{k + 1},{c!r}" for k, c in enumerate(self.contributions)]
        lines.append(f"total(1/2 sum),{self.value!r}")
        return "\n".join(lines)


def prepare(f: np.ndarray, smooth: float = 1.0, floor: float = 1e-12, sym: bool = True) -> np.ndarray:
    g = symmetrize(f) if sym else f
    g = gaussian_smooth(g, smooth)
    g = np.maximum(g, floor * float(g.max()))
    if not np.all(g > 0):
        raise ValueError("density is not strictly positive after flooring")
    return g


def fisher_information(f: HistogramDensity | np.ndarray, system, eps: float = 1.0, *,
                       smooth: float = 1.0, floor: float = 1e-12, sym: bool = True,
                       cross: bool = False) -> FisherEstimate:
    """Fisher information 1/2 sum_k int |X~k* f|^2 / f over the grid.

    ``eps`` only labels the estimate: the information of the stationary
    density itself carries no epsilon factor.  With ``cross=True`` and a
    sharded histogram, the square is replaced by the product of the
    adjoints from two disjoint halves of the shards, which removes the
    positive bias that sampling noise adds to the square.
    """
    system = _resolve(system)
    if system.dim != 2:
        raise ValueError("the Fisher check is implemented for two-dimensional systems")
    if isinstance(f, HistogramDensity):
        bins = f.bins
        h = f.h
        dens = f.density()
    else:
        dens = np.asarray(f, dtype=float)
        bins = dens.shape[0]
        h = TWO_PI / bins
        if dens.shape != (bins,) * 3:
            raise ValueError("density must be a cube of shape (B, B, B)")
        if np.any(dens < 0):
            raise ValueError("density must be nonnegative")
        dens = dens / (dens.sum() * h ** 3)
    g = prepare(dens, smooth, floor, sym)
    vol = h ** 3
    pair = None
    method = "plug-in"
    if cross:
        if not isinstance(f, HistogramDensity) or f.shards is None or f.shards.shape[0] < 2:
            raise ValueError("cross estimate needs a histogram with at least two shards")
        S = f.shards.shape[0]
        a = f.density(f.shards[: S // 2].sum(axis=0))
        b = f.density(f.shards[S // 2:].sum(axis=0))
        pair = (prepare(a, smooth, floor, sym), prepare(b, smooth, floor, sym))
        method = "cross"
    contrib = []
    for k in range(1, system.r + 1):
        Xg = chart_field_grid(system, k, bins)
        if pair is None:
            A = adjoint(g, Xg, h)
            c = float(np.sum(A * A / g) * vol)
        else:
            c = float(np.sum(adjoint(pair[0], Xg, h) * adjoint(pair[1], Xg, h) / g) * vol)
        contrib.append(c)
    if pair is None and any(c < 0 for c in contrib):
        raise AssertionError("negative Fisher contribution")
    return FisherEstimate(0.5 * sum(contrib), tuple(contrib), bins, method)
