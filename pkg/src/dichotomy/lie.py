"""Lie brackets of lifted fields, the moving frame on ST^3, and rank scans.

Brackets are taken in ambient coordinates w = (x, v) of T^n x R^n with
nested tagged duals, so words of any depth are exact to rounding.  The
moving frame e_1..e_5 is used only to compare against closed forms.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import dual
from .dual import sqrt
from .sde import complete_frame
from .state_space import BundleState, TorusPoint, random_bundle_state
from .vector_fields import SystemSpec, bundle_field, get_system

Field = Callable[[list], list]
FRAME_TOL = 1e-6


class FrameSingularity(ValueError):
    """The moving frame is undefined at v_3 = +-1."""


@dataclass(frozen=True)
class BracketWord:
    """A leaf (field index) or the bracket [left, right] of two words."""
    leaf: Optional[int] = None
    left: Optional["BracketWord"] = None
    right: Optional["BracketWord"] = None

    def __post_init__(self):
        if (self.leaf is None) == (self.left is None or self.right is None):
            raise ValueError("a word is either a leaf or a bracket of two words")
        if self.leaf is None and (self.left is None) != (self.right is None):
            raise ValueError("a bracket needs two operands")

    @classmethod
    def of(cls, *items: Union[int, "BracketWord"]) -> "BracketWord":
        """Right-nested word: of(1, 1, 0) is [X1, [X1, X0]]."""
        words = [w if isinstance(w, BracketWord) else cls(leaf=int(w)) for w in items]
        out = words[-1]
        for w in reversed(words[:-1]):
            out = cls(left=w, right=out)
        return out

    @property
    def depth(self) -> int:
        if self.leaf is not None:
            return 0
        return 1 + max(self.left.depth, self.right.depth)

    def leaves(self) -> list[int]:
        if self.leaf is not None:
            return [self.leaf]
        return self.left.leaves() + self.right.leaves()

    def __str__(self):
        if self.leaf is not None:
            return f"X{self.leaf}"
        return f"[{self.left},{self.right}]"


def theorem_words(ks: Sequence[int] = (2, 3, 4, 5)) -> list[BracketWord]:
    """The spanning collection for the electrodynamics bundle (15 vectors for k = 2..5)."""
    W = BracketWord.of
    words = [W(1)] + [W(k) for k in ks] + [W(1, 0), W(1, 1, 0)]
    words += [W(k, W(1, 0)) for k in ks]
    words += [W(k, W(1, 1, 0)) for k in ks]
    return words


def bracket_field(A: Field, B: Field) -> Field:
    """[A, B](w) = DB(w)[A(w)] - DA(w)[B(w)] as a generic field."""
    def F(w):
        a = A(w)
        b = B(w)
        dB = dual.directional(B, w, a)
        dA = dual.directional(A, w, b)
        return [p - q for p, q in zip(dB, dA)]
    return F


def word_field(system: SystemSpec, word: BracketWord) -> Field:
    if word.leaf is not None:
        if not 0 <= word.leaf <= system.r:
            raise IndexError(f"field index {word.leaf} out of range for {system.id}")
        return bundle_field(system.fields[word.leaf])
    return bracket_field(word_field(system, word.left), word_field(system, word.right))


def _point(w) -> list:
    if isinstance(w, BundleState):
        return [float(c) for c in w.array()]
    return [float(c) for c in w]


def evaluate(F: Field, w) -> np.ndarray:
    return np.array([dual.real(c) for c in F(_point(w))])


def bracket(Xa: Field, Xb: Field, w) -> np.ndarray:
    """Ambient bracket of two generic fields at w."""
    return evaluate(bracket_field(Xa, Xb), w)


# -- moving frame ----------------------------------------------------------

def _check_frame(v3):
    v3 = dual.real(v3)
    if not abs(v3) < 1.0 - FRAME_TOL:
        raise FrameSingularity(f"moving frame undefined at v3 = {v3}")


def frame_fields() -> list[Field]:
    """e_1..e_5 as generic ambient fields on T^3 x R^3."""
    def unit(i):
        def f(w):
            out = [0.0] * 6
            out[i] = 1.0
            return out
        return f

    def e4(w):
        v1, v2, v3 = w[3], w[4], w[5]
        s = sqrt(1.0 - v3 * v3)
        return [0.0, 0.0, 0.0, -v3 * v1 / s, -v3 * v2 / s, s]

    def e5(w):
        v1, v2, v3 = w[3], w[4], w[5]
        s = sqrt(1.0 - v3 * v3)
        return [0.0, 0.0, 0.0, -v2 / s, v1 / s, 0.0]

    return [unit(0), unit(1), unit(2), e4, e5]


_FRAME = frame_fields()


def frame_basis(w: BundleState) -> np.ndarray:
    """Rows e_1..e_5 at w (shape 5 x 6)."""
    if w.dim != 3:
        raise ValueError("the moving frame is defined on ST^3")
    _check_frame(w.v.comps[2])
    p = _point(w)
    return np.array([[float(c) for c in e(p)] for e in _FRAME])


def to_frame(vec: np.ndarray, w: BundleState) -> np.ndarray:
    """Frame coordinates c_1..c_5 of an ambient tangent vector (orthonormal frame)."""
    return frame_basis(w) @ np.asarray(vec, dtype=float)


def frame_bracket_check(w: BundleState) -> float:
    E = frame_basis(w)
    v3 = w.v.comps[2]
    got = bracket(_FRAME[3], _FRAME[4], w)
    want = v3 / math.sqrt(1.0 - v3 * v3) * E[4]
    return float(np.max(np.abs(got - want)))


def _B(k, x):
    """Theta-coefficient of X_k and its two partials, k = 1..5."""
    s1, c1, s2, c2 = math.sin(x[0]), math.cos(x[0]), math.sin(x[1]), math.cos(x[1])
    return {
        1: (1.0, 0.0, 0.0),
        2: (s1, c1, 0.0),
        3: (c1, -s1, 0.0),
        4: (s2, 0.0, c2),
        5: (c2, 0.0, -s2),
    }[k]


def represented_fields(w: BundleState) -> np.ndarray:
    """Closed-form frame coordinates of X~_0..X~_5 (rows)."""
    x1, x2, x3 = w.x.coords
    v1, v2, v3 = w.v.comps
    s = math.sqrt(1.0 - v3 * v3)
    sx, cx = math.sin(x3), math.cos(x3)
    rows = [[cx, sx, 1.0, v3 * v3 / s * (v1 * sx - v2 * cx), v3 / s * (v2 * sx + v1 * cx)]]
    for k in range(1, 6):
        B, d1, d2 = _B(k, (x1, x2))
        rows.append([0.0, 0.0, B, (v1 * d1 + v2 * d2) * s, 0.0])
    return np.array(rows)


def frame_representation_check(w: BundleState, system: SystemSpec | str = "electrodynamics") -> float:
    system = get_system(system) if isinstance(system, str) else system
    want = represented_fields(w)
    p = _point(w)
    dev = 0.0
    for k in range(6):
        got = to_frame(evaluate(bundle_field(system.fields[k]), p), w)
        dev = max(dev, float(np.max(np.abs(got - want[k]))))
    return dev


def spanning_frame_terms(w: BundleState) -> dict:
    """Closed forms of the bracket vectors that the frame fixes completely.

    a6 and a7 are fully determined; for a_{6+k} and a_{10+k} the e_1, e_2
    and e_5 entries are (base part B_k a7 and -B_k a6; e_5 part carries the
    factor 1/sqrt(1 - v3^2)).
    """
    x1, x2, x3 = w.x.coords
    v1, v2, v3 = w.v.comps
    s = math.sqrt(1.0 - v3 * v3)
    sx, cx = math.sin(x3), math.cos(x3)
    a6 = np.array([-sx, cx, 0.0, v3 * v3 / s * (v1 * cx + v2 * sx), -v3 / s * (-v2 * cx + v1 * sx)])
    a7 = np.array([-cx, -sx, 0.0, -v3 * v3 / s * (v1 * sx - v2 * cx), -v3 / s * (v2 * sx + v1 * cx)])
    out = {"a6": a6, "a7": a7}
    for k in range(2, 6):
        B, d1, d2 = _B(k, (x1, x2))
        D = v1 * d1 + v2 * d2
        out[f"a{6 + k}"] = (B * a7, D * (v2 * cx - v1 * sx) / s)
        out[f"a{10 + k}"] = (-B * a6, -D * (v1 * cx + v2 * sx) / s)
    return out


def spanning_frame_check(w: BundleState) -> float:
    """Max deviation of the ambient brackets from the pinned frame components."""
    system = get_system("electrodynamics")
    terms = spanning_frame_terms(w)
    W = BracketWord.of
    dev = 0.0
    for name, word in (("a6", W(1, 0)), ("a7", W(1, 1, 0))):
        got = to_frame(evaluate(word_field(system, word), w), w)
        dev = max(dev, float(np.max(np.abs(got - terms[name]))))
    for k in range(2, 6):
        for name, inner in ((f"a{6 + k}", W(1, 0)), (f"a{10 + k}", W(1, 1, 0))):
            got = to_frame(evaluate(word_field(system, W(k, inner)), w), w)
            base, e5 = terms[name]
            dev = max(dev, abs(got[0] - base[0]), abs(got[1] - base[1]), abs(got[4] - (base[4] + e5)))
    return dev


# -- rank scan -------------------------------------------------------------

@dataclass(frozen=True)
class SpanReport:
    point: BundleState
    rank: int
    smallest_singular_value: float
    largest_singular_value: float
    vector_list: tuple[str, ...]


def tangent_basis(w: BundleState) -> np.ndarray:
    """Orthonormal basis of T_w(T^n x S^{n-1}) in ambient coordinates, frame-free."""
    n = w.dim
    v = w.v.array()
    F = complete_frame(v, n)[1:]
    basis = np.zeros((2 * n - 1, 2 * n))
    basis[:n, :n] = np.eye(n)
    basis[n:, n:] = F
    return basis


def span_report(system: SystemSpec, words: Sequence[BracketWord], w: BundleState,
                tolerance: float = 1e-8, fields: Optional[list[Field]] = None) -> SpanReport:
    fields = fields if fields is not None else [word_field(system, wd) for wd in words]
    p = _point(w)
    M = np.array([evaluate(F, p) for F in fields]) @ tangent_basis(w).T
    sv = np.linalg.svd(M, compute_uv=False)
    full = 2 * system.dim - 1
    smax = float(sv[0]) if sv.size else 0.0
    rank = int(np.sum(sv > tolerance * smax)) if smax > 0 else 0
    smin = float(sv[full - 1]) if sv.size >= full else 0.0
    return SpanReport(w, min(rank, full), smin, smax, tuple(str(wd) for wd in words))


def sample_states(system: SystemSpec, count: int, exclusion: float, seed: int = 0) -> list[BundleState]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0, 2000))))
    return [random_bundle_state(rng, system.dim, exclusion) for _ in range(count)]


def spanning_scan(system: SystemSpec | str = "electrodynamics", sample_count: int = 1000,
                  exclusion: float = 1e-3, tolerance: float = 1e-8,
                  words: Optional[Sequence[BracketWord]] = None, seed: int = 0,
                  points: Optional[Iterable[BundleState]] = None, threads: int = 1) -> list[SpanReport]:
    """Rank of the bracket collection at sampled bundle states.

    Low-rank points come back as reports; nothing is raised.
    """
    system = get_system(system) if isinstance(system, str) else system
    if exclusion <= 0:
        raise ValueError("exclusion must be positive")
    words = list(words) if words is not None else theorem_words()
    fields = [word_field(system, wd) for wd in words]
    pts = list(points) if points is not None else sample_states(system, sample_count, exclusion, seed)

    def one(w):
        return span_report(system, words, w, tolerance, fields)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, pts))
    return [one(w) for w in pts]


def boundary_check(x: TorusPoint, sign: int) -> float:
    """(X~0 Phi_1)^2 + (X~0 Phi_2)^2 at v = (0, 0, sign): sphere part of the lifted drift."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if x.dim != 3:
        raise ValueError("boundary check is defined on T^3")
    system = get_system("electrodynamics")
    F = bundle_field(system.fields[0])
    out = evaluate(F, list(x.coords) + [0.0, 0.0, float(sign)])
    return float(out[3] ** 2 + out[4] ** 2)


def write_scan_csv(path, reports: Sequence[SpanReport], header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        wr = csv.writer(fh)
        n = reports[0].point.dim if reports else 3
        wr.writerow([f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
                    + ["rank", "smallest_sv", "largest_sv"])
        for r in reports:
            wr.writerow([repr(c) for c in r.point.array()] + [r.rank, repr(r.smallest_singular_value),
                                                            repr(r.largest_singular_value)])
