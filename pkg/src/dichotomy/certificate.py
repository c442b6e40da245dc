"""Exact consistency analysis of the linear system for grad g along a(x3).

Unknowns z = (x0, y0) in R^6: the x- and v-gradients of g at the curve
a(x3) = (0, 0, x3, 1/sqrt3, 1/sqrt3, 1/sqrt3).  Rows come from the
pointwise equation (with its cos x3 and sin x3 parts C and S), the
v-equation, and integrals of the pointwise equation over intervals whose
endpoints are multiples of pi/6.  Everything is exact in Q(sqrt 3).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .qext import ONE, SQRT3, ZERO, QuadExtScalar, q

Row = tuple[list[QuadExtScalar], QuadExtScalar]
PAPER_CLAIM = "inconsistent"


@dataclass
class ExactSystem:
    A: list[list[QuadExtScalar]]
    b: list[QuadExtScalar]
    labels: list[str]

    def __post_init__(self):
        if len(self.A) != len(self.b) or len(self.A) != len(self.labels):
            raise ValueError("row count mismatch")
        if any(len(r) != len(self.A[0]) for r in self.A):
            raise ValueError("ragged matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.A), len(self.A[0]) if self.A else 0

    def augmented(self) -> list[list[QuadExtScalar]]:
        return [list(r) + [bi] for r, bi in zip(self.A, self.b)]

    def with_row(self, row: Row, label: str) -> "ExactSystem":
        return ExactSystem(self.A + [list(row[0])], self.b + [row[1]], self.labels + [label])

    def permuted(self, order: Sequence[int]) -> "ExactSystem":
        return ExactSystem([self.A[i] for i in order], [self.b[i] for i in order],
                           [self.labels[i] for i in order])

    def scaled(self, factors: Sequence[QuadExtScalar]) -> "ExactSystem":
        return ExactSystem([[c * x for x in r] for c, r in zip(factors, self.A)],
                           [c * x for c, x in zip(factors, self.b)], list(self.labels))


def _inv_s3(k) -> QuadExtScalar:
    """k / sqrt(3) exactly."""
    return q(0, Fraction(k) / 3)


# -- rows --------------------------------------------------------------------

def pointwise_split() -> tuple[Row, Row]:
    """cos x3 and sin x3 coefficient rows of the pointwise equation.

    The pointwise equation is cos*x0_1 + sin*x0_2
    + (1/sqrt3)(-sin - b, cos - b, -b) . y0 = (5/3)(cos - sin)
    with b = (cos - sin)/3.  Collecting cos and sin gives C and S; the
    integral of the equation over any interval is (int cos) C + (int sin) S.
    """
    third = Fraction(1, 3)
    C = [ONE, ZERO, ZERO, _inv_s3(-third), _inv_s3(1 - third), _inv_s3(-third)]
    S = [ZERO, ONE, ZERO, _inv_s3(-1 + third), _inv_s3(third), _inv_s3(third)]
    return (C, q(Fraction(5, 3))), (S, q(Fraction(-5, 3)))


def v_row() -> Row:
    """(1/3)(-1, -1, 2) . y0 = 5/sqrt3."""
    return [ZERO, ZERO, ZERO, q(Fraction(-1, 3)), q(Fraction(-1, 3)), q(Fraction(2, 3))], _inv_s3(5)


def tangency_row() -> Row:
    """y0 . v = 0 at v = (1,1,1)/sqrt3, scaled by sqrt3."""
    return [ZERO, ZERO, ZERO, ONE, ONE, ONE], ZERO


_HALF = Fraction(1, 2)
# (sin, cos) at k*pi/6, k = 0..11
_TRIG = [
    (q(0), q(1)), (q(_HALF), q(0, _HALF)), (q(0, _HALF), q(_HALF)), (q(1), q(0)),
    (q(0, _HALF), q(-_HALF)), (q(_HALF), q(0, -_HALF)), (q(0), q(-1)), (q(-_HALF), q(0, -_HALF)),
    (q(0, -_HALF), q(-_HALF)), (q(-1), q(0)), (q(0, -_HALF), q(_HALF)), (q(-_HALF), q(0, _HALF)),
]


def pi_sixths(angle) -> int:
    """Integer k with angle = k*pi/6; accepts radians (float) or a Fraction in units of pi."""
    if isinstance(angle, Fraction):
        k = angle * 6
        if k.denominator != 1:
            raise ValueError(f"{angle}*pi is not a multiple of pi/6")
        return int(k)
    a = float(angle)
    if not math.isfinite(a):
        raise ValueError("endpoint must be finite")
    k = round(a / (math.pi / 6))
    if abs(k * math.pi / 6 - a) > 1e-9 * max(1.0, abs(a)):
        raise ValueError(f"endpoint {a} is not a multiple of pi/6 (values outside Q(sqrt 3))")
    return int(k)


def exact_sin_cos(angle) -> tuple[QuadExtScalar, QuadExtScalar]:
    return _TRIG[pi_sixths(angle) % 12]


def build_from_interval(lo, hi) -> Row:
    """Exact integral of the pointwise equation over [lo, hi]."""
    slo, clo = exact_sin_cos(lo)
    shi, chi = exact_sin_cos(hi)
    icos = shi - slo
    isin = clo - chi
    (C, rc), (S, rs) = pointwise_split()
    return [icos * c + isin * s for c, s in zip(C, S)], icos * rc + isin * rs


def build_paper_system() -> ExactSystem:
    """The four displayed rows, transcribed entry by entry."""
    r3 = [q(0), q(0), q(0), q(Fraction(-1, 3)), q(Fraction(-1, 3)), q(Fraction(2, 3))]
    r4 = [q(0), q(2), q(0), _inv_s3(Fraction(-4, 3)), _inv_s3(Fraction(2, 3)), _inv_s3(Fraction(2, 3))]
    r5 = [q(2), q(0), q(0), _inv_s3(Fraction(-2, 3)), _inv_s3(Fraction(4, 3)), _inv_s3(Fraction(-2, 3))]
    six_s3 = q(0, 6)
    r6 = [q(0, _HALF), q(_HALF), q(0),
          q(-2, -1) / six_s3, q(1, 2) / six_s3, q(1, -1) / six_s3]
    b = [_inv_s3(5), q(Fraction(-10, 3)), q(Fraction(10, 3)), q(Fraction(-5, 6), Fraction(5, 6))]
    return ExactSystem([r3, r4, r5, r6], b, ["cheq3", "cheq4", "cheq5", "cheq6"])


def build_pointwise_system() -> ExactSystem:
    (C, rc), (S, rs) = pointwise_split()
    r3, b3 = v_row()
    return ExactSystem([C, S, r3], [rc, rs, b3], ["C", "S", "cheq3"])


# -- elimination -----------------------------------------------------------

def bareiss_echelon(M: list[list[QuadExtScalar]]) -> tuple[list[list[QuadExtScalar]], list[int], list[str]]:
    """Fraction-free row echelon form; returns (matrix, pivot columns, trail of operations)."""
    M = [list(r) for r in M]
    rows = len(M)
    cols = len(M[0]) if rows else 0
    prev = ONE
    r = 0
    pivots: list[int] = []
    trail: list[str] = []
    for c in range(cols):
        if r >= rows:
            break
        p = next((i for i in range(r, rows) if M[i][c]), None)
        if p is None:
            continue
        if p != r:
            M[r], M[p] = M[p], M[r]
            trail.append(f"swap R{r + 1} <-> R{p + 1}")
        piv = M[r][c]
        trail.append(f"pivot R{r + 1}, col {c + 1}: {piv}")
        for i in range(r + 1, rows):
            for j in range(c + 1, cols):
                M[i][j] = (piv * M[i][j] - M[i][c] * M[r][j]) / prev
            M[i][c] = ZERO
        prev = piv
        pivots.append(c)
        r += 1
    return M, pivots, trail


def exact_rank(M) -> int:
    return len(bareiss_echelon(M)[1]) if M else 0


def left_nullspace(M: list[list[QuadExtScalar]]) -> list[list[QuadExtScalar]]:
    """Basis of {c : c^T M = 0} by Gauss-Jordan on M^T."""
    rows = len(M)
    cols = len(M[0]) if rows else 0
    T = [[M[i][j] for i in range(rows)] for j in range(cols)]   # cols x rows
    piv_cols = []
    r = 0
    for c in range(rows):
        p = next((i for i in range(r, cols) if T[i][c]), None)
        if p is None:
            continue
        T[r], T[p] = T[p], T[r]
        inv = T[r][c].inverse()
        T[r] = [x * inv for x in T[r]]
        for i in range(cols):
            if i != r and T[i][c]:
                f = T[i][c]
                T[i] = [x - f * y for x, y in zip(T[i], T[r])]
        piv_cols.append(c)
        r += 1
        if r == cols:
            break
    free = [c for c in range(rows) if c not in piv_cols]
    basis = []
    for fc in free:
        v = [ZERO] * rows
        v[fc] = ONE
        for k, pc in enumerate(piv_cols):
            v[pc] = -T[k][fc]
        basis.append(v)
    return basis


def combine(system: ExactSystem, coeffs: Sequence[QuadExtScalar]) -> Row:
    m, n = system.shape
    row = [sum((coeffs[i] * system.A[i][j] for i in range(m)), ZERO) for j in range(n)]
    rhs = sum((coeffs[i] * system.b[i] for i in range(m)), ZERO)
    return row, rhs


def float_rank(M: list[list[QuadExtScalar]], tol: float = 1e-10) -> int:
    F = np.array([[float(x) for x in r] for r in M], dtype=float)
    if F.size == 0:
        return 0
    sv = np.linalg.svd(F, compute_uv=False)
    return int(np.sum(sv > tol * max(sv[0], 1.0)))


@dataclass
class Witness:
    coefficients: list[QuadExtScalar]
    rhs_value: QuadExtScalar       # c . b; nonzero means the rows contradict each other


@dataclass
class ConsistencyReport:
    rank_A: int
    rank_augmented: int
    verdict: str
    dependency_witnesses: list[Witness]
    nullspace_dim: int
    float_rank_A: int
    float_rank_augmented: int
    pivot_trail: list[str] = field(default_factory=list)
    echelon: list[list[QuadExtScalar]] = field(default_factory=list)

    @property
    def float_agrees(self) -> bool:
        return self.float_rank_A == self.rank_A and self.float_rank_augmented == self.rank_augmented


def analyze(system: ExactSystem) -> ConsistencyReport:
    aug = system.augmented()
    ra = exact_rank(system.A)
    E, pivots, trail = bareiss_echelon(aug)
    rb = len(pivots)
    wit = []
    for c in left_nullspace(system.A):
        _, rhs = combine(system, c)
        wit.append(Witness(c, rhs))
    return ConsistencyReport(
        rank_A=ra, rank_augmented=rb,
        verdict="inconsistent" if rb > ra else "consistent",
        dependency_witnesses=wit, nullspace_dim=system.shape[1] - ra,
        float_rank_A=float_rank(system.A), float_rank_augmented=float_rank(aug),
        pivot_trail=trail, echelon=E,
    )


def candidate_dependency(system: Optional[ExactSystem] = None) -> Row:
    """cheq6 - (1/4) cheq4 - (sqrt3/4) cheq5, including the right side."""
    system = system or build_paper_system()
    idx = {lab: i for i, lab in enumerate(system.labels)}
    c = [ZERO] * len(system.labels)
    c[idx["cheq6"]] = ONE
    c[idx["cheq4"]] = q(Fraction(-1, 4))
    c[idx["cheq5"]] = q(0, Fraction(-1, 4))
    return combine(system, c)


def span_coefficients(row: Row) -> Optional[tuple[QuadExtScalar, QuadExtScalar]]:
    """(alpha, beta) with row = alpha C + beta S exactly (right side included), or None."""
    (C, rc), (S, rs) = pointwise_split()
    alpha, beta = row[0][0], row[0][1]      # C and S are unit vectors in the first two columns
    ok = all(alpha * c + beta * s == x for c, s, x in zip(C, S, row[0])) and alpha * rc + beta * rs == row[1]
    return (alpha, beta) if ok else None


# -- report ----------------------------------------------------------------

def _fmt_row(r: Sequence[QuadExtScalar]) -> str:
    return "  ".join(f"{str(x):>14}" for x in r)


def _report_block(title: str, system: ExactSystem) -> tuple[list[str], ConsistencyReport]:
    rep = analyze(system)
    out = [title, "-" * len(title)]
    for lab, r, bi in zip(system.labels, system.A, system.b):
        out.append(f"{lab:>8} | {_fmt_row(r)} | {bi}")
    out.append("pivot trail:")
    out += [f"  {t}" for t in rep.pivot_trail]
    out.append("echelon form of [A | b]:")
    out += [f"  {_fmt_row(r)}" for r in rep.echelon]
    out.append(f"rank A = {rep.rank_A}, rank [A|b] = {rep.rank_augmented}, nullspace dim = {rep.nullspace_dim}")
    out.append(f"float cross-check (SVD, tol 1e-10): rank A = {rep.float_rank_A}, "
               f"rank [A|b] = {rep.float_rank_augmented} -> {'agrees' if rep.float_agrees else 'DISAGREES'}")
    out.append(f"verdict: {rep.verdict}")
    for w in rep.dependency_witnesses:
        terms = " + ".join(f"({c})*{lab}" for c, lab in zip(w.coefficients, system.labels) if c)
        out.append(f"  row dependency: {terms} = 0 on A; on b: {w.rhs_value}"
                   + ("  <- contradiction" if w.rhs_value else ""))
    out.append("")
    return out, rep


def render_report(include_tangency: bool = True) -> tuple[str, dict]:
    """Full text report and a summary dict of verdicts."""
    lines = ["Exact consistency certificate over Q(sqrt 3)", "=" * 44, ""]
    shown = build_paper_system()
    blk, rep = _report_block("Displayed four-row system (cheq3..cheq6)", shown)
    lines += blk
    row, rhs = candidate_dependency(shown)
    zero = all(not x for x in row) and not rhs
    lines.append("candidate dependency cheq6 - 1/4 cheq4 - (sqrt3/4) cheq5:")
    lines.append(f"  A part: [{', '.join(map(str, row))}], b part: {rhs} -> "
                 + ("exactly zero, right side included" if zero else "NOT zero"))
    agree = rep.verdict == PAPER_CLAIM
    lines.append(f"claimed verdict: {PAPER_CLAIM}; exact oracle: {rep.verdict} -> "
                 + ("AGREES with the claimed verdict" if agree else "DISAGREES with the claimed inconsistency"))
    lines.append("")

    lines.append("Decomposition into cos/sin parts (C, S):")
    for lab, r in zip(shown.labels, shown.augmented()):
        if lab == "cheq3":
            continue
        co = span_coefficients((r[:-1], r[-1]))
        lines.append(f"  {lab} = " + (f"({co[0]}) C + ({co[1]}) S" if co else "not in span{C, S}"))
    lines.append("")
    summary = {"displayed_4row": rep.verdict, "candidate_zero": zero, "agrees_with_claim": agree,
               "float_agrees": rep.float_agrees}

    blk, rep_pw = _report_block("Pointwise system {C, S, cheq3}", build_pointwise_system())
    lines += blk
    summary["pointwise"] = rep_pw.verdict
    summary["float_agrees"] = summary["float_agrees"] and rep_pw.float_agrees
    if include_tangency:
        tr = tangency_row()
        blk, rep_t = _report_block("Four-row system plus tangency row y0 . v = 0",
                                   shown.with_row(tr, "tangent"))
        lines += blk
        blk, rep_pt = _report_block("Pointwise system plus tangency row",
                                    build_pointwise_system().with_row(tr, "tangent"))
        lines += blk
        summary["displayed_4row+tangency"] = rep_t.verdict
        summary["pointwise+tangency"] = rep_pt.verdict
        summary["float_agrees"] = summary["float_agrees"] and rep_t.float_agrees and rep_pt.float_agrees
    return "\n".join(lines), summary
