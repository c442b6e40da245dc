import math
from fractions import Fraction
from itertools import permutations

import pytest

from dichotomy.certificate import (ExactSystem, analyze, build_from_interval, build_paper_system,
                                   build_pointwise_system, candidate_dependency, exact_rank, exact_sin_cos,
                                   pointwise_split, render_report, span_coefficients, tangency_row)
from dichotomy.qext import ONE, SQRT3, ZERO, q

PI = math.pi


def _row(system, label):
    i = system.labels.index(label)
    return system.A[i], system.b[i]


def test_displayed_entries():
    P = build_paper_system()
    assert P.shape == (4, 6)
    assert P.A[2][0] == 2                      # row cheq5, column x1
    assert P.b[0] == q(0, Fraction(5, 3))      # 5/sqrt3
    assert P.A[3][5] == q(Fraction(-1, 6), Fraction(1, 18))
    s3 = math.sqrt(3)
    want = [
        [0, 0, 0, -1 / 3, -1 / 3, 2 / 3, 5 / s3],
        [0, 2, 0, -4 / (3 * s3), 2 / (3 * s3), 2 / (3 * s3), -10 / 3],
        [2, 0, 0, -2 / (3 * s3), 4 / (3 * s3), -2 / (3 * s3), 10 / 3],
        [s3 / 2, 0.5, 0, -(2 + s3) / (6 * s3), (1 + 2 * s3) / (6 * s3), (1 - s3) / (6 * s3), 5 * (s3 - 1) / 6],
    ]
    got = P.augmented()
    assert sum(len(r) for r in got) == 28
    for gr, wr in zip(got, want):
        for g, w in zip(gr, wr):
            assert float(g) == pytest.approx(w, abs=1e-15)


def test_interval_rows_reproduce_displayed_rows():
    P = build_paper_system()
    for (lo, hi), lab in (((0.0, PI), "cheq4"), ((-PI / 2, PI / 2), "cheq5"), ((0.0, PI / 3), "cheq6")):
        A, b = build_from_interval(lo, hi)
        pa, pb = _row(P, lab)
        assert A == pa and b == pb
    A, b = build_from_interval(Fraction(0), Fraction(0))
    assert all(not x for x in A) and not b


def test_interval_endpoint_rejected():
    with pytest.raises(ValueError):
        build_from_interval(0.0, PI / 4)
    with pytest.raises(ValueError):
        exact_sin_cos(Fraction(1, 4))


def test_pointwise_split_examples():
    (C, rc), (S, rs) = pointwise_split()
    s3 = SQRT3
    assert C == [ONE, ZERO, ZERO, -ONE / (3 * s3), q(2) / (3 * s3), -ONE / (3 * s3)] and rc == q(Fraction(5, 3))
    assert rs == q(Fraction(-5, 3))
    P = build_paper_system()
    A5, b5 = _row(P, "cheq5")
    A4, b4 = _row(P, "cheq4")
    assert A5 == [2 * c for c in C] and b5 == 2 * rc
    assert A4 == [2 * s for s in S] and b4 == 2 * rs


def test_interval_rows_in_span():
    for lo in range(-6, 6):
        for hi in range(lo, 7):
            row = build_from_interval(Fraction(lo, 6), Fraction(hi, 6))
            co = span_coefficients(row)
            assert co is not None
            (C, rc), (S, rs) = pointwise_split()
            a, b = co
            assert [a * c + b * s for c, s in zip(C, S)] == row[0] and a * rc + b * rs == row[1]


def test_analyze_trivial_cases():
    I = [[ONE if i == j else ZERO for j in range(6)] for i in range(4)]
    rep = analyze(ExactSystem(I, [q(3), q(1, 1), ZERO, q(-2)], list("abcd")))
    assert rep.verdict == "consistent" and rep.rank_A == 4 and rep.nullspace_dim == 2
    row = [ONE, q(2), ZERO, ZERO, ZERO, ZERO]
    rep = analyze(ExactSystem([row, list(row)], [ONE, q(2)], ["r", "r'"]))
    assert rep.verdict == "inconsistent" and rep.rank_A == 1 and rep.rank_augmented == 2
    assert rep.dependency_witnesses and rep.dependency_witnesses[0].rhs_value


def test_displayed_system_verdicts():
    P = build_paper_system()
    rep = analyze(P)
    assert rep.verdict == ("inconsistent" if rep.rank_augmented > rep.rank_A else "consistent")
    assert rep.float_agrees
    row, rhs = candidate_dependency(P)
    assert all(not x for x in row) and not rhs
    assert (rep.rank_A, rep.rank_augmented) == (3, 3)
    pw = analyze(build_pointwise_system())
    assert pw.verdict == "consistent" and pw.float_agrees
    t = analyze(P.with_row(tangency_row(), "tangent"))
    assert (t.rank_A, t.rank_augmented) == (4, 4)


def test_verdict_invariant_under_permutation_and_scaling():
    P = build_paper_system()
    base = analyze(P)
    for order in permutations(range(4)):
        r = analyze(P.permuted(order))
        assert (r.rank_A, r.rank_augmented, r.verdict) == (base.rank_A, base.rank_augmented, base.verdict)
    r = analyze(P.scaled([q(2), q(1, 1), q(Fraction(-1, 7)), SQRT3]))
    assert (r.rank_A, r.rank_augmented) == (base.rank_A, base.rank_augmented)


def test_report_text():
    text, summary = render_report()
    assert "DISAGREES with the claimed inconsistency" in text
    assert "exactly zero, right side included" in text
    assert summary["candidate_zero"] and not summary["agrees_with_claim"] and summary["float_agrees"]
    assert summary["pointwise"] == "consistent"
    assert exact_rank([[ONE, SQRT3], [SQRT3, q(3)]]) == 1
