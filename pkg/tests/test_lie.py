import math

import numpy as np
import pytest

from dichotomy.lie import (BracketWord, FrameSingularity, boundary_check, bracket, evaluate, frame_basis,
                           frame_bracket_check, frame_fields, frame_representation_check, sample_states,
                           span_report, spanning_frame_check, spanning_scan, theorem_words, to_frame,
                           word_field, write_scan_csv)
from dichotomy.state_space import BundleState, TorusPoint, random_bundle_state
from dichotomy.vector_fields import get_system

ED = get_system("electrodynamics")
S2 = math.sqrt(2) / 2
LIFTS = [ED.bundle_field(k) for k in range(6)]


def _states(rng, n, exclusion=1e-3):
    return [random_bundle_state(rng, 3, exclusion) for _ in range(n)]


def test_word_structure():
    w = BracketWord.of(1, 1, 0)
    assert str(w) == "[X1,[X1,X0]]" and w.depth == 2 and w.leaves() == [1, 1, 0]
    words = theorem_words()
    assert len(words) == 15 and max(x.depth for x in words) <= 3
    with pytest.raises(ValueError):
        BracketWord()
    with pytest.raises(IndexError):
        word_field(ED, BracketWord.of(9))


def test_bracket_examples(rng):
    w = random_bundle_state(rng, 3)
    assert np.allclose(bracket(LIFTS[0], LIFTS[0], w), 0)
    got = bracket(LIFTS[1], LIFTS[0], BundleState.from_arrays((0.3, 0.2, 0.0), (1.0, 0.0, 0.0)))
    assert np.allclose(got[:3], (0, 1, 0))
    E = frame_fields()
    assert np.allclose(bracket(E[0], E[1], w), 0)


def test_antisymmetry_jacobi_tangency(rng):
    for w in _states(rng, 100):
        v = w.v.array()
        i, j, k = rng.choice(6, 3, replace=False)
        X, Y, Z = LIFTS[i], LIFTS[j], LIFTS[k]
        assert np.allclose(bracket(X, Y, w), -bracket(Y, X, w), atol=1e-12)
        from dichotomy.lie import bracket_field as bf
        jac = evaluate(bf(X, bf(Y, Z)), w) + evaluate(bf(Y, bf(Z, X)), w) + evaluate(bf(Z, bf(X, Y)), w)
        assert np.max(np.abs(jac)) < 1e-8
        assert abs(np.dot(bracket(X, Y, w)[3:], v)) < 1e-8


def test_frame_examples():
    E = frame_basis(BundleState.from_arrays((0, 0, 0), (1, 0, 0)))
    assert np.allclose(E[3][3:], (0, 0, 1)) and np.allclose(E[4][3:], (0, 1, 0))
    E = frame_basis(BundleState.from_arrays((0, 0, 0), (0, 1, 0)))
    assert np.allclose(E[3][3:], (0, 0, 1)) and np.allclose(E[4][3:], (-1, 0, 0))
    for s in (1, -1):
        with pytest.raises(FrameSingularity):
            frame_basis(BundleState.from_arrays((0, 0, 0), (0, 0, s)))


def test_frame_orthonormal(rng):
    for w in _states(rng, 50, 1e-3):
        E = frame_basis(w)
        assert np.allclose(E @ E.T, np.eye(5), atol=1e-10)
        assert np.allclose(E[:, 3:] @ w.v.array(), 0, atol=1e-10)


@pytest.mark.parametrize("v3,coef", [(0.0, 0.0), (S2, 1.0), (0.5, 1 / math.sqrt(3))])
def test_frame_bracket_examples(v3, coef):
    s = math.sqrt(1 - v3 * v3)
    w = BundleState.from_arrays((0.1, 0.2, 0.3), (s * 0.6, s * 0.8, v3))
    assert frame_bracket_check(w) < 1e-8
    assert v3 / math.sqrt(1 - v3 * v3) == pytest.approx(coef)


def test_frame_representation_examples():
    w = BundleState.from_arrays((0.0, 0.4, 1.0), (S2, 0.0, S2))
    X1 = to_frame(evaluate(LIFTS[1], w), w)
    assert np.allclose(X1, (0, 0, 1, 0, 0))
    X2 = to_frame(evaluate(LIFTS[2], w), w)
    assert np.allclose(X2, (0, 0, 0, 0.5, 0), atol=1e-15)
    w = BundleState.from_arrays((0.5, 0.4, 1.0), (0.6, 0.8, 0.0))
    assert abs(to_frame(evaluate(LIFTS[0], w), w)[3]) < 1e-15
    assert frame_representation_check(w) < 1e-8


def test_frame_checks_many_states(rng):
    for w in _states(rng, 300, 1e-3):
        assert frame_bracket_check(w) < 1e-8
        assert frame_representation_check(w) < 1e-8
        assert spanning_frame_check(w) < 1e-8


def test_span_examples():
    w = BundleState.from_arrays((0, 0, 0), (S2, S2, 0))
    assert span_report(ED, theorem_words(), w).rank == 5
    reps = spanning_scan(ED, 10, 1e-3, words=[BracketWord.of(1)])
    assert all(r.rank == 1 for r in reps)
    with pytest.raises(ValueError):
        spanning_scan(ED, 1, exclusion=0.0)


def test_spanning_scan_small_sample_and_csv(tmp_path):
    reps = spanning_scan("electrodynamics", 40, 1e-3, seed=3)
    assert all(r.rank == 5 and r.smallest_singular_value > 1e-8 * r.largest_singular_value for r in reps)
    again = spanning_scan("electrodynamics", 40, 1e-3, seed=3, threads=2)
    assert [r.smallest_singular_value for r in reps] == [r.smallest_singular_value for r in again]
    p = tmp_path / "scan.csv"
    write_scan_csv(p, reps, "# config: {}")
    lines = p.read_text().splitlines()
    assert lines[0] == "# config: {}" and len(lines) == 42


def test_sample_states_respect_exclusion():
    for w in sample_states(ED, 200, 0.2):
        assert abs(w.v.comps[2]) <= 0.8


def test_boundary_check(rng):
    assert boundary_check(TorusPoint((0.0, 0.0, 0.0)), 1) == pytest.approx(1.0, abs=1e-10)
    assert boundary_check(TorusPoint((1.0, 2.0, math.pi / 2)), -1) == pytest.approx(1.0, abs=1e-10)
    for _ in range(100):
        x = TorusPoint(tuple(rng.uniform(0, 2 * math.pi, 3)))
        assert abs(boundary_check(x, int(rng.choice([-1, 1]))) - 1) < 1e-10
    with pytest.raises(ValueError):
        boundary_check(TorusPoint((0.0, 0.0, 0.0)), 0)
