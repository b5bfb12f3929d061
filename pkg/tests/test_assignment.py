import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import enumerate_min_cost
from polarflow._validation import DomainError, SizeError, check_permutation
from polarflow.assignment import (
    ProblemTooLargeError,
    assignment_cost,
    brute_force_assignment,
    duals_from_matching,
    solve_assignment,
    sorted_assignment_1d,
    squared_distance_costs,
    verify_optimality,
)


def test_squared_distance_examples():
    assert squared_distance_costs([(0, 0)], [(3, 4)]).tolist() == [[25.0]]
    assert squared_distance_costs([(0, 0), (1, 0)], [(0, 0), (2, 0)]).tolist() == [[0, 4], [1, 1]]
    pts = np.random.default_rng(0).random((5, 3))
    assert np.all(np.diag(squared_distance_costs(pts, pts)) == 0)


@pytest.mark.parametrize("src, tgt", [
    ([(0, 0)], [(1, 1), (2, 2)]),
    ([(0, 0)], [(1, 1, 1)]),
])
def test_squared_distance_size_errors(src, tgt):
    with pytest.raises(SizeError):
        squared_distance_costs(src, tgt)


@pytest.mark.parametrize("solver", [solve_assignment, brute_force_assignment])
def test_trivial_instances(solver):
    r = solver([[5.0]])
    assert r.sigma.tolist() == [0] and r.total_cost == 5.0
    r = solver([[0, 1], [1, 0]])
    assert r.sigma.tolist() == [0, 1] and r.total_cost == 0.0


def test_random_3x3_matches_enumeration(rng):
    for _ in range(20):
        C = rng.random((3, 3))
        assert solve_assignment(C).total_cost == enumerate_min_cost(C.tolist())


def test_4x4_agrees_with_brute_force(rng):
    C = rng.random((4, 4))
    assert solve_assignment(C).total_cost == brute_force_assignment(C).total_cost


def test_non_finite_costs_rejected():
    with pytest.raises(DomainError):
        solve_assignment([[0.0, np.inf], [1.0, 0.0]])
    with pytest.raises(DomainError):
        solve_assignment([[np.nan]])
    with pytest.raises(SizeError):
        solve_assignment(np.zeros((2, 3)))


def test_brute_force_refuses_large():
    with pytest.raises(ProblemTooLargeError):
        brute_force_assignment(np.zeros((10, 10)))


def test_lexicographic_tie_break():
    # every permutation of a constant matrix is optimal
    assert solve_assignment(np.ones((5, 5))).sigma.tolist() == [0, 1, 2, 3, 4]
    # two optima: (1, 0, 2) and (2, 0, 1); the first is smaller
    C = np.array([[1, 0, 0], [0, 1, 1], [1, 0, 0]], dtype=float)
    optima = [p for p in itertools.permutations(range(3))
              if sum(C[i, p[i]] for i in range(3)) == 0]
    assert solve_assignment(C).sigma.tolist() == list(min(optima))
    assert brute_force_assignment(C).sigma.tolist() == list(min(optima))


def test_ties_on_integer_matrices_match_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        C = rng.integers(0, 3, size=(n, n)).astype(float)
        a, b = solve_assignment(C), brute_force_assignment(C)
        assert a.sigma.tolist() == b.sigma.tolist()
        assert verify_optimality(C, a).passed


def test_warm_start_gives_same_answer(rng):
    C = rng.random((40, 40))
    cold = solve_assignment(C)
    C2 = C + 0.01 * rng.random((40, 40))
    assert solve_assignment(C2, warm_start=cold).sigma.tolist() == solve_assignment(C2).sigma.tolist()


def test_duals_normalized_and_certified(rng):
    C = rng.random((7, 7)) * 10
    for r in (solve_assignment(C), brute_force_assignment(C)):
        assert r.v[0] == 0.0
        rep = verify_optimality(C, r)
        assert rep.passed, rep.checks


def test_certificate_detects_swapped_sigma():
    C = np.array([[0.0, 5.0], [5.0, 0.0]])
    good = solve_assignment(C)
    assert verify_optimality(C, good).passed
    bad = type(good)(sigma=np.array([1, 0]), u=good.u, v=good.v, total_cost=10.0)
    rep = verify_optimality(C, bad)
    assert not rep.passed
    assert not rep.checks["no_improving_2cycle"]


def test_certificate_detects_3cycle():
    # identity is beaten only by the rotation 0->1->2->0
    C = np.array([[1, 0, 9], [9, 1, 0], [0, 9, 1]], dtype=float)
    ident = type(solve_assignment(C))(sigma=np.arange(3), u=np.zeros(3), v=np.zeros(3), total_cost=3.0)
    rep = verify_optimality(C, ident)
    assert rep.checks["no_improving_2cycle"]
    assert not rep.checks["no_improving_3cycle"]


def test_certificate_rejects_non_bijection():
    C = np.eye(3)
    r = solve_assignment(C)
    r.sigma = np.array([0, 0, 1])
    assert not verify_optimality(C, r).passed


def test_certificates_on_random_6x6(rng):
    for _ in range(50):
        C = rng.random((6, 6))
        r = solve_assignment(C)
        assert verify_optimality(C, r).passed
        assert r.total_cost == brute_force_assignment(C).total_cost


def test_duals_from_matching_rejects_suboptimal():
    C = np.array([[0.0, 5.0], [5.0, 0.0]])
    with pytest.raises(ValueError):
        duals_from_matching(C, np.array([1, 0]))


def test_sorted_1d_examples():
    r = sorted_assignment_1d([0.9, 0.1], [0.0, 1.0])
    assert r.sigma.tolist() == [1, 0]
    assert r.total_cost == pytest.approx(0.02)
    t = np.array([0.1, 0.4, 0.7])
    assert sorted_assignment_1d(t, t).sigma.tolist() == [0, 1, 2]
    assert sorted_assignment_1d(t, t).total_cost == 0.0


def test_sorted_1d_against_enumeration(rng):
    src = rng.random(8)
    grid = (np.arange(8) + 0.5) / 8
    C = squared_distance_costs(src, grid)
    r = sorted_assignment_1d(src, grid)
    assert r.total_cost == pytest.approx(enumerate_min_cost(C.tolist()), abs=1e-14)
    assert verify_optimality(C, r).passed


def test_sorted_1d_size_mismatch():
    with pytest.raises(SizeError):
        sorted_assignment_1d([0.0, 1.0], [0.5])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(0, 100, allow_nan=False)))
def test_property_optimal_and_bijective(C):
    r = solve_assignment(C)
    assert check_permutation(r.sigma, 5)
    assert r.total_cost <= enumerate_min_cost(C.tolist()) + 5e-9 * (1 + C.max()) * 5
    gap = abs(r.u.sum() + r.v.sum() - r.total_cost)
    assert gap <= 1e-9 * (1 + r.total_cost) * 5 + 1e-9 * (1 + C.max())
    assert verify_optimality(C, r).passed


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1),
       st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_property_translation_invariance(n, seed, shift):
    g = np.random.default_rng(seed)
    src, tgt = g.random((n, 2)), g.random((n, 2))
    a = solve_assignment(squared_distance_costs(src, tgt))
    b = solve_assignment(squared_distance_costs(src + np.array(shift), tgt))
    assert a.sigma.tolist() == b.sigma.tolist()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=8, unique=True), st.integers(0, 2**32 - 1))
def test_property_1d_monotone(xs, seed):
    targets = np.sort(np.random.default_rng(seed).random(len(xs)) * 4)
    xs = np.array(xs)
    if np.min(np.diff(np.sort(xs))) < 1e-3 or np.min(np.diff(targets)) < 1e-3:
        return  # near-ties are optimal either way within tolerance
    r = solve_assignment(squared_distance_costs(xs, targets))
    # k-th smallest source goes to k-th smallest target
    assert r.sigma[np.argsort(xs)].tolist() == list(range(len(xs)))
    assert r.sigma.tolist() == sorted_assignment_1d(xs, targets).sigma.tolist()


def test_assignment_cost_is_order_independent():
    C = np.array([[1e16, 1.0], [1.0, -1e16 + 1e16]])
    assert assignment_cost(C, np.array([0, 1])) == 1e16
