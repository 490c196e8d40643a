import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from packlab.containers import class_sigma, split_integral
from packlab.discrepancy import (BudgetViolation, build_intervals, budget_value, partial_color,
                                 prefix_decomposition, prefix_error_bound)
from packlab.params import SolveParams
from packlab.rebuild import IncidenceMatrices, rebuild_all
from packlab.synth import random_constraints, random_state, small_heavy_state

P = SolveParams()


def hand_matrices(n_shadow, level=16, small=True, N=6, seed=0):
    """Rows with prescribed shadow counts spread over N columns, A = shadow."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in n_shadow:
        r = np.zeros(N)
        for _ in range(int(n)):
            r[rng.integers(N)] += 1
        rows.append(r)
    A = np.array(rows)
    k = len(n_shadow)
    return IncidenceMatrices([None] * k, A, A.copy(), np.full(k, level), np.full(k, small),
                             rng.uniform(0.1, 0.9, N), list(range(N)))


def spans(intervals):
    return [(I.start, I.stop, I.level) for I in intervals]


# -- interval family --------------------------------------------------------------------

def test_hand_example_level_zero():
    # class 2^-16 makes tau = K * 2^17 exact; K = 12 / 2^17 gives tau = 12
    M = hand_matrices([10, 3, 3, 3, 3])
    fam = build_intervals(M, P.with_(budget_K=12 / 2**17))
    top = fam.roots[16]
    assert spans(top) == [(0, 1, 0), (1, 5, 0)]
    assert top[1].n_shadow == 12
    assert spans(top[1].children) == [(1, 3, 1), (3, 5, 1)]
    assert all(len(J) == 1 and J.level == 2 for I in top[1].children for J in I.children)
    # budget: 2 level-1 pieces, 4 level-2 singletons, plus the all-ones row
    want = 2 * math.exp(-1 / 16) + 4 * math.exp(-4 / 16) + 2 + 1
    assert fam.budget == pytest.approx(want)


def test_hand_example_prefix():
    M = hand_matrices([10, 3, 3, 3, 3])
    fam = build_intervals(M, P.with_(budget_K=12 / 2**17))
    assert spans(prefix_decomposition(fam, 4)) == [(0, 1, 0), (1, 5, 0)]
    assert spans(prefix_decomposition(fam, 2)) == [(0, 1, 0), (1, 3, 1)]
    assert spans(prefix_decomposition(fam, 3)) == [(0, 1, 0), (1, 3, 1), (3, 4, 2)]
    x_end = np.round(M.x)
    # level-0 intervals carry lambda 0, so a prefix made of them has bound 0
    assert prefix_error_bound(fam, M.x, x_end, 4) == 0.0
    b = prefix_error_bound(fam, M.x, x_end, 2)
    assert b == pytest.approx(fam.roots[16][1].children[0].norm)
    with pytest.raises(IndexError):
        prefix_error_bound(fam, M.x, x_end, 5)


def test_all_large_rows_are_exact_singletons():
    M = hand_matrices([5, 1, 7], level=2, small=False)
    fam = build_intervals(M, P)
    assert fam.small_classes == set()
    assert spans(fam.intervals()) == [(0, 1, 0), (1, 2, 0), (2, 3, 0)]
    assert all(lam == 0 for _, lam in fam.constraints())
    assert prefix_error_bound(fam, M.x, M.x, 2) == 0.0


def check_structure(fam, M, K):
    for c, top in fam.roots.items():
        rows = np.flatnonzero(M.levels == c)
        # every level partitions the rows of its parent; level 0 covers the class
        assert [r for I in top for r in range(I.start, I.stop)] == list(rows)
        tau = K * float(2.0**c) ** (17 / 16)
        stack = list(top)
        while stack:
            I = stack.pop()
            if c not in fam.small_classes:
                assert len(I) == 1 and I.lam == 0
                continue
            if len(I) > 1:
                assert I.n_shadow <= tau / 2**I.level + 1e-9
                assert I.children
                assert [r for J in I.children for r in range(J.start, J.stop)] == list(range(I.start, I.stop))
                assert all(J.level > I.level for J in I.children)
            np.testing.assert_allclose(I.v, M.A[I.start:I.stop].sum(axis=0))
            stack.extend(I.children)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 64.0, 2.0**16]))
def test_family_structure_on_rebuilt_states(seed, K):
    rng = np.random.default_rng(seed)
    st_ = small_heavy_state(rng, n_patterns=int(rng.integers(5, 60)), level=int(rng.integers(4, 8)))
    p = P.with_(budget_K=K)
    _, M, _ = rebuild_all(split_integral(st_)[1], p, measure=False)
    fam = build_intervals(M, p)
    check_structure(fam, M, K)
    cons = fam.constraints()
    assert np.array_equal(cons[-1][0], np.ones(M.N)) and cons[-1][1] == 0
    assert fam.budget == pytest.approx(budget_value(l for _, l in cons))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_interval_norm_bound(seed):
    rng = np.random.default_rng(seed)
    st_ = small_heavy_state(rng, n_patterns=int(rng.integers(16, 120)), level=int(rng.integers(4, 9)))
    _, M, _ = rebuild_all(split_integral(st_)[1], P, measure=False)
    fam = build_intervals(M, P)
    for I in fam.intervals():
        if I.level_class in fam.small_classes:
            sigma = float(class_sigma(I.level_class))
            assert I.norm <= I.n_shadow * sigma ** 0.125 + 1e-9


# -- the walk ---------------------------------------------------------------------------

def test_integral_input_is_returned():
    x = np.array([0.0, 1.0, 1.0, 0.0] * 4)
    w = partial_color(x, [(np.ones(16), 0.0)], P, np.random.default_rng(0))
    assert w.success and w.integral == 16
    assert np.array_equal(w.x, x)


def test_four_halves_with_sum_constraint():
    # on N = 4 the single exact row already costs 1 > 4/16, so the walk refuses
    with pytest.raises(BudgetViolation):
        partial_color(np.full(4, 0.5), [(np.ones(4), 0.0)], P)
    w = partial_color(np.full(16, 0.5), [(np.ones(16), 0.0)], P, np.random.default_rng(1))
    assert w.success and w.integral >= 8
    assert abs(w.x.sum() - 8) <= 1e-6 * 4


def test_budget_rejection():
    cons = [(np.eye(16)[i], 0.0) for i in range(16)] + [(np.ones(16), 0.0)]
    with pytest.raises(BudgetViolation) as exc:
        partial_color(np.full(16, 0.5), cons, P)
    assert exc.value.budget == 17 and exc.value.N == 16


def test_input_validation():
    with pytest.raises(ValueError):
        partial_color(np.array([1.5] * 16), [], P)
    with pytest.raises(ValueError):
        partial_color(np.full(16, 0.5), [(np.ones(3), 5.0)], P)
    with pytest.raises(ValueError):
        partial_color(np.full(16, 0.5), [(np.ones(16), -1.0)], P)
    assert partial_color(np.zeros(0), [], P).success


def test_zero_vectors_are_dropped():
    w = partial_color(np.full(32, 0.3), [(np.zeros(32), 0.0), (np.ones(32), 0.0)], P,
                      np.random.default_rng(2))
    assert w.success


def test_trace_records_progress():
    w = partial_color(np.full(32, 0.5), [(np.ones(32), 0.0)], P, np.random.default_rng(3), trace=True)
    frozen = [f for _, f, _ in w.trace]
    assert frozen == sorted(frozen) and frozen[-1] >= 16


def check_walk(x0, cons, w, p=P):
    assert w.success
    assert w.integral >= math.ceil(x0.size / 2)
    assert np.sum((w.x == 0) | (w.x == 1)) >= math.ceil(x0.size / 2)
    assert w.x.min() >= 0 and w.x.max() <= 1
    d = w.x - x0
    for v, lam in cons:
        nv = np.linalg.norm(v)
        if lam == 0:
            assert abs(d @ v) <= 1e-6 * nv
        else:
            assert abs(d @ v) <= lam * nv * (1 + p.slack)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from([32, 64, 96]))
def test_walk_contract_random_systems(seed, N):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0, 1, N)
    cons = random_constraints(rng, N)
    w = partial_color(x0, cons, P, rng)
    check_walk(x0, cons, w)


def test_frozen_coordinates_never_move():
    rng = np.random.default_rng(4)
    x0 = rng.uniform(0, 1, 48)
    x0[:10] = 1.0
    x0[10:20] = 0.0
    w = partial_color(x0, random_constraints(rng, 48), P, rng)
    assert np.array_equal(w.x[:20], x0[:20])


def test_prefix_errors_after_walk():
    rng = np.random.default_rng(5)
    st_ = random_state(rng, n_patterns=300, n_types=8, n_containers=12)
    _, M, _ = rebuild_all(split_integral(st_)[1], P, measure=False)
    fam = build_intervals(M, P)
    assert fam.budget <= M.N / 16
    w = partial_color(M.x, fam.constraints(), P, rng)
    check_walk(M.x, fam.constraints(), w)
    prefix = np.cumsum(M.A @ (M.x - w.x))
    for i, e in enumerate(prefix):
        assert abs(e) <= prefix_error_bound(fam, M.x, w.x, i) * (1 + 1e-6) + 1e-9
