from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from packlab.instance import Instance, generate, total_size
from packlab.lp import ItemPattern, LpError, lp_lower_bound, price_pattern, solve_gg_lp
from packlab.oracle import enumerate_patterns, exact_lp
from packlab.simplex import CoveringSimplex

from conftest import small_instances


def brute_price(sizes, duals):
    best, arg = 0.0, ()
    ranges = [range(int(1 // s) + 1) for s in sizes]
    for counts in product(*ranges):
        if sum(s * c for s, c in zip(sizes, counts)) <= 1:
            v = float(np.dot(duals, counts))
            if v > best + 1e-12:
                best, arg = v, counts
    return best, arg


def test_price_zero_duals():
    p, v = price_pattern([Fraction(1, 2), Fraction(1, 3)], [0.0, 0.0])
    assert p == ItemPattern(()) and v == 0.0


def test_price_two_items():
    p, v = price_pattern([Fraction(3, 5), Fraction(2, 5)], [0.9, 0.5])
    assert p.as_dict() == {0: 1, 1: 1}
    assert v == pytest.approx(1.4)


def test_price_one_third():
    p, v = price_pattern([Fraction(1, 3)], [1.0])
    assert p.as_dict() == {0: 3} and v == pytest.approx(3.0)


def test_price_guards():
    with pytest.raises(LpError):
        price_pattern([Fraction(1, 3)], [-1.0])
    with pytest.raises(LpError):
        price_pattern([Fraction(1, 3)], [1.0], D=10)
    with pytest.raises(LpError):
        price_pattern([Fraction(1, 10**9 + 7)], [1.0])


@given(small_instances(max_types=4, max_den=10),
       st.lists(st.floats(0, 2, allow_nan=False), min_size=4, max_size=4))
def test_price_matches_enumeration(inst, duals):
    duals = np.array(duals[:inst.n])
    p, v = price_pattern(inst.sizes, duals)
    best, _ = brute_price(inst.sizes, duals)
    assert p.is_feasible(inst.sizes)
    assert v == pytest.approx(best, abs=1e-9)


@pytest.mark.parametrize("pairs, value", [
    ([("1/3", 1), ("1/3", 1), ("1/3", 1)], 1.0),
    ([("0.34", 1), ("0.33", 1), ("0.32", 1)], 1.0),
    ([("1/2", 3)], 1.5),
    ([("0.3", 2), ("0.2", 1), ("0.1", 7)], 1.5),
])
def test_known_optima(pairs, value):
    assert solve_gg_lp(Instance.from_pairs(pairs)).objective == pytest.approx(value, abs=1e-9)


def test_empty_instance():
    sol = solve_gg_lp(Instance.from_pairs([]))
    assert sol.objective == 0.0 and sol.columns == []


def test_lower_bound():
    assert lp_lower_bound(Instance.from_pairs([("0.3", 2), ("0.2", 1), ("0.1", 7)])) == 1.5
    assert lp_lower_bound(Instance.from_pairs([])) == 0.0
    assert lp_lower_bound(Instance.from_pairs([(1, 1)])) == 1.0


def check_solution(inst, sol, eps=1e-9):
    n = inst.n
    assert len(sol.columns) <= n
    assert all(v > 0 for v in sol.values)
    assert sol.objective == pytest.approx(sum(sol.values), abs=1e-12)
    for p in sol.columns:
        assert p.is_feasible(inst.sizes)
    assert np.all(sol.coverage(n) >= np.array(inst.mult) - 1e-9)
    assert sol.objective >= float(total_size(inst)) - 1e-9
    _, v = price_pattern(inst.sizes, np.maximum(sol.duals, 0))
    assert v <= 1 + 1e-7


@settings(max_examples=80)
@given(small_instances())
def test_matches_exact_lp(inst):
    sol = solve_gg_lp(inst)
    check_solution(inst, sol)
    assert abs(sol.objective - exact_lp(inst)) <= 1e-7


def linprog_value(inst):
    pats = enumerate_patterns(inst)
    A = np.array([p.vector(inst.n) for p in pats]).T
    res = linprog(np.ones(len(pats)), A_ub=-A, b_ub=-np.array(inst.mult, dtype=float),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


@settings(max_examples=40)
@given(small_instances(max_types=5, max_den=10))
def test_matches_scipy(inst):
    assert solve_gg_lp(inst).objective == pytest.approx(linprog_value(inst), abs=1e-7)


@pytest.mark.parametrize("rule", ["bland", "dantzig", "auto"])
def test_pivot_rules_agree(rule):
    inst = generate("uniform", 40, 5, lattice=100)
    ref = solve_gg_lp(inst).objective
    assert solve_gg_lp(inst, rule=rule, warm_start=False).objective == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("kind", ["uniform", "three_partition", "discrete"])
def test_generated_instances(kind):
    inst = generate(kind, 120, 2)
    check_solution(inst, solve_gg_lp(inst))


def test_iteration_cap():
    inst = generate("uniform", 60, 1, lattice=200)
    with pytest.raises(LpError):
        solve_gg_lp(inst, max_rounds=0, warm_start=False)


def test_simplex_small_covering():
    # min x1 + x2 s.t. x1 + 2 x2 >= 4, 3 x1 + x2 >= 6  -> x = (8/5, 6/5)
    lp = CoveringSimplex([4, 6])
    lp.add_column([1, 3])
    lp.add_column([2, 1])
    lp.solve([2, 1])          # x1 = 4 with row 1 in surplus is feasible
    assert lp.primal() == pytest.approx([1.6, 1.2])
    assert lp.duals @ lp.b == pytest.approx(2.8)
