import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import example_state, small_instances
from packlab.containers import deficiency, split_integral
from packlab.instance import Instance, generate, total_size
from packlab.lp import solve_gg_lp
from packlab.params import SolveParams
from packlab.pipeline import (BinSolution, PipelineError, greedy_pack, one_iteration, preprocess,
                              solve_paper, sprinkle_small, verify)
from packlab.synth import random_state

F = Fraction


def test_verify_negative_controls():
    inst = Instance.from_pairs([("0.6", 1), ("0.5", 1), ("0.2", 1)])
    rep = verify(inst, BinSolution([{0: 1, 1: 1}, {2: 1}]))
    assert not rep.ok and rep.first == "bin 0 overfull 11/10"
    rep = verify(inst, BinSolution([{0: 1}, {1: 1}]))
    assert rep.first == "type 2 short by 1"
    rep = verify(inst, BinSolution([{0: 1}, {1: 1}, {2: 2}]))
    assert rep.first == "type 2 over by 1"
    assert "unknown type" in verify(inst, BinSolution([{0: 1}, {1: 1, 2: 1, 7: 1}])).first
    assert verify(inst, BinSolution([{0: 1, 2: 1}, {1: 1}])).ok


def test_solution_json_round_trip():
    sol = BinSolution([{0: 2, 3: 1}, {1: 1}], {"algo": "x", "seed": 3})
    back = BinSolution.from_json(sol.to_json())
    assert back.bins == sol.bins and back.meta == sol.meta


def test_greedy_pack_examples():
    assert greedy_pack(Instance.from_pairs([])).bins_used == 0
    sol = greedy_pack(Instance.from_pairs([("0.6", 3)]))
    assert sol.bins_used == 3 <= 2 * 1.8 + 1


@given(small_instances(max_types=6, max_den=20, max_items=40), st.integers(0, 1000))
def test_greedy_bound(inst, seed):
    order = list(np.random.default_rng(seed).permutation(inst.expanded()))
    sol = greedy_pack(inst, [int(t) for t in order])
    assert verify(inst, sol).ok
    assert sol.bins_used <= 2 * total_size(inst) + 1


# -- preprocessing ------------------------------------------------------------------------

def test_preprocess_hand_example():
    inst = Instance.from_pairs([("0.9", 3), ("0.8", 1)])
    pre = preprocess(inst)
    assert pre.U == F(7, 2) and pre.threshold == F(2, 7)
    assert pre.small == []
    assert pre.large.sizes == (F(9, 10), F(4, 5)) and pre.large.mult == (3, 1)
    assert pre.pools == [[0, 0, 0], [1]]


def test_preprocess_example_all_small(example):
    pre = preprocess(example)
    assert pre.U == F(3, 2) and pre.threshold == F(2, 3)
    assert pre.large.n == 0 and len(pre.small) == 10


def test_preprocess_rounds_up_within_groups():
    inst = Instance.from_pairs([("0.7", 2), ("0.5", 1), ("0.4", 2), ("0.3", 3)])
    pre = preprocess(inst)
    # groups close once they reach 2: {.7,.7,.5,.4}, {.4,.3,.3,.3}
    assert pre.large.sizes == (F(7, 10), F(2, 5)) and pre.large.mult == (4, 4)
    for r, pool in enumerate(pre.pools):
        assert all(inst.sizes[t] <= pre.large.sizes[r] for t in pool)


@settings(max_examples=40)
@given(small_instances(max_types=5, max_den=12, max_items=20))
def test_rounded_lp_dominates(inst):
    pre = preprocess(inst)
    if pre.small:
        return
    assert solve_gg_lp(pre.large).objective >= solve_gg_lp(inst).objective - 1e-7
    assert sum(len(p) for p in pre.pools) == inst.total_items


# -- sprinkling ----------------------------------------------------------------------------

def test_sprinkle_examples():
    inst = Instance.from_pairs([("0.5", 1), ("0.3", 1)])
    bins, opened = sprinkle_small([{0: 1}], [], inst)
    assert bins == [{0: 1}] and opened == 0
    bins, opened = sprinkle_small([{0: 1}], [1], inst)
    assert bins == [{0: 1, 1: 1}] and opened == 0


@given(st.integers(0, 2**32 - 1))
def test_sprinkle_fullness(seed):
    rng = np.random.default_rng(seed)
    inst = generate("uniform", int(rng.integers(5, 60)), seed, lattice=200)
    pre = preprocess(inst)
    big = [t for pool in pre.pools for t in pool]
    base = greedy_pack(inst, big).bins
    bins, opened = sprinkle_small(base, pre.small, inst)
    assert verify(inst, BinSolution(bins)).ok
    if opened:
        loads = sorted(sum(inst.sizes[t] * c for t, c in b.items()) for b in bins)
        assert all(ld >= 1 - pre.threshold for ld in loads[1:])


# -- one iteration -------------------------------------------------------------------------

def test_iteration_on_integral_state():
    s, _ = example_state()
    for e in s.x:
        e.value = 1.0
    out, rec = one_iteration(s, SolveParams(), np.random.default_rng(0))
    assert rec.frac_before == rec.frac_after == 0 and out.objective == s.objective


def test_iteration_refuses_tiny_support():
    # three fractional patterns: the all-ones row alone costs 1 > 3/16
    s, _ = example_state(exact=False)
    with pytest.raises(PipelineError) as exc:
        one_iteration(s, SolveParams(), np.random.default_rng(0))
    assert exc.value.stage == "intervals" and exc.value.report["N"] == 3


@pytest.mark.parametrize("seed", range(4))
def test_iteration_contract(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n_patterns=200, n_types=8, n_containers=12)
    out, rec = one_iteration(s, SolveParams(rng_seed=seed), rng)
    assert rec.N == len(split_integral(s)[1].x)
    assert rec.frac_after <= rec.frac_before / 2
    assert out.objective == pytest.approx(s.objective, abs=1e-6 * math.sqrt(rec.N))
    assert rec.def_before == pytest.approx(deficiency(s))
    assert rec.def_after == pytest.approx(deficiency(out))
    assert rec.budget <= rec.N / 16


# -- solve_paper ---------------------------------------------------------------------------

def test_solve_small_examples(example):
    assert solve_paper(Instance.from_pairs([("1/2", 4)])).bins_used == 2
    assert solve_paper(Instance.from_pairs([("1", 7)])).bins_used == 7
    sol = solve_paper(example)
    assert verify(example, sol).ok and sol.bins_used >= 2
    assert sol.meta["n_small_items"] == 10


def ledger_ok(inst, sol):
    m = sol.meta
    for r in m["iterations"]:
        assert r["frac_after"] <= r["frac_before"] / 2
        assert abs(r["objective_after"] - r["objective_before"]) <= 1e-6 * max(1, math.sqrt(r["N"]))
    assert m["leftover_bins"] <= 2 * m["def_bought"] + 1 + 1e-9
    assert m["pattern_bins"] <= math.ceil(m["objective_final"] + m["frac_final"] - 1e-9)
    assert sol.bins_used == m["pattern_bins"] + m["leftover_bins"] + m["sprinkle_bins"]


@pytest.mark.parametrize("kind", ["uniform", "three_partition", "discrete"])
@pytest.mark.parametrize("n", [30, 120])
def test_solve_generated(kind, n):
    inst = generate(kind, n, 11)
    opt_f = solve_gg_lp(inst).objective
    sol = solve_paper(inst, SolveParams(rng_seed=2))
    assert verify(inst, sol).ok
    assert sol.bins_used >= math.ceil(opt_f - 1e-7)
    ledger_ok(inst, sol)


@settings(max_examples=25)
@given(small_instances(max_types=6, max_den=12, max_items=30))
def test_solve_random_small(inst):
    sol = solve_paper(inst)
    assert verify(inst, sol).ok
    assert sol.bins_used >= math.ceil(solve_gg_lp(inst).objective - 1e-7)
    ledger_ok(inst, sol)


def test_solve_is_deterministic():
    inst = generate("three_partition", 200, 0)
    a = solve_paper(inst, SolveParams(rng_seed=9))
    b = solve_paper(inst, SolveParams(rng_seed=9))
    assert a.to_json() == b.to_json()
    assert a.meta["iterations"], "this instance should run at least one iteration"
