import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import binom_le_bf, colex_initial_segment, lower_shadow
from sperner_lab.bounds import (
    CostEntry,
    CostLedger,
    cost_log2,
    expansion_bound,
    gen_binomial,
    invert_gen_binomial,
    iso_bounds,
    kk_shadow_bound,
    log2_binom_le,
    small_a_cost,
    small_a_cost_bound,
    tree_bits,
)
from sperner_lab.errors import PreconditionError
from sperner_lab.lattice import Family, MiddleGraph


def test_gen_binomial_values():
    assert gen_binomial(4.5, 2) == pytest.approx(7.875)
    assert gen_binomial(5, 3) == 10
    assert gen_binomial(7, 0) == 1


def test_invert_gen_binomial_exact_points():
    for z in range(3, 12):
        assert invert_gen_binomial(math.comb(z, 3), 3, 40.0) == pytest.approx(z, abs=1e-9)


def test_kk_full_layer_and_single_set():
    r = kk_shadow_bound(10, 3, 5)
    assert r.z == 5 and r.value == pytest.approx(10)
    assert kk_shadow_bound(1, 3, 5).value == pytest.approx(3)


def test_kk_rejects_bad_sizes():
    with pytest.raises(PreconditionError):
        kk_shadow_bound(11, 3, 5)
    with pytest.raises(PreconditionError):
        kk_shadow_bound(0, 3, 5)


@pytest.mark.parametrize("n,k", [(5, 3), (6, 3), (7, 4), (8, 5), (6, 2)])
def test_kk_below_colex_minimum_and_tight_at_binomials(n, k):
    for a in range(1, math.comb(n, k) + 1):
        minimum = len(lower_shadow(colex_initial_segment(n, k, a)))
        bound = kk_shadow_bound(a, k, n).value
        assert bound <= minimum + 1e-9
    for z in range(k, n + 1):
        a = math.comb(z, k)
        assert kk_shadow_bound(a, k, n).value == pytest.approx(math.comb(z, k - 1))


def test_bound_report_slack():
    r = kk_shadow_bound(4, 3, 5, actual=6)
    assert r.slack == pytest.approx(6 - r.value)
    assert r.with_actual(9).actual == 9


def test_expansion_bound_precondition():
    assert expansion_bound(10, 4, 6).value == pytest.approx(12.5)
    with pytest.raises(PreconditionError):
        expansion_bound(3, 3, 5)


def test_iso_small_a_example():
    assert iso_bounds(2, 5).small_a.value == 9
    assert iso_bounds(6, 5).small_a is None


def test_iso_log_is_zero_on_full_layer():
    assert iso_bounds(math.comb(7, 4), 4).iso_log.value == 0


@pytest.mark.parametrize("k", [2, 3, 4])
def test_iso_bounds_hold_on_random_sets(k):
    M = MiddleGraph(k)
    rng = random.Random(k)
    for _ in range(200):
        a = rng.randint(1, M.part_size)
        A = rng.sample(M.upper, a)
        g = len(M.N(A))
        b = iso_bounds(a, k)
        assert g - a >= b.iso_log.value - 1e-9
        if b.small_a is not None:
            assert g >= b.small_a.value


def test_log2_binom_le_exact_against_sums():
    for N in (1, 7, 40, 301, 1000):
        for m in (0, 1, 3, N // 3, N // 2, N - 1, N):
            bits, approx = log2_binom_le(N, m)
            assert not approx
            assert bits == pytest.approx(math.log2(binom_le_bf(N, m)), rel=1e-12, abs=1e-12)


def test_log2_binom_le_entropy_bound_is_flagged_and_upper():
    bits, approx = log2_binom_le(20000, 50)
    assert approx
    assert bits >= math.log2(binom_le_bf(20000, 50))


def test_tree_bits_and_cost_kinds():
    assert tree_bits(4, 1) == 0
    assert tree_bits(4, 3) == pytest.approx(2 * math.log2(4 * math.e))
    assert cost_log2("x", "binom", N=10, m=3).bits == pytest.approx(math.log2(120))
    assert cost_log2("x", "subset", N=9).bits == 9
    with pytest.raises(ValueError):
        cost_log2("x", "nope")


def test_cost_ledger():
    led = CostLedger()
    led.add(CostEntry("R", 3.5))
    led.extend([CostEntry("L|R", 1.25)])
    assert led.total == 4.75
    assert led["L|R"].bits == 1.25
    assert led.to_json() == '[{"label": "R", "bits": 3.5}, {"label": "L|R", "bits": 1.25}]'
    with pytest.raises(ValueError):
        CostEntry("bad", -1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(100, 10_000), st.integers(1, 13))
def test_small_a_exact_cost_below_bound(k, a):
    assert small_a_cost(k, a) <= small_a_cost_bound(k, a) + 1e-9


def test_shadow_of_sampled_family_meets_kk():
    rng = random.Random(11)
    for _ in range(100):
        n = rng.randint(4, 8)
        k = rng.randint(2, n)
        pool = Family.layer(n, k).members
        A = rng.sample(pool, rng.randint(1, len(pool)))
        sets = [frozenset(i + 1 for i in range(n) if m >> i & 1) for m in A]
        assert len(lower_shadow(sets)) >= kk_shadow_bound(len(A), k, n).value - 1e-9
