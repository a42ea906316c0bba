import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import max_antichains_bf, to_set, width_bf
from sperner_lab.antichain import (
    Verdict,
    antichain_support,
    check_hit_conclusion,
    check_main_conclusion,
    closed_decomposition_holds,
    find_special,
    hit_ground,
    is_antichain,
    max_antichain,
    max_antichain_bipartite,
    middle_layers,
)
from sperner_lab.errors import GuardExceeded, PreconditionError
from sperner_lab.lattice import Family, MiddleGraph, layer_masks
from sperner_lab.sampler import derive_stream, sample_family


@st.composite
def small_families(draw, max_n=6, max_size=14):
    n = draw(st.integers(1, max_n))
    masks = draw(st.lists(st.integers(0, (1 << n) - 1), max_size=max_size))
    return Family(n, tuple(masks))


@settings(max_examples=200, deadline=None)
@given(small_families())
def test_width_matches_brute_force(X):
    res = max_antichain(X)
    assert res.width == width_bf([to_set(m) for m in X.members])
    assert len(res.witness) == res.width
    assert res.witness.issubset(X)
    assert is_antichain(res.witness.members)
    # Dilworth: width + maximum matching = |X|
    assert res.width + res.solver_stats["matching_size"] == len(X)


@pytest.mark.parametrize("n", range(1, 9))
def test_sperner_small(n):
    res = max_antichain(Family.full(n))
    assert res.width == math.comb(n, n // 2)


def test_width_of_p3_is_three():
    assert max_antichain(Family.full(3)).width == 3


def test_middle_graph_k2_is_a_six_cycle():
    assert max_antichain(MiddleGraph(2).vertices()).width == 3


def test_empty_family():
    res = max_antichain(Family(4))
    assert res.width == 0 and len(res.witness) == 0


def test_size_guard():
    with pytest.raises(GuardExceeded):
        max_antichain(Family.full(6), size_guard=10)


def test_result_serialization():
    d = max_antichain(Family.full(2)).to_dict()
    assert d["width"] == 2
    assert d["solver_stats"]["phases"] is None


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.data())
def test_bipartite_solver_and_closed_decomposition(n, data):
    k = data.draw(st.integers(1, n))
    masks = layer_masks(n, k) + layer_masks(n, k - 1)
    chosen = data.draw(st.lists(st.sampled_from(masks), max_size=16))
    X = Family(n, tuple(chosen))
    res = max_antichain_bipartite(X)
    assert res.width == max_antichain(X).width
    assert is_antichain(res.witness.members)
    if X.layers and len(X.layers) == 2:
        assert closed_decomposition_holds(X, res.witness)


def test_bipartite_rejects_three_layers():
    with pytest.raises(PreconditionError):
        max_antichain_bipartite(Family.of(4, [1], [1, 2], [1, 2, 3]))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 7), st.data())
def test_find_special_matches_definition(n, data):
    k = data.draw(st.integers(0, n).filter(lambda k: 2 * k != n))
    masks = data.draw(st.lists(st.integers(0, (1 << n) - 1), max_size=40))
    X = Family(n, tuple(masks))
    sp = find_special(X, n, k)
    xs = {to_set(m) for m in X.members}
    lower = k >= (n + 1) // 2
    for m in X.in_layer(k).members:
        v = to_set(m)
        if lower:
            nb = {v - {e} for e in v}
        else:
            nb = {v | {e} for e in range(1, n + 1) if e not in v}
        present = len(nb & xs)
        assert (m in sp.isolated) == (present == 0)
        assert (m in sp.nearly_isolated) == (present <= 1)


def test_find_special_rejects_exact_middle():
    with pytest.raises(PreconditionError):
        find_special(Family.full(4), 4, 2)


@pytest.mark.parametrize("n", range(1, 8))
def test_full_lattice_is_uniquely_a_middle_layer(n):
    chk = check_main_conclusion(Family.full(n), exhaustive=True)
    assert chk.verdict is Verdict.HOLDS_UNIQUELY
    assert chk.width == math.comb(n, n // 2)


def test_single_off_middle_set_fails():
    X = Family.of(5, [1])
    chk = check_main_conclusion(X)
    assert chk.verdict is Verdict.FAILS
    assert (chk.width, chk.reference) == (1, 0)


def test_empty_family_holds_vacuously():
    assert check_main_conclusion(Family(6)).verdict is Verdict.HOLDS


def test_exhaustive_mode_limited_to_small_n():
    with pytest.raises(PreconditionError):
        check_main_conclusion(Family.full(9), exhaustive=True)
    with pytest.raises(PreconditionError):
        check_hit_conclusion(Family.full(9), exhaustive=True)


def test_hit_rescues_nearly_isolated_singletons():
    X = Family.of(4, [1], [2], [3], [4], [1, 2])
    assert check_main_conclusion(X).verdict is Verdict.FAILS
    assert check_hit_conclusion(X).holds


def test_hit_middle_plus_isolated_set():
    n = 5
    X = Family(n, tuple(layer_masks(n, 3)) + (0b01111,))
    X = Family(n, tuple(m for m in X.members if m not in (0b00111, 0b01011, 0b01101, 0b01110)))
    v = 0b01111
    assert find_special(X, n, 4).isolated.members == (v,)
    chk = check_hit_conclusion(X)
    assert chk.holds
    assert chk.width == len(X.in_layer(3)) + 1


def _main_unique_bf(X: Family) -> bool:
    sets = [to_set(m) for m in X.members]
    mids = middle_layers(X.n)
    layers = {m: frozenset(s for s in sets if len(s) == m) for m in mids}
    return all(any(ac == layers[m] for m in mids) for ac in max_antichains_bf(sets))


def _hit_unique_bf(X: Family) -> bool:
    sets = [to_set(m) for m in X.members]
    acs = max_antichains_bf(sets)
    for m in middle_layers(X.n):
        ground = {to_set(u) for u in hit_ground(X, m).members}
        if all(ac <= ground for ac in acs):
            return True
    return False


def test_exhaustive_verdicts_match_enumeration_of_all_maximum_antichains():
    rng = random.Random(2024)
    seen = {Verdict.HOLDS: 0, Verdict.HOLDS_UNIQUELY: 0}
    for _ in range(150):
        n = rng.randint(2, 5)
        p = rng.choice([0.5, 0.7, 0.9])
        X = sample_family(f"P({n})", p, derive_stream(rng.getrandbits(32), 0))
        if len(X) > 16:
            continue
        main = check_main_conclusion(X, exhaustive=True)
        if main.verdict is not Verdict.FAILS:
            seen[main.verdict] += 1
            assert (main.verdict is Verdict.HOLDS_UNIQUELY) == _main_unique_bf(X)
        hit = check_hit_conclusion(X, exhaustive=True)
        if hit.verdict is not Verdict.FAILS:
            assert (hit.verdict is Verdict.HOLDS_UNIQUELY) == _hit_unique_bf(X)
    assert seen[Verdict.HOLDS] > 0 and seen[Verdict.HOLDS_UNIQUELY] > 0


def test_support_is_union_of_maximum_antichains():
    rng = random.Random(5)
    for _ in range(40):
        n = rng.randint(2, 5)
        X = Family(n, tuple(rng.sample(range(1 << n), min(1 << n, rng.randint(1, 12)))))
        acs = max_antichains_bf([to_set(m) for m in X.members])
        union = set().union(*acs)
        assert {to_set(m) for m in antichain_support(X).members} == union


def test_seed_pinned_sample_n10_p095():
    X = sample_family("P(10)", 0.95, derive_stream(42, 0))
    chk = check_main_conclusion(X)
    # frozen regression values
    assert len(X) == 997
    assert (chk.verdict, chk.width, chk.reference, chk.layer) == (Verdict.HOLDS, 243, 243, 5)
