import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import closure_bf, components_bf, lower_shadow, subsets_of, to_mask, to_set, upper_shadow
from sperner_lab.errors import NonUniformFamilyError, PreconditionError
from sperner_lab.lattice import (
    Family,
    MiddleGraph,
    Subset,
    closure,
    degree,
    format_mask,
    is_closed,
    layer_masks,
    parse_mask,
    read_family,
    shadow,
    shadow_direction,
    two_linked_components,
    write_family,
)


def uniform_family(draw_or_rng, n, k, size):
    pool = layer_masks(n, k)
    return Family(n, tuple(draw_or_rng.sample(pool, min(size, len(pool)))))


@st.composite
def uniform_families(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    k = draw(st.integers(1, n - 1))
    pool = layer_masks(n, k)
    chosen = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=12))
    return Family(n, tuple(chosen))


def test_subset_text_and_hex_roundtrip():
    s = Subset.from_elements([1, 3, 7], 7)
    assert s.to_text() == "{1,3,7}"
    assert s.to_hex() == "45"
    assert Subset.parse("{1,3,7}", 7) == s
    assert Subset.parse("0x45", 7) == s
    assert s.layer == 3
    assert s.elements == [1, 3, 7]


@pytest.mark.parametrize("bad", ["{0}", "{8}", "{1,,2}", "zz", "ff"])
def test_parse_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        parse_mask(bad, 7)


def test_subset_rejects_out_of_range_mask():
    with pytest.raises(ValueError):
        Subset(1 << 5, 5)


def test_family_dedupes_and_sorts():
    A = Family(4, (6, 3, 6, 5))
    assert A.members == (3, 5, 6)
    assert len(A) == 3
    assert 5 in A and 7 not in A
    assert A.uniform_layer() == 2


def test_layer_histogram_of_full_lattice():
    assert Family.full(5).layer_histogram == (1, 5, 10, 10, 5, 1)


def test_nonuniform_family_rejected_by_shadow():
    A = Family.of(4, [1], [1, 2])
    with pytest.raises(NonUniformFamilyError):
        shadow(A)


@pytest.mark.parametrize("n,k,expected", [(5, 3, "lower"), (5, 2, "upper"), (4, 3, "lower"),
                                          (4, 1, "upper"), (4, 2, "lower"), (7, 4, "lower")])
def test_shadow_direction(n, k, expected):
    assert shadow_direction(n, k) == expected


def test_strict_direction_fails_in_exact_middle():
    with pytest.raises(PreconditionError):
        shadow_direction(6, 3, strict=True)


def test_shadow_of_single_set():
    A = Family.of(5, [1, 2, 3])
    assert shadow(A, "lower").to_text_lines() == ["{1,2}", "{1,3}", "{2,3}"]
    assert len(shadow(A, "upper")) == 2


def test_empty_family_shadow_and_closure():
    E = Family(5)
    assert len(shadow(E)) == 0
    assert len(closure(E)) == 0
    assert two_linked_components(E) == []


@settings(max_examples=150, deadline=None)
@given(uniform_families())
def test_shadow_matches_brute_force(A):
    sets = [to_set(m) for m in A.members]
    assert {to_set(m) for m in shadow(A, "lower").members} == lower_shadow(sets)
    assert {to_set(m) for m in shadow(A, "upper").members} == upper_shadow(sets, A.n)


@settings(max_examples=150, deadline=None)
@given(uniform_families(), st.sampled_from(["lower", "upper"]))
def test_closure_matches_brute_force(A, direction):
    k = A.uniform_layer()
    sets = [to_set(m) for m in A.members]
    expected = closure_bf(sets, A.n, k, direction == "lower")
    assert {to_set(m) for m in closure(A, direction).members} == expected


@settings(max_examples=100, deadline=None)
@given(uniform_families(), st.sampled_from(["lower", "upper"]))
def test_closure_is_idempotent_extensive_and_shadow_preserving(A, direction):
    C = closure(A, direction)
    assert A.issubset(C)
    assert closure(C, direction) == C
    assert is_closed(C, direction)
    assert shadow(C, direction) == shadow(A, direction)


@settings(max_examples=150, deadline=None)
@given(uniform_families(), st.sampled_from(["lower", "upper"]))
def test_components_match_brute_force(A, direction):
    sets = [to_set(m) for m in A.members]
    expected = sorted(sorted(to_mask(s) for s in c) for c in components_bf(sets, direction == "lower"))
    got = sorted(list(c.members) for c in two_linked_components(A, direction))
    assert got == expected


def test_components_ordered_by_smallest_member():
    rng = random.Random(3)
    A = uniform_family(rng, 7, 3, 6)
    comps = two_linked_components(A, "lower")
    mins = [c.members[0] for c in comps]
    assert mins == sorted(mins)
    assert sum(len(c) for c in comps) == len(A)


def test_degree():
    Y = Family.layer(5, 2)
    v = Subset.from_elements([1, 2, 3], 5)
    assert degree(v, Y) == 3
    assert degree(v.mask, Family.layer(5, 4)) == 2
    with pytest.raises(PreconditionError):
        degree(v, Family.layer(5, 3))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_middle_graph_is_k_regular(k):
    M = MiddleGraph(k)
    assert len(M.upper) == len(M.lower) == M.part_size
    for v in M.upper + M.lower:
        assert len(M.neighbors(v)) == k


def test_middle_graph_neighbourhood_is_shadow():
    M = MiddleGraph(3)
    A = Family(M.n, M.upper[:4])
    assert M.N(A.members) == set(shadow(A).members)
    assert M.d(M.upper[0], set(M.lower)) == 3


def test_family_file_roundtrip(tmp_path):
    A = Family.of(6, [1, 2], [3, 4, 5], [], [6])
    for form in ("text", "hex"):
        path = tmp_path / f"fam.{form}"
        write_family(path, A, form)
        assert read_family(path, 6) == A


def test_read_family_reports_line_number():
    with pytest.raises(ValueError, match="line 3"):
        read_family(["# header", "{1,2}", "{1,9}"], 4)


def test_layer_masks_match_combinations():
    assert sorted(to_mask(s) for s in subsets_of(6, 3)) == layer_masks(6, 3)
    assert format_mask(0) == "{}"
