"""Brute-force reference implementations used only by the tests.

Each works straight from the definitions, on element sets rather than the
package's bitmask helpers, so a bug in the library cannot hide in both.
"""

from __future__ import annotations

from itertools import combinations
from math import comb


def subsets_of(n: int, k: int) -> list[frozenset[int]]:
    return [frozenset(c) for c in combinations(range(1, n + 1), k)]


def to_mask(s) -> int:
    return sum(1 << (e - 1) for e in s)


def to_set(mask: int) -> frozenset[int]:
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def lower_shadow(A) -> set[frozenset[int]]:
    return {s - {e} for s in A for e in s}


def upper_shadow(A, n: int) -> set[frozenset[int]]:
    return {s | {e} for s in A for e in range(1, n + 1) if e not in s}


def closure_bf(A, n: int, k: int, lower: bool) -> set[frozenset[int]]:
    sh = lower_shadow(A) if lower else upper_shadow(A, n)
    out = set()
    for v in subsets_of(n, k):
        nb = lower_shadow([v]) if lower else upper_shadow([v], n)
        if nb <= sh:
            out.add(v)
    return out


def components_bf(A, lower: bool) -> list[set[frozenset[int]]]:
    """Components of the graph joining u, v when their shadows meet."""
    A = list(A)
    k = len(A[0]) if A else 0
    target = k - 1 if lower else k + 1

    def linked(u, v):
        return len(u & v) == target if lower else len(u | v) == target

    seen, comps = set(), []
    for s in A:
        if s in seen:
            continue
        comp, stack = {s}, [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for v in A:
                if v not in seen and linked(u, v):
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def comparable(u: frozenset, v: frozenset) -> bool:
    return u <= v or v <= u


def width_bf(sets) -> int:
    """Maximum independent set of the comparability graph by branching."""
    sets = list(sets)
    N = len(sets)
    adj = [0] * N
    for i in range(N):
        for j in range(N):
            if i != j and comparable(sets[i], sets[j]):
                adj[i] |= 1 << j
    best = 0

    def go(cand: int, size: int) -> None:
        nonlocal best
        if cand == 0:
            best = max(best, size)
            return
        if size + bin(cand).count("1") <= best:
            return
        low = cand & -cand
        i = low.bit_length() - 1
        go(cand & ~low & ~adj[i], size + 1)
        if adj[i] & cand:
            go(cand & ~low, size)

    go((1 << N) - 1, 0)
    return best


def max_antichains_bf(sets) -> list[frozenset]:
    """Every maximum antichain, for tiny families."""
    sets = list(sets)
    w = width_bf(sets)
    out = []
    for combo in combinations(range(len(sets)), w):
        chosen = [sets[i] for i in combo]
        if all(not comparable(a, b) for a, b in combinations(chosen, 2)):
            out.append(frozenset(chosen))
    return out


def colex_initial_segment(n: int, k: int, a: int) -> list[frozenset[int]]:
    """First a k-sets of [n] in colex order; their shadow is the smallest possible."""
    def key(s):
        return sorted(s, reverse=True)
    return sorted(subsets_of(n, k), key=key)[:a]


def binom_le_bf(N: int, m: int) -> int:
    return sum(comb(N, i) for i in range(min(m, N) + 1))
