"""Exact maximum antichains of subfamilies of P(n).

The general solver uses Dilworth's theorem: the width of a finite poset is
``|X| - ν`` where ν is a maximum matching in the bipartite split graph of the
strict-containment relation (already transitive, so no closure is needed).
A witness antichain is read off a minimum vertex cover (König).
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_bipartite_matching

from .errors import GuardExceeded, PreconditionError
from .lattice import Family, format_mask, lower_neighbors, popcount, shadow_direction, upper_neighbors

SIZE_GUARD = 50_000
PAIR_GUARD = 100_000_000
EXHAUSTIVE_MAX_N = 8
_CHUNK = 1 << 22


@dataclass(frozen=True)
class AntichainResult:
    width: int
    witness: Family
    solver_stats: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "n": self.witness.n,
            "witness": self.witness.to_text_lines(),
            "solver_stats": self.solver_stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def is_antichain(masks) -> bool:
    ms = list(masks)
    for i, u in enumerate(ms):
        for v in ms[i + 1:]:
            if u & v in (u, v):
                return False
    return True


def _comparability_edges(masks: np.ndarray, pair_guard: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j) with masks[i] a proper subset of masks[j].

    Edges are generated per pair of distinct layers present, in row chunks
    so the dense comparison block stays bounded.
    """
    pops = np.array([popcount(int(m)) for m in masks], dtype=np.int64)
    layers = np.unique(pops)
    idx = {int(k): np.flatnonzero(pops == k) for k in layers}
    rows, cols = [], []
    total = 0
    for a, ka in enumerate(layers):
        ia = idx[int(ka)]
        lo = masks[ia]
        for kb in layers[a + 1:]:
            ib = idx[int(kb)]
            hi = masks[ib]
            step = max(1, _CHUNK // max(1, len(ib)))
            for s in range(0, len(ia), step):
                block = lo[s:s + step, None]
                r, c = np.nonzero((block & hi[None, :]) == block)
                total += len(r)
                if total > pair_guard:
                    raise GuardExceeded(
                        "comparability pairs", total, pair_guard,
                        "use max_antichain_bipartite on a two-layer restriction",
                    )
                rows.append(ia[s + r])
                cols.append(ib[c])
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def _koenig_free_sides(rows: np.ndarray, cols: np.ndarray, n_left: int, n_right: int):
    """Maximum matching plus the alternating-reachability sets for König.

    Returns (matching_size, Z_left, Z_right) where Z is the set of vertices
    reachable from unmatched left vertices by alternating paths.  The minimum
    vertex cover is (L \\ Z) ∪ (R ∩ Z).
    """
    if len(rows) == 0:
        return 0, np.ones(n_left, bool), np.zeros(n_right, bool)
    g = csr_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(n_left, n_right))
    match_left = maximum_bipartite_matching(g, perm_type="column")
    size = int(np.count_nonzero(match_left >= 0))
    match_right = np.full(n_right, -1, np.int64)
    ml = np.flatnonzero(match_left >= 0)
    match_right[match_left[ml]] = ml
    # nodes: left 0..L-1, right L..L+R-1, source L+R
    src = n_left + n_right
    free_left = np.flatnonzero(match_left < 0)
    mr = np.flatnonzero(match_right >= 0)
    e_from = np.concatenate([rows, n_left + mr, np.full(len(free_left), src)])
    e_to = np.concatenate([n_left + cols, match_right[mr], free_left])
    d = csr_matrix((np.ones(len(e_from), np.int8), (e_from, e_to)), shape=(src + 1, src + 1))
    reached = breadth_first_order(d, src, directed=True, return_predecessors=False)
    z = np.zeros(src + 1, bool)
    z[reached] = True
    return size, z[:n_left], z[n_left:src]


def max_antichain(
    X: Family, size_guard: int = SIZE_GUARD, pair_guard: int = PAIR_GUARD
) -> AntichainResult:
    """Exact width and one maximum antichain of ``X`` ⊆ P(n)."""
    t0 = time.perf_counter()
    if len(X) > size_guard:
        raise GuardExceeded(
            "|X|", len(X), size_guard, "use max_antichain_bipartite on a two-layer restriction"
        )
    if len(X) == 0:
        return AntichainResult(0, Family(X.n), {"matching_size": 0, "edges": 0, "phases": None,
                                                "elapsed_s": 0.0, "engine": "scipy-hopcroft-karp"})
    masks = np.array(X.members, dtype=np.uint64)
    rows, cols = _comparability_edges(masks, pair_guard)
    N = len(masks)
    nu, zl, zr = _koenig_free_sides(rows, cols, N, N)
    keep = zl & ~zr
    witness = Family(X.n, tuple(int(m) for m in masks[keep]))
    assert len(witness) == N - nu
    stats = {
        "matching_size": nu,
        "edges": int(len(rows)),
        "phases": None,
        "elapsed_s": time.perf_counter() - t0,
        "engine": "scipy-hopcroft-karp",
    }
    return AntichainResult(N - nu, witness, stats)


def _two_layers(X: Family) -> tuple[int, int]:
    layers = X.layers
    if len(layers) > 2 or (len(layers) == 2 and layers[1] - layers[0] != 1):
        raise PreconditionError(f"expected at most two adjacent layers, got {layers}")
    if not layers:
        return 0, 1
    if len(layers) == 1:
        k = layers[0]
        return (k, k + 1) if k < X.n else (k - 1, k)
    return layers[0], layers[1]


def max_antichain_bipartite(X: Family) -> AntichainResult:
    """Maximum independent set of the containment graph on two adjacent layers."""
    t0 = time.perf_counter()
    lo_k, hi_k = _two_layers(X)
    lower = [m for m in X.members if popcount(m) == lo_k]
    upper = [m for m in X.members if popcount(m) == hi_k]
    pos = {m: i for i, m in enumerate(upper)}
    rows, cols = [], []
    for i, u in enumerate(lower):
        for v in upper_neighbors(u, X.n):
            j = pos.get(v)
            if j is not None:
                rows.append(i)
                cols.append(j)
    r = np.asarray(rows, np.int64)
    c = np.asarray(cols, np.int64)
    nu, zl, zr = _koenig_free_sides(r, c, len(lower), len(upper))
    wit = [m for m, z in zip(lower, zl) if z] + [m for m, z in zip(upper, zr) if not z]
    witness = Family(X.n, tuple(wit))
    stats = {
        "matching_size": nu,
        "edges": len(rows),
        "phases": None,
        "elapsed_s": time.perf_counter() - t0,
        "engine": "scipy-hopcroft-karp",
        "layers": [lo_k, hi_k],
    }
    return AntichainResult(len(X) - nu, witness, stats)


def closed_decomposition_holds(X: Family, witness: Family) -> bool:
    """Check that a two-layer witness is ``A ∪ (X_lower \\ N(A))`` with A closed in X.

    ``A`` is the upper part of the witness; neighbourhoods and closedness are
    taken inside the subgraph induced by ``X``.
    """
    lo_k, hi_k = _two_layers(X)
    A = {m for m in witness.members if popcount(m) == hi_k}
    lower_x = {m for m in X.members if popcount(m) == lo_k}
    NA = {u for v in A for u in lower_neighbors(v) if u in lower_x}
    if {m for m in witness.members if popcount(m) == lo_k} != lower_x - NA:
        return False
    for v in X.members:
        if popcount(v) == hi_k and v not in A:
            if all(u in NA for u in lower_neighbors(v) if u in lower_x):
                return False
    return True


# ---------------------------------------------------------------- special sets


@dataclass(frozen=True)
class SpecialSets:
    layer: int
    direction: str
    isolated: Family
    nearly_isolated: Family
    neighbor_counts: dict = field(default_factory=dict, compare=False)


def find_special(X: Family, n: int, k: int) -> SpecialSets:
    """Isolated (0) and nearly isolated (<= 1) members of layer ``k`` of X.

    Counts are neighbours present in X in the shadow direction toward the
    middle.
    """
    if X.n != n:
        raise ValueError(f"family is over [{X.n}], not [{n}]")
    direction = shadow_direction(n, k, strict=True)
    xs = X.mask_set
    counts = {}
    for v in X.members:
        if popcount(v) != k:
            continue
        nbrs = lower_neighbors(v) if direction == "lower" else upper_neighbors(v, n)
        counts[v] = sum(1 for u in nbrs if u in xs)
    iso = Family(n, tuple(v for v, c in counts.items() if c == 0))
    near = Family(n, tuple(v for v, c in counts.items() if c <= 1))
    return SpecialSets(k, direction, iso, near, counts)


# ---------------------------------------------------------------- verdicts


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    HOLDS_UNIQUELY = "holds_uniquely"


@dataclass(frozen=True)
class ConclusionCheck:
    verdict: Verdict
    width: int
    reference: int
    layer: Optional[int]
    witness: Family

    @property
    def holds(self) -> bool:
        return self.verdict is not Verdict.FAILS


def middle_layers(n: int) -> list[int]:
    return sorted({n // 2, (n + 1) // 2})


def _incomparable(X: Family, v: int) -> Family:
    return Family(X.n, tuple(u for u in X.members if u != v and u & v not in (u, v)))


def antichain_support(X: Family, width: Optional[int] = None) -> Family:
    """Union of all maximum antichains: members lying in some maximum antichain."""
    if width is None:
        width = max_antichain(X).width
    return Family(X.n, tuple(v for v in X.members
                             if 1 + max_antichain(_incomparable(X, v)).width == width))


def _only_layer_antichains(support: Family, width: int, mids: list[int]) -> bool:
    layers = support.layers
    if any(k not in mids for k in layers):
        return False
    if len(layers) <= 1:
        return True
    P = support.in_layer(layers[0]).members
    Q = support.in_layer(layers[1]).members
    if len(P) < width or len(Q) < width:
        return False
    # |P| = |Q| = width and there is a perfect matching.  P and Q are the only
    # maximum independent sets iff no proper nonempty tight subset of Q exists,
    # i.e. the matching-alternation digraph on Q is strongly connected.
    qpos = {m: i for i, m in enumerate(Q)}
    rows, cols = [], []
    for i, u in enumerate(P):
        for v in upper_neighbors(u, support.n):
            j = qpos.get(v)
            if j is not None:
                rows.append(i)
                cols.append(j)
    g = csr_matrix((np.ones(len(rows), np.int8), (rows, cols)), shape=(len(P), len(Q)))
    match_p = maximum_bipartite_matching(g, perm_type="column")
    if np.any(match_p < 0):
        return False
    mate_of_p = {i: int(match_p[i]) for i in range(len(P))}
    d_from = [j for i, j in zip(rows, cols) if mate_of_p[i] != j]
    d_to = [mate_of_p[i] for i, j in zip(rows, cols) if mate_of_p[i] != j]
    d = csr_matrix((np.ones(len(d_from), np.int8), (d_from, d_to)), shape=(len(Q), len(Q)))
    ncomp, _ = connected_components(d, directed=True, connection="strong")
    return ncomp == 1


def _check_exhaustive(X: Family, exhaustive: bool) -> None:
    if exhaustive and X.n > EXHAUSTIVE_MAX_N:
        raise PreconditionError(f"exhaustive mode supports n <= {EXHAUSTIVE_MAX_N}, got n = {X.n}")


def check_main_conclusion(X: Family, exhaustive: bool = False) -> ConclusionCheck:
    """Is the width of X attained by a middle layer?

    ``holds_uniquely`` (exhaustive mode) additionally certifies that every
    maximum antichain is the full intersection of X with a middle layer.
    """
    _check_exhaustive(X, exhaustive)
    res = max_antichain(X)
    mids = middle_layers(X.n)
    sizes = {m: X.layer_histogram[m] for m in mids}
    best = max(mids, key=lambda m: (sizes[m], -m))
    ref = sizes[best]
    if res.width != ref:
        return ConclusionCheck(Verdict.FAILS, res.width, ref, best, res.witness)
    verdict = Verdict.HOLDS
    if exhaustive and _only_layer_antichains(antichain_support(X, res.width), res.width, mids):
        verdict = Verdict.HOLDS_UNIQUELY
    return ConclusionCheck(verdict, res.width, ref, best, res.witness)


def hit_ground(X: Family, m: int) -> Family:
    """X ∩ layer m together with the nearly isolated members of layers m ± 1."""
    parts = list(X.in_layer(m).members)
    for k in (m - 1, m + 1):
        if 0 <= k <= X.n and X.layer_histogram[k]:
            parts.extend(find_special(X, X.n, k).nearly_isolated.members)
    return Family(X.n, tuple(parts))


def check_hit_conclusion(X: Family, exhaustive: bool = False) -> ConclusionCheck:
    """Width identity with a middle layer plus nearly isolated neighbours.

    Outside exhaustive mode only the implied identity
    ``w(X) = w(hit_ground(X, m))`` for some middle ``m`` is certified.
    """
    _check_exhaustive(X, exhaustive)
    res = max_antichain(X)
    best_m, best_w = None, -1
    for m in middle_layers(X.n):
        ground = hit_ground(X, m)
        w = max_antichain(ground).width
        if w > best_w:
            best_m, best_w = m, w
    if best_w != res.width:
        return ConclusionCheck(Verdict.FAILS, res.width, best_w, best_m, res.witness)
    verdict = Verdict.HOLDS
    if exhaustive:
        support = antichain_support(X, res.width).mask_set
        for m in middle_layers(X.n):
            if support <= hit_ground(X, m).mask_set:
                verdict = Verdict.HOLDS_UNIQUELY
                break
    return ConclusionCheck(verdict, res.width, best_w, best_m, res.witness)


def witness_lines(A: Family) -> list[str]:
    return [format_mask(m) for m in A.members]
