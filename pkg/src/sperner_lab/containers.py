"""Executable weak and strong graph containers in the middle-two-layers graph.

For ``A ⊆ L_k`` with ``G = N(A)`` the weak pipeline builds ``(S', F')`` with
``A ⊆ S'`` and ``F' ⊆ G``; the strong pipeline refines it to ``(S, F)`` with
``|S| <= |F| + 2 t psi / (k - psi)`` where ``t = |G| - |A|``.  Existence steps
that rest on averaging are realized by rejection sampling with a slack factor
on the expectation and a retry cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Iterable, Optional

from .bounds import CostEntry, CostLedger, cost_log2, log2_binom, tree_bits
from .errors import PreconditionError, RetryExhausted
from .lattice import Family, MiddleGraph, closure, format_mask, lower_neighbors, popcount, two_linked_components
from .lattice import iter_bits as _bits
from .sampler import RngStream, sample_subset

STAGE_R = 1
STAGE_R_PRIME = 2


@dataclass(frozen=True)
class PipelineParams:
    k: int
    q: Optional[float] = None
    q_prime: Optional[float] = None
    psi: Optional[int] = None
    slack: float = 3.0
    retry_cap: int = 1000

    def __post_init__(self):
        if self.k < 2:
            raise PreconditionError("container pipelines need k >= 2")
        lk = math.log(self.k)
        if self.q is None:
            object.__setattr__(self, "q", 6 * lk ** 5 / self.k ** 3)
        if self.q_prime is None:
            object.__setattr__(self, "q_prime", 5 * lk / self.k)
        if self.psi is None:
            object.__setattr__(self, "psi", math.ceil(lk ** 2))
        object.__setattr__(self, "q", min(1.0, self.q))
        object.__setattr__(self, "q_prime", min(1.0, self.q_prime))
        if not (0 < self.q <= 1 and 0 < self.q_prime <= 1):
            raise PreconditionError(f"sampling probabilities out of range: q={self.q}, q'={self.q_prime}")
        if self.psi >= self.k:
            raise PreconditionError(f"psi={self.psi} must be smaller than k={self.k}")
        if self.retry_cap < 1 or self.slack <= 0:
            raise PreconditionError("retry_cap must be >= 1 and slack > 0")

    @property
    def gh_cut(self) -> float:
        """Minimum number of walks v-x-y-z (x, z in A) for membership in G^h."""
        return self.k ** 3 / (2 * math.log(self.k) ** 4)


def _sorted(s: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(s))


@dataclass
class ContainerTrace:
    """Every intermediary set of one pipeline run, as sorted mask tuples."""

    k: int
    params: PipelineParams
    A: tuple[int, ...]
    G: tuple[int, ...]
    a: int
    g: int
    t: int
    Gh: tuple[int, ...] = ()
    R: tuple[int, ...] = ()
    NR: tuple[int, ...] = ()
    T: tuple[int, ...] = ()
    L: tuple[tuple[int, int], ...] = ()
    F1: tuple[int, ...] = ()
    Q: tuple[int, ...] = ()
    E: tuple[int, ...] = ()
    R1: tuple[int, ...] = ()
    Q1: tuple[int, ...] = ()
    S1: tuple[int, ...] = ()
    retries_R: int = 0
    retries_R1: int = 0
    # strong stage
    H: Optional[tuple[int, ...]] = None
    F2: Optional[tuple[int, ...]] = None
    S2: Optional[tuple[int, ...]] = None
    U: Optional[tuple[int, ...]] = None
    S: Optional[tuple[int, ...]] = None
    F: Optional[tuple[int, ...]] = None
    ledger: Optional[CostLedger] = None

    @property
    def has_weak(self) -> bool:
        return bool(self.S1)

    @property
    def has_strong(self) -> bool:
        return self.S is not None

    @property
    def weak_excess(self) -> int:
        """|S' \\ A|."""
        return len(set(self.S1) - set(self.A))

    @property
    def weak_deficit(self) -> int:
        """|N(A) \\ F'|."""
        return len(set(self.G) - set(self.F1))

    @property
    def strong_gap_bound(self) -> float:
        psi = self.params.psi
        return 2 * self.t * psi / (self.k - psi)

    def to_dict(self) -> dict:
        fam = {}
        names = {"F1": "F'", "R1": "R'", "Q1": "Q'", "S1": "S'", "F2": "F''", "S2": "S''"}
        for key in ("A", "G", "Gh", "R", "NR", "T", "F1", "Q", "E", "R1", "Q1", "S1",
                    "H", "F2", "S2", "U", "S", "F"):
            val = getattr(self, key)
            if val is not None:
                fam[names.get(key, key)] = [format_mask(m) for m in val]
        return {
            "k": self.k,
            "params": asdict(self.params),
            "a": self.a,
            "g": self.g,
            "t": self.t,
            "retries": {"R": self.retries_R, "R'": self.retries_R1},
            "families": fam,
            "L": [[format_mask(u), format_mask(w)] for u, w in self.L],
            "ledger": self.ledger.to_list() if self.ledger else None,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ---------------------------------------------------------------- helpers


def _degree_counts(M: MiddleGraph, vs: Iterable[int]) -> dict[int, int]:
    """For each vertex w of the opposite part, the number of neighbours in ``vs``."""
    out: dict[int, int] = {}
    for v in vs:
        for w in M.neighbors(v):
            out[w] = out.get(w, 0) + 1
    return out


def walk_counts(M: MiddleGraph, A: set[int]) -> dict[int, int]:
    """Number of walks v-x-y-z with x, z in A, for every v in L_{k-1}.

    Two matrix-free passes: ``s[x] = sum_{y ~ x} d(y, A)``, then
    ``walks[v] = sum_{x ~ v, x in A} s[x]``.
    """
    dA = _degree_counts(M, A)
    s = {x: sum(dA[y] for y in lower_neighbors(x)) for x in A}
    walks: dict[int, int] = {}
    for x in A:
        for v in lower_neighbors(x):
            walks[v] = walks.get(v, 0) + s[x]
    return walks


def edge_count_G_to_complement(M: MiddleGraph, A: set[int], G: set[int]) -> int:
    """``|E(G, complement of A)|``."""
    dA = _degree_counts(M, A)
    return sum(M.k - dA.get(y, 0) for y in G)


def _check_A(M: MiddleGraph, A: Family | Iterable[int]) -> set[int]:
    masks = set(A.members if isinstance(A, Family) else A)
    if any(popcount(v) != M.k or v >> M.n for v in masks):
        raise PreconditionError(f"A must lie in L_{M.k} of the middle graph on [{M.n}]")
    return masks


# ---------------------------------------------------------------- weak


def weak_container(A: Family | Iterable[int], params: PipelineParams, rng: RngStream):
    """Build a weak container ``(S', F')`` for a 2-linked ``A ⊆ L_k``.

    Returns ``(S1, F1, trace)`` with ``S1``/``F1`` as Families.  Raises
    :class:`PreconditionError` when a hypothesis fails and
    :class:`RetryExhausted` when rejection sampling gives up.
    """
    k = params.k
    M = MiddleGraph(k)
    Aset = _check_A(M, A)
    a = len(Aset)
    if a == 0:
        raise PreconditionError("A must be nonempty")
    if len(two_linked_components(Family(M.n, tuple(Aset)), "lower")) != 1:
        raise PreconditionError("A must be 2-linked")
    if a < math.log2(k):
        raise PreconditionError(f"hypothesis a >= log2 k fails: a={a}, log2 k={math.log2(k):.3f}")
    G = M.N(Aset)
    g = len(G)
    t = g - a
    if 2 * k * t < a:
        raise PreconditionError(f"hypothesis t >= a/(2k) fails: t={t}, a={a}, k={k}")

    walks = walk_counts(M, Aset)
    cut = params.gh_cut
    Gh = {v for v, w in walks.items() if w >= cut}
    slack = params.slack
    q = params.q
    A_sorted = _sorted(Aset)

    limits_R = {
        "|R| <= slack*a*q": slack * a * q,
        "|L| <= slack*t*k*k*q": slack * t * k * k * q,
        "|Gh - F'| <= slack*max(1, 3t/k^(1/5))": slack * max(1.0, 3 * t / k ** 0.2),
    }
    failed = None
    for attempt in range(params.retry_cap):
        R = sample_subset(A_sorted, q, rng.substream((STAGE_R << 32) | attempt))
        NR = M.N(R)
        NNR = M.N(NR)
        T = M.N(NNR)
        L = [(u, w) for u in sorted(NR) for w in M.neighbors(u) if w not in Aset]
        F1 = M.N(NNR & Aset)
        sizes = (len(R), len(L), len(Gh - F1))
        failed = next((name for name, s, lim in zip(limits_R, sizes, limits_R.values()) if s > lim), None)
        if failed is None:
            retries_R = attempt
            break
    else:
        raise RetryExhausted("R", failed, params.retry_cap)

    dT = _degree_counts(M, T)
    Q = {v for v, d in dT.items() if 2 * d >= k}
    TmG = T - G
    dTmG = _degree_counts(M, TmG)
    E = {v for v in Q - Aset if 4 * dTmG.get(v, 0) >= k}
    qp = params.q_prime
    TmG_sorted = _sorted(TmG)
    e_lim = slack * max(1.0, len(E) * (1 - qp) ** (k / 4))
    limits_R1 = {
        "|R'| <= slack*q'*|T - G|": slack * qp * len(TmG),
        "|E - N(R')| <= slack*max(1, |E|(1-q')^(k/4))": e_lim,
    }
    for attempt in range(params.retry_cap):
        R1 = sample_subset(TmG_sorted, qp, rng.substream((STAGE_R_PRIME << 32) | attempt))
        NR1 = M.N(R1)
        sizes = (len(R1), len(E - NR1))
        failed = next((name for name, s, lim in zip(limits_R1, sizes, limits_R1.values()) if s > lim), None)
        if failed is None:
            retries_R1 = attempt
            break
    else:
        raise RetryExhausted("R'", failed, params.retry_cap)

    Q1 = Q - NR1
    S1 = Q1 | Aset
    trace = ContainerTrace(
        k=k, params=params, A=A_sorted, G=_sorted(G), a=a, g=g, t=t,
        Gh=_sorted(Gh), R=_sorted(R), NR=_sorted(NR), T=_sorted(T), L=tuple(L),
        F1=_sorted(F1), Q=_sorted(Q), E=_sorted(E), R1=_sorted(R1), Q1=_sorted(Q1),
        S1=_sorted(S1), retries_R=retries_R, retries_R1=retries_R1,
    )
    return Family(M.n, trace.S1), Family(M.n, trace.F1), trace


# ---------------------------------------------------------------- strong


def strong_container(
    A: Family | Iterable[int],
    S1: Family | Iterable[int],
    F1: Family | Iterable[int],
    params: PipelineParams,
    trace: Optional[ContainerTrace] = None,
):
    """Refine a weak container into a strong one ``(S, F)``.

    Greedy scans run in ascending mask order.  Returns ``(S, F, trace)``.
    """
    k, psi = params.k, params.psi
    M = MiddleGraph(k)
    Aset = _check_A(M, A)
    S1set = set(S1.members if isinstance(S1, Family) else S1)
    F1set = set(F1.members if isinstance(F1, Family) else F1)
    G = M.N(Aset)
    if not Aset <= S1set or not F1set <= G:
        raise PreconditionError("malformed weak container: need A ⊆ S' and F' ⊆ N(A)")
    if any(popcount(v) != k for v in S1set) or any(popcount(v) != k - 1 for v in F1set):
        raise PreconditionError("malformed weak container: S' ⊆ L_k and F' ⊆ L_{k-1} required")

    missing = G - F1set
    H = []
    for v in sorted(Aset):
        nb = [u for u in lower_neighbors(v) if u in missing]
        if len(nb) > psi:
            H.append(v)
            missing.difference_update(lower_neighbors(v))
    F2 = F1set | M.N(H)

    dF2 = _degree_counts(M, F2)
    S2 = {v for v, d in dF2.items() if d >= k - psi}

    remaining = set(S2)
    U = []
    for v in sorted(M.N(S2) - G):
        if M.d(v, remaining) > psi:
            U.append(v)
            remaining.difference_update(M.neighbors(v))
    S = remaining
    dS = _degree_counts(M, S)
    F = F2 | {v for v, d in dS.items() if d > psi}

    if trace is None:
        a = len(Aset)
        trace = ContainerTrace(k=k, params=params, A=_sorted(Aset), G=_sorted(G), a=a,
                               g=len(G), t=len(G) - a, F1=_sorted(F1set), S1=_sorted(S1set))
    trace = replace(trace, H=tuple(H), F2=_sorted(F2), S2=_sorted(S2), U=tuple(U),
                    S=_sorted(S), F=_sorted(F))
    return Family(M.n, trace.S), Family(M.n, trace.F), trace


def run_pipeline(A: Family | Iterable[int], params: PipelineParams, rng: RngStream):
    """Weak then strong container, with the cost ledger attached to the trace."""
    S1, F1, trace = weak_container(A, params, rng)
    S, F, trace = strong_container(trace.A, S1, F1, params, trace)
    trace.ledger = container_cost_report(trace)
    return S, F, trace


# ---------------------------------------------------------------- checks


def trace_invariants(trace: ContainerTrace) -> dict[str, bool]:
    """Evaluate every unconditional invariant the trace supports."""
    M = MiddleGraph(trace.k)
    k, psi = trace.k, trace.params.psi
    A, G = set(trace.A), set(trace.G)
    out: dict[str, bool] = {
        "edge_identity": edge_count_G_to_complement(M, A, G) == trace.t * k,
    }
    if trace.has_weak:
        S1, F1, T = set(trace.S1), set(trace.F1), set(trace.T)
        out.update({
            "A ⊆ S'": A <= S1,
            "F' ⊆ N(A)": F1 <= G,
            "F' ⊆ T": F1 <= T if trace.T else True,
            "Gh ⊆ G": set(trace.Gh) <= G,
        })
    if trace.has_strong:
        F1 = set(trace.F1)
        H, F2, S2, U = set(trace.H), set(trace.F2), set(trace.S2), set(trace.U)
        S, F = set(trace.S), set(trace.F)
        gap = Fraction(len(S) - len(F)) * (k - psi)
        ns2 = M.N(S2)
        dS = _degree_counts(M, S)
        out.update({
            "A ⊆ S''": A <= S2,
            "A ⊆ S": A <= S,
            "F'' ⊆ F": F2 <= F,
            "F ⊆ N(A)": F <= G,
            "U ∩ N(A) = ∅": not (U & G),
            "H ⊆ A": H <= A,
            "U ⊆ N(S'')": U <= ns2,
            "|H| <= ceil(|N(A) - F'|/psi)": len(H) <= -(-len(G - F1) // psi),
            "|U| <= ceil(|S'' - A|/psi)": len(U) <= -(-len(S2 - A) // psi),
            "d(v, N(A) - F'') <= psi on A": all(M.d(v, G - F2) <= psi for v in A),
            "d(v, S) <= psi on complement of G": all(d <= psi for v, d in dS.items() if v not in G),
            "d(v, S) > psi on F - F''": all(dS.get(v, 0) > psi for v in F - F2),
            "|S| <= |F| + 2 t psi/(k - psi)": gap <= 2 * trace.t * psi,
        })
    return out


def failed_invariants(trace: ContainerTrace) -> list[str]:
    return [name for name, ok in trace_invariants(trace).items() if not ok]


@dataclass(frozen=True)
class ContainerReport:
    kind: str
    K: float
    checks: dict
    excess: int
    deficit: int
    t: int
    measured_K: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def verify_container(
    A: Family | Iterable[int],
    S: Family | Iterable[int],
    F: Family | Iterable[int],
    kind: str,
    K: float,
    k: int,
    psi: Optional[int] = None,
) -> ContainerReport:
    """Report-only check of a weak or strong container against ``A``."""
    if kind not in ("weak", "strong"):
        raise ValueError(f"kind must be 'weak' or 'strong', got {kind!r}")
    M = MiddleGraph(k)
    Aset = set(A.members if isinstance(A, Family) else A)
    Sset = set(S.members if isinstance(S, Family) else S)
    Fset = set(F.members if isinstance(F, Family) else F)
    G = M.N(Aset)
    t = len(G) - len(Aset)
    excess = len(Sset - Aset)
    deficit = len(G - Fset)
    if t > 0:
        measured = max(excess, deficit) / t
    else:
        measured = 0.0 if excess == deficit == 0 else math.inf
    checks = {
        "A ⊆ S": Aset <= Sset,
        "F ⊆ N(A)": Fset <= G,
        "|S - A| <= K t": excess <= K * t,
        "|N(A) - F| <= K t": deficit <= K * t,
    }
    if kind == "strong":
        if psi is None:
            psi = math.ceil(math.log(k) ** 2)
        checks["|S| <= |F| + 2 t psi/(k - psi)"] = (len(Sset) - len(Fset)) * (k - psi) <= 2 * t * psi
    return ContainerReport(kind, K, checks, excess, deficit, t, measured)


# ---------------------------------------------------------------- cost


def _forest_bits(M: MiddleGraph, A: set[int], Q1: set[int]) -> tuple[float, int]:
    """Cost of A \\ Q' given Q', via rooted forests in the 2-linked graph."""
    k = M.k
    rest = A - Q1
    roots = A & Q1
    if not rest:
        return 0.0, 0
    d = k * (k - 1)
    if not roots:
        return log2_binom(M.n, k) + tree_bits(d, len(A)), 1
    r = len(two_linked_components(Family(M.n, tuple(rest)), "lower"))
    bits = (
        log2_binom(len(Q1), min(r, len(Q1)))
        + log2_binom(len(rest), r)
        + len(rest) * math.log2(math.e * d)
        + math.log2(len(rest))
    )
    return bits, r


def container_cost_report(trace: ContainerTrace) -> CostLedger:
    """Per-stage cost (bits) from measured set sizes, plus reconstruction of A."""
    if not trace.has_weak or not trace.has_strong:
        raise PreconditionError("cost report needs a complete weak + strong trace")
    M = MiddleGraph(trace.k)
    k = trace.k
    A, G = set(trace.A), set(trace.G)
    ledger = CostLedger()
    ledger.add(cost_log2("R", "binom_le", N=M.part_size, m=len(trace.R)))
    ledger.add(cost_log2("L|R", "binom_le", N=k * len(trace.NR), m=len(trace.L)))
    ledger.add(cost_log2("R'|T", "binom_le", N=len(trace.T), m=len(trace.R1)))
    bits, _ = _forest_bits(M, A, set(trace.Q1))
    ledger.add(CostEntry("A-Q'|Q'", bits))
    ledger.add(cost_log2("H|S'", "binom_le", N=len(trace.S1), m=len(trace.H)))
    ledger.add(cost_log2("U|S''", "binom_le", N=len(M.N(trace.S2)), m=len(trace.U)))
    recon = len(set(trace.S) - A) + len(G - set(trace.F))
    ledger.add(cost_log2("A|S,F", "subset", N=recon))
    return ledger


def reconstruction_bits(A: Iterable[int], S: Iterable[int], F: Iterable[int], k: int) -> int:
    """``t' = |S \\ A| + |N(A) \\ F|``, the bits to recover A from (S, F)."""
    M = MiddleGraph(k)
    Aset = set(A)
    return len(set(S) - Aset) + len(M.N(Aset) - set(F))


# ---------------------------------------------------------------- A generators


def j_neighbors(v: int, n: int) -> list[int]:
    """Sets of the same size sharing a shadow element with ``v`` (swap one element)."""
    free = ((1 << n) - 1) & ~v
    return [base | b for base in lower_neighbors(v) for b in _bits(free)]


def random_two_linked(k: int, size: int, rng: RngStream, close: bool = True) -> Family:
    """Grow a connected set in the 2-linked graph by uniform frontier expansion.

    The root is uniform over L_k; ``close`` replaces the result by its closure.
    """
    M = MiddleGraph(k)
    gen = rng.generator()
    upper = M.upper
    size = max(1, min(size, len(upper)))
    root = upper[int(gen.integers(len(upper)))]
    chosen = {root}
    frontier: list[int] = []
    pos: dict[int, int] = {}

    def push(v: int) -> None:
        for u in j_neighbors(v, M.n):
            if u not in chosen and u not in pos:
                pos[u] = len(frontier)
                frontier.append(u)

    push(root)
    while len(chosen) < size and frontier:
        i = int(gen.integers(len(frontier)))
        v = frontier[i]
        last = frontier.pop()
        if i < len(frontier):
            frontier[i] = last
            pos[last] = i
        del pos[v]
        chosen.add(v)
        push(v)
    A = Family(M.n, tuple(chosen))
    return closure(A, "lower") if close else A


def weak_hypotheses_hold(A: Family, k: int) -> bool:
    M = MiddleGraph(k)
    a = len(A)
    if a == 0 or a < math.log2(k):
        return False
    t = len(M.N(A.members)) - a
    return 2 * k * t >= a and len(two_linked_components(A, "lower")) == 1
