"""Shadow and expansion bounds, and log2-count ("cost") calculators.

Natural logarithms are used for the middle-graph expansion bounds, base-2
logarithms for costs.  Counts that may overflow a double are handled in log
space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import PreconditionError

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
EXACT_SUM_LIMIT = 10_000


def gen_binomial(z: float, k: int) -> float:
    """Generalized binomial z(z-1)...(z-k+1)/k! for real z."""
    if k < 0:
        raise ValueError("k must be non-negative")
    num = 1.0
    for i in range(k):
        num *= z - i
    return num / math.factorial(k) if k <= 170 else math.exp(log_gen_binomial(z, k))


def log_gen_binomial(z: float, k: int) -> float:
    """Natural log of gen_binomial(z, k), valid for z > k - 1."""
    if k == 0:
        return 0.0
    if z <= k - 1:
        raise ValueError("log_gen_binomial needs z > k - 1")
    return math.lgamma(z + 1) - math.lgamma(z - k + 1) - math.lgamma(k + 1)


def log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def invert_gen_binomial(a: float, k: int, hi: float) -> float:
    """Largest z in [k, hi] (to BISECT_TOL) with gen_binomial(z, k) <= a.

    Works in log space so that very large ``a`` stay representable.
    """
    if k == 0:
        raise ValueError("k must be positive")
    target = math.log(a)
    lo = float(k)
    if target <= 0.0:
        return lo
    if log_gen_binomial(hi, k) <= target:
        return float(hi)
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if log_gen_binomial(mid, k) <= target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class BoundReport:
    """A lower bound on a shadow/neighbourhood quantity.

    For ``iso_log`` the bounded quantity is ``t = |N(A)| - |A|``; for
    ``iso_small_a`` it is ``|N(A)|``; for the other two kinds it is
    ``|lower shadow of A|``.
    """

    a: int
    k: int
    n: int
    kind: str
    value: float
    z: Optional[float] = None
    actual: Optional[float] = None

    @property
    def slack(self) -> Optional[float]:
        return None if self.actual is None else self.actual - self.value

    def with_actual(self, actual: float) -> "BoundReport":
        return BoundReport(self.a, self.k, self.n, self.kind, self.value, self.z, actual)


def kk_shadow_bound(a: int, k: int, n: int, actual: Optional[int] = None) -> BoundReport:
    """Lovász form of Kruskal-Katona: |lower shadow| >= C(z, k-1) when |A| = C(z, k)."""
    if not 1 <= k <= n:
        raise PreconditionError(f"layer k={k} outside [1, {n}]")
    top = math.comb(n, k)
    if not 1 <= a <= top:
        raise PreconditionError(f"a={a} outside [1, C({n},{k})={top}]")
    if a == top:
        z = float(n)
    else:
        z = invert_gen_binomial(a, k, float(n))
    return BoundReport(a, k, n, "kk_exact_inversion", gen_binomial(z, k - 1), z, actual)


def expansion_bound(a: int, k: int, n: int, actual: Optional[int] = None) -> BoundReport:
    """The ``(1 + 1/k)|A|`` corollary, valid for layers strictly above ceil(n/2)."""
    if not k > (n + 1) // 2:
        raise PreconditionError(f"expansion corollary needs k > ceil(n/2), got k={k}, n={n}")
    if not 1 <= a <= math.comb(n, k):
        raise PreconditionError(f"a={a} outside [1, C({n},{k})]")
    return BoundReport(a, k, n, "expansion_1_over_k", (1 + 1 / k) * a, None, actual)


@dataclass(frozen=True)
class IsoBounds:
    iso_log: BoundReport
    small_a: Optional[BoundReport]


def iso_bounds(a: int, k: int) -> IsoBounds:
    """Expansion lower bounds for ``A ⊆ L_k`` of the middle-two-layers graph."""
    if k < 1:
        raise PreconditionError("k must be positive")
    n = 2 * k - 1
    if not 1 <= a <= math.comb(n, k):
        raise PreconditionError(f"a={a} outside [1, C({n},{k})]")
    log_ratio = log_binom(n, k) - math.log(a)
    if a == math.comb(n, k):
        log_ratio = 0.0
    iso = BoundReport(a, k, n, "iso_log", a * log_ratio / k)
    small = None
    if a <= k:
        small = BoundReport(a, k, n, "iso_small_a", float(k * a - math.comb(a, 2)))
    return IsoBounds(iso, small)


# ---------------------------------------------------------------- costs


@dataclass(frozen=True)
class CostEntry:
    label: str
    bits: float
    approx: bool = False

    def __post_init__(self):
        if self.bits < 0:
            raise ValueError(f"cost entry {self.label!r} is negative: {self.bits}")


@dataclass
class CostLedger:
    entries: list[CostEntry] = field(default_factory=list)

    def add(self, entry: CostEntry) -> CostEntry:
        self.entries.append(entry)
        return entry

    def extend(self, entries: Iterable[CostEntry]) -> None:
        self.entries.extend(entries)

    @property
    def total(self) -> float:
        return math.fsum(e.bits for e in self.entries)

    def __getitem__(self, label: str) -> CostEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def to_list(self) -> list[dict]:
        return [{"label": e.label, "bits": e.bits} for e in self.entries]

    def to_json(self) -> str:
        return json.dumps(self.to_list())


def log2_binom(N: int, m: int) -> float:
    if not 0 <= m <= N:
        raise ValueError(f"need 0 <= m <= N, got N={N}, m={m}")
    if m == 0 or m == N:
        return 0.0
    if N <= 100_000:
        return math.log2(math.comb(N, m))
    return log_binom(N, m) / math.log(2)


def _binom_row(N: int, m: int):
    """C(N, 0), ..., C(N, m) by the multiplicative recurrence."""
    c = 1
    for i in range(m + 1):
        yield c
        c = c * (N - i) // (i + 1)


def log2_binom_le(N: int, m: int) -> tuple[float, bool]:
    """log2 of sum_{i<=m} C(N, i); second item flags the entropy bound."""
    if N < 0 or m < 0:
        raise ValueError(f"need N, m >= 0, got N={N}, m={m}")
    m = min(m, N)
    if m == 0:
        return 0.0, False
    if N <= EXACT_SUM_LIMIT:
        if 2 * m >= N:
            total = (1 << N) - sum(_binom_row(N, N - m - 1))
        else:
            total = sum(_binom_row(N, m))
        return math.log2(total), False
    return min(float(N), m * math.log2(math.e * N / m)), True


def tree_bits(d: int, a: int) -> float:
    """log2 (e d)^(a-1): bound on rooted trees with ``a`` vertices, max degree ``d``."""
    if d < 1 or a < 1:
        raise ValueError(f"need d >= 1 and a >= 1, got d={d}, a={a}")
    return (a - 1) * math.log2(math.e * d)


def cost_log2(label: str, kind: str, *, N: int = 0, m: int = 0, d: int = 1, a: int = 1) -> CostEntry:
    """Cost of one choice, in bits.

    kind is one of ``binom`` (C(N, m)), ``binom_le`` (C(N, <= m)), ``tree``
    (rooted trees, (e d)^(a-1)) or ``subset`` (any subset of an N-set).
    """
    if kind == "binom":
        return CostEntry(label, log2_binom(N, m))
    if kind == "binom_le":
        bits, approx = log2_binom_le(N, m)
        return CostEntry(label, bits, approx)
    if kind == "tree":
        return CostEntry(label, tree_bits(d, a))
    if kind == "subset":
        if N < 0:
            raise ValueError("N must be non-negative")
        return CostEntry(label, float(N))
    raise ValueError(f"unknown cost kind {kind!r}")


def small_a_cost(k: int, a: int) -> float:
    """Exact tree-count cost of a 2-linked A ⊆ L_k with |A| = a."""
    n = 2 * k - 1
    return log2_binom(n, k) + tree_bits(max(1, k * (k - 1)), a)


def small_a_cost_bound(k: int, a: int) -> float:
    return 2 * k + 3 * a * math.log2(k)
