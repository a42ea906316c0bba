"""Monte Carlo sweeps, expectation audits, 2-layer scans and inequality audits.

All randomness is drawn from per-trial :class:`~sperner_lab.sampler.RngStream`
values, so results do not depend on worker count or scheduling.  Sweeps
never assert the asymptotic thresholds; they report counts.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .antichain import check_hit_conclusion, check_main_conclusion, find_special
from .bounds import expansion_bound, kk_shadow_bound, small_a_cost, small_a_cost_bound
from .containers import PipelineParams, random_two_linked, run_pipeline, trace_invariants, weak_hypotheses_hold
from .errors import PreconditionError, RetryExhausted, SpernerLabError
from .lattice import (
    Family,
    MiddleGraph,
    layer_masks,
    lower_neighbors,
    popcount,
    shadow_direction,
    two_linked_components,
    upper_neighbors,
)
from .sampler import bernoulli_mask, derive_stream, sample_family

CSV_COLUMNS = (
    "kind", "n_or_k", "p", "trials", "holds", "fails", "errors",
    "mean_width", "mean_isolated", "mean_nearly_isolated", "master_seed",
)


def trial_stream_id(n: int, p: float, trial: int) -> int:
    """Stream id of one sweep trial; shared by main and hit sweeps on purpose."""
    digest = hashlib.blake2b(f"{n}|{float(p)!r}|{trial}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class SweepRow:
    kind: str
    n_or_k: int
    p: float
    trials: int
    holds: int
    fails: int
    errors: int
    mean_width: float
    mean_isolated: float
    mean_nearly_isolated: float
    master_seed: int
    three_layer_witnesses: int = 0
    mean_defect_pairs: float = 0.0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def holds_fraction(self) -> float:
        return self.holds / self.trials if self.trials else 0.0

    def binomial_sigma(self) -> float:
        f = self.holds_fraction
        return math.sqrt(f * (1 - f) / self.trials) if self.trials else 0.0

    def to_dict(self) -> dict:
        d = {c: getattr(self, c) for c in CSV_COLUMNS}
        d["three_layer_witnesses"] = self.three_layer_witnesses
        d["mean_defect_pairs"] = self.mean_defect_pairs
        return d


def count_defect_pairs(X: Family) -> int:
    """Pairs u, v in layer ceil(n/2)+1 of X sharing a subset u' in X, with at
    most one other X-subset of u or v in layer ceil(n/2).  Data only."""
    n = X.n
    k = (n + 1) // 2
    if k + 1 > n:
        return 0
    xs = X.mask_set
    count = 0
    for u1 in X.members:
        if popcount(u1) != k:
            continue
        sups = [u for u in upper_neighbors(u1, n) if u in xs]
        for u, v in combinations(sups, 2):
            others = {w for w in lower_neighbors(u) if w in xs}
            others.update(w for w in lower_neighbors(v) if w in xs)
            others.discard(u1)
            if len(others) <= 1:
                count += 1
    return count


def special_counts(X: Family) -> tuple[int, int]:
    """Total isolated / nearly isolated members over all layers with a direction."""
    iso = near = 0
    for k in X.layers:
        if 2 * k == X.n:
            continue
        sp = find_special(X, X.n, k)
        iso += len(sp.isolated)
        near += len(sp.nearly_isolated)
    return iso, near


def _run_trial(kind: str, n: int, p: float, trial: int, master_seed: int) -> dict:
    rng = derive_stream(master_seed, trial_stream_id(n, p, trial))
    X = sample_family(f"P({n})", p, rng)
    try:
        check = check_main_conclusion(X) if kind == "main" else check_hit_conclusion(X)
    except SpernerLabError:
        return {"error": True}
    iso, near = special_counts(X)
    layers = check.witness.layers
    return {
        "error": False,
        "holds": check.holds,
        "width": check.width,
        "isolated": iso,
        "nearly": near,
        "three_layer": not layers or layers[-1] - layers[0] <= 2,
        "defects": count_defect_pairs(X),
    }


def sweep(
    kind: str,
    n_values: Iterable[int],
    p_grid: Sequence[float],
    trials: int,
    master_seed: int,
    threads: int = 1,
) -> list[SweepRow]:
    """Fraction of sampled ``P(n)_p`` satisfying the main or hit conclusion."""
    if kind not in ("main", "hit"):
        raise ValueError(f"kind must be 'main' or 'hit', got {kind!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = []
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for n in n_values:
            for p in p_grid:
                t0 = time.perf_counter()
                args = [(kind, n, float(p), i, master_seed) for i in range(trials)]
                if pool is None:
                    results = [_run_trial(*a) for a in args]
                else:
                    results = list(pool.map(lambda a: _run_trial(*a), args))
                rows.append(_aggregate(kind, n, float(p), trials, master_seed, results,
                                       time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def _aggregate(kind, n, p, trials, seed, results, wall) -> SweepRow:
    ok = [r for r in results if not r["error"]]
    m = len(ok)

    def mean(key):
        return math.fsum(r[key] for r in ok) / m if m else 0.0

    holds = sum(1 for r in ok if r["holds"])
    return SweepRow(
        kind=kind, n_or_k=n, p=p, trials=trials, holds=holds, fails=m - holds,
        errors=trials - m, mean_width=mean("width"), mean_isolated=mean("isolated"),
        mean_nearly_isolated=mean("nearly"), master_seed=seed,
        three_layer_witnesses=sum(1 for r in ok if r["three_layer"]),
        mean_defect_pairs=mean("defects"), wall_time=wall,
    )


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in CSV_COLUMNS)])
    return buf.getvalue()


def rows_to_json(rows: Iterable) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=1, sort_keys=False)


# ---------------------------------------------------------------- audits


@dataclass
class AuditRow:
    id: str
    params: dict
    lhs: float
    rhs: float
    margin: float
    tolerance: float = 0.0
    informational: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "id": self.id, "params": self.params, "lhs": self.lhs, "rhs": self.rhs,
            "margin": self.margin, "pass": self.passed, "informational": self.informational,
            "note": self.note,
        }


def exact_special_expectation(n: int, p: float, layer: int, kind: str) -> float:
    """Expected number of isolated / nearly isolated sets in ``layer`` of P(n)_p."""
    direction = shadow_direction(n, layer, strict=True)
    s = layer if direction == "lower" else n - layer
    per = (1 - p) ** s
    if kind == "nearly_isolated":
        per += s * p * (1 - p) ** (s - 1) if s >= 1 else 0.0
    elif kind != "isolated":
        raise ValueError(f"kind must be 'isolated' or 'nearly_isolated', got {kind!r}")
    return math.comb(n, layer) * p * per


def special_count_samples(n: int, p: float, layer: int, kind: str, trials: int, seed: int,
                          chunk: int = 2048, threads: int = 1) -> np.ndarray:
    """Per-trial counts of isolated / nearly isolated sets, trial i on stream (seed, i).

    Each trial samples all of P(n) (one draw per subset, mask order), so it
    sees exactly the family ``sample_family('P(n)', p, stream)`` would give.
    """
    direction = shadow_direction(n, layer, strict=True)
    cap = 0 if kind == "isolated" else 1
    if kind not in ("isolated", "nearly_isolated"):
        raise ValueError(f"unknown kind {kind!r}")
    vs = np.array(layer_masks(n, layer), dtype=np.int64)
    if direction == "lower":
        nb = np.array([lower_neighbors(int(v)) for v in vs], dtype=np.int64)
    else:
        nb = np.array([upper_neighbors(int(v), n) for v in vs], dtype=np.int64)
    size = 1 << n

    def run(start: int) -> np.ndarray:
        stop = min(trials, start + chunk)
        block = np.stack([bernoulli_mask(size, p, derive_stream(seed, i)) for i in range(start, stop)])
        present = block[:, vs]
        nbr_present = block[:, nb].sum(axis=2) if nb.size else np.zeros(present.shape, np.int64)
        return (present & (nbr_present <= cap)).sum(axis=1)

    starts = range(0, trials, chunk)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts).astype(np.int64)


def expectation_audit(n: int, p: float, layer: int, kind: str, trials: int, seed: int,
                      threads: int = 1) -> AuditRow:
    """Monte Carlo mean vs the closed-form expectation, pass within 4 standard errors."""
    exact = exact_special_expectation(n, p, layer, kind)
    counts = special_count_samples(n, p, layer, kind, trials, seed, threads=threads)
    mean = float(counts.mean())
    sample_se = float(counts.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    # When no trial sees an event the sample stderr is 0; fall back to the
    # variance of independent indicators with the exact per-set probability,
    # which is a lower bound on the true variance under the model.
    sets = math.comb(n, layer)
    per = exact / sets if sets else 0.0
    floor_se = math.sqrt(sets * per * (1 - per) / trials)
    stderr = max(sample_se, floor_se)
    margin = 4 * stderr - abs(mean - exact)
    return AuditRow(
        id=f"expectation.{kind}",
        params={"n": n, "p": p, "layer": layer, "trials": trials, "seed": seed, "stderr": stderr,
                "sample_stderr": sample_se},
        lhs=mean, rhs=exact, margin=margin, tolerance=1e-12,
    )


# ---------------------------------------------------------------- container suite


@dataclass
class ContainerRunRow:
    run: int
    size: int
    a: int
    t: int
    weak_excess: int
    weak_deficit: int
    S: int
    F: int
    measured_K: float
    retries_R: int
    retries_R1: int
    exhausted: str
    failed: list[str]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def container_suite(
    k: int,
    runs: int,
    master_seed: int,
    size_range: tuple[int, int] = (3, 150),
    threads: int = 1,
    retry_cap: int = 1000,
) -> list[ContainerRunRow]:
    """Run the full pipeline on random closed 2-linked A meeting the weak hypotheses.

    Run ``i`` uses stream ``(master_seed, i)``; A is regrown (next substream)
    until the hypotheses hold.  A retry exhaustion is recorded, not raised.
    """
    params = PipelineParams(k, retry_cap=retry_cap)
    lo, hi = size_range

    def one(i: int) -> ContainerRunRow:
        base = derive_stream(master_seed, i)
        gen = base.substream(0).generator()
        for attempt in range(1000):
            size = int(gen.integers(lo, hi + 1))
            A = random_two_linked(k, size, base.substream(1 + attempt))
            if weak_hypotheses_hold(A, k):
                break
        else:
            raise PreconditionError(f"run {i}: no A met the weak hypotheses")
        try:
            S, F, trace = run_pipeline(A, params, base.substream(1 << 20))
        except RetryExhausted as exc:
            return ContainerRunRow(i, size, len(A), 0, 0, 0, 0, 0, 0.0, 0, 0, str(exc), [])
        failed = [name for name, ok in trace_invariants(trace).items() if not ok]
        worst = max(trace.weak_excess, trace.weak_deficit)
        return ContainerRunRow(
            i, size, trace.a, trace.t, trace.weak_excess, trace.weak_deficit, len(S), len(F),
            worst / trace.t if trace.t else 0.0, trace.retries_R, trace.retries_R1, "", failed,
        )

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(runs)))
    return [one(i) for i in range(runs)]


# ---------------------------------------------------------------- 2-layer scan


def expansion_ok(a: int, g: int, k: int) -> bool:
    """``|N(A)| >= (1 + 1/(2k)) |A|`` in exact integer arithmetic."""
    return 2 * k * g >= (2 * k + 1) * a


def closed_families(k: int) -> Iterator[tuple[int, ...]]:
    """All closed A ⊆ L_k of the middle graph, in lectic order (Ganter's NextClosure).

    The number of closed families grows very fast: 187 at k = 3 and several
    million at k = 4.
    """
    M = MiddleGraph(k)
    U = M.upper
    N = len(U)
    nbr = [frozenset(lower_neighbors(m)) for m in U]
    owners: dict[int, list[int]] = {}
    for i in range(N):
        for s in nbr[i]:
            owners.setdefault(s, []).append(i)

    def clo(bits: int) -> int:
        sh: set[int] = set()
        b = bits
        while b:
            low = b & -b
            sh |= nbr[low.bit_length() - 1]
            b ^= low
        out = 0
        for s in sh:
            for j in owners[s]:
                if nbr[j] <= sh:
                    out |= 1 << j
        return out

    A = clo(0)
    while True:
        yield tuple(U[i] for i in range(N) if A >> i & 1)
        for i in range(N - 1, -1, -1):
            if A >> i & 1:
                continue
            B = clo((A & ((1 << i) - 1)) | (1 << i))
            if (B & ~A) & ((1 << i) - 1) == 0:
                A = B
                break
        else:
            return


def enumerate_closed_two_linked(k: int) -> list[tuple[int, ...]]:
    """Closed, 2-linked A ⊆ L_k with |A| > 1 and the expansion precondition."""
    if k > 4:
        raise PreconditionError(f"enumeration mode supports k <= 4, got k = {k}")
    M = MiddleGraph(k)
    out = []
    for A in closed_families(k):
        if len(A) < 2:
            continue
        if not expansion_ok(len(A), len(M.N(A)), k):
            continue
        if len(two_linked_components(Family(M.n, A), "lower")) == 1:
            out.append(A)
    return out


@dataclass
class ScanReport:
    k: int
    p: float
    c: float
    generator: str
    trials: int
    seed: int
    evaluated: int = 0
    violations: int = 0
    skipped: int = 0
    worst_margin: Optional[float] = None
    outside_regime: bool = False

    @property
    def violation_rate(self) -> float:
        return self.violations / self.evaluated if self.evaluated else 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["violation_rate"] = self.violation_rate
        return d


def two_layer_margin(A: Sequence[int], X: set[int], M: MiddleGraph, c: float) -> float:
    """``|N(A) ∩ X| - |A ∩ X| - c (|N(A)| - |A|)``."""
    NA = M.N(A)
    lhs = sum(1 for v in NA if v in X) - sum(1 for v in A if v in X)
    return lhs - c * (len(NA) - len(A))


def two_layer_scan(
    k: int,
    p: float,
    c: float,
    trials: int,
    generator: str,
    seed: int,
    max_size: Optional[int] = None,
) -> ScanReport:
    """Evaluate the 2-layer expansion inequality on sampled ``X = V(M)_p``.

    ``generator`` is ``enumeration`` (every qualifying closed 2-linked A, k <= 4)
    or ``random`` (one grown-and-closed A per trial).  Nothing is asserted.
    """
    M = MiddleGraph(k)
    report = ScanReport(k, p, c, generator, trials, seed, outside_regime=p <= 0.5)
    ground = M.vertices()
    if generator == "enumeration":
        families = enumerate_closed_two_linked(k)
    elif generator == "random":
        families = None
        if max_size is None:
            max_size = max(2, M.part_size // 4)
    else:
        raise ValueError(f"unknown generator {generator!r}")

    def record(m: float) -> None:
        report.evaluated += 1
        if m < 0:
            report.violations += 1
        if report.worst_margin is None or m < report.worst_margin:
            report.worst_margin = m

    for i in range(trials):
        rng = derive_stream(seed, i)
        X = sample_family(ground, p, rng.substream(0)).mask_set
        if families is not None:
            for A in families:
                record(two_layer_margin(A, X, M, c))
            continue
        gen = rng.substream(1).generator()
        size = int(gen.integers(2, max_size + 1))
        A = random_two_linked(k, size, rng.substream(2)).members
        if len(A) < 2 or not expansion_ok(len(A), len(M.N(A)), k):
            report.skipped += 1
            continue
        record(two_layer_margin(A, X, M, c))
    return report


# ---------------------------------------------------------------- inequality audit


def iso_f(y: np.ndarray | float, k: int) -> np.ndarray:
    """``y/(k-y) - (1/k) log(C(2k-1, k) / C(2k-1-y, k))`` for y in [0, k-1]."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    i = np.arange(k, dtype=float)
    base = 2 * k - 1 - i
    # log C(2k-1,k)/C(2k-1-y,k) = -sum_i log1p(-y/(2k-1-i))
    log_ratio = -np.log1p(-y[:, None] / base[None, :]).sum(axis=1)
    return y / (k - y) - log_ratio / k


def small_a_delta(eps: float) -> float:
    return min((eps / 2) / (1 + eps), (eps / 12) ** 2)


def smallest_beating_a(k: int, eps: float, a_max: int) -> Optional[int]:
    """Smallest a >= 2 with (1 + eps/4) k a >= 2k + 3 a log2 k, or None up to a_max."""
    for a in range(2, a_max + 1):
        if (1 + eps / 4) * k * a >= small_a_cost_bound(k, a):
            return a
    return None


def inequality_audit(
    f_ks: Sequence[int] = (5, 10, 50, 1000),
    y_points: int = 1000,
    eps_grid: Sequence[float] = (0.01, 0.1, 0.5),
    small_ks: Sequence[int] = (100, 1000, 10000),
    expansion_ns: Sequence[int] = tuple(range(3, 17)),
    expansion_points: int = 25,
) -> list[AuditRow]:
    """Evaluate the expansion, small-a and constant inequality chains on grids."""
    rows: list[AuditRow] = []
    for k in f_ks:
        ys = np.linspace(0.0, k - 1, y_points)
        fs = iso_f(ys, k)
        tol = 1e-9
        for y, f in zip(ys, fs):
            rows.append(AuditRow("iso.f_nonnegative", {"k": k, "y": float(y)}, float(f), 0.0,
                                 float(f), tol))
        f0 = float(iso_f(0.0, k)[0])
        rows.append(AuditRow("iso.f_zero_at_origin", {"k": k}, f0, 0.0, -abs(f0), 0.0))

    for eps in eps_grid:
        d = small_a_delta(eps)
        b1, b2 = (eps / 2) / (1 + eps), (eps / 12) ** 2
        rows.append(AuditRow("small_a.delta", {"eps": eps, "branch": "sq" if d == b2 else "ratio"},
                             d, min(b1, b2), min(b1 - d, b2 - d)))
        lhs = d * math.log2(4 / d) - (1 + eps) * (1 - d)
        rhs = 3 * math.sqrt(d) - (1 + eps / 2)
        rows.append(AuditRow("small_a.entropy_step", {"eps": eps}, lhs, rhs, rhs - lhs))
        rows.append(AuditRow("small_a.final_step", {"eps": eps}, rhs, -(1 + eps / 4),
                             -(1 + eps / 4) - rhs))
        p = 0.5 + eps
        c = eps ** 2 / 16
        lhs_c = eps ** 2 / 4 - p * eps ** 2 / 16 - eps ** 2 / 8
        rows.append(AuditRow("containers.constant", {"eps": eps, "c": c}, lhs_c, c, lhs_c - c, 1e-15))
        for k in small_ks:
            a_max = int(math.floor(math.log2(k)))
            a_star = smallest_beating_a(k, eps, a_max)
            ok_all = a_star is not None and all(
                (1 + eps / 4) * k * a >= small_a_cost_bound(k, a) for a in range(a_star, a_max + 1)
            )
            margin = float(a_max - a_star) if ok_all else -1.0
            rows.append(AuditRow(
                "small_a.exponent_vs_cost", {"eps": eps, "k": k, "a_max": a_max},
                float(a_star) if a_star is not None else math.inf, float(a_max), margin,
                note="lhs is the smallest a >= 2 at which the exponent beats the cost",
            ))
            two = (1 + eps / 4) * k * 2
            rows.append(AuditRow(
                "small_a.exponent_vs_cost_at_a2", {"eps": eps, "k": k}, two,
                small_a_cost_bound(k, 2), two - small_a_cost_bound(k, 2), informational=True,
                note="finite-k check of the a = 2 case; asymptotic only",
            ))
    for k in small_ks:
        for a in range(1, int(math.floor(math.log2(k))) + 1):
            exact, bound = small_a_cost(k, a), small_a_cost_bound(k, a)
            rows.append(AuditRow("small_a.cost_bound", {"k": k, "a": a}, exact, bound, bound - exact,
                                 1e-9))
    for n in expansion_ns:
        for k in range((n + 1) // 2 + 1, n + 1):
            top = math.comb(n, k)
            grid = sorted({max(1, round(top * j / expansion_points)) for j in range(expansion_points + 1)})
            for a in grid:
                kk = kk_shadow_bound(a, k, n).value
                ex = expansion_bound(a, k, n).value
                rows.append(AuditRow("expansion.kk_vs_1_over_k", {"n": n, "k": k, "a": a}, kk, ex,
                                     kk - ex, 1e-9 * a))
    return rows


def audit_failures(rows: Iterable[AuditRow]) -> list[AuditRow]:
    return [r for r in rows if not r.informational and not r.passed]


def audit_rows_to_csv(rows: Iterable[AuditRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "params", "lhs", "rhs", "margin", "pass", "informational"])
    for r in rows:
        w.writerow([r.id, json.dumps(r.params, sort_keys=True), repr(r.lhs), repr(r.rhs),
                    repr(r.margin), r.passed, r.informational])
    return buf.getvalue()

