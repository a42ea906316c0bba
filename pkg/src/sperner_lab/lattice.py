"""Set algebra on the Boolean lattice P(n) and the middle-two-layers graph.

Subsets of ``[n]`` are encoded as integer bit masks: bit ``i`` set means the
element ``i + 1`` is present.  Families are immutable, deduplicated and kept
sorted by mask so that every downstream greedy scan is reproducible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, Literal, Optional, Union

from .errors import NonUniformFamilyError, PreconditionError

MAX_N = 63

Direction = Literal["lower", "upper", "auto"]


def check_n(n: int) -> int:
    if not isinstance(n, int) or not 1 <= n <= MAX_N:
        raise ValueError(f"ground-set size must satisfy 1 <= n <= {MAX_N}, got {n!r}")
    return n


def popcount(mask: int) -> int:
    return mask.bit_count()


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the single-bit masks that make up ``mask``, lowest first."""
    while mask:
        low = mask & -mask
        yield low
        mask ^= low


def lower_neighbors(mask: int) -> list[int]:
    """All sets obtained from ``mask`` by deleting one element."""
    return [mask ^ b for b in iter_bits(mask)]


def upper_neighbors(mask: int, n: int) -> list[int]:
    """All sets obtained from ``mask`` by adding one element of ``[n]``."""
    free = ((1 << n) - 1) & ~mask
    return [mask | b for b in iter_bits(free)]


def layer_masks(n: int, k: int) -> list[int]:
    """All k-subsets of [n] in increasing mask order."""
    check_n(n)
    if not 0 <= k <= n:
        return []
    out = [sum(1 << i for i in c) for c in combinations(range(n), k)]
    out.sort()
    return out


def shadow_direction(n: int, k: int, strict: bool = False) -> str:
    """Direction of the shadow towards the middle for layer ``k`` of P(n).

    Layers at or above ``ceil(n/2)`` look down, layers at or below
    ``floor(n/2)`` look up.  For even ``n`` the middle layer ``n/2`` is
    ambiguous: with ``strict`` this raises, otherwise it resolves to lower.
    """
    if 2 * k == n:
        if strict:
            raise PreconditionError(
                f"direction undefined: layer {k} is the exact middle of P({n})"
            )
        return "lower"
    return "lower" if k >= (n + 1) // 2 else "upper"


# ---------------------------------------------------------------- Subset


_TEXT_RE = re.compile(r"^\{\s*([0-9,\s]*)\}$")


@dataclass(frozen=True, order=True)
class Subset:
    """One element of P(n)."""

    mask: int
    n: int

    def __post_init__(self):
        check_n(self.n)
        if self.mask < 0 or self.mask >> self.n:
            raise ValueError(f"mask {self.mask:#x} has bits outside [{self.n}]")

    @classmethod
    def from_elements(cls, elements: Iterable[int], n: int) -> "Subset":
        mask = 0
        for e in elements:
            if not 1 <= e <= n:
                raise ValueError(f"element {e} not in [1, {n}]")
            mask |= 1 << (e - 1)
        return cls(mask, n)

    @classmethod
    def parse(cls, text: str, n: int) -> "Subset":
        return cls(parse_mask(text, n), n)

    @property
    def layer(self) -> int:
        return popcount(self.mask)

    @property
    def elements(self) -> list[int]:
        return mask_elements(self.mask)

    def to_text(self) -> str:
        return format_mask(self.mask)

    def to_hex(self) -> str:
        return f"{self.mask:x}"

    def __str__(self) -> str:
        return self.to_text()


def mask_elements(mask: int) -> list[int]:
    return [b.bit_length() for b in iter_bits(mask)]


def format_mask(mask: int) -> str:
    """Canonical text form, e.g. ``{1,3,7}``."""
    return "{" + ",".join(str(e) for e in mask_elements(mask)) + "}"


def parse_mask(text: str, n: int) -> int:
    """Parse either ``{1,3,7}`` or a lowercase hex mask such as ``45``."""
    text = text.strip()
    m = _TEXT_RE.match(text)
    if m:
        body = m.group(1).strip()
        mask = 0
        if body:
            for tok in body.split(","):
                tok = tok.strip()
                if not tok:
                    raise ValueError(f"malformed subset {text!r}")
                e = int(tok)
                if not 1 <= e <= n:
                    raise ValueError(f"element {e} of {text!r} not in [1, {n}]")
                mask |= 1 << (e - 1)
        return mask
    try:
        mask = int(text.lower().removeprefix("0x"), 16)
    except ValueError:
        raise ValueError(f"malformed subset {text!r}") from None
    if mask >> n:
        raise ValueError(f"hex mask {text!r} has bits outside [{n}]")
    return mask


# ---------------------------------------------------------------- Family


@dataclass(frozen=True)
class Family:
    """An immutable, deduplicated set of subsets of ``[n]`` sorted by mask."""

    n: int
    members: tuple[int, ...] = ()

    def __post_init__(self):
        check_n(self.n)
        ms = tuple(sorted(set(self.members)))
        if ms and (ms[0] < 0 or ms[-1] >> self.n):
            raise ValueError(f"family has masks outside P({self.n})")
        object.__setattr__(self, "members", ms)

    @classmethod
    def full(cls, n: int) -> "Family":
        return cls(n, tuple(range(1 << check_n(n))))

    @classmethod
    def layer(cls, n: int, k: int) -> "Family":
        return cls(n, tuple(layer_masks(n, k)))

    @classmethod
    def of(cls, n: int, *sets: Iterable[int]) -> "Family":
        """Build from element lists: ``Family.of(5, [1, 2, 3], [1, 4, 5])``."""
        return cls(n, tuple(Subset.from_elements(s, n).mask for s in sets))

    @cached_property
    def mask_set(self) -> frozenset[int]:
        return frozenset(self.members)

    @cached_property
    def layer_histogram(self) -> tuple[int, ...]:
        hist = [0] * (self.n + 1)
        for m in self.members:
            hist[popcount(m)] += 1
        return tuple(hist)

    @property
    def layers(self) -> list[int]:
        return [k for k, c in enumerate(self.layer_histogram) if c]

    def uniform_layer(self) -> Optional[int]:
        """The common layer of all members; None for the empty family."""
        layers = self.layers
        if len(layers) > 1:
            raise NonUniformFamilyError(layers)
        return layers[0] if layers else None

    def in_layer(self, k: int) -> "Family":
        return Family(self.n, tuple(m for m in self.members if popcount(m) == k))

    def subsets(self) -> list[Subset]:
        return [Subset(m, self.n) for m in self.members]

    def with_members(self, masks: Iterable[int]) -> "Family":
        return Family(self.n, tuple(masks))

    def union(self, other: "Family") -> "Family":
        _same_n(self, other)
        return Family(self.n, self.members + other.members)

    def difference(self, other: "Family") -> "Family":
        _same_n(self, other)
        return Family(self.n, tuple(m for m in self.members if m not in other.mask_set))

    def intersection(self, other: "Family") -> "Family":
        _same_n(self, other)
        return Family(self.n, tuple(m for m in self.members if m in other.mask_set))

    def issubset(self, other: "Family") -> bool:
        return self.n == other.n and self.mask_set <= other.mask_set

    def to_text_lines(self) -> list[str]:
        return [format_mask(m) for m in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, item) -> bool:
        if isinstance(item, Subset):
            return item.n == self.n and item.mask in self.mask_set
        return item in self.mask_set

    def __repr__(self) -> str:
        body = ", ".join(format_mask(m) for m in self.members[:8])
        more = f", ... ({len(self)} total)" if len(self) > 8 else ""
        return f"Family(n={self.n}, [{body}{more}])"


def _same_n(a: Family, b: Family) -> None:
    if a.n != b.n:
        raise ValueError(f"families over different ground sets: {a.n} vs {b.n}")


# ---------------------------------------------------------------- shadows


def _resolve(A: Family, direction: str) -> tuple[Optional[int], str]:
    k = A.uniform_layer()
    if direction not in ("lower", "upper", "auto"):
        raise ValueError(f"unknown shadow direction {direction!r}")
    if direction == "auto":
        direction = shadow_direction(A.n, k) if k is not None else "lower"
    return k, direction


def shadow_masks(masks: Iterable[int], n: int, direction: str) -> set[int]:
    out: set[int] = set()
    if direction == "lower":
        for m in masks:
            out.update(lower_neighbors(m))
    else:
        for m in masks:
            out.update(upper_neighbors(m, n))
    return out


def shadow(A: Family, direction: Direction = "auto") -> Family:
    """Lower shadow, upper shadow, or the directional shadow toward the middle.

    ``auto`` looks down from layers ``>= ceil(n/2)`` (including the exact
    middle of even ``n``) and up otherwise.  In the middle-two-layers graph
    this is the neighbourhood ``N(A)``.
    """
    k, direction = _resolve(A, direction)
    if k is None:
        return Family(A.n)
    return Family(A.n, tuple(shadow_masks(A.members, A.n, direction)))


def _in_closure(v: int, n: int, direction: str, sh: frozenset[int] | set[int]) -> bool:
    nbrs = lower_neighbors(v) if direction == "lower" else upper_neighbors(v, n)
    return all(u in sh for u in nbrs)


def closure(A: Family, direction: Direction = "auto") -> Family:
    """The largest family in A's layer with the same shadow as ``A``."""
    k, direction = _resolve(A, direction)
    if k is None:
        return Family(A.n)
    sh = shadow_masks(A.members, A.n, direction)
    back = "upper" if direction == "lower" else "lower"
    candidates = shadow_masks(sh, A.n, back)
    return Family(A.n, tuple(v for v in candidates if _in_closure(v, A.n, direction, sh)))


def is_closed(A: Family, direction: Direction = "auto") -> bool:
    return len(closure(A, direction)) == len(A)


def two_linked_components(A: Family, direction: Direction = "auto") -> list[Family]:
    """Partition ``A`` into maximal pieces connected through shared shadow elements.

    Components are ordered by their smallest member.
    """
    k, direction = _resolve(A, direction)
    if k is None:
        return []
    members = A.members
    parent = list(range(len(members)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for i, m in enumerate(members):
        nbrs = lower_neighbors(m) if direction == "lower" else upper_neighbors(m, A.n)
        for s in nbrs:
            j = owner.setdefault(s, i)
            if j != i:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i, m in enumerate(members):
        groups.setdefault(find(i), []).append(m)
    return [Family(A.n, tuple(g)) for _, g in sorted(groups.items())]


def degree(v: Subset | int, Y: Family) -> int:
    """``|N(v) ∩ Y|`` where N is containment between adjacent layers."""
    mask = v.mask if isinstance(v, Subset) else v
    ky = Y.uniform_layer()
    kv = popcount(mask)
    if ky is None:
        return 0
    if ky == kv:
        raise PreconditionError("v and Y lie in the same part")
    if ky == kv - 1:
        return sum(1 for u in lower_neighbors(mask) if u in Y.mask_set)
    if ky == kv + 1:
        return sum(1 for u in upper_neighbors(mask, Y.n) if u in Y.mask_set)
    raise PreconditionError(f"v (layer {kv}) and Y (layer {ky}) are not adjacent layers")


# ---------------------------------------------------------------- middle graph


@dataclass(frozen=True)
class MiddleGraph:
    """Bipartite containment graph between layers k and k-1 of P(2k-1)."""

    k: int
    n: int = field(init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        object.__setattr__(self, "n", check_n(2 * self.k - 1))

    @property
    def part_size(self) -> int:
        return math.comb(self.n, self.k)

    @cached_property
    def upper(self) -> tuple[int, ...]:
        """L_k, sorted."""
        return tuple(layer_masks(self.n, self.k))

    @cached_property
    def lower(self) -> tuple[int, ...]:
        """L_{k-1}, sorted."""
        return tuple(layer_masks(self.n, self.k - 1))

    def vertices(self) -> Family:
        return Family(self.n, self.upper + self.lower)

    def is_upper(self, v: int) -> bool:
        return popcount(v) == self.k

    def neighbors(self, v: int) -> list[int]:
        if popcount(v) == self.k:
            return lower_neighbors(v)
        if popcount(v) == self.k - 1:
            return upper_neighbors(v, self.n)
        raise ValueError(f"{format_mask(v)} is not a vertex of M({self.k})")

    def N(self, vs: Iterable[int]) -> set[int]:
        """Neighbourhood of a vertex set lying in one part."""
        out: set[int] = set()
        for v in vs:
            out.update(self.neighbors(v))
        return out

    def d(self, v: int, Y: set[int] | frozenset[int]) -> int:
        return sum(1 for u in self.neighbors(v) if u in Y)


# ---------------------------------------------------------------- files


def read_family(source: Union[str, Path, Iterable[str]], n: int) -> Family:
    """Read a family file: one subset per line, ``#`` starts a comment."""
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text().splitlines()
    else:
        lines = list(source)
    masks = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            masks.append(parse_mask(line, n))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return Family(n, tuple(masks))


def write_family(path: Union[str, Path], A: Family, form: str = "text") -> None:
    if form == "hex":
        lines = [f"{m:x}" for m in A.members]
    else:
        lines = A.to_text_lines()
    Path(path).write_text(f"# n={A.n} size={len(A)}\n" + "".join(s + "\n" for s in lines))
