"""Permutations, patterns, occurrence counting and pattern densities.

Permutations are 1-indexed: ``Permutation((5, 6, 2, 4, 7, 1, 3))`` maps
1 -> 5, 2 -> 6, and so on.  Occurrence counts are Python integers and
densities are :class:`fractions.Fraction`, so nothing here rounds.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidPermutation, SizeError

__all__ = [
    "Permutation",
    "Pattern",
    "parse_permutation",
    "format_permutation",
    "read_permutations",
    "identity",
    "reversal",
    "reduce_pattern",
    "all_patterns",
    "iter_occurrences",
    "count_occurrences",
    "count_occurrences_brute",
    "pattern_counts",
    "density",
    "density_vector",
    "adjacency_matrix",
]

DEFAULT_MAX_K = 6

# Vectorised counting builds an (n+1) x (n+2) table and enumerates
# (k-1)-subsets; beyond these sizes fall back to pruned enumeration.
_TABLE_MAX_N = 4000
_VECTOR_MAX_SUBSETS = 4_000_000


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..n}, stored as its image sequence."""

    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(v) for v in self.images)
        object.__setattr__(self, "images", images)
        n = len(images)
        if n < 1:
            raise InvalidPermutation("a permutation needs length n >= 1")
        seen = [False] * (n + 1)
        for pos, v in enumerate(images, start=1):
            if not 1 <= v <= n:
                raise InvalidPermutation(f"value {v} at position {pos} is outside 1..{n}")
            if seen[v]:
                raise InvalidPermutation(f"value {v} appears more than once")
            seen[v] = True

    @property
    def n(self) -> int:
        return len(self.images)

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self) -> Iterator[int]:
        return iter(self.images)

    def __call__(self, i: int) -> int:
        """sigma(i) for 1 <= i <= n."""
        if not 1 <= i <= len(self.images):
            raise IndexError(i)
        return self.images[i - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.images)
        for pos, v in enumerate(self.images, start=1):
            inv[v - 1] = pos
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """(self . other)(i) = self(other(i))."""
        if len(other) != len(self):
            raise InvalidPermutation("composition needs equal lengths")
        return Permutation(tuple(self.images[v - 1] for v in other.images))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.images, dtype=np.int64)

    def __str__(self) -> str:
        return format_permutation(self)


Pattern = Permutation


def parse_permutation(text: str) -> Permutation:
    tokens = text.split()
    try:
        values = tuple(int(tok) for tok in tokens)
    except ValueError as exc:
        raise InvalidPermutation(f"cannot parse permutation {text!r}") from exc
    return Permutation(values)


def format_permutation(sigma: Permutation) -> str:
    return " ".join(str(v) for v in sigma.images)


def read_permutations(lines: Iterable[str]) -> list[Permutation]:
    """Parse the shared text format: one permutation per line, '#' comments."""
    out = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        out.append(parse_permutation(stripped))
    return out


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(1, n + 1)))


def reversal(n: int) -> Permutation:
    return Permutation(tuple(range(n, 0, -1)))


def reduce_pattern(values: Sequence[int]) -> Permutation:
    """The permutation order-isomorphic to a sequence of distinct numbers."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0] * len(values)
    for r, idx in enumerate(order, start=1):
        ranks[idx] = r
    return Permutation(tuple(ranks))


def all_patterns(k: int) -> list[Permutation]:
    """All of S_k in lexicographic order."""
    return [Permutation(p) for p in itertools.permutations(range(1, k + 1))]


def _neighbour_constraints(tau: Permutation) -> list[tuple[int, int]]:
    # For each position r, the earlier positions holding the closest smaller
    # and closest larger tau-value (-1 if none).  Checking only these two keeps
    # a partial match order-isomorphic.
    out = []
    t = tau.images
    for r in range(len(t)):
        lo = hi = -1
        for i in range(r):
            if t[i] < t[r] and (lo < 0 or t[i] > t[lo]):
                lo = i
            if t[i] > t[r] and (hi < 0 or t[i] < t[hi]):
                hi = i
        out.append((lo, hi))
    return out


def iter_occurrences(tau: Pattern, sigma: Permutation) -> Iterator[tuple[int, ...]]:
    """Yield every 1-indexed index tuple x1 < ... < xm where sigma matches tau.

    Enumeration is depth-first with pruning on partial order-isomorphism.
    """
    m, n = len(tau), len(sigma)
    if m > n:
        return
    s = sigma.images
    cons = _neighbour_constraints(tau)
    chosen = [0] * m

    def rec(r: int, start: int) -> Iterator[tuple[int, ...]]:
        lo, hi = cons[r]
        lo_v = s[chosen[lo]] if lo >= 0 else 0
        hi_v = s[chosen[hi]] if hi >= 0 else n + 1
        for x in range(start, n - (m - r) + 1):
            v = s[x]
            if lo_v < v < hi_v:
                chosen[r] = x
                if r + 1 == m:
                    yield tuple(c + 1 for c in chosen)
                else:
                    yield from rec(r + 1, x + 1)

    yield from rec(0, 0)


def count_occurrences_brute(tau: Pattern, sigma: Permutation) -> int:
    """Exhaustive O(n^m) oracle: test every m-subset of positions."""
    m, n = len(tau), len(sigma)
    if m > n:
        return 0
    target = tau.images
    s = sigma.images
    total = 0
    for xs in itertools.combinations(range(n), m):
        if reduce_pattern([s[x] for x in xs]).images == target:
            total += 1
    return total


def _suffix_below_table(s: np.ndarray) -> np.ndarray:
    # table[p, v] = #{q >= p : s[q] < v}  for 0 <= p <= n, 0 <= v <= n + 1
    n = len(s)
    below = (s[:, None] < np.arange(n + 2)[None, :]).astype(np.int32)
    table = np.zeros((n + 1, n + 2), dtype=np.int32)
    table[:n] = np.cumsum(below[::-1], axis=0)[::-1]
    return table


def _combination_chunks(n: int, r: int, limit: int = 1 << 20) -> Iterator[np.ndarray]:
    if r == 1:
        yield np.arange(n, dtype=np.int64)[:, None]
        return
    if r == 2:
        i, j = np.triu_indices(n, k=1)
        yield np.stack([i, j], axis=1).astype(np.int64)
        return
    buf = []
    size = 0
    for first in range(n - r + 1):
        for rest in _combination_chunks(n - first - 1, r - 1, limit):
            block = np.empty((len(rest), r), dtype=np.int64)
            block[:, 0] = first
            block[:, 1:] = rest + first + 1
            buf.append(block)
            size += len(block)
            if size >= limit:
                yield np.concatenate(buf)
                buf, size = [], 0
    if buf:
        yield np.concatenate(buf)


def _vector_counts(k: int, s: np.ndarray) -> dict[tuple[int, ...], int]:
    """Counts of every tau in S_k, k >= 2, by (k-1)-subset enumeration.

    The last element of each occurrence is not enumerated: for a fixed
    (k-1)-prefix, the number of later positions whose value falls in each of
    the k value gaps is read off a suffix count table.
    """
    n = len(s)
    r = k - 1
    table = _suffix_below_table(s)
    base = np.array([k ** i for i in range(k)], dtype=np.int64)
    acc = np.zeros(k ** k, dtype=np.int64)
    for combos in _combination_chunks(n - 1, r):
        vals = s[combos]
        last_next = combos[:, -1] + 1
        ranks = (vals[:, None, :] < vals[:, :, None]).sum(axis=2)
        sv = np.sort(vals, axis=1)
        lower = np.concatenate([np.zeros((len(vals), 1), dtype=np.int64), sv], axis=1)
        upper = np.concatenate([sv, np.full((len(vals), 1), n + 1, dtype=np.int64)], axis=1)
        for g in range(k):
            cnt = table[last_next, upper[:, g]] - table[last_next, lower[:, g] + 1]
            digits = ranks + (ranks >= g)
            key = digits @ base[:r] + g * base[r]
            np.add.at(acc, key, cnt.astype(np.int64))
    out = {}
    for tau in itertools.permutations(range(1, k + 1)):
        key = sum((t - 1) * k ** i for i, t in enumerate(tau))
        out[tau] = int(acc[key])
    return out


def _vector_feasible(k: int, n: int) -> bool:
    return 2 <= k <= n and n <= _TABLE_MAX_N and comb(n, k - 1) <= _VECTOR_MAX_SUBSETS and comb(n, k) < 2**62


def pattern_counts(k: int, sigma: Permutation, *, brute_force: bool = False) -> dict[Permutation, int]:
    """Occurrence counts of every tau in S_k, in lexicographic order."""
    n = len(sigma)
    patterns = all_patterns(k)
    if k > n:
        return {tau: 0 for tau in patterns}
    if k == 1:
        return {patterns[0]: n}
    if brute_force:
        counts = dict.fromkeys(patterns, 0)
        s = sigma.images
        for xs in itertools.combinations(range(n), k):
            counts[reduce_pattern([s[x] for x in xs])] += 1
        return counts
    if _vector_feasible(k, n):
        raw = _vector_counts(k, sigma.as_array())
        return {tau: raw[tau.images] for tau in patterns}
    return {tau: count_occurrences(tau, sigma) for tau in patterns}


def count_occurrences(tau: Pattern, sigma: Permutation, *, method: str = "auto") -> int:
    """Lambda(tau, sigma): number of occurrences of tau in sigma.

    ``method`` is ``"auto"`` (vectorised when sizes allow, else pruned
    enumeration), ``"enumerate"`` or ``"brute"``.
    """
    m, n = len(tau), len(sigma)
    if m > n:
        return 0
    if method == "brute":
        return count_occurrences_brute(tau, sigma)
    if m == 1:
        return n
    if method == "auto" and _vector_feasible(m, n):
        return _vector_counts(m, sigma.as_array())[tau.images]
    if method not in ("auto", "enumerate"):
        raise ValueError(f"unknown counting method {method!r}")
    return sum(1 for _ in iter_occurrences(tau, sigma))


def density(tau: Pattern, sigma: Permutation) -> Fraction:
    """t(tau, sigma) = Lambda / C(n, m), and exactly 0 when m > n."""
    m, n = len(tau), len(sigma)
    if m > n:
        return Fraction(0)
    return Fraction(count_occurrences(tau, sigma), comb(n, m))


def density_vector(
    k: int, sigma: Permutation, *, max_k: int = DEFAULT_MAX_K, brute_force: bool = False
) -> dict[Permutation, Fraction]:
    """Densities of all k! patterns of length k in sigma."""
    if not 1 <= k <= max_k:
        raise SizeError(f"pattern length k={k} outside the guard 1..{max_k}")
    n = len(sigma)
    counts = pattern_counts(k, sigma, brute_force=brute_force)
    if k > n:
        return {tau: Fraction(0) for tau in counts}
    total = comb(n, k)
    return {tau: Fraction(c, total) for tau, c in counts.items()}


def adjacency_matrix(sigma: Permutation):
    """Q_sigma(a, b) = 1 if sigma(a) < b else 0, as a 0/1 weighted permutation."""
    from .weighted import WeightedPermutation

    n = len(sigma)
    s = sigma.as_array()
    numer = (s[:, None] < np.arange(1, n + 1)[None, :]).astype(np.int64)
    return WeightedPermutation(numer, 1)
