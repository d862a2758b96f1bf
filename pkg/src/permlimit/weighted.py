"""Weighted permutations, interval partitions and the matrices built on them.

Matrices are stored as an integer numerator array over one common
denominator, so partition matrices of permutations stay exact.  Passing
``denom=None`` stores plain float64 values instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import ceil, comb, gcd, lcm
from typing import Iterable

import numpy as np

from .errors import ArgumentError, DomainError, FeasibilityError, StructuralError, ValidationError
from .perm_core import Permutation, adjacency_matrix

__all__ = [
    "GeneralMatrix",
    "WeightedPermutation",
    "WeightedReport",
    "IntervalPartition",
    "RegularPartition",
    "validate_weighted",
    "equitable_partition",
    "partition_matrix",
    "blowup",
    "block_merge",
    "weighted_density",
    "weak_regular_partition",
    "regularity_order",
    "random_weighted",
    "parse_matrix",
    "format_matrix",
]

DEFAULT_SLACK = 1e-12
_INT64_SAFE = 2**62


def _as_int_array(values) -> np.ndarray:
    """int64 when every value fits comfortably, else an object array of ints."""
    if isinstance(values, np.ndarray) and np.issubdtype(values.dtype, np.integer):
        return values.astype(np.int64, copy=False)
    arr = np.asarray(values, dtype=object)
    if arr.size == 0:
        return arr.astype(np.int64)
    lo, hi = min(arr.flat), max(arr.flat)
    if -_INT64_SAFE < lo and hi < _INT64_SAFE:
        return arr.astype(np.int64)
    return arr


def to_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or 'p/q' string."""
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class GeneralMatrix:
    """A matrix of values in [0, 1], exact (numer / denom) or float64."""

    def __init__(self, numer, denom: int | None = 1):
        if denom is None:
            values = np.array(numer, dtype=np.float64)
            if values.ndim != 2:
                raise StructuralError("matrix must be two-dimensional")
            self._numer = values
            self._denom = None
        else:
            denom = int(denom)
            if denom <= 0:
                raise ArgumentError("denominator must be positive")
            ints = _as_int_array(numer)
            if ints.ndim != 2:
                raise StructuralError("matrix must be two-dimensional")
            if ints.dtype == object:
                common = reduce(gcd, (int(v) for v in ints.flat), denom)
            else:
                common = gcd(int(np.gcd.reduce(ints, axis=None)), denom)
            if common > 1:
                ints = ints // common
                denom //= common
            if ints.dtype == object:
                ints = _as_int_array(ints)
            self._numer = ints
            self._denom = denom
        self._check_range()

    def _check_range(self):
        if self._numer.size == 0:
            raise StructuralError("matrix must be non-empty")
        top = 1 if self._denom is None else self._denom
        if self._denom is None:
            bad = (self._numer < -DEFAULT_SLACK) | (self._numer > 1 + DEFAULT_SLACK) | ~np.isfinite(self._numer)
        else:
            bad = (self._numer < 0) | (self._numer > top)
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise StructuralError(f"entry ({i + 1},{j + 1}) = {self[i, j]} lies outside [0, 1]")

    @classmethod
    def from_values(cls, rows: Iterable[Iterable]) -> "GeneralMatrix":
        """Build from nested values; any float entry switches to float mode."""
        rows = [list(r) for r in rows]
        if any(isinstance(v, (float, np.floating)) for r in rows for v in r):
            return cls(np.array(rows, dtype=np.float64), None)
        fracs = [[to_fraction(v) for v in r] for r in rows]
        if len({len(r) for r in fracs}) > 1:
            raise StructuralError("rows have different lengths")
        denom = reduce(lcm, (f.denominator for r in fracs for f in r), 1)
        numer = [[f.numerator * (denom // f.denominator) for f in r] for r in fracs]
        return cls(numer, denom)

    @property
    def numer(self) -> np.ndarray:
        return self._numer

    @property
    def denom(self) -> int | None:
        return self._denom

    @property
    def exact(self) -> bool:
        return self._denom is not None

    @property
    def shape(self) -> tuple[int, int]:
        return self._numer.shape

    @property
    def k(self) -> int:
        return self._numer.shape[0]

    def __getitem__(self, idx):
        i, j = idx
        v = self._numer[i, j]
        if self._denom is None:
            return float(v)
        return Fraction(int(v), self._denom)

    def fractions(self) -> list[list[Fraction]]:
        if self._denom is None:
            return [[Fraction(float(v)) for v in row] for row in self._numer]
        return [[Fraction(int(v), self._denom) for v in row] for row in self._numer]

    def to_float(self) -> np.ndarray:
        if self._denom is None:
            return self._numer.copy()
        if self._numer.dtype == object:
            return np.array([[float(Fraction(int(v), self._denom)) for v in row] for row in self._numer])
        return self._numer / self._denom

    def scaled(self, denom: int) -> np.ndarray:
        """Numerators over ``denom``, which must be a multiple of self.denom."""
        factor, rem = divmod(denom, self._denom)
        if rem:
            raise ArgumentError("target denominator is not a multiple")
        return _as_int_array(self._numer.astype(object) * factor)

    def __eq__(self, other):
        if not isinstance(other, GeneralMatrix):
            return NotImplemented
        if self.shape != other.shape or self.exact != other.exact:
            return False
        return self._denom == other._denom and bool(np.array_equal(self._numer, other._numer))

    def __hash__(self):
        return hash((self.shape, self._denom))

    def __repr__(self):
        return f"{type(self).__name__}({format_matrix(self)!r})"


def _require_square(M: GeneralMatrix):
    if M.shape[0] != M.shape[1]:
        raise StructuralError(f"matrix is {M.shape[0]}x{M.shape[1]}, not square")


@dataclass(frozen=True)
class WeightedReport:
    valid: bool
    violation: str | None = None
    location: tuple[int, ...] | None = None
    detail: str = ""

    def __bool__(self):
        return self.valid


def validate_weighted(M: GeneralMatrix, slack: float = DEFAULT_SLACK) -> WeightedReport:
    """Check monotone rows and column sums j-1 <= sum_i Q(i,j) <= j.

    Exact matrices are checked exactly; float matrices with absolute
    ``slack``.  Locations are 1-indexed.  Nested sequences are accepted and
    converted first, so out-of-range entries raise StructuralError.
    """
    if not isinstance(M, GeneralMatrix):
        M = GeneralMatrix.from_values(M)
    _require_square(M)
    k = M.k
    vals = M.numer
    if M.exact:
        unit, tol = M.denom, 0
    else:
        unit, tol = 1.0, slack
    steps = vals[:, 1:] - vals[:, :-1]
    if k > 1 and (steps < -tol).any():
        i, j = map(int, np.argwhere(steps < -tol)[0])
        return WeightedReport(False, "row_monotone", (i + 1, j + 1),
                              f"Q({i + 1},{j + 1}) > Q({i + 1},{j + 2})")
    sums = vals.sum(axis=0)
    for j in range(1, k + 1):
        s = sums[j - 1]
        if s < (j - 1) * unit - tol or s > j * unit + tol:
            shown = Fraction(int(s), M.denom) if M.exact else float(s)
            return WeightedReport(False, "column_sum", (j,), f"column {j} sums to {shown}, outside [{j - 1}, {j}]")
    return WeightedReport(True)


class WeightedPermutation(GeneralMatrix):
    """A k x k matrix satisfying the weighted-permutation axioms."""

    def __init__(self, numer, denom: int | None = 1, slack: float = DEFAULT_SLACK):
        super().__init__(numer, denom)
        report = validate_weighted(self, slack)
        if not report.valid:
            raise ValidationError(f"not a weighted permutation: {report.detail}")

    @classmethod
    def from_matrix(cls, M: GeneralMatrix) -> "WeightedPermutation":
        if isinstance(M, WeightedPermutation):
            return M
        return cls(M.numer, M.denom)


@dataclass(frozen=True)
class IntervalPartition:
    """Consecutive intervals of {1..n}; interval i is cuts[i-1]+1 .. cuts[i]."""

    n: int
    cuts: tuple[int, ...]

    def __post_init__(self):
        cuts = tuple(int(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if len(cuts) < 2 or cuts[0] != 0 or cuts[-1] != self.n:
            raise ArgumentError(f"cut points must run from 0 to n={self.n}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ArgumentError("intervals must be non-empty and increasing")

    @property
    def k(self) -> int:
        return len(self.cuts) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.cuts, self.cuts[1:]))

    @property
    def equitable(self) -> bool:
        s = self.sizes
        return max(s) - min(s) <= 1

    def intervals(self) -> list[range]:
        return [range(a + 1, b + 1) for a, b in zip(self.cuts, self.cuts[1:])]


def equitable_partition(n: int, k: int) -> IntervalPartition:
    """Canonical equitable partition: the n mod k larger intervals come first."""
    if not 1 <= k <= n:
        raise ArgumentError(f"need 1 <= k <= n, got k={k}, n={n}")
    q, r = divmod(n, k)
    sizes = [q + 1] * r + [q] * (k - r)
    return IntervalPartition(n, tuple(itertools.accumulate(sizes, initial=0)))


def partition_matrix(sigma: Permutation, P: IntervalPartition) -> GeneralMatrix:
    """Q_{sigma,P}(u,w) = e(C_u, C_w) / (|C_u| |C_w|), exactly.

    e counts pairs a in C_u, b in C_w with sigma(a) < b.  Each row a
    contributes |C_w| - #{b in C_w : b <= sigma(a)} to column block w, so
    the whole matrix costs O(nk).
    """
    n = len(sigma)
    if P.n != n:
        raise ArgumentError(f"partition covers n={P.n} but the permutation has n={n}")
    s = sigma.as_array()
    starts = np.asarray(P.cuts[:-1], dtype=np.int64)
    sizes = np.asarray(P.sizes, dtype=np.int64)
    at_most = np.clip(s[:, None] - starts[None, :], 0, sizes[None, :])
    per_row = sizes[None, :] - at_most
    e = np.add.reduceat(per_row, starts, axis=0)
    prods = sizes[:, None] * sizes[None, :]
    denom = reduce(lcm, {int(p) for p in prods.flat}, 1)
    return GeneralMatrix(e * (denom // prods), denom)


def blowup(P: IntervalPartition, Q: GeneralMatrix) -> GeneralMatrix:
    """K(P,Q): the n x n matrix constant equal to Q(i,j) on C_i x C_j."""
    _require_square(Q)
    if Q.k != P.k:
        raise ArgumentError(f"matrix order {Q.k} does not match {P.k} intervals")
    sizes = np.asarray(P.sizes)
    big = np.repeat(np.repeat(Q.numer, sizes, axis=0), sizes, axis=1)
    return GeneralMatrix(big, Q.denom)


def block_merge(Q: GeneralMatrix, kj: int) -> WeightedPermutation:
    """Average Q over consecutive (km/kj) x (km/kj) blocks."""
    _require_square(Q)
    km = Q.k
    if kj < 1 or km % kj:
        raise ArgumentError(f"{kj} does not divide the order {km}")
    r = km // kj
    blocks = Q.numer.reshape(kj, r, kj, r).sum(axis=(1, 3))
    if Q.exact:
        return WeightedPermutation(blocks, Q.denom * r * r)
    return WeightedPermutation(blocks / (r * r), None)


def _cell_masses(Q: GeneralMatrix) -> tuple[np.ndarray, int | None]:
    # p(x, b) = Q(x,b) - Q(x,b-1) for b = 1..k+1 with Q(x,0)=0, Q(x,k+1)=1
    k = Q.k
    top = 1.0 if Q.denom is None else Q.denom
    padded = np.zeros((k, k + 2), dtype=Q.numer.dtype)
    padded[:, 1:k + 1] = Q.numer
    padded[:, k + 1] = top
    return np.diff(padded, axis=1), Q.denom


def weighted_density(tau: Permutation, Q: GeneralMatrix) -> Fraction | float:
    """Subpermutation density t(tau, Q) of a pattern in a weighted permutation.

    For each row tuple X, the sum over strictly increasing column tuples A is
    a prefix-sum DP along tau's value order.  Exact matrices give a
    Fraction, float matrices a float.
    """
    _require_square(Q)
    m, k = len(tau), Q.k
    if m == 1:
        return Fraction(1) if Q.exact else 1.0
    if m >= k:
        raise DomainError(f"weighted density needs |tau| < k, got |tau|={m}, k={k}")
    p, denom = _cell_masses(Q)
    if denom is not None and denom**m * comb(k + 1, m) * comb(k, m) >= _INT64_SAFE:
        p = p.astype(object)
    order = tau.inverse().images
    chunk = max(1, 2_000_000 // (k + 1))
    combos = itertools.combinations(range(k), m)
    total = 0
    while True:
        rows = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if rows.size == 0:
            break
        h = p[rows[:, order[0] - 1]]
        for idx in order[1:]:
            below = np.zeros_like(h)
            below[:, 1:] = np.cumsum(h, axis=1)[:, :-1]
            h = p[rows[:, idx - 1]] * below
        total += h.sum()
    if denom is None:
        return float(total) / comb(k, m)
    return Fraction(int(total), denom**m * comb(k, m))


def regularity_order(epsilon) -> int:
    """k = ceil(8 / eps^2), the partition size that guarantees eps-regularity."""
    eps = to_fraction(str(epsilon)) if isinstance(epsilon, float) else to_fraction(epsilon)
    if not 0 < eps < Fraction(1, 2):
        raise ArgumentError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    return ceil(8 / eps**2)


@dataclass(frozen=True)
class RegularPartition:
    partition: IntervalPartition
    matrix: GeneralMatrix
    epsilon: Fraction
    achieved: Fraction
    witness: object

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def verified(self) -> bool:
        return self.achieved <= self.epsilon


def weak_regular_partition(sigma: Permutation, epsilon) -> RegularPartition:
    """Equitable k-partition with k = ceil(8/eps^2) and its certified distance.

    The distance between Q_sigma and the blow-up of the partition matrix is
    computed exactly, so ``verified`` is a real check rather than an appeal
    to the theoretical bound.
    """
    from .metric import dist_weighted

    k = regularity_order(epsilon)
    eps = to_fraction(str(epsilon)) if isinstance(epsilon, float) else to_fraction(epsilon)
    n = len(sigma)
    if n <= 2 * k:
        raise FeasibilityError(f"epsilon={epsilon} needs k={k} intervals and n >= {2 * k + 1}, got n={n}")
    P = equitable_partition(n, k)
    Q = partition_matrix(sigma, P)
    achieved, witness = dist_weighted(adjacency_matrix(sigma), blowup(P, Q))
    return RegularPartition(P, Q, eps, achieved, witness)


def random_weighted(k: int, rng: np.random.Generator, *, blocks: int = 2, terms: int = 2) -> WeightedPermutation:
    """A random exact weighted permutation of order k.

    Equal-weight mixture of ``terms`` block-merged adjacency matrices of
    random permutations of length k * blocks; convex combinations keep both
    axioms.
    """
    n = k * blocks
    acc = None
    denom = None
    for _ in range(terms):
        sigma = Permutation(tuple(int(v) for v in rng.permutation(n) + 1))
        merged = block_merge(adjacency_matrix(sigma), k)
        d = blocks * blocks
        part = merged.scaled(d)
        acc = part if acc is None else acc + part
        denom = d
    return WeightedPermutation(acc, denom * terms)


def parse_matrix(text: str, *, exact: bool = True) -> GeneralMatrix:
    """Read the matrix text format: a line with k, then k rows of k values."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ArgumentError("empty matrix text")
    try:
        k = int(lines[0])
    except ValueError as exc:
        raise ArgumentError(f"first line must be the order k, got {lines[0]!r}") from exc
    rows = [ln.split() for ln in lines[1:]]
    if len(rows) != k or any(len(r) != k for r in rows):
        raise StructuralError(f"expected {k} rows of {k} values")
    try:
        if exact:
            return GeneralMatrix.from_values([[to_fraction(tok) for tok in r] for r in rows])
        return GeneralMatrix.from_values([[float(Fraction(tok)) for tok in r] for r in rows])
    except (ValueError, ZeroDivisionError) as exc:
        raise ArgumentError(f"bad matrix entry: {exc}") from exc


def format_value(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def format_matrix(M: GeneralMatrix) -> str:
    rows = M.fractions() if M.exact else M.to_float().tolist()
    lines = [str(M.shape[0])]
    lines += [" ".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
