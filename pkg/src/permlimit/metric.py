"""Rectangular distances and discrepancy.

All fast versions reduce to one problem: given an integer column profile
M(x, c), find the row interval and column pair maximising
|sum_{x in S} (M(x, c2) - M(x, c1))|.  The ``_kernels.sweep`` routine solves
it in O(rows^2 * cols).  The ``*_brute`` functions scan every rectangle
directly and serve as oracles.

Permuton distances only need rectangles whose edges sit at grid
breakpoints: for fixed other edges the mass difference is linear in each
x-edge between breakpoints, and in each y-edge either linear (diffuse) or
constant up to one-sided limits at atoms.  So x-edges range over the union
of both grids' breakpoints, and y-edges over those breakpoints plus, when
a grid is atomic, their right limits.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np

from ._kernels import sweep
from .errors import ArgumentError
from .perm_core import Permutation
from .permuton import ATOMIC, GridPermuton, from_permutation
from .weighted import GeneralMatrix

__all__ = [
    "RectWitness",
    "dist_permutations",
    "dist_permutations_brute",
    "dist_weighted",
    "dist_weighted_brute",
    "dist_permutons",
    "dist_perm_vs_permuton",
    "discrepancy",
    "discrepancy_brute",
    "rect_count",
]

_INT64_LIMIT = 2**62


@dataclass(frozen=True)
class RectWitness:
    """A maximising rectangle.

    For permutations ``x`` is the half-open index interval [s, e) and ``y``
    the half-open value interval [a, b), both 1-indexed.  For matrices ``y``
    is a column pair (a, b) selecting columns a+1..b.  For permutons both are
    coordinate pairs in [0, 1] and ``y_side`` records the
    side of each y-edge: +1 is the right limit y+, -1 the left limit y- (only
    used at y = 1) and 0 the point itself.
    """

    value: object
    x: tuple
    y: tuple
    y_side: tuple[int, int] = (0, 0)


def _prefix_rows(M: np.ndarray) -> np.ndarray:
    W = np.zeros((M.shape[0] + 1, M.shape[1]), dtype=M.dtype)
    np.cumsum(M, axis=0, out=W[1:])
    return W


def _fits_int64(bound: int) -> bool:
    return 2 * bound < _INT64_LIMIT


def _below(s: np.ndarray, n: int) -> np.ndarray:
    # [s(x) < b] for b = 1..n+1
    return (s[:, None] < np.arange(1, n + 2)[None, :]).astype(np.int64)


def _check_lengths(s1: Permutation, s2: Permutation):
    if len(s1) != len(s2):
        raise ArgumentError(f"lengths differ: {len(s1)} vs {len(s2)}")


def rect_count(sigma: Permutation, x: tuple[int, int], y: tuple[int, int]) -> int:
    """|sigma(S) cap T| for S = [x0, x1) and T = [y0, y1)."""
    return sum(1 for i in range(x[0], x[1]) if y[0] <= sigma(i) < y[1])


def dist_permutations(s1: Permutation, s2: Permutation) -> tuple[Fraction, RectWitness]:
    """(1/n) max over intervals S, T of ||s1(S) cap T| - |s2(S) cap T||."""
    _check_lengths(s1, s2)
    n = len(s1)
    M = _below(s1.as_array(), n) - _below(s2.as_array(), n)
    best, x1, x2, c1, c2 = sweep(_prefix_rows(M))
    value = Fraction(best, n)
    return value, RectWitness(value, (x1 + 1, x2 + 1), (max(c1 + 1, 1), c2 + 1))


def dist_permutations_brute(s1: Permutation, s2: Permutation) -> Fraction:
    _check_lengths(s1, s2)
    n = len(s1)
    best = 0
    for s in range(1, n + 1):
        for e in range(s, n + 1):
            for a in range(1, n + 1):
                for b in range(a, n + 1):
                    c1 = sum(1 for i in range(s, e + 1) if a <= s1(i) <= b)
                    c2 = sum(1 for i in range(s, e + 1) if a <= s2(i) <= b)
                    best = max(best, abs(c1 - c2))
    return Fraction(best, n)


def discrepancy(sigma: Permutation) -> tuple[Fraction, RectWitness]:
    """max over intervals S, T of ||sigma(S) cap T| - |S||T|/n| (not normalised)."""
    n = len(sigma)
    M = n * _below(sigma.as_array(), n) - np.arange(n + 1)[None, :]
    best, x1, x2, c1, c2 = sweep(_prefix_rows(M))
    value = Fraction(best, n)
    return value, RectWitness(value, (x1 + 1, x2 + 1), (c1 + 1, c2 + 1))


def discrepancy_brute(sigma: Permutation) -> Fraction:
    """Every (S, T) pair; vectorised over T for each S."""
    n = len(sigma)
    s = sigma.as_array()
    best = 0
    for lo in range(n):
        inside = np.zeros(n + 1, dtype=np.int64)
        for hi in range(lo + 1, n + 1):
            inside[s[hi - 1]] = 1
            # P[b] = #{v in sigma(S) : v <= b}; T = {a+1..b}
            P = np.cumsum(inside)
            dev = n * (P[None, :] - P[:, None]) - (hi - lo) * (np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None])
            best = max(best, int(np.abs(dev).max()))
    return Fraction(best, n)


def _profile(Q: GeneralMatrix, denom: int) -> np.ndarray:
    # columns 0..k+1 with Q(x,0)=0 and Q(x,k+1)=1, numerators over denom
    k = Q.k
    scaled = Q.scaled(denom)
    out = np.zeros((k, k + 2), dtype=scaled.dtype)
    out[:, 1:k + 1] = scaled
    out[:, k + 1] = denom
    return out


def dist_weighted(Q1: GeneralMatrix, Q2: GeneralMatrix) -> tuple[object, RectWitness]:
    """(1/k) max over row intervals S and 0 <= a < b <= k+1 of the mass difference."""
    if Q1.shape != Q2.shape or Q1.shape[0] != Q1.shape[1]:
        raise ArgumentError(f"orders differ: {Q1.shape} vs {Q2.shape}")
    k = Q1.k
    if Q1.exact and Q2.exact:
        D = lcm(Q1.denom, Q2.denom)
        M = _profile(Q1, D) - _profile(Q2, D)
        if M.dtype != object and not _fits_int64(k * D):
            M = M.astype(object)
        best, x1, x2, c1, c2 = sweep(_prefix_rows(M))
        value = Fraction(best, D * k)
    else:
        M = np.zeros((k, k + 2))
        M[:, 1:k + 1] = Q1.to_float() - Q2.to_float()
        best, x1, x2, c1, c2 = sweep(_prefix_rows(M))
        value = best / k
    return value, RectWitness(value, (x1 + 1, x2 + 1), (c1, c2))


def dist_weighted_brute(Q1: GeneralMatrix, Q2: GeneralMatrix):
    k = Q1.k
    exact = Q1.exact and Q2.exact
    rows1 = Q1.fractions() if exact else Q1.to_float().tolist()
    rows2 = Q2.fractions() if exact else Q2.to_float().tolist()
    pad = [[0] + r + [1] for r in rows1], [[0] + r + [1] for r in rows2]
    best = 0
    for s in range(k):
        for e in range(s + 1, k + 1):
            for a in range(k + 2):
                for b in range(a + 1, k + 2):
                    diff = sum((pad[0][x][b] - pad[0][x][a]) - (pad[1][x][b] - pad[1][x][a]) for x in range(s, e))
                    best = max(best, abs(diff))
    return best / k


def _row_values(Z: GridPermuton, L: int, ypoints: list[tuple[int, int]], dtype) -> np.ndarray:
    """Numerators over D*L of G_row at each y-edge (u/L, side), one row per grid row.

    side is +1 for the right limit, -1 for the left limit (used only at 1)
    and 0 for the value itself, with the top convention G(1) = 1.
    """
    k = Z.k
    pad = Z.padded().astype(dtype)
    D = Z.cdf.denom if Z.exact else 1
    out = np.zeros((k, len(ypoints)), dtype=dtype)
    for col, (u, side) in enumerate(ypoints):
        if u >= L and side == 0:
            out[:, col] = D * L
        elif Z.kind == ATOMIC:
            # pad[:, j] is cdf[j], with pad[:, 0] = 0 and pad[:, k+1] = 1
            j = (k * u) // L + 1 if side > 0 else -((-k * u) // L)
            out[:, col] = pad[:, j] * L
        else:
            j = max(-((-k * u) // L), 1)
            out[:, col] = pad[:, j - 1] * L + (k * u - (j - 1) * L) * (pad[:, j] - pad[:, j - 1])
    return out


def dist_permutons(Z1: GridPermuton, Z2: GridPermuton) -> tuple[object, RectWitness]:
    """sup over rectangles [x1, x2] x [y1, y2) of the mass difference.

    Exact grids give a Fraction.  Coordinates are integers over
    L = lcm(k1, k2) but only the union of the two breakpoint sets is used,
    so the sweep costs O((k1 + k2)^3).
    """
    k1, k2 = Z1.k, Z2.k
    L = lcm(k1, k2)
    xs = sorted(set(range(0, L + 1, L // k1)) | set(range(0, L + 1, L // k2)))
    atomic = ATOMIC in (Z1.kind, Z2.kind)
    ypoints = [(0, 0)]
    for u in xs[:-1]:
        if u > 0:
            ypoints.append((u, 0))
        if atomic:
            ypoints.append((u, 1))
    ypoints += [(L, -1), (L, 0)]
    exact = Z1.exact and Z2.exact
    if exact:
        D1, D2 = Z1.cdf.denom, Z2.cdf.denom
        scale = D1 * D2 * L * L
        dtype = np.int64 if _fits_int64(scale) else object
    else:
        D1 = D2 = 1
        scale = L * L
        dtype = np.float64
    V1 = _row_values(Z1, L, ypoints, dtype)
    V2 = _row_values(Z2, L, ypoints, dtype)
    right = np.asarray(xs[1:], dtype=np.int64)
    widths = (right - np.asarray(xs[:-1], dtype=np.int64)).astype(dtype)
    r1 = -((-k1 * right) // L) - 1
    r2 = -((-k2 * right) // L) - 1
    M = (V1[r1] * D2 - V2[r2] * D1) * widths[:, None]
    best, i1, i2, c1, c2 = sweep(_prefix_rows(M))
    value = Fraction(best, scale) if exact else best / scale
    (ua, sa), (ub, sb) = ypoints[c1], ypoints[c2]
    witness = RectWitness(value, (Fraction(xs[i1], L), Fraction(xs[i2], L)),
                          (Fraction(ua, L), Fraction(ub, L)), (sa, sb))
    return value, witness


def dist_perm_vs_permuton(sigma: Permutation, Z: GridPermuton) -> tuple[object, RectWitness]:
    """d(sigma, Z) = d(Z_sigma, Z)."""
    return dist_permutons(from_permutation(sigma), Z)
