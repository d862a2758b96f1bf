"""Slow, independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb, factorial

import numpy as np

from permlimit import GridPermuton, Permutation
from permlimit.perm_core import reduce_pattern


def random_perm(rng: np.random.Generator, n: int) -> Permutation:
    return Permutation(tuple(int(v) for v in rng.permutation(n) + 1))


def naive_weighted_density(tau: Permutation, rows: list[list[Fraction]]) -> Fraction:
    """The defining double sum over row tuples X and column tuples A."""
    k, m = len(rows), len(tau)
    padded = [[Fraction(0)] + list(r) + [Fraction(1)] for r in rows]
    total = Fraction(0)
    for X in itertools.combinations(range(k), m):
        for A in itertools.combinations(range(1, k + 2), m):
            prod = Fraction(1)
            for i in range(m):
                a = A[tau.images[i] - 1]
                row = padded[X[i]]
                prod *= row[a] - row[a - 1]
                if prod == 0:
                    break
            total += prod
    return total / comb(k, m)


def assignment_density(tau: Permutation, Z: GridPermuton) -> Fraction:
    """t(tau, Z) by summing over independent (x-cell, y-cell) assignments.

    Each point gets an x-cell and a y-cell independently.  Given the cells,
    every x-order and y-order compatible with them is equally likely; count
    the compatible pairs of orders that produce tau.  Shared atoms (atomic
    cells and the residual mass at 1) make a strict order impossible.
    """
    k, m = Z.k, len(tau)
    rows = Z.cdf.fractions()
    masses = [[r[0]] + [r[j] - r[j - 1] for j in range(1, k)] + [1 - r[k - 1]] for r in rows]
    atomic = Z.kind == "atomic"
    total = Fraction(0)
    perms = list(itertools.permutations(range(m)))
    for xcells in itertools.product(range(k), repeat=m):
        for ycells in itertools.product(range(k + 1), repeat=m):
            p = Fraction(1, k**m)
            for s in range(m):
                p *= masses[xcells[s]][ycells[s]]
            if p == 0:
                continue
            shared_atom = any(ycells.count(c) > 1 and (atomic or c == k) for c in set(ycells))
            if shared_atom:
                continue
            xorders = [o for o in perms if all(xcells[o[i]] <= xcells[o[i + 1]] for i in range(m - 1))]
            yorders = [o for o in perms if all(ycells[o[i]] <= ycells[o[i + 1]] for i in range(m - 1))]
            hits = 0
            for xo in xorders:
                yrank = {}
                for yo in yorders:
                    for r, pt in enumerate(yo):
                        yrank[pt] = r + 1
                    if tuple(yrank[pt] for pt in xo) == tau.images:
                        hits += 1
            total += p * Fraction(hits, len(xorders) * len(yorders))
    return total


def lattice_permuton_distance(Z1: GridPermuton, Z2: GridPermuton, refine: int) -> float:
    """Max rectangle mass difference with edges on a lattice of mesh 1/refine.

    Row CDFs come from Z.evaluate at lattice points, at points a tiny shift
    to the right (right limits at atoms), just below 1, and at the top value
    1.  When refine is a multiple of both grid orders this is the exact
    supremum up to the shift.
    """
    N = refine
    shift = Fraction(1, 10**12)
    ys = []
    for j in range(N):
        ys += [Fraction(j, N), Fraction(j, N) + shift]
    ys += [1 - shift, None]

    def profile(Z):
        out = np.zeros((N, len(ys)))
        for i in range(N):
            x = Fraction(2 * i + 1, 2 * N)
            for j, y in enumerate(ys):
                out[i, j] = 1.0 if y is None else float(Z.evaluate(x, y))
        return out / N

    M = profile(Z1) - profile(Z2)
    W = np.vstack([np.zeros((1, len(ys))), np.cumsum(M, axis=0)])
    best = 0.0
    for a in range(N):
        D = W[a + 1:] - W[a]
        best = max(best, float((D.max(axis=1) - D.min(axis=1)).max()))
    return best


def pattern_of_points(xs, ys) -> tuple[int, ...]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    return reduce_pattern([ys[i] for i in order]).images


def pattern_codes(samples: np.ndarray) -> np.ndarray:
    """Row-wise pattern index (lexicographic rank in S_m) of an (N, m) array."""
    N, m = samples.shape
    ranks = np.argsort(np.argsort(samples, axis=1), axis=1)
    lex = list(itertools.permutations(range(m)))
    lookup = {p: i for i, p in enumerate(lex)}
    base = m ** np.arange(m)
    keys = (ranks * base).sum(axis=1)
    table = {int(sum(v * m**i for i, v in enumerate(p))): lookup[p] for p in lex}
    return np.array([table[int(k)] for k in keys])


def sorted_fact(m: int) -> int:
    return factorial(m)


def mc_pattern_frequencies(Z: GridPermuton, m: int, draws: int, seed: int, strict: bool = False) -> np.ndarray:
    """Empirical frequencies of each tau in S_m (lexicographic order) for sigma(m, Z).

    With ``strict`` a draw whose a-values tie counts towards no pattern,
    which is the strict-order convention of the exact density.
    """
    from permlimit.sampler import RandomStream, draw_points

    X, cells, w, a = draw_points(Z, m * draws, RandomStream(seed))
    X, cells, w, a = (v.reshape(draws, m) for v in (X, cells, w, a))
    order = np.argsort(X, axis=1)
    take = lambda v: np.take_along_axis(v, order, axis=1)
    cells, w, a = take(cells), take(w), take(a)
    key = cells * 2.0 - w  # same order as the lexicographic (cell, -w)
    codes = pattern_codes(key)
    keep = np.ones(draws, dtype=bool)
    if strict:
        sa = np.sort(a, axis=1)
        keep = (np.diff(sa, axis=1) > 0).all(axis=1)
    return np.bincount(codes[keep], minlength=factorial(m)) / draws
