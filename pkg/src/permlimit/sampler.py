"""Z-random permutations, rank composition and uniform subpermutations.

Random streams
--------------
A :class:`RandomStream` is numpy's PCG64 seeded through
``SeedSequence(entropy=seed, spawn_key=(stream_id, *path))``.  Uniforms are
``Generator.random()`` doubles (53 random bits).  ``substream(i)`` appends
``i`` to the path, so replicate ``i`` of a batch gets the same draws no
matter how many workers run the batch.  Stream scheme version:
``STREAM_VERSION``.

Z-random sampling
-----------------
For each of the n points three uniforms are drawn in bulk: X (position), u
(choice of y-cell by inverse CDF on the row of cell ceil(kX)) and w
(position inside the y-cell).  The a-value is (j - w)/k for a diffuse cell
j, the atom (j-1)/k for an atomic one, and 1 for the residual mass.  The
permutation only depends on the order of the a-values, which is the
lexicographic order of (cell, -w) for both kinds: in the atomic case w
breaks ties uniformly at random.  Atomic and diffuse grids with the same
cdf therefore give identical permutations from the same stream.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, TieError
from .perm_core import Permutation, reduce_pattern
from .permuton import ATOMIC, GridPermuton

__all__ = [
    "STREAM_VERSION",
    "RandomStream",
    "SamplePair",
    "rank_compose",
    "ranks",
    "draw_conditional",
    "draw_points",
    "sample_z_random",
    "sample_positions",
    "sample_subpermutation",
]

STREAM_VERSION = 1
_SEED_LIMIT = 2**64


class RandomStream:
    def __init__(self, seed: int, stream_id: int = 0, path: tuple[int, ...] = ()):
        seed, stream_id = int(seed), int(stream_id)
        if not 0 <= seed < _SEED_LIMIT:
            raise ArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if stream_id < 0 or any(p < 0 for p in path):
            raise ArgumentError("stream ids must be non-negative")
        self.seed = seed
        self.stream_id = stream_id
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id, *self.path))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def substream(self, i: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.path + (int(i),))

    def random(self, size=None):
        return self.generator.random(size)

    def choice(self, n: int, size: int) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=False)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


@dataclass(frozen=True)
class SamplePair:
    X: float
    a: float

    def __post_init__(self):
        if not (0 <= self.X <= 1 and 0 <= self.a <= 1):
            raise ArgumentError(f"sample pair ({self.X}, {self.a}) is outside [0, 1]^2")


def ranks(values: Sequence[float], name: str = "value") -> tuple[int, ...]:
    """R(i) = #{j : v_j <= v_i}; raises TieError on repeated values."""
    order = sorted(range(len(values)), key=values.__getitem__)
    for p, q in zip(order, order[1:]):
        if values[p] == values[q]:
            i, j = sorted((p, q))
            raise TieError(f"{name}s at indices {i + 1} and {j + 1} are equal ({values[p]})")
    out = [0] * len(values)
    for r, idx in enumerate(order, start=1):
        out[idx] = r
    return tuple(out)


def rank_compose(pairs: Iterable) -> Permutation:
    """sigma = S . R^{-1}, where R ranks the X's and S ranks the a's."""
    pairs = [p if isinstance(p, SamplePair) else SamplePair(*p) for p in pairs]
    if not pairs:
        raise ArgumentError("need at least one sample pair")
    R = ranks([p.X for p in pairs], "X")
    S = ranks([p.a for p in pairs], "a")
    sigma = [0] * len(pairs)
    for r, s in zip(R, S):
        sigma[r - 1] = s
    return Permutation(tuple(sigma))


def _row_index(Z: GridPermuton, X: np.ndarray) -> np.ndarray:
    return np.clip(np.ceil(Z.k * X).astype(np.int64), 1, Z.k) - 1


def _y_cells(Z: GridPermuton, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF over cells 1..k plus the residual cell k+1 (returned 0-based)
    F = Z.cdf.to_float()
    return np.minimum((F[rows] <= u[:, None]).sum(axis=1), Z.k)


def _a_values(Z: GridPermuton, cells: np.ndarray, w: np.ndarray) -> np.ndarray:
    k = Z.k
    if Z.kind == ATOMIC:
        a = cells / k
    else:
        a = (cells + 1 - w) / k
    return np.where(cells == k, 1.0, a)


def draw_points(Z: GridPermuton, n: int, stream: RandomStream):
    """(X, cell, w, a) arrays for n i.i.d. points of Z."""
    X = stream.random(n)
    u = stream.random(n)
    w = stream.random(n)
    cells = _y_cells(Z, _row_index(Z, X), u)
    return X, cells, w, _a_values(Z, cells, w)


def draw_conditional(Z: GridPermuton, x: float, stream: RandomStream) -> float:
    """One draw a ~ Z(x, .) by inverse CDF on the row of cell ceil(kx)."""
    if not 0 <= x <= 1:
        raise ArgumentError(f"x={x} is outside [0, 1]")
    u, w = stream.random(2)
    rows = _row_index(Z, np.array([x]))
    cells = _y_cells(Z, rows, np.array([u]))
    return float(_a_values(Z, cells, np.array([w]))[0])


def sample_z_random(Z: GridPermuton, n: int, stream: RandomStream) -> Permutation:
    """sigma(n, Z): rank the a's of the points taken in increasing X order."""
    if n < 1:
        raise ArgumentError("n must be at least 1")
    X, cells, w, _ = draw_points(Z, n, stream)
    by_a = np.lexsort((-w, cells))
    S = np.empty(n, dtype=np.int64)
    S[by_a] = np.arange(1, n + 1)
    by_x = np.lexsort((np.arange(n), X))
    return Permutation(tuple(S[by_x].tolist()))


def sample_positions(n: int, k: int, stream: RandomStream) -> tuple[int, ...]:
    """A uniform k-subset of {1..n}, sorted."""
    if not 1 <= k <= n:
        raise ArgumentError(f"need 1 <= k <= n, got k={k}, n={n}")
    return tuple(int(i) + 1 for i in np.sort(stream.choice(n, k)))


def sample_subpermutation(sigma: Permutation, k: int, stream: RandomStream) -> Permutation:
    """sub(k, sigma): the pattern induced by a uniform k-subset of positions."""
    idx = sample_positions(len(sigma), k, stream)
    return reduce_pattern([sigma(i) for i in idx])
