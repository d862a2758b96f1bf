"""Grid permutons: step-function limit objects described by a k x k CDF grid.

Row i of ``cdf`` is the CDF of the y-coordinate for x in ((i-1)/k, i/k],
sampled at the cell tops j/k.  The two in-cell semantics:

* atomic: Z(x, y) = cdf[i][ceil(ky)], a left-continuous step CDF.  The mass
  cdf[i][j] - cdf[i][j-1] is an atom at (j-1)/k, and any shortfall
  1 - cdf[i][k] is an atom at 1.
* diffuse: Z interpolates linearly inside each y-cell, so the same cell mass
  is spread uniformly over ((j-1)/k, j/k].

A rectangle [x1, x2] x [y1, y2) has mass  int (G(x, y2) - G(x, y1)) dx,
where G equals Z below y = 1 and G(x, 1) = 1.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb, factorial, floor, log, sqrt
from statistics import NormalDist

import numpy as np

from .errors import ArgumentError, DomainError, SizeError, StructuralError, ValidationError
from .perm_core import Permutation, adjacency_matrix
from .weighted import (
    DEFAULT_SLACK,
    GeneralMatrix,
    format_value,
    to_fraction,
    validate_weighted,
    weighted_density,
)

__all__ = [
    "GridPermuton",
    "LimitReport",
    "DensityResult",
    "ATOMIC",
    "DIFFUSE",
    "from_weighted",
    "from_permutation",
    "uniform_permuton",
    "validate_limit_permutation",
    "exact_density",
    "mc_density",
    "density_bounds",
    "azuma_tail",
    "cell_average",
    "rect_mass",
    "random_grid",
    "load_permuton",
    "dump_permuton",
]

ATOMIC = "atomic"
DIFFUSE = "diffuse"
KINDS = (ATOMIC, DIFFUSE)

DEFAULT_MAX_M = 6
DEFAULT_MAX_K = 12


class GridPermuton:
    __slots__ = ("cdf", "kind")

    def __init__(self, cdf: GeneralMatrix, kind: str):
        if kind not in KINDS:
            raise ArgumentError(f"kind must be 'atomic' or 'diffuse', got {kind!r}")
        if not isinstance(cdf, GeneralMatrix):
            cdf = GeneralMatrix.from_values(cdf)
        if cdf.shape[0] != cdf.shape[1]:
            raise StructuralError(f"cdf grid is {cdf.shape[0]}x{cdf.shape[1]}, not square")
        vals = cdf.numer
        tol = 0 if cdf.exact else DEFAULT_SLACK
        if cdf.k > 1 and (vals[:, 1:] - vals[:, :-1] < -tol).any():
            i, j = map(int, np.argwhere(vals[:, 1:] - vals[:, :-1] < -tol)[0])
            raise ValidationError(f"cdf row {i + 1} decreases between cells {j + 1} and {j + 2}")
        self.cdf = cdf
        self.kind = kind

    @property
    def k(self) -> int:
        return self.cdf.k

    @property
    def exact(self) -> bool:
        return self.cdf.exact

    def with_kind(self, kind: str) -> "GridPermuton":
        return GridPermuton(self.cdf, kind)

    def padded(self) -> np.ndarray:
        """Numerators of [0, cdf[i][1..k], 1] per row (k x (k+2))."""
        k = self.k
        top = 1.0 if self.cdf.denom is None else self.cdf.denom
        out = np.zeros((k, k + 2), dtype=self.cdf.numer.dtype)
        out[:, 1:k + 1] = self.cdf.numer
        out[:, k + 1] = top
        return out

    def cell_masses(self) -> np.ndarray:
        """k x (k+1) numerators: y-cells 1..k, then the residual mass at 1."""
        return np.diff(self.padded(), axis=1)

    def evaluate(self, x, y):
        """Z(x, y); exact when the grid and the arguments are rational."""
        k = self.k
        exact = self.exact and not isinstance(x, float) and not isinstance(y, float)
        conv = to_fraction if exact else float
        x, y = conv(x), conv(y)
        if y <= 0:
            return conv(0)
        if y > 1:
            return conv(1)
        if x <= 0:
            # boundary column of the step function
            return conv(Fraction(ceil(k * y), k)) if self.kind == ATOMIC else y
        i = min(max(ceil(k * x), 1), k) - 1
        j = ceil(k * y)
        row = self.cdf.fractions()[i] if exact else list(self.cdf.to_float()[i])
        hi = row[j - 1]
        if self.kind == ATOMIC:
            return hi
        lo = row[j - 2] if j >= 2 else conv(0)
        return lo + (k * y - (j - 1)) * (hi - lo)

    def __eq__(self, other):
        if not isinstance(other, GridPermuton):
            return NotImplemented
        return self.kind == other.kind and self.cdf == other.cdf

    def __hash__(self):
        return hash((self.kind, self.k))

    def __repr__(self):
        return f"GridPermuton(k={self.k}, kind={self.kind!r})"


def from_weighted(Q: GeneralMatrix, kind: str = ATOMIC) -> GridPermuton:
    """Z_Q: the step permuton of a weighted permutation (atomic or diffuse)."""
    report = validate_weighted(Q)
    if not report.valid:
        raise ValidationError(f"not a weighted permutation: {report.detail}")
    return GridPermuton(GeneralMatrix(Q.numer, Q.denom), kind)


def from_permutation(sigma: Permutation) -> GridPermuton:
    """Z_sigma, the atomic step function of the adjacency matrix."""
    return from_weighted(adjacency_matrix(sigma), ATOMIC)


def uniform_permuton() -> GridPermuton:
    return GridPermuton(GeneralMatrix([[1]], 1), DIFFUSE)


@dataclass(frozen=True)
class LimitReport:
    cdf_rows_ok: bool
    top_value_ok: bool
    mass_violation: Fraction | float
    valid: bool


def validate_limit_permutation(Z: GridPermuton, slack: float = DEFAULT_SLACK) -> LimitReport:
    """Classify Z against the limit-permutation axioms.

    The mass defect sup_y |int Z(x,y) dx - y| is evaluated exactly: with
    column sums S_j, the diffuse profile is linear between breakpoints (defect
    |S_j - j| / k), while the atomic profile is constant S_j / k on each cell
    ((j-1)/k, j/k] (defect max(|S_j - j + 1|, |S_j - j|) / k).
    """
    k = Z.k
    vals = Z.cdf.numer
    unit = Z.cdf.denom if Z.exact else 1.0
    tol = 0 if Z.exact else slack
    rows_ok = bool((vals >= -tol).all() and (vals <= unit + tol).all())
    if k > 1:
        rows_ok = rows_ok and bool((vals[:, 1:] - vals[:, :-1] >= -tol).all())
    top_ok = bool((abs(vals[:, k - 1] - unit) <= tol).all())
    sums = vals.sum(axis=0)
    worst = 0
    for j in range(1, k + 1):
        s = sums[j - 1]
        dev = abs(s - j * unit)
        if Z.kind == ATOMIC:
            dev = max(dev, abs(s - (j - 1) * unit))
        worst = max(worst, dev)
    if Z.exact:
        violation = Fraction(int(worst), Z.cdf.denom * k)
        valid = rows_ok and top_ok and violation == 0
    else:
        violation = float(worst) / k
        valid = rows_ok and top_ok and violation <= slack
    return LimitReport(rows_ok, top_ok, violation, valid)


@dataclass(frozen=True)
class DensityResult:
    value: float
    method: str
    error_bound: float
    exact: Fraction | None = None
    std_error: float | None = None
    clt_bound: float | None = None
    reps: int | None = None
    n: int | None = None
    confidence: float | None = None
    samples: tuple = field(default=(), repr=False)


def _x_cell_tuples(k: int, m: int) -> np.ndarray:
    return np.array(list(itertools.combinations_with_replacement(range(k), m)), dtype=np.int64)


def _multinomial_weights(cells: np.ndarray, m: int) -> list[int]:
    out = []
    for row in cells:
        w = factorial(m)
        for _, grp in itertools.groupby(row):
            w //= factorial(len(list(grp)))
        out.append(w)
    return out


def exact_density(tau: Permutation, Z: GridPermuton, *, max_m: int = DEFAULT_MAX_M,
                  max_k: int = DEFAULT_MAX_K) -> DensityResult:
    """t(tau, Z) by enumerating cell assignments.

    Sorted i.i.d. uniform x-coordinates land in a non-decreasing x-cell tuple
    c with probability (m! / prod n_c!) / k^m; given c the y-coordinates are
    independent with the row's cell masses.  A DP over tau's value order
    then places ranks into y-cells: in a diffuse cell a group of g ranks is
    correctly ordered with probability 1/g!, while atoms (all atomic cells,
    and the residual mass at 1 for both kinds) admit one index each, since
    ties never realise a strict order.
    """
    m, k = len(tau), Z.k
    if m == 1:
        return DensityResult(1.0, "exact", 0.0, exact=Fraction(1) if Z.exact else None)
    if m > max_m or k > max_k:
        raise SizeError(f"exact density guard is m <= {max_m}, k <= {max_k} (got m={m}, k={k}); use mc_density")
    masses = Z.cell_masses()
    D = Z.cdf.denom
    exact = D is not None
    if exact and factorial(m) * D**m * k**m >= 2**62:
        masses = masses.astype(object)
    cells = _x_cell_tuples(k, m)
    ncells = len(cells)
    pts = [i - 1 for i in tau.inverse().images]  # index holding each rank
    diffuse = Z.kind == DIFFUSE
    # p[r][:, b]: mass of y-cell b for the point holding rank r+1
    p = [masses[cells[:, s]] for s in pts]
    zero = np.zeros(ncells, dtype=masses.dtype)
    # H[r] = r! * P(ranks 1..r sit correctly in cells <= current b)
    H = [np.ones(ncells, dtype=masses.dtype)] + [zero.copy() for _ in range(m)]
    for b in range(k + 1):
        prev = [h.copy() for h in H]
        max_group = m if (diffuse and b < k) else 1
        for r in range(1, m + 1):
            acc = prev[r].copy()
            prod = np.ones(ncells, dtype=masses.dtype)
            for g in range(1, min(r, max_group) + 1):
                prod = prod * p[r - g][:, b]
                acc = acc + prev[r - g] * (comb(r, g) if exact else float(comb(r, g))) * prod
            H[r] = acc
        H[0] = prev[0]
    final = H[m]
    weights = _multinomial_weights(cells, m)
    if exact:
        total = sum(int(w) * int(v) for w, v in zip(weights, final))
        value = Fraction(total, factorial(m) * D**m * k**m)
        return DensityResult(float(value), "exact", 0.0, exact=value)
    total = float(np.dot(np.asarray(weights, dtype=np.float64), final))
    return DensityResult(total / (factorial(m) * k**m), "exact", 0.0)


def azuma_tail(eps: float, n: int, m: int) -> float:
    """2 exp(-eps^2 n / (2 m^2)): P(|t(tau, sigma(n,Z)) - t(tau,Z)| > eps) bound."""
    return min(1.0, 2.0 * np.exp(-eps * eps * n / (2.0 * m * m)))


def mc_density(tau: Permutation, Z: GridPermuton, n: int, reps: int, stream, *,
               confidence: float = 0.95) -> DensityResult:
    """Mean of t(tau, sigma(n, Z)) over independent Z-random permutations.

    Replicate r uses ``stream.substream(r)``.  ``error_bound`` is the
    bounded-differences envelope for the pooled n * reps pairs (each pair
    moves the mean by at most m / (n reps)) at the given confidence;
    ``clt_bound`` is the matching normal-approximation half-width.
    """
    from .perm_core import density
    from .sampler import sample_z_random

    m = len(tau)
    if n < m:
        raise ArgumentError(f"sample length n={n} is shorter than the pattern (m={m})")
    if reps < 1:
        raise ArgumentError("reps must be at least 1")
    if not 0 < confidence < 1:
        raise ArgumentError("confidence must lie in (0, 1)")
    values = [density(tau, sample_z_random(Z, n, stream.substream(r))) for r in range(reps)]
    mean = sum(values, Fraction(0)) / reps
    floats = np.array([float(v) for v in values])
    delta = 1 - confidence
    azuma = m * sqrt(2 * log(2 / delta) / (n * reps))
    se = float(floats.std(ddof=1) / sqrt(reps)) if reps > 1 else float("nan")
    z = NormalDist().inv_cdf(1 - delta / 2)
    return DensityResult(float(mean), "monte_carlo", azuma, std_error=se,
                         clt_bound=z * se if reps > 1 else None, reps=reps, n=n,
                         confidence=confidence, samples=tuple(floats))


def density_bounds(tau: Permutation, Q: GeneralMatrix) -> tuple[Fraction, Fraction]:
    """((1 - m/n)^m t(tau,Q), t(tau,Q) + (m+2)!/n), clamped to [0, 1]; n = order of Q."""
    m, n = len(tau), Q.k
    if m >= n:
        raise DomainError(f"bounds need |tau| < order, got m={m}, n={n}")
    t = weighted_density(tau, Q)
    conv = Fraction if Q.exact else float
    lower = conv(1 - conv(m) / n) ** m * t
    upper = min(conv(1), t + conv(factorial(m + 2)) / n)
    return max(conv(0), lower), upper


def _antiderivative(row: list, k: int, kind: str, y):
    # int_0^y of the row CDF, exact on rational input
    if y <= 0:
        return 0
    j = min(ceil(k * y), k)
    total = 0
    for cell in range(1, j + 1):
        lo = row[cell - 2] if cell >= 2 else 0
        hi = row[cell - 1]
        width = y - Fraction(cell - 1, k) if cell == j else Fraction(1, k)
        if isinstance(y, float):
            width = float(width)
        if kind == DIFFUSE:
            total += lo * width + k * (hi - lo) * width * width / 2
        else:
            total += hi * width
    return total


def cell_average(Z: GridPermuton, kp: int) -> GeneralMatrix:
    """Q_{Z,P}: average of Z over the cells of a kp x kp grid.

    Z is piecewise constant in x, so each target cell is a sum over grid
    rows of overlap length times an exact y-integral.
    """
    if kp < 1:
        raise ArgumentError("kp must be positive")
    k = Z.k
    rows = Z.cdf.fractions() if Z.exact else Z.cdf.to_float().tolist()
    conv = Fraction if Z.exact else float
    A = [[_antiderivative(rows[i], k, Z.kind, conv(j) / kp) for j in range(kp + 1)] for i in range(k)]
    out = []
    for u in range(kp):
        xa, xb = Fraction(u, kp), Fraction(u + 1, kp)
        overlaps = []
        for i in range(k):
            lo = max(xa, Fraction(i, k))
            hi = min(xb, Fraction(i + 1, k))
            if hi > lo:
                overlaps.append((i, conv(hi - lo)))
        out.append([kp * kp * sum(w * (A[i][j + 1] - A[i][j]) for i, w in overlaps) for j in range(kp)])
    return GeneralMatrix.from_values(out)


def _g_value(row: list, k: int, kind: str, y, side: int):
    # G at y, or its one-sided limit; G(1) = 1 by the top convention
    if y >= 1 and side >= 0:
        return 1
    if y <= 0 and side <= 0:
        return 0
    ky = k * y
    if kind == ATOMIC:
        j = floor(ky) + 1 if side > 0 else ceil(ky)
        return row[j - 1] if j <= k else 1
    j = max(ceil(ky), 1)
    lo = row[j - 2] if j >= 2 else 0
    return lo + (ky - (j - 1)) * (row[j - 1] - lo)


def rect_mass(Z: GridPermuton, x1, x2, y1, y2, sides: tuple[int, int] = (0, 0)):
    """Mass of [x1, x2] x [y1, y2).

    ``sides`` replaces an edge by its right (+1) or left (-1) limit.
    """
    k = Z.k
    rows = Z.cdf.fractions() if Z.exact else Z.cdf.to_float().tolist()
    conv = to_fraction if Z.exact else float
    x1, x2, y1, y2 = conv(x1), conv(x2), conv(y1), conv(y2)
    total = conv(0)
    for i in range(k):
        lo = max(x1, conv(Fraction(i, k)))
        hi = min(x2, conv(Fraction(i + 1, k)))
        if hi > lo:
            total += (hi - lo) * (_g_value(rows[i], k, Z.kind, y2, sides[1])
                                  - _g_value(rows[i], k, Z.kind, y1, sides[0]))
    return total


def random_grid(k: int, rng: np.random.Generator, kind: str = DIFFUSE, *, terms: int = 3,
                max_weight: int = 9) -> GridPermuton:
    """A random exact grid whose cell masses are doubly stochastic.

    The mass matrix is a mixture of ``terms`` random permutation matrices
    with random integer weights, so every row has total mass 1 and every
    column sums to 1: the diffuse version is a valid limit permutation.
    """
    weights = rng.integers(1, max_weight + 1, size=terms)
    mass = np.zeros((k, k), dtype=np.int64)
    for w in weights:
        perm = rng.permutation(k)
        mass[np.arange(k), perm] += int(w)
    return GridPermuton(GeneralMatrix(np.cumsum(mass, axis=1), int(weights.sum())), kind)


def _parse_entry(v) -> Fraction:
    if isinstance(v, bool):
        raise ArgumentError("boolean is not a cdf value")
    try:
        return to_fraction(v)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ArgumentError(f"bad cdf value {v!r}") from exc


def load_permuton(text: str) -> GridPermuton:
    """Parse the JSON permuton format {"k", "kind", "cdf"} exactly."""
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"invalid permuton JSON: {exc}") from exc
    if not isinstance(doc, dict) or not {"k", "kind", "cdf"} <= doc.keys():
        raise ArgumentError("permuton JSON needs keys 'k', 'kind' and 'cdf'")
    k = doc["k"]
    cdf = doc["cdf"]
    if not isinstance(k, int) or k < 1:
        raise ArgumentError(f"k must be a positive integer, got {k!r}")
    if not isinstance(cdf, list) or len(cdf) != k or any(not isinstance(r, list) or len(r) != k for r in cdf):
        raise StructuralError(f"cdf must be a {k}x{k} array")
    return GridPermuton(GeneralMatrix.from_values([[_parse_entry(v) for v in r] for r in cdf]), doc["kind"])


def dump_permuton(Z: GridPermuton) -> str:
    rows = Z.cdf.fractions() if Z.exact else Z.cdf.to_float().tolist()
    cdf = [[format_value(v) for v in r] for r in rows]
    return json.dumps({"k": Z.k, "kind": Z.kind, "cdf": cdf}, indent=None) + "\n"
