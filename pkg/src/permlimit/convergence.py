"""Finite-scale convergence diagnostics for permutation sequences.

Nothing here decides that a sequence converges.  Each diagnostic reports
the evidence it computed alongside the thresholds it was given.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .errors import ArgumentError, FeasibilityError, SizeError, ValidationError
from .metric import dist_permutations, dist_permutons
from .perm_core import Permutation, all_patterns, density_vector, format_permutation
from .permuton import DIFFUSE, GridPermuton, dump_permuton, from_permutation, from_weighted
from .weighted import GeneralMatrix, equitable_partition, format_value, partition_matrix, validate_weighted

__all__ = [
    "FORMAT_VERSION",
    "CauchyReport",
    "LimitEstimate",
    "SequenceReport",
    "density_trajectories",
    "sequence_distance",
    "cauchy_report",
    "window_profile",
    "estimate_limit",
    "build_report",
    "report_json",
    "trajectories_csv",
    "distances_csv",
]

FORMAT_VERSION = 1
MAX_TRAJECTORY_M = 4


def density_trajectories(seq: Sequence[Permutation], max_m: int = 3) -> dict[Permutation, list[Fraction]]:
    """t(tau, sigma_n) along the sequence for every tau with |tau| <= max_m."""
    if not seq:
        raise ArgumentError("sequence is empty")
    if not 1 <= max_m <= MAX_TRAJECTORY_M:
        raise SizeError(f"max_m must lie in 1..{MAX_TRAJECTORY_M}, got {max_m}")
    out: dict[Permutation, list[Fraction]] = {}
    for m in range(1, max_m + 1):
        columns = [density_vector(m, sigma) for sigma in seq]
        for tau in all_patterns(m):
            out[tau] = [col[tau] for col in columns]
    return out


def sequence_distance(a: Permutation, b: Permutation) -> Fraction:
    """d(a, b); unequal lengths compare the step permutons Z_a and Z_b."""
    if len(a) == len(b):
        return dist_permutations(a, b)[0]
    return dist_permutons(from_permutation(a), from_permutation(b))[0]


@dataclass(frozen=True)
class CauchyReport:
    epsilon: Fraction
    window: int
    indices: tuple[int, ...]
    distances: tuple[tuple[Fraction, ...], ...]
    max_distance: Fraction
    passed: bool


def _parse_threshold(epsilon) -> Fraction:
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    if eps <= 0:
        raise ArgumentError(f"epsilon must be positive, got {epsilon}")
    return eps


def cauchy_report(seq: Sequence[Permutation], epsilon, window: int) -> CauchyReport:
    """All pairwise distances among the last ``window`` elements, and whether all are < epsilon."""
    eps = _parse_threshold(epsilon)
    if not 1 <= window <= len(seq):
        raise ArgumentError(f"window must lie in 1..{len(seq)}, got {window}")
    start = len(seq) - window
    idx = tuple(range(start, len(seq)))
    D = [[Fraction(0)] * window for _ in range(window)]
    for i in range(window):
        for j in range(i + 1, window):
            D[i][j] = D[j][i] = sequence_distance(seq[start + i], seq[start + j])
    worst = max((v for row in D for v in row), default=Fraction(0))
    return CauchyReport(eps, window, idx, tuple(tuple(r) for r in D), worst, worst < eps)


def window_profile(seq: Sequence[Permutation], window: int) -> list[Fraction]:
    """Max pairwise distance inside each run of ``window`` consecutive elements."""
    if not 2 <= window <= len(seq):
        raise ArgumentError(f"window must lie in 2..{len(seq)}, got {window}")
    cache: dict[tuple[int, int], Fraction] = {}

    def d(i, j):
        if (i, j) not in cache:
            cache[i, j] = sequence_distance(seq[i], seq[j])
        return cache[i, j]

    return [max(d(i, j) for i in range(s, s + window) for j in range(i + 1, s + window))
            for s in range(len(seq) - window + 1)]


@dataclass(frozen=True)
class LimitEstimate:
    k: int
    tail: int
    average: GeneralMatrix
    spread: GeneralMatrix
    max_spread: Fraction
    grid: GridPermuton


def _exact_mean(mats: list[GeneralMatrix]) -> GeneralMatrix:
    D = 1
    for M in mats:
        D = lcm(D, M.denom)
    total = sum((M.scaled(D).astype(object) for M in mats), np.zeros(mats[0].shape, dtype=object))
    return GeneralMatrix(total, D * len(mats))


def estimate_limit(seq: Sequence[Permutation], k: int, tail: int) -> LimitEstimate:
    """Average the k x k partition matrices of the last ``tail`` elements.

    ``spread`` is the entrywise max deviation of any tail matrix from the
    average.  The returned grid is the diffuse step permuton of the average.
    """
    if k < 1:
        raise ArgumentError("k must be positive")
    if not 1 <= tail <= len(seq):
        raise ArgumentError(f"tail must lie in 1..{len(seq)}, got {tail}")
    members = list(seq[len(seq) - tail:])
    short = [len(s) for s in members if len(s) <= 4 * k * k]
    if short:
        raise FeasibilityError(f"k={k} needs tail lengths above {4 * k * k}; shortest is {min(short)}")
    mats = [partition_matrix(s, equitable_partition(len(s), k)) for s in members]
    avg = _exact_mean(mats)
    avg_f = avg.fractions()
    spread = [[max(abs(M[i, j] - avg_f[i][j]) for M in mats) for j in range(k)] for i in range(k)]
    spread_m = GeneralMatrix.from_values(spread)
    report = validate_weighted(avg)
    if not report.valid:
        raise ValidationError(f"averaged partition matrix is not a weighted permutation: {report.detail}")
    grid = from_weighted(avg, DIFFUSE)
    return LimitEstimate(k, tail, avg, spread_m, max(v for r in spread for v in r), grid)


@dataclass
class SequenceReport:
    lengths: list[int]
    trajectories: dict[Permutation, list[Fraction]]
    cauchy: CauchyReport | None = None
    estimate: LimitEstimate | None = None
    config: dict = field(default_factory=dict)


def build_report(seq: Sequence[Permutation], *, max_m: int = 3, epsilon=None, window: int | None = None,
                 k: int | None = None, tail: int | None = None) -> SequenceReport:
    traj = density_trajectories(seq, max_m)
    cauchy = None
    if epsilon is not None:
        cauchy = cauchy_report(seq, epsilon, window if window is not None else len(seq))
    estimate = None
    if k is not None:
        estimate = estimate_limit(seq, k, tail if tail is not None else len(seq))
    config = {"max_m": max_m, "epsilon": None if epsilon is None else str(epsilon),
              "window": window, "k": k, "tail": tail}
    return SequenceReport([len(s) for s in seq], traj, cauchy, estimate, config)


def _num(v, decimal: int | None):
    if decimal is not None:
        return f"{float(v):.{decimal}f}"
    return format_value(v)


def report_json(report: SequenceReport, decimal: int | None = None) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": report.config,
        "lengths": report.lengths,
        "trajectories": {format_permutation(t): [_num(v, decimal) for v in vals]
                         for t, vals in report.trajectories.items()},
    }
    if report.cauchy is not None:
        c = report.cauchy
        doc["cauchy"] = {
            "epsilon": _num(c.epsilon, decimal),
            "window": c.window,
            "indices": [i + 1 for i in c.indices],
            "max_distance": _num(c.max_distance, decimal),
            "all_below_epsilon": c.passed,
            "distances": [[_num(v, decimal) for v in row] for row in c.distances],
        }
    if report.estimate is not None:
        e = report.estimate
        doc["estimate"] = {
            "k": e.k,
            "tail": e.tail,
            "average": [[_num(v, decimal) for v in row] for row in e.average.fractions()],
            "spread": [[_num(v, decimal) for v in row] for row in e.spread.fractions()],
            "max_spread": _num(e.max_spread, decimal),
            "grid": json.loads(dump_permuton(e.grid)),
        }
    return json.dumps(doc, indent=2) + "\n"


def trajectories_csv(report: SequenceReport, decimal: int | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    taus = list(report.trajectories)
    w.writerow(["index", "n"] + [format_permutation(t) for t in taus])
    for i, n in enumerate(report.lengths):
        w.writerow([i + 1, n] + [_num(report.trajectories[t][i], decimal) for t in taus])
    return buf.getvalue()


def distances_csv(report: SequenceReport, decimal: int | None = None) -> str:
    if report.cauchy is None:
        raise ArgumentError("report has no distance matrix")
    c = report.cauchy
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow([""] + [i + 1 for i in c.indices])
    for i, row in zip(c.indices, c.distances):
        w.writerow([i + 1] + [_num(v, decimal) for v in row])
    return buf.getvalue()
