import csv
import io
import json
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from oracles import random_perm
from permlimit import ArgumentError, FeasibilityError, SizeError
from permlimit.convergence import (
    build_report,
    cauchy_report,
    density_trajectories,
    distances_csv,
    estimate_limit,
    report_json,
    sequence_distance,
    trajectories_csv,
    window_profile,
)
from permlimit.metric import dist_permutations, dist_permutons
from permlimit.perm_core import Permutation, all_patterns, identity, reversal
from permlimit.permuton import cell_average, from_permutation, random_grid, uniform_permuton
from permlimit.sampler import RandomStream, sample_z_random
from permlimit.weighted import equitable_partition, partition_matrix, validate_weighted


def uniform_samples(lengths, seed):
    U = uniform_permuton()
    root = RandomStream(seed)
    return [sample_z_random(U, n, root.substream(i)) for i, n in enumerate(lengths)]


def test_trajectories_of_identities():
    seq = [identity(n) for n in range(2, 11)]
    traj = density_trajectories(seq, 2)
    assert traj[Permutation((1, 2))] == [1] * 9
    assert traj[Permutation((2, 1))] == [0] * 9
    assert all(isinstance(v, F) for v in traj[Permutation((1, 2))])


def test_trajectory_normalisation_and_guards():
    rng = np.random.default_rng(70)
    seq = [random_perm(rng, n) for n in (1, 2, 3, 5, 8, 13)]
    traj = density_trajectories(seq, 3)
    for i, sigma in enumerate(seq):
        total = sum(traj[t][i] for t in all_patterns(3))
        assert total == (1 if len(sigma) >= 3 else 0)
    assert all(len(v) == len(seq) for v in traj.values())
    with pytest.raises(SizeError):
        density_trajectories(seq, 5)
    with pytest.raises(ArgumentError):
        density_trajectories([], 2)


def test_uniform_trajectory_approaches_half():
    seq = uniform_samples([20, 200, 2000], 71)
    vals = density_trajectories(seq, 2)[Permutation((2, 1))]
    assert abs(vals[-1] - F(1, 2)) < 0.05


def test_cauchy_constant_sequence():
    sigma = Permutation((2, 5, 1, 4, 3))
    rep = cauchy_report([sigma] * 4, 0.01, 3)
    assert rep.max_distance == 0 and rep.passed and rep.indices == (1, 2, 3)


def test_cauchy_alternating():
    seq = [identity(6), reversal(6)] * 3
    rep = cauchy_report(seq, 0.1, 4)
    assert rep.max_distance == dist_permutations(identity(6), reversal(6))[0]
    assert not rep.passed
    D = rep.distances
    assert all(D[i][i] == 0 for i in range(4))
    assert all(D[i][j] == D[j][i] for i in range(4) for j in range(4))
    with pytest.raises(ArgumentError):
        cauchy_report(seq, 0.1, 7)
    with pytest.raises(ArgumentError):
        cauchy_report(seq, 0, 2)


def test_unequal_lengths_use_step_permutons():
    a, b = identity(3), identity(6)
    assert sequence_distance(a, b) == dist_permutons(from_permutation(a), from_permutation(b))[0]
    assert 0 < sequence_distance(a, b) <= F(1, 3)
    assert sequence_distance(identity(4), identity(4)) == 0


def test_growing_uniform_samples_tail_decreases():
    seq = uniform_samples([50, 100, 200, 400, 800, 1600], 72)
    early = cauchy_report(seq[:3], 1, 3).max_distance
    late = cauchy_report(seq, 1, 3).max_distance
    assert late < early


def test_window_profile_trend_flag():
    # statistical property, reported rather than enforced
    runs, good = 10, 0
    for seed in range(runs):
        seq = uniform_samples([100 * 2**i for i in range(4)], 700 + seed)
        prof = window_profile(seq, 2)
        good += all(x >= y for x, y in zip(prof, prof[1:]))
    if good < 0.9 * runs:
        warnings.warn(f"tail distances non-increasing in only {good}/{runs} runs")
    assert len(prof) == 3


def test_estimate_limit_uniform():
    k = 4
    seq = uniform_samples([400] * 12, 73)
    est = estimate_limit(seq, k, 12)
    target = cell_average(uniform_permuton(), k).to_float()
    assert np.allclose(target[0], [(2 * j - 1) / (2 * k) for j in range(1, k + 1)])
    avg = est.average.to_float()
    # tolerance from the observed spread of the individual matrices
    mats = np.array([partition_matrix(s, equitable_partition(400, k)).to_float() for s in seq])
    se = mats.std(axis=0, ddof=1) / np.sqrt(len(seq))
    assert (np.abs(avg - target) <= 4 * se + 1e-3).all()
    assert est.grid.kind == "diffuse"
    assert validate_weighted(est.average).valid


def test_estimate_limit_constant_sequence():
    sigma = random_perm(np.random.default_rng(74), 40)
    est = estimate_limit([sigma] * 3, 3, 3)
    assert est.max_spread == 0
    assert est.average == partition_matrix(sigma, equitable_partition(40, 3))


def test_estimate_limit_recovers_grid():
    rng = np.random.default_rng(75)
    k = 3
    Z = random_grid(k, rng)
    root = RandomStream(75)
    seq = [sample_z_random(Z, 600, root.substream(i)) for i in range(12)]
    avg = estimate_limit(seq, k, 12).average.to_float()
    mats = np.array([partition_matrix(s, equitable_partition(600, k)).to_float() for s in seq])
    se = mats.std(axis=0, ddof=1) / np.sqrt(len(seq))
    assert (np.abs(avg - cell_average(Z, k).to_float()) <= 4 * se + 2e-3).all()


def test_estimate_limit_spread_trend_flag():
    k = 2
    spreads = []
    for n in (100, 200, 400):
        seq = uniform_samples([n] * 6, 760 + n)
        spreads.append(float(estimate_limit(seq, k, 6).max_spread))
    if not spreads[0] >= spreads[1] >= spreads[2]:
        warnings.warn(f"spread not monotone over dyadic lengths: {spreads}")
    assert spreads[-1] < 0.2


def test_estimate_limit_feasibility():
    with pytest.raises(FeasibilityError):
        estimate_limit([identity(64)], 4, 1)
    with pytest.raises(ArgumentError):
        estimate_limit([identity(100)], 4, 2)


def test_report_outputs():
    seq = uniform_samples([30, 40, 50], 77)
    rep = build_report(seq, max_m=2, epsilon="0.5", window=3, k=2, tail=2)
    doc = json.loads(report_json(rep))
    assert doc["format_version"] == 1
    assert set(doc) >= {"trajectories", "cauchy", "estimate"}
    assert report_json(rep) == report_json(build_report(seq, max_m=2, epsilon="0.5", window=3, k=2, tail=2))
    rows = list(csv.reader(io.StringIO(trajectories_csv(rep))))
    assert rows[0][:3] == ["index", "n", "1"] and len(rows) == 4
    assert len(rows[0]) == 2 + 1 + 2
    dist = list(csv.reader(io.StringIO(distances_csv(rep))))
    assert len(dist) == 4 and all(len(r) == 4 for r in dist)
    assert trajectories_csv(rep).endswith("\r\n")
