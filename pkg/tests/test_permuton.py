import json
from fractions import Fraction as F
from math import factorial

import numpy as np
import pytest

from oracles import mc_pattern_frequencies, random_perm
from permlimit import (
    DomainError,
    GeneralMatrix,
    RandomStream,
    SizeError,
    StructuralError,
    ValidationError,
    WeightedPermutation,
)
from permlimit.perm_core import Permutation, adjacency_matrix, all_patterns, identity
from permlimit.permuton import (
    GridPermuton,
    cell_average,
    density_bounds,
    dump_permuton,
    exact_density,
    from_permutation,
    from_weighted,
    load_permuton,
    mc_density,
    random_grid,
    rect_mass,
    uniform_permuton,
    validate_limit_permutation,
)
from permlimit.weighted import random_weighted, weighted_density


def uniform_q(k):
    return WeightedPermutation([[j for j in range(1, k + 1)] for _ in range(k)], k)


def test_uniform_grid_from_weighted_is_identity_cdf():
    Z = from_weighted(uniform_q(4), "diffuse")
    for x in (F(1, 7), F(1, 2), F(1)):
        for y in (F(0), F(3, 10), F(5, 8), F(1)):
            assert Z.evaluate(x, y) == y


def test_atomic_step_semantics():
    Q = random_weighted(5, np.random.default_rng(30))
    Z = from_weighted(Q, "atomic")
    assert all(Z.evaluate(F(i, 10), 0) == 0 for i in range(11))
    # left-continuous step: constant on ((j-1)/k, j/k]
    assert Z.evaluate(F(1, 10), F(2, 5)) == Q[0, 1]
    assert Z.evaluate(F(1, 10), F(2, 5) + F(1, 1000)) == Q[0, 2]
    assert Z.evaluate(0, F(3, 10)) == F(2, 5)
    with pytest.raises(ValidationError):
        from_weighted(GeneralMatrix([[1, 1], [1, 1]], 1))


def test_z_sigma_is_atomic_adjacency_grid():
    sigma = Permutation((2, 4, 1, 3))
    Z = from_permutation(sigma)
    assert Z.kind == "atomic" and Z.cdf == adjacency_matrix(sigma)


def test_uniform_permuton():
    U = uniform_permuton()
    assert U.evaluate(F(2, 3), F(3, 10)) == F(3, 10)
    assert abs(U.evaluate(0.4, 0.3) - 0.3) < 1e-15
    rep = validate_limit_permutation(U)
    assert rep.valid and rep.mass_violation == 0
    for m in range(1, 5):
        for tau in all_patterns(m):
            assert exact_density(tau, U).exact == F(1, factorial(m))


def test_limit_classifier():
    rng = np.random.default_rng(31)
    for _ in range(10):
        rep = validate_limit_permutation(from_permutation(random_perm(rng, int(rng.integers(1, 9)))))
        assert not rep.valid and rep.mass_violation > 0
    for _ in range(30):
        k = int(rng.integers(1, 9))
        rep = validate_limit_permutation(from_weighted(random_weighted(k, rng), "diffuse"))
        assert rep.mass_violation <= F(1, k)
    Z = random_grid(5, rng)
    assert validate_limit_permutation(Z).valid
    assert not validate_limit_permutation(Z.with_kind("atomic")).valid
    with pytest.raises(ValidationError):
        GridPermuton(GeneralMatrix([[1, 0], [0, 1]], 1), "diffuse")
    with pytest.raises(StructuralError):
        GridPermuton(GeneralMatrix([[1, 1]], 1), "diffuse")


def test_exact_density_uniform_grids():
    for k in range(1, 9):
        Z = from_weighted(uniform_q(k), "diffuse")
        for m in range(1, 5):
            assert exact_density(all_patterns(m)[-1], Z).exact == F(1, factorial(m))


def test_exact_density_single_atom():
    Z = GridPermuton(GeneralMatrix([[1]], 1), "atomic")
    assert exact_density(Permutation((1,)), Z).value == 1
    for m in (2, 3, 4):
        for tau in all_patterns(m):
            assert exact_density(tau, Z).exact == 0


def test_exact_density_guards():
    with pytest.raises(SizeError, match="mc_density"):
        exact_density(identity(7), uniform_permuton())
    with pytest.raises(SizeError):
        exact_density(identity(2), random_grid(13, np.random.default_rng(0)))
    assert exact_density(identity(2), random_grid(13, np.random.default_rng(0)), max_k=13).value > 0


def test_exact_density_sums_to_one():
    rng = np.random.default_rng(32)
    for _ in range(8):
        Z = random_grid(int(rng.integers(1, 6)), rng)
        for m in (1, 2, 3):
            assert sum(exact_density(t, Z).exact for t in all_patterns(m)) == 1


def test_atomic_bracket_and_monte_carlo():
    rng = np.random.default_rng(33)
    Q = random_weighted(8, rng)
    Z = from_weighted(Q, "atomic")
    draws = 1_000_000
    freq = mc_pattern_frequencies(Z, 3, draws, seed=330, strict=True)
    for idx, tau in enumerate(all_patterns(3)):
        v = exact_density(tau, Z).value
        lo, hi = density_bounds(tau, Q)
        assert lo <= v <= hi
        se = np.sqrt(max(v * (1 - v), 1e-12) / draws)
        assert abs(freq[idx] - v) < 5 * se + 1e-6


@pytest.mark.parametrize("k_m", [(1, 2), (3, 3), (4, 3), (5, 2)])
def test_bracket_on_random_atomic_grids(k_m):
    k, m = k_m
    k = max(k, m + 1)
    rng = np.random.default_rng(34 + k)
    for kk in range(k, 11):
        Q = random_weighted(kk, rng)
        Z = from_weighted(Q, "atomic")
        for tau in all_patterns(m):
            lo, hi = density_bounds(tau, Q)
            assert lo <= exact_density(tau, Z).exact <= hi


def test_density_bounds_formula():
    Q = uniform_q(10)
    tau = Permutation((1, 2))
    t = weighted_density(tau, Q)
    assert density_bounds(tau, Q) == (F(16, 25) * t, 1)
    big = uniform_q(3)
    with pytest.raises(DomainError):
        density_bounds(identity(3), big)
    widths = [float(density_bounds(tau, uniform_q(k))[1] - density_bounds(tau, uniform_q(k))[0])
              for k in (20, 40, 80)]
    assert widths[0] > widths[1] > widths[2]


def test_mc_density_uniform():
    res = mc_density(Permutation((2, 1)), uniform_permuton(), 500, 100, RandomStream(40))
    assert res.method == "monte_carlo" and res.reps == 100
    assert abs(res.value - 0.5) <= res.error_bound
    assert abs(res.value - 0.5) <= 4 * res.std_error
    again = mc_density(Permutation((2, 1)), uniform_permuton(), 500, 100, RandomStream(40))
    assert again.value == res.value


def test_mc_density_matches_exact():
    rng = np.random.default_rng(41)
    for g in range(3):
        Z = random_grid(int(rng.integers(1, 5)), rng)
        tau = all_patterns(3)[int(rng.integers(0, 6))]
        res = mc_density(tau, Z, 60, 200, RandomStream(410 + g))
        assert abs(res.value - exact_density(tau, Z).value) <= 4 * res.std_error + 1e-12


def test_mc_single_shot_indicator():
    Z = random_grid(3, np.random.default_rng(42))
    tau = Permutation((1, 3, 2))
    shots = [mc_density(tau, Z, 3, 1, RandomStream(s)).value for s in range(4000)]
    assert set(shots) <= {0.0, 1.0}
    p = exact_density(tau, Z).value
    assert abs(np.mean(shots) - p) < 4 * np.sqrt(p * (1 - p) / 4000)


def test_kinds_share_cell_masses():
    rng = np.random.default_rng(43)
    Q = random_weighted(4, rng)
    A, D = from_weighted(Q, "atomic"), from_weighted(Q, "diffuse")
    for x1 in range(4):
        for x2 in range(x1 + 1, 5):
            for y1 in range(5):
                for y2 in range(y1 + 1, 6):
                    # whole cells: [y1/k, y2/k) for atomic holds atoms of cells y1+1..y2
                    ya, yb = F(y1, 4), F(min(y2, 4), 4)
                    ma = rect_mass(A, F(x1, 4), F(x2, 4), ya, yb, (0, 0))
                    md = rect_mass(D, F(x1, 4), F(x2, 4), ya, yb, (0, 0))
                    assert ma == md


def test_cell_average_of_uniform():
    avg = cell_average(uniform_permuton(), 4)
    assert avg.fractions() == [[F(2 * j - 1, 8) for j in range(1, 5)]] * 4


def test_cell_average_matches_numeric_integration():
    rng = np.random.default_rng(44)
    for kind in ("diffuse", "atomic"):
        Z = random_grid(3, rng, kind)
        kp = 2
        exact = cell_average(Z, kp).to_float()
        N = 240
        pts = (np.arange(N) + 0.5) / N
        grid = np.array([[Z.evaluate(float(x), float(y)) for y in pts] for x in pts])
        coarse = grid.reshape(kp, N // kp, kp, N // kp).mean(axis=(1, 3))
        assert np.abs(coarse - exact).max() < 1e-3


def test_json_round_trip():
    rng = np.random.default_rng(45)
    for kind in ("atomic", "diffuse"):
        Z = random_grid(4, rng, kind)
        text = dump_permuton(Z)
        assert load_permuton(text) == Z
        assert json.loads(text)["kind"] == kind
    Z = load_permuton('{"k": 2, "kind": "diffuse", "cdf": [["0.25", "1"], ["3/4", 1]]}')
    assert Z.cdf.fractions() == [[F(1, 4), 1], [F(3, 4), 1]]
    assert load_permuton('{"k": 1, "kind": "atomic", "cdf": [[0.5]]}').cdf[0, 0] == F(1, 2)
    for bad in ('{"k": 2, "kind": "diffuse", "cdf": [[1]]}', '{"k": 1, "kind": "odd", "cdf": [[1]]}', "nope"):
        with pytest.raises((StructuralError, ValueError)):
            load_permuton(bad)
