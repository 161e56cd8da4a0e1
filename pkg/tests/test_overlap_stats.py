import math
from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest

from src.models.estimate import EstimateMethod
from src.stats.overlap import (
    F,
    F_bound_holds,
    F_exact,
    OverlapConfig,
    brute_force_pair_sign_expectation,
    brute_force_sign_expectation,
    exact_or_mc_sign_expectation,
    exact_pair_sign_expectation,
    exact_pair_sign_expectation_fraction,
    falling_factorial_moment_mc,
    falling_factorial_moments_mc,
    half_interaction_config,
    intersection_sizes,
    pair_disjointness_probability_mc,
    poisson_binomial_moment_limit,
    sample_subset_positions,
    sample_uniform_subset,
    sign_expectation_mc,
    sign_from_falling_factorials,
    sign_limit,
    single_edge_config,
)
from src.util.errors import CapExceededError, ConfigError

HALF_LIMIT = math.exp(-0.5)


def test_single_edge_config_geometry():
    cfg = single_edge_config(10, 8, 3, 2, 4)
    assert cfg.overlap(0, 1) == 3
    assert cfg.lambda_hat(0, 1) == pytest.approx(2 * 4 * 3 / 80)
    with pytest.raises(ConfigError):
        single_edge_config(10, 8, 9, 2, 2)


def test_overlap_config_validation():
    with pytest.raises(ConfigError):
        OverlapConfig(((1, 2),), (3,))
    with pytest.raises(ConfigError):
        OverlapConfig(((1, 2), (2, 3)), (1, 1), ((0, 0),))
    with pytest.raises(ConfigError):
        OverlapConfig(((1, 2), (2, 3)), (1,))


def test_sample_uniform_subset_marginals(rng):
    domain = list(range(10, 20))
    hits = np.zeros(10)
    draws = 30000
    for _ in range(draws):
        subset = sample_uniform_subset(domain, 3, rng)
        assert len(set(subset)) == 3
        for x in subset:
            hits[x - 10] += 1
    assert np.allclose(hits / draws, 0.3, atol=0.02)


@pytest.mark.parametrize("n, r", [(1000, 5), (50, 30), (7, 0), (7, 7)])
def test_sample_subset_positions_are_distinct(rng, n, r):
    out = sample_subset_positions(n, r, 200, rng)
    assert out.shape == (200, r)
    for row in out:
        assert len(set(row.tolist())) == r
        assert all(0 <= x < n for x in row)


def test_intersection_sizes():
    first = np.array([[1, 2, 3], [4, 5, 6]])
    second = np.array([[3, 2, 9], [7, 8, 9]])
    assert intersection_sizes(first, second).tolist() == [2, 0]


def test_half_interaction_exact_value_is_one_half():
    for n in range(4, 33, 2):
        value = exact_pair_sign_expectation_fraction(n, n, 1, n // 2, n // 2)
        assert value == Fraction(1, 2)
        assert abs(float(value) - HALF_LIMIT) >= 0.08


def test_half_interaction_monte_carlo(stderr_check):
    cfg = half_interaction_config(1000)
    assert stderr_check(lambda seed: sign_expectation_mc(cfg, 100_000, seed), 0.5)
    estimate = sign_expectation_mc(cfg, 100_000, 20240611)
    assert abs(estimate.value - HALF_LIMIT) >= 0.08


def test_falling_factorial_moments_approach_poisson(stderr_check):
    n, r = 20000, 100
    cfg = single_edge_config(n, n, n, r, r)
    assert cfg.lambda_hat(0, 1) == pytest.approx(0.5)
    assert stderr_check(lambda seed: falling_factorial_moment_mc(cfg, 1, 100_000, seed), 0.5)
    # exact E binom(X, 2) for the hypergeometric overlap sits below the Poisson value
    finite_bias = abs(math.comb(r, 2) ** 2 / math.comb(n, 2) - 0.125)
    assert stderr_check(lambda seed: falling_factorial_moment_mc(cfg, 2, 100_000, seed), 0.125, slack=finite_bias)


def test_falling_factorial_order_zero_is_exactly_one(rng):
    cfg = single_edge_config(50, 50, 20, 5, 5)
    moments = falling_factorial_moments_mc(cfg, 2, 500, rng)
    assert moments[0].value == 1.0
    assert moments[0].stderr == 0.0
    assert falling_factorial_moment_mc(cfg, 0, 10, rng).value == 1.0
    with pytest.raises(CapExceededError):
        falling_factorial_moment_mc(cfg, 9, 10, rng)


def test_shared_moments_agree_with_single_order():
    cfg = single_edge_config(60, 60, 30, 8, 8)
    together = falling_factorial_moments_mc(cfg, 2, 2000, 99)
    alone = falling_factorial_moment_mc(cfg, 2, 2000, 99)
    assert together[2].value == pytest.approx(alone.value, rel=1e-12)


def test_sign_from_falling_factorials_is_alternating_series():
    cfg = single_edge_config(30, 30, 30, 3, 3)
    moments = falling_factorial_moments_mc(cfg, 3, 4000, 5)
    estimate = sign_from_falling_factorials(moments)
    # binom(X, k) vanishes for k > 3, so the truncated series is the sign itself
    direct = sign_expectation_mc(cfg, 4000, 5)
    assert estimate.value == pytest.approx(1 - 2 * moments[1].value + 4 * moments[2].value - 8 * moments[3].value)
    assert estimate.value == pytest.approx(direct.value, abs=0.1)


def test_F_matches_hypergeometric_sum():
    assert F_exact(1, 1, 2) == 0
    assert F_exact(0, 5, 9) == 1
    assert F(30, 40, 100) == pytest.approx(float(F_exact(30, 40, 100)), abs=1e-12)
    with pytest.raises(ValueError):
        F(3, 1, 2)


def test_F_bound_exhaustive():
    for m in range(0, 61):
        for p in range(m + 1):
            for q in range(m + 1):
                assert F_bound_holds(p, q, m), (p, q, m)


def test_brute_force_agrees_with_closed_form():
    for n1, n2, a, r1, r2 in [(6, 5, 3, 2, 3), (4, 4, 4, 2, 2), (7, 6, 1, 3, 3), (5, 5, 0, 2, 2)]:
        assert brute_force_pair_sign_expectation(n1, n2, a, r1, r2) == exact_pair_sign_expectation_fraction(n1, n2, a, r1, r2)
        assert exact_pair_sign_expectation(n1, n2, a, r1, r2) == pytest.approx(float(exact_pair_sign_expectation_fraction(n1, n2, a, r1, r2)))


def test_exact_pair_sign_large_population_uses_hypergeometric():
    n, a, r = 200, 120, 20
    assert exact_pair_sign_expectation(n, n, a, r, r) == pytest.approx(
        float(exact_pair_sign_expectation_fraction(n, n, a, r, r)), abs=1e-12
    )


def test_brute_force_cap():
    cfg = single_edge_config(30, 30, 30, 10, 10)
    with pytest.raises(CapExceededError):
        brute_force_sign_expectation(cfg, cap=1000)


def test_exact_or_mc_routes(rng):
    assert exact_or_mc_sign_expectation(OverlapConfig(((1, 2),), (1,))).details["route"] == "empty"
    closed = exact_or_mc_sign_expectation(single_edge_config(8, 8, 4, 2, 2))
    assert closed.details["route"] == "closed-form"
    assert closed.value == pytest.approx(float(exact_pair_sign_expectation_fraction(8, 8, 4, 2, 2)))
    domain = tuple(range(1, 5))
    triangle = OverlapConfig((domain,) * 3, (2, 2, 2), ((0, 1), (1, 2), (0, 2)))
    enumerated = exact_or_mc_sign_expectation(triangle)
    assert enumerated.details["route"] == "enumeration"
    assert enumerated.method is EstimateMethod.EXACT_SMALL
    fallback = exact_or_mc_sign_expectation(triangle, rng, samples=4000, brute_force_cap=10)
    assert fallback.method is EstimateMethod.REDUCED_MC
    assert fallback.within(enumerated.value, sigmas=4)
    with pytest.raises(ValueError):
        exact_or_mc_sign_expectation(triangle, brute_force_cap=10)


def test_singular_regime_sign_vanishes():
    n = 4000
    r = int(n**0.8)
    cfg = single_edge_config(n, n, n, r, r)
    assert abs(sign_expectation_mc(cfg, 10_000, 31).value) <= 0.05


def test_single_edge_sweep_closes_gap_to_limit():
    gaps = []
    for n in (10**3, 10**4, 10**5):
        r = round(n**0.6)
        r += r % 2
        a = round(n * n / (r * r))
        gaps.append(abs(exact_pair_sign_expectation(n, n, a, r, r) - math.exp(-2.0)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 0.01


def test_single_edge_monte_carlo_matches_closed_form(stderr_check):
    n = 1000
    r = 64
    a = round(n * n / (r * r))
    cfg = single_edge_config(n, n, a, r, r)
    exact = exact_pair_sign_expectation(n, n, a, r, r)
    assert stderr_check(lambda seed: sign_expectation_mc(cfg, 20_000, seed), exact)


def test_sign_estimates_do_not_depend_on_threads():
    cfg = single_edge_config(200, 200, 100, 20, 20)
    one = sign_expectation_mc(cfg, 5000, 11, chunk_size=700, threads=1)
    four = sign_expectation_mc(cfg, 5000, 11, chunk_size=700, threads=4)
    assert one.value == four.value
    assert one.stderr == four.stderr


def test_poisson_limits():
    assert poisson_binomial_moment_limit([0.5], 0) == 1.0
    assert poisson_binomial_moment_limit([0.5], 1) == pytest.approx(0.5)
    assert poisson_binomial_moment_limit([0.5], 2) == pytest.approx(0.125)
    assert poisson_binomial_moment_limit([1.0, 2.0], 1) == pytest.approx(3.0)
    series = sum((-2.0) ** k * poisson_binomial_moment_limit([0.3, 0.2], k) for k in range(40))
    assert series == pytest.approx(math.exp(-1.0))
    assert sign_limit([]) == 1.0
    assert sign_limit([0.25]) == pytest.approx(HALF_LIMIT)
    assert sign_limit([1.0, math.inf]) == 0.0


def test_pair_disjointness_probability(stderr_check):
    domain = tuple(range(1, 5))
    cfg = OverlapConfig((domain,) * 3, (2, 2, 2), ((0, 1), (1, 2)))
    subsets = list(combinations(domain, 2))
    hits = sum(bool(set(a) & set(b) & set(c)) for a, b, c in product(subsets, repeat=3))
    exact = hits / len(subsets) ** 3
    assert stderr_check(lambda seed: pair_disjointness_probability_mc(cfg, ((0, 1), (1, 2)), 20_000, seed), exact)
    apart = OverlapConfig(((1, 2), (2, 3), (3, 4)), (1, 1, 1), ((0, 1), (1, 2)))
    assert pair_disjointness_probability_mc(apart, ((0, 1), (1, 2)), 100, 3).value == 0.0
    with pytest.raises(ValueError):
        pair_disjointness_probability_mc(cfg, ((0, 1), (1, 0)), 100, 3)
