import math

import numpy as np
import pytest

from src.asymptotics import (
    compensated_sum,
    fit_loglog,
    fit_power_law,
    geometric_indices,
    power_offset_root,
    recursion_sequence,
    series_log_one,
    series_log_two,
    series_one,
    series_one_limit,
    series_two,
)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_series_one_approaches_its_limit(alpha):
    limit = series_one_limit(alpha)
    coarse, fine = series_one(alpha, 10_000), series_one(alpha, 1_000_000)
    assert abs(fine - limit) < abs(coarse - limit)
    assert fine == pytest.approx(limit, rel=0.03)


def test_series_one_limit_at_half():
    assert series_one_limit(0.5) == pytest.approx(math.pi)


def test_series_one_rejects_bad_input():
    with pytest.raises(ValueError):
        series_one(1.0, 100)
    with pytest.raises(ValueError):
        series_one(0.5, 1)


def test_series_two_with_vanishing_g():
    assert series_two(0.5, "zero", 1000) == (0.0, 0.0)
    first, second = series_two(0.5, "one", 5000)
    assert first == pytest.approx(series_one(0.5, 5000), rel=1e-12)
    assert second == pytest.approx(first, rel=1e-12)


def test_series_two_decays_for_inverse_sqrt():
    values = [max(series_two(0.5, "inv_sqrt", n)) for n in (1_000, 10_000, 100_000)]
    assert values[0] > values[1] > values[2]


def test_series_log_one_decreases():
    assert series_log_one("inv_log", 1_000_000) < series_log_one("inv_log", 10_000)
    assert series_log_one("inv_log", 1_000_000) < 0.3


def test_series_log_two_tends_to_one():
    assert series_log_two("one", "one", 1_000_000) == pytest.approx(1.0, abs=0.1)


def test_unknown_g_tag():
    with pytest.raises(ValueError, match="unknown g tag"):
        series_log_one("cosine", 100)


def test_compensated_sum_is_exact_on_integers():
    assert compensated_sum(lambda j: j, 1, 2_500_000) == 2_500_000 * 2_500_001 / 2
    assert compensated_sum(lambda j: j, 5, 4) == 0.0


def test_planted_power_law():
    n = np.arange(1, 10_001, dtype=float)
    fit = fit_power_law(3.0 * n ** -1.5, (100, 10_000))
    assert fit.slope == pytest.approx(-1.5, abs=1e-10)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-9)
    sub = fit_power_law(3.0 * n ** -1.5, (100, 10_000), points=50)
    assert sub.points <= 50
    assert sub.slope == pytest.approx(-1.5, abs=1e-10)


def test_fit_window_must_fit_the_sequence():
    with pytest.raises(ValueError):
        fit_power_law(np.ones(10), (5, 20))
    with pytest.raises(ValueError):
        fit_loglog(np.array([1.0, 2.0]), np.array([1.0, -1.0]))


def test_geometric_indices_are_distinct():
    idx = geometric_indices(1, 1000, 200)
    assert idx[0] == 1 and idx[-1] == 1000
    assert np.all(np.diff(idx) > 0)


def test_recursion_sequence_rate():
    b, p = 4.0, 2.0
    z = recursion_sequence(b, p, 0.5, 10_000)
    assert len(z) == 10_001
    assert np.all(np.diff(z) < 0.0)
    assert z[1] + b * z[1] ** (1.0 + p) == pytest.approx(z[0], rel=1e-13)
    assert z[-1] * (p * b * 10_000) ** (1.0 / p) == pytest.approx(1.0, rel=0.01)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_series_one_ignores_summation_order(alpha):
    forward = series_one(alpha, 300_000)
    backward = series_one(alpha, 300_000, reverse=True)
    assert abs(backward / forward - 1.0) < 1e-10


def test_reversed_blocks_cover_the_same_indices():
    assert compensated_sum(lambda j: j, 1, 2_500_000, reverse=True) == 2_500_000 * 2_500_001 / 2
    assert compensated_sum(lambda j: j, 5, 4, reverse=True) == 0.0


@pytest.mark.parametrize("g_tag", ["inv_log", "inv_pow_0.1", "inv_sqrt"])
def test_series_two_swaps_under_complementary_alpha(g_tag):
    n = 20_000
    first, second = series_two(0.3, g_tag, n)
    swapped_first, swapped_second = series_two(0.7, g_tag, n)
    assert second == pytest.approx(swapped_first, rel=1e-12)
    assert first == pytest.approx(swapped_second, rel=1e-12)


def test_power_law_fit_tolerates_multiplicative_noise():
    n = np.arange(1, 10_001, dtype=float)
    clean = 3.0 * n ** -1.5
    noise = 1.0 + 0.01 * np.random.default_rng(4).standard_normal(n.size)
    exact = fit_power_law(clean, (100, 10_000))
    noisy = fit_power_law(clean * noise, (100, 10_000))
    assert abs(noisy.slope - exact.slope) < 0.01
    sub = fit_power_law(clean * noise, (100, 10_000), points=200)
    assert abs(sub.slope - exact.slope) < 0.01


@pytest.mark.parametrize("coefficient, exponent", [(4.0, 3.0), (0.5, 1.5), (20.0, 1.1)])
def test_power_offset_root(coefficient, exponent):
    assert power_offset_root(0.0, coefficient, exponent) == (0.0, True)
    for target in (1e-9, 0.01, 0.3, 2.0):
        a, converged = power_offset_root(target, coefficient, exponent)
        assert converged
        assert 0.0 < a <= target
        assert a + coefficient * a ** exponent == pytest.approx(target, rel=1e-12)


def test_recursion_sequence_steps_through_the_offset_root():
    z = recursion_sequence(4.0, 2.0, 0.5, 50)
    for k in range(50):
        assert z[k + 1] == power_offset_root(z[k], 4.0, 3.0)[0]
