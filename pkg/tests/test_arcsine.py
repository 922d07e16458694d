import math

import numpy as np
import pytest

from src import arcsine
from src.arcsine import (
    LampertiDist,
    QuadratureError,
    SimplexPoint,
    StableSpec,
    ks_band,
    ks_statistic,
    lamperti_cdf,
    lamperti_cdf_closed,
    lamperti_pdf,
    sample_stable,
    sample_Z,
    two_sample_ks,
)
from src.config import CDF_ABS_TOLERANCE


def test_pdf_at_midpoint():
    assert lamperti_pdf(0.5, 0.5, 0.5) == pytest.approx(2.0 / math.pi, rel=1e-14)


def test_half_half_is_the_arcsine_law():
    t = np.linspace(0.05, 0.95, 19)
    assert lamperti_pdf(0.5, 0.5, t) == pytest.approx(1.0 / (math.pi * np.sqrt(t * (1.0 - t))), rel=1e-12)
    for s in t:
        expected = 2.0 / math.pi * math.asin(math.sqrt(s))
        assert lamperti_cdf(0.5, 0.5, float(s)) == pytest.approx(expected, abs=1e-8)
        assert lamperti_cdf_closed(0.5, 0.5, float(s)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("alpha, p", [(0.3, 0.5), (0.5, 0.2), (0.7, 0.6), (0.9, 0.35)])
def test_quadrature_cdf_matches_closed_form(alpha, p):
    for t in (0.01, 0.2, 0.5, 0.8, 0.99):
        assert lamperti_cdf(alpha, p, t) == pytest.approx(lamperti_cdf_closed(alpha, p, t), abs=1e-8)


def test_quadrature_error_target_comes_from_config(monkeypatch):
    assert arcsine.CDF_ABS_TOLERANCE == CDF_ABS_TOLERANCE == 1e-8
    monkeypatch.setattr(arcsine, "CDF_ABS_TOLERANCE", -1.0)
    with pytest.raises(QuadratureError):
        lamperti_cdf(0.4, 0.3, 0.25)


@pytest.mark.parametrize("alpha, p", [(0.3, 0.4), (0.6, 0.75)])
def test_pdf_reflection(alpha, p):
    t = np.linspace(0.1, 0.9, 9)
    assert lamperti_pdf(alpha, p, t) == pytest.approx(lamperti_pdf(alpha, 1.0 - p, 1.0 - t), rel=1e-12)


def test_cdf_endpoints_and_median():
    assert lamperti_cdf(0.4, 0.3, 0.0) == 0.0
    assert lamperti_cdf(0.4, 0.3, 1.0) == 1.0
    assert lamperti_cdf_closed(0.6, 0.5, 0.5) == pytest.approx(0.5, abs=1e-12)


def test_pdf_domain_errors():
    with pytest.raises(ValueError):
        lamperti_pdf(0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        lamperti_pdf(0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        lamperti_pdf(1.0, 0.5, 0.5)


def test_alpha_one_is_a_point_mass():
    law = LampertiDist(1.0, 0.3)
    assert law.is_point_mass
    assert law.cdf(0.29) == 0.0
    assert law.cdf(0.3) == 1.0
    with pytest.raises(ValueError):
        law.pdf(0.5)


def test_simplex_point_validation():
    assert SimplexPoint.from_weights([1.0, 3.0]).components == (0.25, 0.75)
    assert SimplexPoint.vertex(3, 1).components == (0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        SimplexPoint((0.5, 0.6))
    with pytest.raises(ValueError):
        SimplexPoint.from_weights([0.0, 0.0])


def test_zero_weight_gives_exact_zeros():
    rng = np.random.default_rng(1)
    assert np.all(sample_stable(0.5, 0.0, rng, 100) == 0.0)
    assert sample_stable(0.5, 0.0, rng) == 0.0


def test_weight_scales_by_power():
    unit = sample_stable(0.4, 1.0, np.random.default_rng(3), 50)
    scaled = sample_stable(0.4, 2.0, np.random.default_rng(3), 50)
    assert scaled == pytest.approx(2.0 ** (1.0 / 0.4) * unit, rel=1e-12)


@pytest.mark.parametrize("alpha, weight", [(1.0 / 3.0, 1.0), (0.5, 1.0), (0.7, 0.5)])
def test_stable_laplace_transform(alpha, weight):
    spec = StableSpec(alpha, weight)
    zeta = spec.sample(np.random.default_rng(2024), 200_000)
    for t in (0.1, 1.0, 10.0):
        assert np.mean(np.exp(-t * zeta)) == pytest.approx(math.exp(-weight * t ** alpha), abs=0.005)


def test_sample_z_alpha_one_returns_p():
    p = SimplexPoint((0.2, 0.3, 0.5))
    assert sample_Z(1.0, p, np.random.default_rng(0)) == p
    draws = sample_Z(1.0, p, np.random.default_rng(0), 4)
    assert draws.shape == (4, 3)
    assert np.all(draws == p.as_array())


def test_sample_z_mean_is_p():
    p = SimplexPoint((0.2, 0.3, 0.5))
    z = sample_Z(0.5, p, np.random.default_rng(9), 100_000)
    assert z.sum(axis=1) == pytest.approx(np.ones(100_000), abs=1e-12)
    assert z.mean(axis=0) == pytest.approx(p.as_array(), abs=0.01)


def test_two_ray_samples_follow_lamperti():
    z = sample_Z(0.5, SimplexPoint((0.3, 0.7)), np.random.default_rng(17), 20_000)
    statistic = ks_statistic(z[:, 0], LampertiDist(0.5, 0.3).cdf)
    assert statistic < 1.5 * ks_band(20_000)


def test_ks_helpers():
    rng = np.random.default_rng(4)
    a, b = rng.uniform(size=5_000), rng.uniform(size=5_000)
    assert ks_statistic(a, lambda x: np.clip(x, 0.0, 1.0)) < 1.5 * ks_band(5_000)
    assert two_sample_ks(a, b) < 1.5 * ks_band(5_000, 5_000)
    assert two_sample_ks(a, a + 0.5) > 0.4
    assert ks_band(100) == pytest.approx(0.163)
    with pytest.raises(ValueError):
        ks_statistic([], lambda x: x)
