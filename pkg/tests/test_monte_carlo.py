import numpy as np
import pytest

from src.arcsine import LampertiDist, SimplexPoint, ks_statistic
from src.maps import build_thaler_map
from src.monte_carlo import (
    cesaro_pushforward,
    correlation,
    empirical_measure,
    histogram_edges,
    mass_in_set,
    occupation_ensemble,
    occupation_fractions,
    occupation_mean_weights,
    parse_initial_density,
    parse_test_function,
    pushforward,
    simplex_coverage,
    simplex_grid,
)

HALF = SimplexPoint((0.5, 0.5))


def test_fixed_point_orbits_stay_in_their_ball(symmetric_map):
    left = occupation_fractions(symmetric_map, 0.0, 100)
    right = occupation_fractions(symmetric_map, 1.0, 100)
    assert left.fractions.tolist() == [1.0, 0.0]
    assert right.fractions.tolist() == [0.0, 1.0]
    assert left.leftover == 0.0
    assert not left.flagged


def test_fractions_are_a_subprobability(asymmetric_map):
    result = occupation_fractions(asymmetric_map, 0.3, 5_000)
    assert np.all(result.fractions >= 0.0)
    assert result.fractions.sum() + result.leftover == pytest.approx(1.0)
    with pytest.raises(ValueError):
        occupation_fractions(asymmetric_map, 0.3, 0)
    with pytest.raises(ValueError):
        occupation_fractions(asymmetric_map, 0.3, 100, eps=0.6)


def test_cell_skip_counts_are_statistics_grade(symmetric_map, symmetric_cells):
    result = occupation_fractions(symmetric_map, 0.3, 20_000, cells=symmetric_cells, cell_skip=True)
    assert result.skipped_steps >= 0
    assert np.all(result.fractions >= 0.0)
    assert result.fractions.sum() <= 1.0
    with pytest.raises(ValueError, match="cell table"):
        occupation_fractions(symmetric_map, 0.3, 100, cell_skip=True)


def test_empirical_measure_of_a_fixed_point(symmetric_map):
    summary = empirical_measure(symmetric_map, 0.0, 100)
    assert summary.atoms.tolist() == [1.0, 0.0]
    assert summary.total_mass == pytest.approx(1.0)
    assert summary.w1_min == pytest.approx(0.0, abs=1e-12)
    assert summary.w1_argmin == (1.0, 0.0)
    assert summary.w1(HALF) == pytest.approx(0.5)
    assert summary.secondary_epsilon == 0.02


def test_histogram_edges_contain_the_ball_boundaries(symmetric_map):
    edges = histogram_edges(symmetric_map, 0.05)
    assert edges[0] == 0.0 and edges[-1] == 1.0
    assert np.all(np.diff(edges) > 0.0)
    for marker in (0.05, 0.95):
        assert np.min(np.abs(edges - marker)) < 1e-12


def test_simplex_grid():
    grid = simplex_grid(3, 0.5)
    assert grid.shape == (6, 3)
    assert np.allclose(grid.sum(axis=1), 1.0)
    assert simplex_grid(2, 0.005).shape == (201, 2)


def test_initial_densities(symmetric_map):
    u = np.linspace(0.0, 0.99, 12)
    uniform = parse_initial_density("uniform").positions(symmetric_map, u)
    single_bin = parse_initial_density({"kind": "histogram", "edges": [0.0, 1.0], "weights": [2.0]}, symmetric_map)
    assert single_bin.positions(symmetric_map, u) == pytest.approx(uniform)
    beta = parse_initial_density("beta:2:5")
    assert beta.tag == "beta:2:5"
    assert np.all(np.diff(beta.positions(symmetric_map, u)) > 0.0)


@pytest.mark.parametrize("bad", [
    "gaussian",
    "beta:1",
    "beta:-1:2",
    {"kind": "table"},
    {"kind": "histogram", "edges": [0.0, 0.5], "weights": [1.0, 1.0]},
    {"kind": "histogram", "edges": [0.0, 1.0], "weights": [0.0]},
])
def test_initial_density_errors(bad):
    with pytest.raises(ValueError):
        parse_initial_density(bad)


def test_ensemble_is_independent_of_worker_count(symmetric_map):
    serial = occupation_ensemble(symmetric_map, "uniform", 2_100, 200, seed=5, workers=1, p_bar=HALF)
    parallel = occupation_ensemble(symmetric_map, "uniform", 2_100, 200, seed=5, workers=2, p_bar=HALF)
    assert np.array_equal(serial.counts, parallel.counts)
    assert np.array_equal(serial.secondary_counts, parallel.secondary_counts)
    assert serial.ks == parallel.ks
    other_seed = occupation_ensemble(symmetric_map, "uniform", 2_100, 200, seed=6)
    assert not np.array_equal(serial.counts, other_seed.counts)


def test_ensemble_rows_and_mean_weights(symmetric_map):
    ensemble = occupation_ensemble(symmetric_map, "uniform", 500, 100, seed=1)
    rows = list(ensemble.rows())
    assert len(rows) == 500
    assert rows[3][:2] == [1, 3]
    assert np.all(ensemble.secondary_counts <= ensemble.counts)
    visited = ensemble.counts.sum(axis=1) > 0
    assert np.allclose(ensemble.shares[visited].sum(axis=1), 1.0)
    weights = occupation_mean_weights(ensemble)
    assert weights.method == "occupation-mean"
    assert sum(weights.p_bar.components) == pytest.approx(1.0)
    assert weights.constants == pytest.approx(ensemble.samples.mean(axis=0).tolist(), rel=1e-12)
    assert weights.diagnostics["mean_leftover"] > 0.0


def test_ensemble_ks_uses_time_fractions(symmetric_map):
    ensemble = occupation_ensemble(symmetric_map, "uniform", 400, 300, seed=2, p_bar=HALF)
    assert np.all(ensemble.samples.sum(axis=1) <= 1.0)
    assert ensemble.leftover.mean() > 0.0
    assert ensemble.ks == ks_statistic(ensemble.samples[:, 0], LampertiDist(0.5, 0.5).cdf)


def test_coverage_tracks_time_fractions(symmetric_map):
    n = 5_000
    fractions = occupation_fractions(symmetric_map, 0.3, n).fractions
    # only the last point of the orbit is recorded
    report = simplex_coverage(symmetric_map, 0.3, n, 0.1, burn_in=n - 1, exploration=True)
    assert report["closest_approach"] == pytest.approx((1.0 - fractions).tolist(), abs=1e-15)
    assert fractions.sum() < 1.0


def test_pushforward_summaries(symmetric_map):
    summaries = pushforward(symmetric_map, "uniform", [5, 0], size=2_000, seed=3, p_bar=HALF)
    assert [s.n for s in summaries] == [0, 5]
    for summary in summaries:
        assert summary.total_mass == pytest.approx(1.0, abs=1e-12)
        assert summary.w1_reference is not None
    assert summaries[0].neighbourhood_masses == pytest.approx([0.05, 0.05], abs=0.02)


def test_cesaro_average_of_the_steps(symmetric_map):
    summary, steps = cesaro_pushforward(symmetric_map, "uniform", 6, size=1_500, seed=3, p_bar=HALF, per_step=True)
    assert [s.n for s in steps] == list(range(6))
    assert summary.points == 6 * 1_500
    assert summary.total_mass == pytest.approx(1.0, abs=1e-12)
    assert summary.masses == pytest.approx(np.mean([s.masses for s in steps], axis=0), abs=1e-12)
    # step 0 is the initial law itself
    initial, = pushforward(symmetric_map, "uniform", [0], size=1_500, seed=3)
    assert steps[0].masses.tolist() == initial.masses.tolist()
    with pytest.raises(ValueError):
        cesaro_pushforward(symmetric_map, "uniform", 0)


def test_correlation_rejects_discontinuous_phi(symmetric_map):
    with pytest.raises(ValueError, match="continuous"):
        correlation(symmetric_map, "poly:1", "indicator:0.1:0.2", [0], 100, p_bar=HALF)


def test_correlation_at_time_zero_matches_quadrature(symmetric_map):
    report = correlation(symmetric_map, "indicator:0.2:0.6", "poly:0,1", [0, 3], 4_000, seed=2, p_bar=HALF)
    first = report["rows"][0]
    assert report["quadrature_n0"] == pytest.approx(0.16, rel=1e-8)
    assert abs(first["estimate"] - report["quadrature_n0"]) < 5.0 * first["se"]
    assert report["limit"] == pytest.approx(0.4 * 0.5)


def test_observables():
    poly = parse_test_function("poly:1,2")
    assert poly(np.array([0.0, 1.0])).tolist() == [1.0, 3.0]
    assert poly.lebesgue_integral(0.0, 1.0) == pytest.approx(2.0)
    box = parse_test_function("indicator:0.25:0.5")
    assert box(np.array([0.1, 0.3])).tolist() == [0.0, 1.0]
    assert box.lebesgue_integral(0.0, 1.0) == pytest.approx(0.25)
    for bad in ("indicator:0.5:0.2", "poly:", "sine:1", "poly:a"):
        with pytest.raises(ValueError):
            parse_test_function(bad)


def test_coverage_preconditions(symmetric_map):
    with pytest.raises(ValueError, match="n_max"):
        simplex_coverage(symmetric_map, 0.3, 10_000, 0.1)


def test_coverage_rejects_alpha_one_outside_exploration():
    neutral_linear = build_thaler_map(1.0, [0.5])
    with pytest.raises(ValueError, match="alpha"):
        simplex_coverage(neutral_linear, 0.3, 10**6, 0.1)


def test_exploration_coverage_reports_history(symmetric_map):
    report = simplex_coverage(symmetric_map, 0.3, 5_000, 0.1, checkpoints=[2_500], exploration=True)
    assert [h["n"] for h in report["history"]] == [2_500, 5_000]
    assert 0.0 <= report["covering_radius"] <= 1.0
    assert report["exploration"]
    assert [c.name for c in report["checks"]] == ["covering_radius_monotone"]


def test_mass_in_inducing_set_at_time_zero(symmetric_map, symmetric_inducing):
    mass = mass_in_set(symmetric_map, symmetric_inducing, "uniform", [0, 10], 5_000, seed=8)
    assert mass.shape == (2,)
    assert mass[0] == pytest.approx(symmetric_inducing.length, abs=0.02)
