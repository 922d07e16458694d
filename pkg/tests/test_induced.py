import numpy as np
import pytest

from src.induced import (
    DepthError,
    build_cells,
    build_inducing_set,
    cell_asymptotics,
    cell_rows,
    distortion_diagnostic,
    hypothesis_diagnostics,
    locate_return_time,
    return_map_expansion,
    return_orbit,
    return_times,
    tail_statistics,
)


def test_symmetric_inducing_set(symmetric_inducing):
    (left, right), = symmetric_inducing.intervals
    assert left == pytest.approx(0.34118, abs=1e-5)
    assert right == pytest.approx(1.0 - left, abs=1e-14)
    assert symmetric_inducing.length == pytest.approx(right - left)
    assert len(symmetric_inducing.families) == 2
    assert symmetric_inducing.pieces == ((left, 0.5), (0.5, right))


def test_three_ray_inducing_set_has_four_families(three_ray_map):
    inducing = build_inducing_set(three_ray_map)
    assert len(inducing.intervals) == 2
    assert sorted((f.fixed_point, f.side) for f in inducing.families) == [(0, 1), (1, -1), (1, 1), (2, -1)]


def test_clm_inducing_set_is_period_two_orbit(clm_map):
    inducing = build_inducing_set(clm_map)
    gamma_minus, gamma_plus = inducing.period_two
    assert clm_map.eval(gamma_minus) == pytest.approx(gamma_plus, abs=1e-12)
    assert clm_map.eval(gamma_plus) == pytest.approx(gamma_minus, abs=1e-12)
    assert gamma_minus < 0.0 < gamma_plus


def test_immediate_return(symmetric_map, symmetric_inducing):
    sample = return_orbit(symmetric_map, symmetric_inducing, 0.6)
    assert sample.tau == 1
    assert sample.excursions == (0, 0)
    assert symmetric_inducing.contains(sample.exit)


def test_return_orbit_rejects_points_outside(symmetric_map, symmetric_inducing):
    with pytest.raises(ValueError):
        return_orbit(symmetric_map, symmetric_inducing, 0.1)


def test_excursions_add_up_to_return_time(symmetric_map, symmetric_inducing):
    rng = np.random.default_rng(5)
    left, right = symmetric_inducing.intervals[0]
    for y in rng.uniform(left, right, size=100):
        sample = return_orbit(symmetric_map, symmetric_inducing, float(y))
        assert sum(sample.excursions) == sample.tau - 1
        assert symmetric_inducing.contains(sample.exit)


def test_x_cells_have_markov_endpoints(symmetric_map, symmetric_cells):
    fc = symmetric_cells.family_cells(0, 1)
    branch = symmetric_map.branches[0]
    for m in (1, 10, 100, 1000):
        # f maps the outer end of X_m onto the outer end of X_{m-1}
        assert branch.forward(fc.z[m]) == pytest.approx(fc.z[m - 1], rel=1e-12)
    assert np.all(np.diff(fc.z) < 0.0)
    assert np.all(fc.z > 0.0)


def test_partition_defects_vanish(symmetric_cells):
    x_defect, y_defect = symmetric_cells.partition_defects()
    assert abs(x_defect) < 1e-9
    assert abs(y_defect) < 1e-9


def test_cell_depth_lookup(symmetric_cells):
    fc = symmetric_cells.family_cells(0, 1)
    assert fc.depth == 10_000
    assert fc.depth_of(0.5 * (fc.z[4] + fc.z[5])) == 5
    assert fc.depth_of(fc.z[0] * 1.01) == 0


def test_locate_return_time_agrees_with_iteration(symmetric_map, symmetric_inducing, symmetric_cells):
    rng = np.random.default_rng(11)
    left, right = symmetric_inducing.intervals[0]
    ys = rng.uniform(left, right, size=2000)
    located = locate_return_time(symmetric_cells, ys)
    iterated, stagnated = return_times(symmetric_map, symmetric_inducing, ys, max_steps=20_000)
    both = (located > 0) & (iterated > 0)
    assert not stagnated.any()
    assert both.mean() > 0.95
    assert np.mean(located[both] == iterated[both]) > 0.999


def test_cell_rows_layout(symmetric_cells):
    rows = list(cell_rows(symmetric_cells, limit=5))
    x_rows = [r for r in rows if r[1] in ("+", "-")]
    assert len(x_rows) == 10
    k, side, n, left, right, length, dist = x_rows[0]
    assert (k, side, n) == (1, "+", 1)
    assert right - left == pytest.approx(length, rel=1e-12)


def test_cell_asymptotics_slopes(symmetric_cells):
    report = cell_asymptotics(symmetric_cells)
    assert report["window"] == [100, 10_000]
    for family in report["families"]:
        assert family["x_cells"]["slope"] == pytest.approx(-1.5, abs=0.05)
        for fit in family["y_cells"].values():
            assert fit["slope"] == pytest.approx(-1.5, abs=0.05)


def test_cell_asymptotics_needs_depth(symmetric_map, symmetric_inducing):
    shallow = build_cells(symmetric_map, symmetric_inducing, 500)
    with pytest.raises(DepthError):
        cell_asymptotics(shallow)


def test_tail_exponents(symmetric_cells):
    tails = tail_statistics(symmetric_cells)
    assert tails.fits["tau_gt"].slope == pytest.approx(-0.5, abs=0.05)
    assert tails.c_hat[0] == pytest.approx(tails.c_hat[1], rel=1e-6)
    # Lebesgue weights: tau > 0 covers all of Y
    assert tails.tau_greater[0] + tails.tau_equal[0] == pytest.approx(symmetric_cells.inducing.length, rel=1e-8)


def test_return_map_is_expanding(symmetric_map, symmetric_cells):
    assert return_map_expansion(symmetric_map, symmetric_cells, points=9) > 1.0


def test_distortion_constant_is_finite(symmetric_map, symmetric_cells):
    report = distortion_diagnostic(symmetric_map, symmetric_cells, pairs=40, seed=1, max_depth=100)
    assert report["pairs"] == 40
    assert report["max_depth"] == 100
    assert np.isfinite(report["fitted_constant"])
    assert report["worst_ratio"] >= 0.0


def test_hypotheses_hold_on_the_symmetric_map(symmetric_cells, symmetric_density):
    report = hypothesis_diagnostics(symmetric_cells, symmetric_density, 0.05, samples=50, seed=3)
    checks = {c.name: c for c in report["checks"]}
    assert np.isfinite(report["H1_mass_outside_balls"])
    assert checks["H1_finite_mass"].passed
    assert checks["H2a[xi1]"].passed and checks["H2a[xi2]"].passed
    assert checks["H2b_excursion_sum"].passed
    assert report["H4_required"]


def test_distortion_pairs_follow_the_seed(symmetric_map, symmetric_cells):
    first = distortion_diagnostic(symmetric_map, symmetric_cells, pairs=20, seed=9, max_depth=50)
    again = distortion_diagnostic(symmetric_map, symmetric_cells, pairs=20, seed=9, max_depth=50)
    other = distortion_diagnostic(symmetric_map, symmetric_cells, pairs=20, seed=10, max_depth=50)
    assert first["worst_ratio"] == again["worst_ratio"]
    assert first["fitted_constant"] == again["fitted_constant"]
    assert (first["worst_ratio"], first["fitted_constant"]) != (other["worst_ratio"], other["fitted_constant"])
