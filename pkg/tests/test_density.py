import numpy as np
import pytest

from src.density import (
    DensityGrid,
    TruncationError,
    cell_masses,
    induced_density,
    invariance_residual,
    natural_weights_formula,
    natural_weights_tailfit,
    predicted_decay,
    return_mass_decay,
    select_reading,
)
from src.induced import build_cells, build_inducing_set
from src.monte_carlo import EnsembleSizeError


def test_density_is_normalised_and_invariant(symmetric_density, symmetric_cells):
    assert symmetric_density.integral() == pytest.approx(1.0, abs=1e-12)
    assert symmetric_density.residual < 1e-8
    residual, mass_defect = invariance_residual(symmetric_cells, symmetric_density)
    assert residual < 1e-8
    assert abs(mass_defect) < 1e-3
    assert np.all(symmetric_density.values > 0.0)
    assert symmetric_density.truncated_mass < 0.01 * symmetric_cells.inducing.length


def test_density_is_mirror_symmetric(symmetric_density):
    for x in (0.36, 0.4, 0.45, 0.49):
        assert symmetric_density.evaluate(x) == pytest.approx(symmetric_density.evaluate(1.0 - x), rel=1e-5)


def test_density_is_lipschitz(symmetric_density):
    assert np.isfinite(symmetric_density.lipschitz_constant())


def test_density_rows_cover_y(symmetric_density, symmetric_inducing):
    rows = symmetric_density.rows()
    assert sum(right - left for left, right, _ in rows) == pytest.approx(symmetric_inducing.length, rel=1e-12)


def test_cell_mass_matches_integral(symmetric_density, symmetric_inducing):
    total = sum(symmetric_density.cell_mass(np.array([a]), np.array([b]))[0] for a, b in symmetric_inducing.pieces)
    assert total == pytest.approx(1.0, rel=1e-9)


def test_uniform_grid_has_constant_density(symmetric_inducing):
    grid = DensityGrid.uniform(symmetric_inducing, 300)
    assert grid.integral() == pytest.approx(1.0, rel=1e-12)
    assert grid.lipschitz_constant() == 0.0


def test_grid_size_lower_bound(symmetric_map, symmetric_cells):
    with pytest.raises(ValueError):
        induced_density(symmetric_map, symmetric_cells, grid_size=128)


def test_shallow_table_is_truncated(symmetric_map):
    inducing = build_inducing_set(symmetric_map)
    cells = build_cells(symmetric_map, inducing, 1_000)
    with pytest.raises(TruncationError):
        induced_density(symmetric_map, cells, grid_size=256)


def test_symmetric_natural_weights(symmetric_map, symmetric_density, symmetric_inducing):
    weights = natural_weights_formula(symmetric_map, symmetric_density, symmetric_inducing)
    assert weights.method == "formula"
    assert weights.p_bar.components == pytest.approx((0.5, 0.5), abs=1e-6)
    assert weights.c_tau > 0.0


def test_natural_weights_ignore_density_scale(symmetric_map, symmetric_density):
    once = natural_weights_formula(symmetric_map, symmetric_density)
    twice = natural_weights_formula(symmetric_map, symmetric_density.scaled(2.0))
    assert twice.p_bar.components == once.p_bar.components
    assert twice.c_tau == pytest.approx(2.0 * once.c_tau, rel=1e-12)


def test_tail_fit_agrees_with_formula(symmetric_map, symmetric_density, symmetric_cells):
    formula = natural_weights_formula(symmetric_map, symmetric_density)
    tailfit = natural_weights_tailfit(symmetric_cells, symmetric_density)
    assert tailfit.p_bar.components == pytest.approx((0.5, 0.5), abs=1e-6)
    assert tailfit.c_tau == pytest.approx(formula.c_tau, rel=0.10)
    # a Thaler formula has no alternative readings to choose from
    assert select_reading(formula, tailfit) is formula


def test_x_cell_masses_decrease(symmetric_cells, symmetric_density):
    masses = cell_masses(symmetric_cells, symmetric_density)
    assert set(masses) == {"xi1+", "xi2-"}
    x = masses["xi1+"]["X"]
    assert np.all(np.diff(x) <= 0.0)
    assert x[0] <= 1.0


def test_predicted_decay_rates():
    n = np.array([100.0, 10_000.0])
    rate = predicted_decay(0.5, 2.0, n)
    assert rate[1] / rate[0] == pytest.approx(0.1, rel=1e-12)
    assert rate[0] == pytest.approx(1.0 / (np.pi * 2.0) * 0.1, rel=1e-12)
    log_rate = predicted_decay(1.0, 1.0, n)
    assert log_rate[0] == pytest.approx(1.0 / np.log(100.0), rel=1e-12)


def test_return_mass_decays(symmetric_map, symmetric_inducing):
    report = return_mass_decay(symmetric_map, symmetric_inducing, "uniform", [10, 100],
                               ensemble_size=4_000, seed=12, c_tau=1.0)
    assert report["n"] == [10, 100]
    assert report["mass"][0] > report["mass"][1] > 0.0
    assert report["fit"]["slope"] < 0.0
    assert len(report["predicted"]) == 2


def test_return_mass_needs_a_large_enough_ensemble(symmetric_map, symmetric_inducing):
    with pytest.raises(EnsembleSizeError):
        return_mass_decay(symmetric_map, symmetric_inducing, "uniform", [10, 1_000], ensemble_size=20, seed=12)


def test_asymmetric_density_converges(asymmetric_density, asymmetric_cells):
    assert asymmetric_density.integral() == pytest.approx(1.0, abs=1e-12)
    residual, _ = invariance_residual(asymmetric_cells, asymmetric_density)
    assert residual < 1e-8
    assert np.all(asymmetric_density.values > 0.0)


def test_asymmetric_estimators_agree(asymmetric_map, asymmetric_density, asymmetric_cells):
    formula = natural_weights_formula(asymmetric_map, asymmetric_density, asymmetric_cells.inducing)
    tailfit = natural_weights_tailfit(asymmetric_cells, asymmetric_density)
    assert sum(formula.p_bar.components) == pytest.approx(1.0, abs=1e-12)
    for a, b in zip(formula.p_bar.components, tailfit.p_bar.components):
        assert a == pytest.approx(b, rel=0.10)


def test_grid_refinement_is_stable(asymmetric_map, asymmetric_density, asymmetric_cells):
    fine = induced_density(asymmetric_map, asymmetric_cells, grid_size=1024)
    same = fine.component[1:] == fine.component[:-1]
    midpoints = (0.5 * (fine.nodes[1:] + fine.nodes[:-1]))[same]
    gap = np.max(np.abs(fine.evaluate(midpoints) - asymmetric_density.evaluate(midpoints)))
    assert gap < 1e-4
    coarse_p = natural_weights_formula(asymmetric_map, asymmetric_density).p_bar.as_array()
    fine_p = natural_weights_formula(asymmetric_map, fine).p_bar.as_array()
    assert np.max(np.abs(fine_p - coarse_p)) < 0.005
