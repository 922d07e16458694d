import json

import numpy as np
import pytest

from src.maps import (
    GluingError,
    build_clm_map,
    build_clm_map_singular,
    build_thaler_map,
    load_map,
    map_from_dict,
    map_hash,
    save_map,
    validate_map,
)


def test_symmetric_constants_and_values(symmetric_map):
    assert symmetric_map.d == 2
    assert symmetric_map.local_constants == pytest.approx((4.0, 4.0), rel=1e-14)
    assert symmetric_map.fixed_points == (0.0, 1.0)
    assert symmetric_map.eval(0.25) == pytest.approx(0.3125, abs=1e-15)
    assert symmetric_map.eval(0.75) == pytest.approx(0.6875, abs=1e-15)
    assert symmetric_map.deriv(0.25) == pytest.approx(1.75, rel=1e-14)
    assert symmetric_map.eval(0.0) == 0.0
    assert symmetric_map.eval(1.0) == 1.0


def test_asymmetric_constants(asymmetric_map):
    b1, b2 = asymmetric_map.local_constants
    assert b1 == pytest.approx(9.375, rel=1e-12)
    assert b2 == pytest.approx(0.4 / 0.6 ** 3, rel=1e-12)
    assert b2 == pytest.approx(1.85185, abs=1e-5)


def test_branches_are_full(asymmetric_map):
    for branch in asymmetric_map.branches:
        low = branch.fixed_point + branch.forward(branch.offset_low)
        high = branch.fixed_point + branch.forward(branch.offset_high)
        assert low == pytest.approx(0.0, abs=1e-12)
        assert high == pytest.approx(1.0, abs=1e-12)


def test_mirror_symmetry(symmetric_map):
    for x in np.linspace(0.01, 0.99, 37):
        assert symmetric_map.eval(1.0 - x) == pytest.approx(1.0 - symmetric_map.eval(x), abs=1e-14)


def test_three_rays_symmetric_about_half(three_ray_map):
    assert three_ray_map.fixed_points[1] == pytest.approx(0.5, abs=1e-12)
    assert three_ray_map.sidedness == (1, 2, 1)
    for x in (0.1, 0.2, 0.45, 0.55):
        assert three_ray_map.eval(1.0 - x) == pytest.approx(1.0 - three_ray_map.eval(x), abs=1e-12)


def test_inverse_branches(symmetric_map):
    assert symmetric_map.inverse_branch(0, 0.5) == pytest.approx(0.34118, abs=1e-5)
    ys = np.random.default_rng(21).uniform(0.001, 0.999, size=1_000)
    for branch_id in (0, 1):
        for y in ys:
            x = symmetric_map.inverse_branch(branch_id, y)
            assert symmetric_map.branch_index(x) == branch_id
            assert symmetric_map.eval(x) == pytest.approx(y, abs=1e-12)


def test_inverse_branch_array_matches_scalar(asymmetric_map):
    y = np.linspace(0.0, 1.0, 11)
    xs = asymmetric_map.inverse_branch_array(1, y)
    expected = [asymmetric_map.inverse_branch(1, float(v)) for v in y]
    assert xs == pytest.approx(expected, abs=1e-14)


def test_step_array_matches_step(three_ray_map):
    x = np.linspace(0.003, 0.997, 101)
    branch, offset = three_ray_map.locate_array(x)
    new_branch, new_offset = three_ray_map.step_array(branch, offset)
    for i, xi in enumerate(x):
        b, t = three_ray_map.step(*three_ray_map.locate(float(xi)))
        assert new_branch[i] == b
        assert new_offset[i] == pytest.approx(t, abs=1e-15)


def test_branch_index_rejects_points_outside(symmetric_map):
    with pytest.raises(ValueError):
        symmetric_map.branch_index(1.5)
    assert symmetric_map.branch_index(0.5) == 1


@pytest.mark.parametrize("alpha, cuts", [(0.0, [0.5]), (1.5, [0.5]), (0.5, []), (0.5, [0.6, 0.4]), (0.5, [1.0])])
def test_thaler_rejects_bad_parameters(alpha, cuts):
    with pytest.raises(ValueError):
        build_thaler_map(alpha, cuts)


def test_alpha_one_with_interior_points_needs_opt_in():
    with pytest.raises(ValueError, match="second derivative"):
        build_thaler_map(1.0, [1.0 / 3.0, 2.0 / 3.0])
    fmap = build_thaler_map(1.0, [1.0 / 3.0, 2.0 / 3.0], allow_c1_interior=True)
    assert fmap.d == 3
    assert fmap.spec["allow_c1_interior"] is True


def test_interior_fixed_point_gluing(three_ray_map):
    xi = three_ray_map.fixed_points[1]
    glued = build_thaler_map(0.5, [1.0 / 3.0, 2.0 / 3.0], [xi])
    assert glued.fixed_points == three_ray_map.fixed_points
    with pytest.raises(GluingError) as info:
        build_thaler_map(0.5, [1.0 / 3.0, 2.0 / 3.0], [0.45])
    assert info.value.residual == pytest.approx(0.05, abs=1e-9)


def test_clm_values(clm_map):
    assert clm_map.alpha == pytest.approx(0.5)
    assert (clm_map.lower, clm_map.upper) == (-1.0, 1.0)
    assert clm_map.eval(-0.5) == pytest.approx(-0.375, abs=1e-15)
    assert clm_map.eval(0.5) == pytest.approx(0.375, abs=1e-15)
    assert clm_map.deriv(0.0) == pytest.approx(4.0, rel=1e-14)


def test_clm_rejects_small_ell():
    with pytest.raises(ValueError):
        build_clm_map(1.0)


def test_singular_clm_degenerates_to_smooth_map():
    smooth = build_clm_map(2.0)
    degenerate = build_clm_map_singular(2.0, 1.0, 1.0)
    assert degenerate.family == "clm"
    assert map_hash(degenerate) == map_hash(smooth)


def test_singular_clm_rejects_unequal_tail_exponents():
    with pytest.raises(ValueError, match="differs"):
        build_clm_map_singular(4.0, 0.5, 1.0)


def test_singular_clm_local_order():
    fmap = build_clm_map_singular(4.0, 0.5, 0.5)
    assert fmap.alpha == pytest.approx(0.5)
    report = validate_map(fmap)
    fit = next(f for f in report.exponent_fits if f["point"] == "0+")
    assert fit["exponent"] == pytest.approx(0.5, abs=0.02)
    assert not any(c.name == "expansion" for c in report.checks)


@pytest.mark.parametrize("fixture", ["symmetric_map", "asymmetric_map", "three_ray_map", "clm_map"])
def test_validate_map_passes(fixture, request):
    report = validate_map(request.getfixturevalue(fixture))
    failed = [c.name for c in report.checks if not c.passed]
    assert failed == []
    assert report.passed
    assert report.min_derivative > 1.0


def test_validation_exponents(symmetric_map):
    report = validate_map(symmetric_map)
    for fit in report.exponent_fits:
        assert fit["exponent"] == pytest.approx(3.0, abs=1e-6)
        assert fit["prefactor"] == pytest.approx(4.0, rel=1e-6)


def test_json_round_trip(tmp_path, three_ray_map):
    path = tmp_path / "map.json"
    save_map(three_ray_map, str(path))
    loaded = load_map(str(path))
    assert map_hash(loaded) == map_hash(three_ray_map)
    assert json.loads(path.read_text())["family"] == "thaler"
    assert loaded.eval(0.2) == three_ray_map.eval(0.2)


def test_map_from_dict_rejects_unknown_family():
    with pytest.raises(ValueError, match="unknown map family"):
        map_from_dict({"family": "tent"})
