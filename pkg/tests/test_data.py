import math
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from manifold_splines import (
    GriddedField,
    MeshFormatError,
    ModelError,
    franke_3d,
    franke_cylinder,
    franke_sphere,
    load_gridded_csv,
    predictive_score,
    save_gridded_csv,
)
from manifold_splines.data import atomic_write_text


# -- synthetic test field --------------------------------------------------


def test_franke_3d_term_by_term():
    # recompute all four bumps at one point with scalar math
    x, y, z = 0.3, 0.6, 0.2
    ax = ay = 0.4
    az = 1.0
    t1 = 0.75 * math.exp(
        -((ax * (9 * x - 2)) ** 2 + (ay * (9 * y - 2)) ** 2 + (az * (9 * z - 2)) ** 2) / 4
    )
    t2 = 0.75 * math.exp(
        -((ax * (9 * x + 1)) ** 2) / 49
        - ((ay * (9 * y + 1)) ** 2) / 10
        - ((az * (9 * z + 1)) ** 2) / 10
    )
    t3 = 0.5 * math.exp(
        -((ax * (9 * x - 7)) ** 2 + (ay * (9 * y - 3)) ** 2 + (az * (9 * z - 5)) ** 2) / 4
    )
    t4 = 0.2 * math.exp(
        -((ax * (9 * x - 4)) ** 2 + (ay * (9 * y - 7)) ** 2 + (az * (9 * z - 5)) ** 2)
    )
    assert_allclose(franke_3d(x, y, z), t1 + t2 + t3 - t4, rtol=1e-15)


def test_franke_3d_broadcasts():
    xs = np.linspace(0, 1, 7)
    vals = franke_3d(xs, 0.5, 0.5)
    assert vals.shape == (7,)
    assert_allclose(vals[2], franke_3d(xs[2], 0.5, 0.5))


def test_franke_cylinder_is_composition():
    rng = np.random.default_rng(0)
    theta = rng.uniform(0, 2 * math.pi, size=50)
    z = rng.uniform(0, 20, size=50)
    want = franke_3d(
        (np.cos(theta) + 1) / 2, (np.sin(theta) + 1) / 2, z / 20
    )
    assert_allclose(franke_cylinder(theta, z), want, rtol=1e-15)


def test_franke_cylinder_periodic_exactly():
    theta = np.array([0.3, 1.1, 4.0])
    z = np.array([2.0, 10.0, 19.0])
    assert_allclose(
        franke_cylinder(theta, z), franke_cylinder(theta + 2 * math.pi, z),
        rtol=1e-12,
    )


def test_franke_cylinder_height_guard():
    with pytest.raises(ModelError, match=r"\[0, 20\]"):
        franke_cylinder(0.0, -0.1)
    with pytest.raises(ModelError, match=r"\[0, 20\]"):
        franke_cylinder(0.0, 20.5)


def test_franke_range_and_continuity():
    rng = np.random.default_rng(1)
    theta = rng.uniform(0, 2 * math.pi, size=10000)
    z = rng.uniform(0, 20, size=10000)
    vals = franke_cylinder(theta, z)
    assert vals.min() > -0.3 and vals.max() < 1.6
    # nearby inputs give nearby outputs
    d = franke_cylinder(theta + 1e-4, z) - vals
    assert np.abs(d).max() < 1e-2 * (vals.max() - vals.min())


def test_franke_sphere_guard_and_composition():
    p = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    want = franke_3d((p[:, 0] + 1) / 2, (p[:, 1] + 1) / 2, (p[:, 2] + 1) / 2)
    assert_allclose(franke_sphere(p), want, rtol=1e-15)
    with pytest.raises(ModelError, match="unit sphere"):
        franke_sphere(np.array([[0.0, 0.0, 1.2]]))


# -- gridded CSV -------------------------------------------------------------


def test_gridded_round_trip(tmp_path):
    lats = np.array([-10.0, 0.0, 10.0])
    lons = np.array([30.0, 40.0])
    values = np.arange(6, dtype=float).reshape(3, 2)
    mask = np.zeros((3, 2), dtype=bool)
    mask[1, 1] = True
    field = GriddedField(lats, lons, np.where(mask, math.nan, values), mask)
    path = tmp_path / "grid.csv"
    save_gridded_csv(field, path)
    back = load_gridded_csv(path)
    assert_allclose(back.lats, lats)
    assert_allclose(back.lons, lons)
    assert np.array_equal(back.mask, mask)
    assert_allclose(back.values[~mask], values[~mask])


def test_gridded_missing_pairs_masked(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("lat,lon,value\n0,0,1.5\n0,1,\n1,1,2.5\n")
    field = load_gridded_csv(path)
    # (1, 0) absent and (0, 1) empty are both masked
    assert field.mask[0, 1] and field.mask[1, 0]
    assert field.sample_nearest(0.0, 0.0) == 1.5
    assert math.isnan(field.sample_nearest(0.1, 0.9))
    assert field.mean() == pytest.approx(2.0)


def test_gridded_duplicate_rejected(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("lat,lon,value\n0,0,1\n0,0,2\n")
    with pytest.raises(MeshFormatError, match="line 3"):
        load_gridded_csv(path)


def test_gridded_malformed_and_header(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("lat,lon,value\n0,zero,1\n")
    with pytest.raises(MeshFormatError, match="line 2"):
        load_gridded_csv(path)
    path.write_text("lon,lat,value\n")
    with pytest.raises(MeshFormatError, match="header"):
        load_gridded_csv(path)
    path.write_text("")
    with pytest.raises(MeshFormatError, match="empty"):
        load_gridded_csv(path)


def test_sample_nearest_picks_closest_cell(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("lat,lon,value\n0,0,1\n0,10,2\n10,0,3\n10,10,4\n")
    field = load_gridded_csv(path)
    assert field.sample_nearest(2.0, 3.0) == 1.0
    assert field.sample_nearest(9.0, 8.0) == 4.0


# -- scoring -------------------------------------------------------------------


def test_score_paper_convention_hand_values():
    # exact prediction, unit variance: -0^2 - log 1 = 0
    assert predictive_score(1.0, 1.0, 1.0) == 0.0
    # variance e, exact: -log e = -1
    assert_allclose(predictive_score(0.0, math.e, 0.0), -1.0, rtol=1e-15)
    # error 2 with variance 2: -(2/2)^2 - log 2
    assert_allclose(predictive_score(3.0, 2.0, 1.0), -1.0 - math.log(2.0), rtol=1e-15)


def test_score_gaussian_convention():
    # error^2/var rather than (error/var)^2
    got = predictive_score(3.0, 2.0, 1.0, convention="gaussian")
    assert_allclose(got, -4.0 / 2.0 - math.log(2.0), rtol=1e-15)


def test_score_conventions_agree_at_unit_variance():
    rng = np.random.default_rng(2)
    y_hat = rng.normal(size=20)
    y = rng.normal(size=20)
    a = predictive_score(y_hat, np.ones(20), y)
    b = predictive_score(y_hat, np.ones(20), y, convention="gaussian")
    assert_allclose(a, b)


def test_score_decreases_with_error():
    errors = np.linspace(0.0, 3.0, 10)
    scores = predictive_score(errors, np.full(10, 0.7), np.zeros(10))
    assert np.all(np.diff(scores) < 0)


def test_score_guards():
    with pytest.raises(ModelError, match="positive"):
        predictive_score(1.0, 0.0, 1.0)
    with pytest.raises(ModelError, match="positive"):
        predictive_score(np.ones(2), np.array([1.0, -2.0]), np.ones(2))
    with pytest.raises(ModelError, match="convention"):
        predictive_score(1.0, 1.0, 1.0, convention="crps")


def test_score_vectorizes():
    s = predictive_score(np.zeros(3), np.full(3, 2.0), np.array([0.0, 1.0, 2.0]))
    assert s.shape == (3,)
    assert s[0] > s[1] > s[2]


# -- atomic writes ---------------------------------------------------------------


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    atomic_write_text(target, "new contents\n")
    assert target.read_text() == "new contents\n"
    assert os.listdir(tmp_path) == ["out.txt"]
