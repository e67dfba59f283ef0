import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from manifold_splines._kernels import BACKEND, fallback
from manifold_splines._kernels import element_arrays, legendre_sum

from _oracles import cotan_assembly


def _random_triangles(n, seed):
    rng = np.random.default_rng(seed)
    coords = rng.normal(size=(n, 3, 2))
    # reject nearly collinear triplets so cot/area formulas stay sane
    det = (coords[:, 1, 0] - coords[:, 0, 0]) * (coords[:, 2, 1] - coords[:, 0, 1]) - (
        coords[:, 2, 0] - coords[:, 0, 0]
    ) * (coords[:, 1, 1] - coords[:, 0, 1])
    return coords[np.abs(det) > 1e-2]


def test_reference_right_triangle_stiffness():
    coords = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    areas, stiff = element_arrays(coords)
    assert_allclose(areas, [0.5])
    expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert_allclose(stiff[0], expected, atol=1e-15)


def test_element_arrays_match_cotangent_formula():
    coords = _random_triangles(200, seed=10)
    areas, stiff = element_arrays(coords)
    verts3d = np.concatenate([coords, np.zeros((len(coords), 3, 1))], axis=2)
    for k in range(len(coords)):
        mass_o, stiff_o = cotan_assembly(verts3d[k], np.array([[0, 1, 2]]))
        assert_allclose(areas[k], mass_o.sum(), rtol=1e-12)
        assert_allclose(stiff[k], stiff_o, rtol=1e-10, atol=1e-12)


def test_element_rows_sum_to_zero():
    coords = _random_triangles(50, seed=3)
    _, stiff = element_arrays(coords)
    assert_allclose(stiff.sum(axis=2), 0.0, atol=1e-13)


def test_orientation_does_not_matter():
    coords = _random_triangles(20, seed=4)
    flipped = coords[:, [0, 2, 1], :]
    a1, s1 = element_arrays(coords)
    a2, s2 = element_arrays(flipped)
    assert_allclose(a1, a2)
    assert_allclose(s1, s2[:, [0, 2, 1]][:, :, [0, 2, 1]])


def test_backends_agree():
    if BACKEND != "compiled":
        pytest.skip("compiled extension not built")
    coords = _random_triangles(100, seed=7)
    a_c, s_c = element_arrays(coords)
    a_f, s_f = fallback.element_arrays(coords)
    assert_allclose(a_c, a_f, rtol=1e-14)
    assert_allclose(s_c, s_f, rtol=1e-12, atol=1e-14)

    x = np.linspace(-1, 1, 101)
    w = np.random.default_rng(0).uniform(0.1, 1.0, size=12)
    assert_allclose(legendre_sum(x, w), fallback.legendre_sum(x, w), rtol=1e-13)


def test_legendre_sum_matches_numpy():
    x = np.linspace(-1.0, 1.0, 57)
    w = np.random.default_rng(1).uniform(size=8)
    # numpy's legval takes coefficients from degree 0; ours start at 1
    expected = np.polynomial.legendre.legval(x, np.concatenate([[0.0], w]))
    assert_allclose(legendre_sum(x, w), expected, rtol=1e-12, atol=1e-14)


def test_env_var_forces_fallback():
    code = (
        "import manifold_splines._kernels as k; print(k.BACKEND)"
    )
    env = dict(os.environ, MANIFOLD_SPLINES_NO_EXT="1")
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "numpy"
