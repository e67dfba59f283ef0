"""Vectorized numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled via
MANIFOLD_SPLINES_NO_EXT.  Both backends implement the same contract and
are cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np


def element_arrays(coords):
    """Per-triangle area and P1 stiffness matrix on flat 2-D triangles.

    Parameters
    ----------
    coords : (t, 3, 2) float array
        Vertex coordinates of each triangle in its own 2-D frame.

    Returns
    -------
    areas : (t,) array
        Unsigned triangle areas.
    stiff : (t, 3, 3) array
        Element stiffness matrices (gradient inner products).
    """
    coords = np.asarray(coords, dtype=np.float64)
    x = coords[:, :, 0]
    y = coords[:, :, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (
        y[:, 1] - y[:, 0]
    )
    areas = 0.5 * np.abs(det)
    # b_i = y_j - y_k, c_i = x_k - x_j with (i, j, k) cyclic
    j = [1, 2, 0]
    k = [2, 0, 1]
    b = y[:, j] - y[:, k]
    c = x[:, k] - x[:, j]
    grads = b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        stiff = grads / (4.0 * areas)[:, None, None]
    return areas, stiff


def legendre_sum(x, weights):
    """Weighted sum of Legendre polynomials sum_l w[l-1] * P_l(x), l = 1..K.

    Uses the three-term recurrence (l+1) P_{l+1} = (2l+1) x P_l - l P_{l-1}.
    """
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    out = np.zeros_like(x)
    p_prev = np.ones_like(x)  # P_0
    p_cur = x.copy()  # P_1
    for l in range(1, weights.shape[0] + 1):
        out += weights[l - 1] * p_cur
        if l < weights.shape[0]:
            p_next = ((2 * l + 1) * x * p_cur - l * p_prev) / (l + 1)
            p_prev = p_cur
            p_cur = p_next
    return out
