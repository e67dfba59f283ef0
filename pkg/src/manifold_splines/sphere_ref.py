"""Closed-form kriging on the unit sphere as an independent reference.

The kernel is a truncated spherical-harmonic series collapsed to a
Legendre series in the inner product by the addition theorem; degree l
carries weight (2l + 1) / (4 pi l^2 (l + 1)^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels
from .errors import ModelError, SolverError

_CONST_MODE = 1.0 / math.sqrt(4.0 * math.pi)


@dataclass(frozen=True)
class SphereKernel:
    """Truncated harmonic kernel on the unit sphere."""

    max_degree: int = 40

    def __post_init__(self):
        if not 1 <= self.max_degree <= 200:
            raise ModelError("max_degree must lie in [1, 200]")

    @cached_property
    def weights(self) -> np.ndarray:
        l = np.arange(1, self.max_degree + 1, dtype=np.float64)
        return (2.0 * l + 1.0) / (4.0 * math.pi * (l * (l + 1.0)) ** 2)


def _check_unit(points, name):
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[-1] != 3:
        raise ModelError(f"{name} must have 3 components")
    r = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(r - 1.0) > 1e-8):
        raise ModelError(f"{name} must lie on the unit sphere")
    return p


def kernel_value(kernel: SphereKernel, s1, s2):
    """Kernel evaluated at pairs of unit vectors (broadcasting over rows)."""
    a = _check_unit(s1, "s1")
    b = _check_unit(s2, "s2")
    dots = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    out = _kernels.legendre_sum(np.atleast_1d(dots).ravel(), kernel.weights)
    return float(out[0]) if out.size == 1 and np.ndim(s1) == 1 else out.reshape(dots.shape)


def kernel_gram(kernel: SphereKernel, points_a, points_b) -> np.ndarray:
    """Kernel matrix between two point sets."""
    a = _check_unit(points_a, "points_a")
    b = _check_unit(points_b, "points_b")
    dots = np.clip(a @ b.T, -1.0, 1.0)
    flat = _kernels.legendre_sum(dots.ravel(), kernel.weights)
    return flat.reshape(dots.shape)


def _solve_system(kernel, obs_points, tau):
    obs = _check_unit(obs_points, "obs_points")
    n = obs.shape[0]
    gram = kernel_gram(kernel, obs, obs)
    if tau < 0.0:
        raise ModelError("tau must be non-negative")
    if tau > 0.0:
        gram = gram + tau**2 * np.eye(n)
    try:
        chol = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "kernel covariance is singular: the observations cannot be "
            "interpolated by the truncated kernel"
        ) from exc
    return obs, chol


def kriging_predict(
    kernel: SphereKernel, obs_points, values, tau: float, targets
) -> tuple[np.ndarray, np.ndarray]:
    """Universal kriging mean and (unit-variance) prediction variance.

    The constant trend level is estimated by generalized least squares;
    the variance includes the trend-estimation term.  Multiply the
    variances by a variance parameter sigma^2 if one is in play.
    """
    values = np.asarray(values, dtype=np.float64)
    obs, chol = _solve_system(kernel, obs_points, tau)
    n = obs.shape[0]
    if values.shape != (n,):
        raise ModelError("values length mismatch")
    tgt = _check_unit(targets, "targets")

    p = np.full(n, _CONST_MODE)
    k_p = cho_solve(chol, p)
    beta = float(p @ k_p)
    a_hat = float(p @ cho_solve(chol, values)) / beta
    resid_sol = cho_solve(chol, values - a_hat * p)

    cross = kernel_gram(kernel, tgt, obs)  # (t, n)
    mean = a_hat * _CONST_MODE + cross @ resid_sol

    k_self = float(kernel.weights.sum())  # P_l(1) = 1 for every degree
    sol_cross = cho_solve(chol, cross.T)  # (n, t)
    quad = np.einsum("tn,nt->t", cross, sol_cross)
    trend = (_CONST_MODE - cross @ k_p) ** 2 / beta
    var = k_self - quad + trend
    return mean, var


def conditional_covariance(
    kernel: SphereKernel, obs_points, tau: float, s, s_prime
) -> float:
    """Posterior covariance (unit variance parameter) between two points."""
    obs, chol = _solve_system(kernel, obs_points, tau)
    a = _check_unit(s, "s")
    b = _check_unit(s_prime, "s_prime")
    p = np.full(obs.shape[0], _CONST_MODE)
    k_p = cho_solve(chol, p)
    beta = float(p @ k_p)
    k_a = kernel_gram(kernel, a, obs)[0]
    k_b = kernel_gram(kernel, b, obs)[0]
    prior = float(kernel_value(kernel, a[0], b[0]))
    c_a = _CONST_MODE - float(k_a @ k_p)
    c_b = _CONST_MODE - float(k_b @ k_p)
    return c_a * c_b / beta + prior - float(k_a @ cho_solve(chol, k_b))
