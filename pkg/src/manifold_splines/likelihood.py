"""Maximum likelihood estimation of anisotropy and noise parameters.

The variance and constant-mode level maximize the Gaussian likelihood in
closed form at any fixed anisotropy, leaving a concentrated objective
that is optimized by Nelder-Mead restarts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import ModelError, SolverError
from .fem import AnisotropyParams, FemOperators, assemble
from .mesh import BoundObservations, ObservationSet, TriangleMesh, bind_observations
from .solver import ProjectedSolver

_MAX_DENSE_OBS = 1000


def observation_covariance(
    ops: FemOperators,
    bound: BoundObservations,
    tau: float,
    solver: ProjectedSolver | None = None,
) -> np.ndarray:
    """Dense n x n covariance of the projected field plus noise.

    Column j is the projection of Sigma applied to the j-th observation
    functional, computed through two deflated solves with the whitened
    operator; tau^2 is added on the diagonal.
    """
    n = bound.n
    if n > _MAX_DENSE_OBS:
        raise ModelError(
            f"dense observation covariance limited to {_MAX_DENSE_OBS} observations"
        )
    sqrt_mass = ops.sqrt_mass
    w = sqrt_mass / np.linalg.norm(sqrt_mass)
    if solver is None:
        solver = ProjectedSolver(ops.whitened, w)
    proj = bound.matrix.tocsr()
    cov = np.empty((n, n))
    for j in range(n):
        b = np.asarray(proj.getrow(j).todense()).ravel()
        v = b / sqrt_mass
        s1 = solver.pinv_apply(v)
        s2 = solver.pinv_apply(s1)
        cov[:, j] = proj @ (s2 / sqrt_mass)
    cov = 0.5 * (cov + cov.T)
    if tau != 0.0:
        cov[np.diag_indices(n)] += tau**2
    return cov


def concentrated_loglik(
    ops: FemOperators,
    bound: BoundObservations,
    values: np.ndarray,
    tau: float,
    solver: ProjectedSolver | None = None,
) -> tuple[float, float, float]:
    """Concentrated log-likelihood and the closed-form (a, sigma) at its peak.

    Returns ``(value, a_star, sigma_star)`` where value is
    -n log(sigma_star) - 0.5 log det K.  A vanishing residual floors
    sigma_star at 1e-12 times the observation scale with a warning.
    """
    values = np.asarray(values, dtype=np.float64)
    n = bound.n
    if values.shape != (n,):
        raise ModelError("observation vector length mismatch")
    cov = observation_covariance(ops, bound, tau, solver=solver)
    try:
        chol = cho_factor(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "observation covariance is singular: the observations cannot be "
            "interpolated by the model"
        ) from exc
    p = bound.matrix @ ops.const_mode
    k_p = cho_solve(chol, p)
    k_y = cho_solve(chol, values)
    denom = float(p @ k_p)
    if denom <= 0.0:
        raise SolverError("constant-mode normal equations are degenerate")
    a_star = float(p @ k_y) / denom
    resid = values - a_star * p
    quad = float(resid @ cho_solve(chol, resid))
    scale = max(float(np.max(np.abs(values))), 1e-300)
    sigma2 = max(quad, 0.0) / n
    floor = 1e-12 * scale
    if math.sqrt(max(sigma2, 0.0)) < floor:
        warnings.warn(
            "residual variance vanished; sigma floored at "
            f"{floor:.3g} (interpolating data)"
        )
        sigma_star = floor
    else:
        sigma_star = math.sqrt(sigma2)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    value = -n * math.log(sigma_star) - 0.5 * logdet
    return value, a_star, sigma_star


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum likelihood fit."""

    aniso: AnisotropyParams
    tau: float
    a: float
    sigma: float
    loglik: float
    trace: tuple
    n_evaluations: int
    starts: tuple = ()

    def as_dict(self) -> dict:
        return {
            "angle": self.aniso.angle,
            "log_ratio": self.aniso.log_ratio,
            "tau": self.tau,
            "a": self.a,
            "sigma": self.sigma,
            "loglik": self.loglik,
            "n_evaluations": self.n_evaluations,
            "starts": [dict(s) for s in self.starts],
        }


_DEFAULT_STARTS = (
    (0.0, 0.0),
    (0.7, 1.0),
    (-0.7, 1.0),
    (0.7, -1.0),
    (-0.7, -1.0),
)


def fit(
    mesh: TriangleMesh,
    obs: ObservationSet,
    estimate_tau: bool = False,
    starts=_DEFAULT_STARTS,
    max_evals: int = 200,
    fatol: float = 1e-6,
) -> FitResult:
    """Estimate anisotropy (and optionally tau) by maximum likelihood.

    Runs Nelder-Mead from each start, keeps the best optimum, and
    recomputes the closed-form (a, sigma) at the winner.  The trace
    records every objective evaluation as (parameters, value).
    """
    if len(obs.values) < 3:
        raise ModelError("fitting needs at least 3 observations")
    bound = bind_observations(mesh, obs)
    if estimate_tau and obs.tau <= 0.0:
        raise ModelError("estimating tau requires a positive initial tau")
    trace: list[tuple[tuple[float, ...], float]] = []

    def objective(params) -> float:
        angle, log_ratio = params[0], params[1]
        tau = math.exp(params[2]) if estimate_tau else obs.tau
        ops = assemble(mesh, AnisotropyParams(angle, log_ratio))
        value, _, _ = concentrated_loglik(ops, bound, obs.values, tau)
        trace.append((tuple(float(p) for p in params), float(value)))
        return -value

    best = None
    start_reports = []
    bounds = None
    if estimate_tau:
        # keep log tau within a factor e^23 of the start: a boundary
        # maximum would otherwise run the simplex to where exp underflows
        # and the fitted noise level becomes exactly zero
        log_tau0 = math.log(obs.tau)
        bounds = [(None, None), (None, None), (log_tau0 - 23.0, log_tau0 + 23.0)]
    for start in starts:
        x0 = list(start)
        if estimate_tau:
            x0.append(log_tau0)
        res = minimize(
            objective,
            np.array(x0, dtype=np.float64),
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "fatol": fatol,
                "xatol": 1e-4,
                "maxfev": max_evals,
                "disp": False,
            },
        )
        start_reports.append(
            (
                ("start", tuple(float(v) for v in x0)),
                ("loglik", -float(res.fun)),
                ("n_evaluations", int(res.nfev)),
                ("converged", bool(res.success)),
            )
        )
        if best is None or res.fun < best.fun:
            best = res

    angle, log_ratio = float(best.x[0]), float(best.x[1])
    tau = math.exp(float(best.x[2])) if estimate_tau else obs.tau
    aniso = AnisotropyParams(angle, log_ratio).canonical()
    ops = assemble(mesh, aniso)
    loglik, a_star, sigma_star = concentrated_loglik(ops, bound, obs.values, tau)
    return FitResult(
        aniso=aniso,
        tau=float(tau),
        a=a_star,
        sigma=sigma_star,
        loglik=loglik,
        trace=tuple(trace),
        n_evaluations=len(trace),
        starts=tuple(start_reports),
    )
