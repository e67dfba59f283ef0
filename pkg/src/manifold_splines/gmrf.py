"""Posterior fields: means, conditional simulation, and batch summaries.

The intrinsic prior has precision sigma^-2 Q plus a vanishing penalty
alpha^-1 (M phi0)(M phi0)' on the constant mode; posterior expectations
are computed at a working alpha and then corrected to the exact
alpha -> infinity limit in closed form.
"""

from __future__ import annotations

import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .data import atomic_write_text
from .errors import ModelError, SolverError
from .fem import FemOperators
from .mesh import BoundObservations
from .solver import (
    ProjectedSolver,
    RankOneSystem,
    estimate_spectral_bounds,
    factor_spd,
    sample_precision,
)


def default_thread_count() -> int:
    raw = os.environ.get("MANIFOLD_SPLINES_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(eq=False)
class PosteriorModel:
    """Cached solver state for one (operators, observations, parameters) triple.

    Treat instances as immutable after construction; they can be shared
    across simulation workers.
    """

    ops: FemOperators
    bound: BoundObservations
    values: np.ndarray
    tau: float
    sigma: float
    alpha: float
    spectral_bounds: tuple[float, float]
    alpha_warning: str | None
    solver_method: str = "direct"
    _system: RankOneSystem = field(repr=False, default=None)
    _q_link: sparse.csr_matrix = field(repr=False, default=None)
    _prior_solver: ProjectedSolver = field(repr=False, default=None)
    _mean_phi: np.ndarray = field(repr=False, default=None)

    @property
    def scenario(self) -> int:
        return self.bound.scenario

    @property
    def n_vertices(self) -> int:
        return self.ops.n_vertices

    def prior_solver(self) -> ProjectedSolver:
        if self._prior_solver is None:
            w = self.ops.sqrt_mass
            self._prior_solver = ProjectedSolver(
                self.ops.whitened,
                w / np.linalg.norm(w),
                method="cg" if self.solver_method == "cg" else "direct",
            )
        return self._prior_solver


def posterior_model(
    ops: FemOperators,
    bound: BoundObservations,
    values: np.ndarray,
    sigma: float = 1.0,
    alpha: float | None = None,
    tau: float | None = None,
    solver_method: str = "direct",
) -> PosteriorModel:
    """Build the posterior solver state.

    ``tau`` defaults to 0 for node observations; node observations
    require tau == 0 and point observations tau > 0.  When ``alpha`` is
    omitted it is set to sigma^2 / (lambda_min_pos * lambda_max) of the
    whitened operator, the geometric center of the admissible band; a
    supplied alpha outside that band records a warning.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.shape != (bound.n,):
        raise ModelError("observation vector length mismatch")
    if sigma <= 0.0:
        raise ModelError("sigma must be positive")
    if tau is None:
        tau = 0.0 if bound.scenario == 1 else None
    if bound.scenario == 1 and tau != 0.0:
        raise ModelError("node observations require tau == 0")
    if bound.scenario == 2 and (tau is None or tau <= 0.0):
        raise ModelError("point observations require tau > 0")

    w = ops.sqrt_mass
    lam_min, lam_max = estimate_spectral_bounds(
        ops.whitened, w / np.linalg.norm(w)
    )
    if alpha is None:
        alpha = sigma**2 / (lam_min * lam_max)
    if alpha <= 0.0:
        raise ModelError("alpha must be positive")
    ratio = sigma / math.sqrt(alpha)
    alpha_warning = None
    if not lam_min <= ratio <= lam_max:
        alpha_warning = (
            f"sigma/sqrt(alpha) = {ratio:.4g} outside the spectral band "
            f"[{lam_min:.4g}, {lam_max:.4g}]"
        )
        warnings.warn(alpha_warning)

    u = ops.mass_times_const
    core = ops.precision_core
    if bound.scenario == 1:
        idx = bound.node_indices
        mask = np.ones(ops.n_vertices, dtype=bool)
        mask[idx] = False
        free = np.nonzero(mask)[0]
        block = sparse.csr_matrix(core[np.ix_(free, idx)])
        base = factor_spd(sparse.csc_matrix(core[np.ix_(free, free)]) / sigma**2)
        system = RankOneSystem(base, u[free], 1.0 / alpha)
        q_link = block
    else:
        proj = bound.matrix
        base_mat = tau**2 * core + (proj.T @ proj)
        base = factor_spd(base_mat)
        system = RankOneSystem(base, u, sigma**2 * tau**2 / alpha)
        q_link = None

    return PosteriorModel(
        ops=ops,
        bound=bound,
        values=values,
        tau=float(tau),
        sigma=float(sigma),
        alpha=float(alpha),
        spectral_bounds=(lam_min, lam_max),
        alpha_warning=alpha_warning,
        solver_method=solver_method,
        _system=system,
        _q_link=q_link,
    )


def posterior_mean_alpha(model: PosteriorModel, rhs: np.ndarray) -> np.ndarray:
    """Posterior expectation at the working alpha for observations ``rhs``."""
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (model.bound.n,):
        raise ModelError("rhs length mismatch")
    ops = model.ops
    u = ops.mass_times_const
    if model.scenario == 1:
        idx = model.bound.node_indices
        mask = np.ones(ops.n_vertices, dtype=bool)
        mask[idx] = False
        out = np.empty(ops.n_vertices)
        out[idx] = rhs
        link = model._q_link @ rhs / model.sigma**2
        link += (float(u[idx] @ rhs) / model.alpha) * u[mask]
        out[mask] = -model._system.solve(link)
        return out
    return model._system.solve(model.bound.matrix.T @ rhs)


def _mean_phi(model: PosteriorModel) -> np.ndarray:
    if model._mean_phi is None:
        p_phi = model.bound.matrix @ model.ops.const_mode
        model._mean_phi = posterior_mean_alpha(model, p_phi)
    return model._mean_phi


def posterior_mean(model: PosteriorModel, rhs: np.ndarray) -> np.ndarray:
    """Posterior expectation in the alpha -> infinity limit.

    Applies the closed-form correction built from the response to the
    projected constant mode.
    """
    m_alpha = posterior_mean_alpha(model, rhs)
    u = model.ops.mass_times_const
    phi0 = model.ops.const_mode
    m_phi = _mean_phi(model)
    t_phi = float(u @ m_phi)
    if abs(t_phi) <= 1e-12 or abs(1.0 - t_phi) <= 1e-12:
        raise ModelError(
            f"mean correction is singular (constant-mode response {t_phi:.3g})"
        )
    h = (m_phi - phi0 * t_phi) / (1.0 - t_phi)
    correction = (phi0 - h) / t_phi - phi0 + h
    return m_alpha + correction * float(u @ m_alpha)


def _prior_draw(
    ops: FemOperators,
    sigma: float,
    alpha: float,
    a: float,
    eps: np.ndarray,
    solver: ProjectedSolver | None = None,
    method: str = "direct",
) -> np.ndarray:
    z = sample_precision(
        ops.whitened, ops.sqrt_mass, sigma, alpha, eps,
        method=method, solver=solver,
    )
    u = ops.mass_times_const
    return a * ops.const_mode + z - ops.const_mode * float(u @ z)


def simulate_prior(
    model: PosteriorModel,
    a: float = 0.0,
    eps: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One draw of the intrinsic prior with fixed constant-mode level ``a``.

    The draw satisfies (M phi0)' (z - a phi0) = 0 exactly: the
    unpenalized constant component is replaced by ``a phi0``.
    """
    if eps is None:
        if rng is None:
            raise ModelError("simulate_prior needs eps or rng")
        eps = rng.standard_normal(model.n_vertices)
    return _prior_draw(
        model.ops, model.sigma, model.alpha, a, np.asarray(eps, dtype=float),
        solver=model.prior_solver(),
    )


@dataclass(eq=False)
class SimulationBatch:
    """Posterior (or prior) sample paths plus the metadata to reproduce them."""

    samples: np.ndarray  # (n_sims, m)
    seed: int
    alpha: float
    scenario: int
    sigma: float
    tau: float
    kind: str

    @property
    def n_sims(self) -> int:
        return self.samples.shape[0]

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def variance(self) -> np.ndarray:
        if self.n_sims < 2:
            raise ModelError("variance needs at least two simulations")
        return self.samples.var(axis=0, ddof=1)

    def write_csv(self, path) -> None:
        buf = io.StringIO()
        names = ",".join(f"sample_{k}" for k in range(self.n_sims))
        buf.write(f"node_index,mean,variance,{names}\n")
        mean = self.mean()
        var = self.variance() if self.n_sims >= 2 else np.zeros_like(mean)
        for j in range(self.samples.shape[1]):
            row = ",".join(f"{self.samples[k, j]:.17g}" for k in range(self.n_sims))
            buf.write(f"{j},{mean[j]:.17g},{var[j]:.17g},{row}\n")
        atomic_write_text(path, buf.getvalue())

    def write_sidecar(self, path) -> None:
        meta = {
            "seed": self.seed,
            "alpha": self.alpha,
            "scenario": self.scenario,
            "sigma": self.sigma,
            "tau": self.tau,
            "kind": self.kind,
            "n_sims": self.n_sims,
        }
        atomic_write_text(path, json.dumps(meta, sort_keys=True, indent=2) + "\n")


def posterior_variance(model: PosteriorModel, batch: SimulationBatch) -> np.ndarray:
    """Per-node unbiased sample variance of a simulation batch."""
    if batch.scenario != model.scenario:
        raise ModelError("simulation batch does not belong to this model")
    return batch.variance()


def _simulate_one(model: PosteriorModel, mean_y: np.ndarray, sim_index: int,
                  seed: int, kind: str, prior: ProjectedSolver) -> np.ndarray:
    rng = np.random.default_rng(int(seed) ^ int(sim_index))
    eps = rng.standard_normal(model.n_vertices)
    z0 = _prior_draw(model.ops, model.sigma, model.alpha, 0.0, eps, solver=prior)
    proj = model.bound.matrix
    noise = 0.0
    if model.scenario == 2:
        noise = model.sigma * model.tau * rng.standard_normal(model.bound.n)

    if kind == "uk":
        rhs = proj @ z0 + noise
        return mean_y + posterior_mean(model, rhs) - z0

    # simple kriging: pin the constant level instead of re-estimating it
    ops = model.ops
    u = ops.mass_times_const
    phi0 = ops.const_mode
    m_alpha_y = posterior_mean_alpha(model, model.values)
    m_phi = _mean_phi(model)
    t_phi = float(u @ m_phi)
    if abs(t_phi) <= 1e-12 or abs(1.0 - t_phi) <= 1e-12:
        raise ModelError("simple kriging correction is singular")
    z_tilde = z0 + phi0 * (float(u @ m_alpha_y) / t_phi)
    resid = model.values - (proj @ z_tilde + noise)
    v = posterior_mean_alpha(model, resid)
    h = (m_phi - phi0 * t_phi) / (1.0 - t_phi)
    uv = float(u @ v)
    return z_tilde + v - phi0 * uv + h * uv


def simulate_posterior(
    model: PosteriorModel,
    n_sims: int,
    seed: int,
    kind: str = "uk",
    threads: int | None = None,
) -> SimulationBatch:
    """Conditional simulation batch.

    ``kind`` selects universal kriging (constant level re-estimated per
    draw) or simple kriging (level pinned at its estimate).  Each draw
    depends only on (seed xor sim index), so results are deterministic
    and independent of the thread count.
    """
    if n_sims < 1:
        raise ModelError("n_sims must be at least 1")
    if kind not in ("uk", "sk"):
        raise ModelError(f"unknown simulation kind {kind!r}")
    mean_y = posterior_mean(model, model.values) if kind == "uk" else None
    prior = model.prior_solver()
    _mean_phi(model)  # materialize shared cache before any thread fan-out
    if kind == "sk":
        mean_y = np.zeros(model.n_vertices)  # unused by the sk path

    threads = default_thread_count() if threads is None else max(1, threads)
    samples = np.empty((n_sims, model.n_vertices))
    if threads == 1:
        for i in range(n_sims):
            samples[i] = _simulate_one(model, mean_y, i, seed, kind, prior)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                pool.submit(
                    _simulate_one, model, mean_y, i, seed, kind, prior
                ): i
                for i in range(n_sims)
            }
            for fut, i in futures.items():
                samples[i] = fut.result()
    if not np.all(np.isfinite(samples)):
        raise SolverError("simulation produced non-finite values")
    return SimulationBatch(
        samples=samples,
        seed=int(seed),
        alpha=model.alpha,
        scenario=model.scenario,
        sigma=model.sigma,
        tau=model.tau,
        kind=kind,
    )


def simulate_simple_kriging(
    model: PosteriorModel, n_sims: int, seed: int, threads: int | None = None
) -> SimulationBatch:
    """Conditional simulation with the constant level held fixed."""
    return simulate_posterior(model, n_sims, seed, kind="sk", threads=threads)
