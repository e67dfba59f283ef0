"""Command line interface.

All commands read a single JSON config describing the mesh, the
observations, and the model; flags override the matching config fields.
Outputs are written atomically and deterministically, so reruns with
the same config are byte-identical.
"""

from __future__ import annotations

import io
import json
import math
import os
import sys

import click
import numpy as np

from . import _kernels, data, fem, gmrf, likelihood, mesh as meshmod, sphere_ref
from .errors import ModelError

# -- config handling ---------------------------------------------------

_SCHEMA = {
    "mesh": {
        "kind",
        "lat_step",
        "lon_step",
        "radius",
        "theta_step",
        "z_step",
        "height",
        "path",
    },
    "observations": {"csv", "synthetic"},
    "model": {"tau", "sigma", "anisotropy", "estimate_tau", "alpha"},
    "simulation": {"n_sims", "seed", "kind"},
    "score": {"convention"},
    "validate": {"kernel_degree"},
}
_SYNTHETIC_KEYS = {"n", "seed", "field"}
_MESH_REQUIRED = {
    "sphere": {"lat_step", "lon_step"},
    "cylinder": {"theta_step", "z_step", "radius", "height"},
    "file": {"path"},
}


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _require_number(cfg, section, key, positive=False):
    value = cfg.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        _fail(f"config key {section}.{key} must be a number")
    if positive and value <= 0:
        _fail(f"config key {section}.{key} must be positive")
    return float(value)


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        _fail(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        _fail(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        _fail("config must be a JSON object")
    for section, body in cfg.items():
        if section not in _SCHEMA:
            _fail(f"unknown config key: {section}")
        if not isinstance(body, dict):
            _fail(f"config section {section} must be an object")
        for key in body:
            if key not in _SCHEMA[section]:
                _fail(f"unknown config key: {section}.{key}")
    if "mesh" not in cfg:
        _fail("config requires a mesh section")
    kind = cfg["mesh"].get("kind")
    if kind not in _MESH_REQUIRED:
        _fail("config key mesh.kind must be one of sphere, cylinder, file")
    missing = _MESH_REQUIRED[kind] - set(cfg["mesh"])
    if missing:
        _fail(f"config key mesh.{sorted(missing)[0]} is required for kind {kind}")
    obs_cfg = cfg.get("observations", {})
    sources = [k for k in ("csv", "synthetic") if k in obs_cfg]
    if len(sources) != 1:
        _fail("config requires exactly one of observations.csv or "
              "observations.synthetic")
    if "synthetic" in obs_cfg:
        syn = obs_cfg["synthetic"]
        if not isinstance(syn, dict):
            _fail("config key observations.synthetic must be an object")
        for key in syn:
            if key not in _SYNTHETIC_KEYS:
                _fail(f"unknown config key: observations.synthetic.{key}")
        for key in ("n", "seed"):
            if not isinstance(syn.get(key), int) or isinstance(syn.get(key), bool):
                _fail(f"config key observations.synthetic.{key} must be an integer")
        if syn.get("field", "franke") != "franke":
            _fail("config key observations.synthetic.field must be 'franke'")
    aniso = cfg.get("model", {}).get("anisotropy", "none")
    if isinstance(aniso, dict):
        for key in aniso:
            if key not in ("angle", "log_ratio"):
                _fail(f"unknown config key: model.anisotropy.{key}")
        for key in ("angle", "log_ratio"):
            if not isinstance(aniso.get(key), (int, float)):
                _fail(f"config key model.anisotropy.{key} must be a number")
    elif aniso not in ("none", "fit"):
        _fail("config key model.anisotropy must be 'none', 'fit', or an object")
    return cfg


def _resolve_path(config_path, value):
    if os.path.isabs(value):
        return value
    return os.path.join(os.path.dirname(os.path.abspath(config_path)), value)


def build_mesh(cfg: dict, config_path) -> meshmod.TriangleMesh:
    mc = cfg["mesh"]
    kind = mc["kind"]
    if kind == "sphere":
        return meshmod.generate_sphere_mesh(
            _require_number(mc, "mesh", "lat_step", positive=True),
            _require_number(mc, "mesh", "lon_step", positive=True),
            radius=float(mc.get("radius", 1.0)),
        )
    if kind == "cylinder":
        return meshmod.generate_cylinder_mesh(
            _require_number(mc, "mesh", "theta_step", positive=True),
            _require_number(mc, "mesh", "z_step", positive=True),
            _require_number(mc, "mesh", "radius", positive=True),
            _require_number(mc, "mesh", "height", positive=True),
        )
    return meshmod.load_mesh(_resolve_path(config_path, mc["path"]))


def _synthetic_values(mesh: meshmod.TriangleMesh, idx: np.ndarray) -> np.ndarray:
    if mesh.chart is None:
        raise ModelError("synthetic observations need a generated mesh")
    pts = mesh.vertices[idx]
    radial = np.hypot(pts[:, 0], pts[:, 1])
    if np.allclose(radial, radial[0], rtol=1e-6) and np.ptp(pts[:, 2]) > 1e-9:
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return data.franke_cylinder(theta, pts[:, 2])
    radius = np.linalg.norm(pts, axis=1)
    return data.franke_sphere(pts / radius[:, None])


def build_observations(
    cfg: dict, mesh: meshmod.TriangleMesh, config_path
) -> meshmod.ObservationSet:
    model_cfg = cfg.get("model", {})
    tau = float(model_cfg.get("tau", 0.0))
    if tau < 0:
        _fail("config key model.tau must be non-negative")
    obs_cfg = cfg["observations"]
    if "csv" in obs_cfg:
        return meshmod.load_observations_csv(
            _resolve_path(config_path, obs_cfg["csv"]), tau, mesh=mesh
        )
    syn = obs_cfg["synthetic"]
    idx = meshmod.maximin_node_design(mesh, int(syn["n"]), int(syn["seed"]))
    values = _synthetic_values(mesh, idx)
    if tau > 0:
        return meshmod.ObservationSet(mesh.vertices[idx], values, tau)
    return meshmod.ObservationSet(idx, values, 0.0)


class ResolvedModel:
    """Operators, bound observations, and parameters ready for prediction."""

    def __init__(self, cfg, mesh, obs, alpha_override=None):
        model_cfg = cfg.get("model", {})
        aniso_cfg = model_cfg.get("anisotropy", "none")
        estimate_tau = bool(model_cfg.get("estimate_tau", False))
        self.mesh = mesh
        self.obs = obs
        self.fit_result = None
        if aniso_cfg == "fit":
            self.fit_result = likelihood.fit(mesh, obs, estimate_tau=estimate_tau)
            self.aniso = self.fit_result.aniso
            tau = self.fit_result.tau
        else:
            if estimate_tau:
                _fail("config key model.estimate_tau requires anisotropy 'fit'")
            self.aniso = (
                None
                if aniso_cfg == "none"
                else fem.AnisotropyParams(
                    float(aniso_cfg["angle"]), float(aniso_cfg["log_ratio"])
                ).canonical()
            )
            tau = obs.tau
        self.tau = tau
        self.ops = fem.assemble(mesh, self.aniso)
        self.bound = meshmod.bind_observations(mesh, obs)
        sigma_cfg = model_cfg.get("sigma")
        if self.fit_result is not None:
            self.loglik = self.fit_result.loglik
            self.a = self.fit_result.a
            sigma_hat = self.fit_result.sigma
        else:
            self.loglik, self.a, sigma_hat = likelihood.concentrated_loglik(
                self.ops, self.bound, obs.values, tau
            )
        self.sigma = float(sigma_cfg) if sigma_cfg is not None else sigma_hat
        if self.sigma <= 0:
            _fail("config key model.sigma must be positive")
        alpha = alpha_override
        if alpha is None:
            alpha = model_cfg.get("alpha")
        self.model = gmrf.posterior_model(
            self.ops,
            self.bound,
            obs.values,
            sigma=self.sigma,
            alpha=None if alpha is None else float(alpha),
            tau=tau,
        )

    def model_report(self) -> dict:
        return {
            "a": self.a,
            "alpha": self.model.alpha,
            "alpha_warning": self.model.alpha_warning,
            "anisotropy": (
                None
                if self.aniso is None
                else {"angle": self.aniso.angle, "log_ratio": self.aniso.log_ratio}
            ),
            "backend": _kernels.BACKEND,
            "loglik": self.loglik,
            "n_observations": int(self.bound.n),
            "scenario": self.model.scenario,
            "sigma": self.sigma,
            "spectral_bounds": list(self.model.spectral_bounds),
            "tau": self.tau,
        }


def _write_json(path, payload) -> None:
    data.atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _prepare_out(out) -> str:
    os.makedirs(out, exist_ok=True)
    return os.fspath(out)


def _load_node_value_csv(path) -> dict[int, float]:
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header][:2] != ["node_index", "value"]:
            _fail(f"{path} must have header node_index,value")
        out = {}
        for row in reader:
            if not any(cell.strip() for cell in row):
                continue
            out[int(row[0])] = float(row[1])
    return out


# -- commands ----------------------------------------------------------


@click.group()
def main() -> None:
    """Spline prediction with uncertainty on triangulated surfaces."""


@main.command("mesh-gen")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--export-operators", is_flag=True, default=False,
              help="Also write mass/stiffness/whitened/core Matrix Market files.")
def cmd_mesh_gen(config_path, out, export_operators) -> None:
    """Generate (or re-validate) the configured mesh and write it as OFF."""
    cfg = load_config(config_path)
    mesh = build_mesh(cfg, config_path)
    out = _prepare_out(out)
    meshmod.save_mesh(mesh, os.path.join(out, "mesh.off"))
    if export_operators:
        ops = fem.assemble(mesh)
        fem.export_operators(ops, out)
    click.echo(
        f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
        f"area {mesh.triangle_areas().sum():.6g}"
    )


@main.command("predict")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--alpha", type=float, default=None,
              help="Working alpha (default: spectral band center).")
def cmd_predict(config_path, out, alpha) -> None:
    """Posterior mean at every mesh node, plus the fitted model report."""
    cfg = load_config(config_path)
    mesh = build_mesh(cfg, config_path)
    obs = build_observations(cfg, mesh, config_path)
    resolved = ResolvedModel(cfg, mesh, obs, alpha_override=alpha)
    mean = gmrf.posterior_mean(resolved.model, obs.values)
    out = _prepare_out(out)
    buf = io.StringIO()
    buf.write("node_index,x,y,z,mean\n")
    for j in range(mesh.n_vertices):
        v = mesh.vertices[j]
        buf.write(f"{j},{v[0]:.17g},{v[1]:.17g},{v[2]:.17g},{mean[j]:.17g}\n")
    data.atomic_write_text(os.path.join(out, "prediction.csv"), buf.getvalue())
    _write_json(os.path.join(out, "model.json"), resolved.model_report())
    click.echo(f"prediction written for {mesh.n_vertices} nodes")


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override simulation.seed.")
@click.option("--n-sims", type=int, default=None, help="Override simulation.n_sims.")
@click.option("--kind", type=click.Choice(["uk", "sk"]), default=None,
              help="Override simulation.kind.")
@click.option("--alpha", type=float, default=None)
def cmd_simulate(config_path, out, seed, n_sims, kind, alpha) -> None:
    """Conditional simulations, their summary bands, and a metadata sidecar."""
    cfg = load_config(config_path)
    sim_cfg = cfg.get("simulation", {})
    seed = int(sim_cfg.get("seed", 0)) if seed is None else seed
    n_sims = int(sim_cfg.get("n_sims", 500)) if n_sims is None else n_sims
    kind = str(sim_cfg.get("kind", "uk")) if kind is None else kind
    if kind not in ("uk", "sk"):
        _fail("config key simulation.kind must be 'uk' or 'sk'")
    if n_sims < 2:
        _fail("config key simulation.n_sims must be at least 2")
    mesh = build_mesh(cfg, config_path)
    obs = build_observations(cfg, mesh, config_path)
    resolved = ResolvedModel(cfg, mesh, obs, alpha_override=alpha)
    batch = gmrf.simulate_posterior(resolved.model, n_sims, seed, kind=kind)
    out = _prepare_out(out)
    batch.write_csv(os.path.join(out, "simulations.csv"))
    batch.write_sidecar(os.path.join(out, "simulations.json"))
    mean = batch.mean()
    var = batch.variance()
    lo, hi = np.quantile(batch.samples, [0.025, 0.975], axis=0)
    buf = io.StringIO()
    buf.write("node_index,mean,variance,q2.5,q97.5\n")
    for j in range(mesh.n_vertices):
        buf.write(
            f"{j},{mean[j]:.17g},{var[j]:.17g},{lo[j]:.17g},{hi[j]:.17g}\n"
        )
    data.atomic_write_text(os.path.join(out, "summary.csv"), buf.getvalue())
    click.echo(f"{n_sims} simulations written ({kind})")


@main.command("fit")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def cmd_fit(config_path, out) -> None:
    """Maximum likelihood anisotropy fit; writes fit.json."""
    cfg = load_config(config_path)
    if cfg.get("model", {}).get("anisotropy") != "fit":
        _fail("fit requires config key model.anisotropy set to 'fit'")
    mesh = build_mesh(cfg, config_path)
    obs = build_observations(cfg, mesh, config_path)
    model_cfg = cfg.get("model", {})
    estimate_tau = bool(model_cfg.get("estimate_tau", False))
    result = likelihood.fit(mesh, obs, estimate_tau=estimate_tau)
    payload = result.as_dict()
    payload["trace"] = [
        {"params": list(params), "loglik": value} for params, value in result.trace
    ]
    out = _prepare_out(out)
    _write_json(os.path.join(out, "fit.json"), payload)
    click.echo(
        f"fit: angle {result.aniso.angle:.4f}, log_ratio "
        f"{result.aniso.log_ratio:.4f}, loglik {result.loglik:.4f}"
    )


@main.command("score")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(),
              help="Directory holding prediction.csv and summary.csv; "
                   "score outputs land here too.")
@click.option("--truth", "truth_path", required=True, type=click.Path())
@click.option("--score-convention", type=click.Choice(["paper", "gaussian"]),
              default=None)
def cmd_score(config_path, out, truth_path, score_convention) -> None:
    """Predictive scores of an existing prediction against a truth CSV."""
    cfg = load_config(config_path)
    convention = score_convention or cfg.get("score", {}).get("convention", "paper")
    pred_path = os.path.join(out, "prediction.csv")
    summary_path = os.path.join(out, "summary.csv")
    for path in (pred_path, summary_path):
        if not os.path.exists(path):
            _fail(f"missing input {path}; run predict and simulate first")
    import csv as _csv

    with open(pred_path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        pred = {int(r["node_index"]): float(r["mean"]) for r in reader}
    with open(summary_path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        var = {int(r["node_index"]): float(r["variance"]) for r in reader}
    truth = _load_node_value_csv(truth_path)

    missing = sorted(set(pred) - set(truth))
    # interpolated nodes carry variance that is zero up to roundoff; scoring
    # them would be dominated by -log(eps)
    var_floor = 1e-12 * max(var.values(), default=0.0)
    degenerate = sorted(
        j for j in pred if j in truth and var.get(j, 0.0) <= var_floor
    )
    if missing:
        click.echo(
            f"warning: {len(missing)} prediction nodes lack truth values "
            f"(first few: {missing[:5]})",
            err=True,
        )
    if degenerate:
        click.echo(
            f"warning: {len(degenerate)} nodes have zero predictive variance "
            f"and are excluded (first few: {degenerate[:5]})",
            err=True,
        )
    nodes = [j for j in sorted(pred) if j in truth and var.get(j, 0.0) > var_floor]
    if not nodes:
        _fail("no nodes left to score")
    y_hat = np.array([pred[j] for j in nodes])
    v_hat = np.array([var[j] for j in nodes])
    y_true = np.array([truth[j] for j in nodes])
    scores = data.predictive_score(y_hat, v_hat, y_true, convention=convention)
    errors = y_hat - y_true

    buf = io.StringIO()
    buf.write("node_index,score\n")
    for j, s in zip(nodes, scores):
        buf.write(f"{j},{s:.17g}\n")
    data.atomic_write_text(os.path.join(out, "scores.csv"), buf.getvalue())
    buf = io.StringIO()
    buf.write("node_index,error\n")
    for j, e in zip(nodes, errors):
        buf.write(f"{j},{e:.17g}\n")
    data.atomic_write_text(os.path.join(out, "errors.csv"), buf.getvalue())
    _write_json(
        os.path.join(out, "score_summary.json"),
        {
            "convention": convention,
            "mean_score": float(scores.mean()),
            "n_scored": len(nodes),
            "nodes_missing_truth": missing,
            "nodes_zero_variance": degenerate,
            "rmse": float(np.sqrt((errors**2).mean())),
        },
    )
    click.echo(
        f"scored {len(nodes)} nodes: rmse {math.sqrt(float((errors**2).mean())):.6g}, "
        f"mean score {float(scores.mean()):.6g}"
    )


@main.command("validate-sphere")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
def cmd_validate_sphere(config_path, out) -> None:
    """Compare the mesh-based posterior mean with closed-form sphere kriging."""
    cfg = load_config(config_path)
    if cfg["mesh"].get("kind") != "sphere":
        _fail("validate-sphere requires mesh.kind == 'sphere'")
    if abs(float(cfg["mesh"].get("radius", 1.0)) - 1.0) > 1e-12:
        _fail("validate-sphere requires a unit-radius sphere")
    degree = int(cfg.get("validate", {}).get("kernel_degree", 40))
    mesh = build_mesh(cfg, config_path)
    obs = build_observations(cfg, mesh, config_path)
    if obs.scenario != 1:
        _fail("validate-sphere requires node observations (tau == 0)")
    resolved = ResolvedModel(cfg, mesh, obs)
    fe_mean = gmrf.posterior_mean(resolved.model, obs.values)

    kernel = sphere_ref.SphereKernel(degree)
    unit = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None]
    harm_mean, _ = sphere_ref.kriging_predict(
        kernel, unit[obs.locations], obs.values, 0.0, unit
    )
    diff = np.abs(fe_mean - harm_mean)
    rel_l2 = float(
        np.linalg.norm(fe_mean - harm_mean) / np.linalg.norm(harm_mean)
    )
    # truncation monitor: how much the reference itself moves if the
    # kernel series is cut at twice the degree
    harm_2k, _ = sphere_ref.kriging_predict(
        sphere_ref.SphereKernel(2 * degree), unit[obs.locations],
        obs.values, 0.0, unit,
    )
    truncation_delta = float(
        np.linalg.norm(harm_2k - harm_mean) / np.linalg.norm(harm_mean)
    )
    out = _prepare_out(out)
    buf = io.StringIO()
    buf.write("node_index,fe_mean,harmonic_mean,abs_diff\n")
    for j in range(mesh.n_vertices):
        buf.write(
            f"{j},{fe_mean[j]:.17g},{harm_mean[j]:.17g},{diff[j]:.17g}\n"
        )
    data.atomic_write_text(os.path.join(out, "comparison.csv"), buf.getvalue())
    _write_json(
        os.path.join(out, "validate_summary.json"),
        {
            "harmonic_truncation_delta": truncation_delta,
            "kernel_degree": degree,
            "max_abs_difference": float(diff.max()),
            "n_observations": int(obs.n),
            "n_vertices": int(mesh.n_vertices),
            "relative_l2_difference": rel_l2,
        },
    )
    click.echo(f"relative L2 difference: {rel_l2:.6g}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
