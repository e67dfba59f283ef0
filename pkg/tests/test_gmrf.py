import numpy as np
import pytest
from numpy.testing import assert_allclose

from manifold_splines import (
    ModelError,
    ObservationSet,
    assemble,
    bind_observations,
    posterior_mean,
    posterior_mean_alpha,
    posterior_model,
    posterior_variance,
    simulate_posterior,
    simulate_prior,
    simulate_simple_kriging,
)
from manifold_splines.gmrf import SimulationBatch

from _oracles import (
    cotan_assembly,
    kriging_limit,
    mean_alpha_covariance_route,
    mean_alpha_precision_route,
    unit_rows,
)


def _node_model(mesh, idx, y, sigma=1.0, alpha=None):
    ops = assemble(mesh)
    bound = bind_observations(mesh, ObservationSet(np.asarray(idx), np.asarray(y, dtype=float), 0.0))
    return ops, posterior_model(ops, bound, np.asarray(y, dtype=float), sigma=sigma, alpha=alpha)


def _point_model(mesh, pts, y, tau, sigma=1.0, alpha=None):
    ops = assemble(mesh)
    bound = bind_observations(mesh, ObservationSet(np.asarray(pts, dtype=float), np.asarray(y, dtype=float), tau))
    return ops, posterior_model(
        ops, bound, np.asarray(y, dtype=float), sigma=sigma, alpha=alpha, tau=tau
    )


# -- means, scenario 1 ------------------------------------------------------


def test_scenario1_mean_matches_both_oracles(tetra_mesh):
    idx = np.array([0, 2])
    y = np.array([1.0, -0.5])
    ops, model = _node_model(tetra_mesh, idx, y, sigma=0.8)
    mass, stiff = cotan_assembly(tetra_mesh.vertices, tetra_mesh.triangles)
    proj = unit_rows(idx, 4)

    got = posterior_mean_alpha(model, y)
    cov_route = mean_alpha_covariance_route(mass, stiff, proj, y, 0.8, 0.0, model.alpha)
    prec_route = mean_alpha_precision_route(
        mass, stiff, proj, y, 0.8, 0.0, model.alpha, node_idx=idx
    )
    assert_allclose(got, cov_route, rtol=1e-9, atol=1e-12)
    assert_allclose(got, prec_route, rtol=1e-9, atol=1e-12)


def test_scenario1_limit_mean_matches_kriging_oracle(sphere_mesh):
    rng = np.random.default_rng(0)
    idx = rng.choice(sphere_mesh.n_vertices, size=7, replace=False)
    y = rng.normal(size=7)
    ops, model = _node_model(sphere_mesh, idx, y, sigma=1.3)
    mass, stiff = cotan_assembly(sphere_mesh.vertices, sphere_mesh.triangles)
    proj = unit_rows(idx, sphere_mesh.n_vertices)
    mean, _, _, _ = kriging_limit(mass, stiff, proj, y, 1.3, 0.0)
    got = posterior_mean(model, y)
    assert np.linalg.norm(got - mean) <= 1e-8 * np.linalg.norm(mean)


def test_scenario1_interpolates(sphere_mesh):
    rng = np.random.default_rng(1)
    idx = rng.choice(sphere_mesh.n_vertices, size=5, replace=False)
    y = rng.normal(size=5)
    _, model = _node_model(sphere_mesh, idx, y)
    mean = posterior_mean(model, y)
    assert_allclose(mean[idx], y, atol=1e-10 * np.linalg.norm(y))


# -- means, scenario 2 ------------------------------------------------------


def test_scenario2_mean_matches_both_oracles(tetra_mesh):
    pts = tetra_mesh.vertices[[1, 3]] * 0.999 + 0.001 * tetra_mesh.vertices.mean(0)
    # snap onto faces: use barycentric interior points of two triangles
    tri = tetra_mesh.triangles
    pts = np.array([
        tetra_mesh.vertices[tri[0]].mean(axis=0),
        tetra_mesh.vertices[tri[2]] .T @ np.array([0.6, 0.3, 0.1]),
    ])
    y = np.array([0.4, -1.1])
    tau = 0.25
    ops, model = _point_model(tetra_mesh, pts, y, tau, sigma=0.9)
    mass, stiff = cotan_assembly(tetra_mesh.vertices, tetra_mesh.triangles)
    proj = model.bound.matrix.toarray()

    got = posterior_mean_alpha(model, y)
    cov_route = mean_alpha_covariance_route(mass, stiff, proj, y, 0.9, tau, model.alpha)
    prec_route = mean_alpha_precision_route(mass, stiff, proj, y, 0.9, tau, model.alpha)
    assert_allclose(got, cov_route, rtol=1e-9, atol=1e-12)
    assert_allclose(got, prec_route, rtol=1e-9, atol=1e-12)


def test_scenario2_limit_mean_matches_kriging_oracle(cyl_mesh):
    rng = np.random.default_rng(2)
    tri = cyl_mesh.triangles
    picks = rng.choice(len(tri), size=6, replace=False)
    wts = rng.dirichlet(np.ones(3), size=6)
    pts = np.einsum("ij,ijk->ik", wts, cyl_mesh.vertices[tri[picks]])
    y = rng.normal(size=6)
    tau = 0.3
    ops, model = _point_model(cyl_mesh, pts, y, tau, sigma=1.1)
    mass, stiff = cotan_assembly(cyl_mesh.vertices, cyl_mesh.triangles)
    proj = model.bound.matrix.toarray()
    mean, _, _, _ = kriging_limit(mass, stiff, proj, y, 1.1, tau)
    got = posterior_mean(model, y)
    assert np.linalg.norm(got - mean) <= 1e-8 * np.linalg.norm(mean)


# -- structural properties ---------------------------------------------------


def test_limit_mean_is_alpha_invariant(sphere_mesh):
    rng = np.random.default_rng(3)
    idx = rng.choice(sphere_mesh.n_vertices, size=6, replace=False)
    y = rng.normal(size=6)
    means = []
    for alpha in (2e-3, 2e-2, 2e-1):
        _, model = _node_model(sphere_mesh, idx, y, alpha=alpha)
        assert model.alpha_warning is None
        means.append(posterior_mean(model, y))
    assert np.linalg.norm(means[0] - means[1]) <= 1e-6 * np.linalg.norm(means[0])
    assert np.linalg.norm(means[0] - means[2]) <= 1e-6 * np.linalg.norm(means[0])


def test_mean_solves_constrained_system(sphere_mesh):
    # away from the data the fitted surface is in the null space of the
    # penalty: Q m vanishes on unobserved nodes
    rng = np.random.default_rng(4)
    idx = rng.choice(sphere_mesh.n_vertices, size=6, replace=False)
    y = rng.normal(size=6)
    ops, model = _node_model(sphere_mesh, idx, y)
    mean = posterior_mean(model, y)
    resid = ops.precision_core @ mean
    mask = np.ones(sphere_mesh.n_vertices, dtype=bool)
    mask[idx] = False
    qn = np.abs(ops.precision_core.toarray()).sum(axis=1).max()
    assert np.abs(resid[mask]).max() <= 1e-8 * qn * np.abs(mean).max()


def test_constant_data_reproduces_constant(sphere_mesh):
    rng = np.random.default_rng(5)
    idx = rng.choice(sphere_mesh.n_vertices, size=5, replace=False)
    ops, model = _node_model(sphere_mesh, idx, np.full(5, 2.5))
    mean = posterior_mean(model, np.full(5, 2.5))
    assert_allclose(mean, 2.5, rtol=1e-8)


def test_mean_is_linear_in_data(tetra_mesh):
    idx = np.array([0, 1, 3])
    ya = np.array([1.0, 0.0, -2.0])
    yb = np.array([0.5, 1.5, 1.0])
    _, model = _node_model(tetra_mesh, idx, ya)
    ma = posterior_mean(model, ya)
    mb = posterior_mean(model, yb)
    mab = posterior_mean(model, 2.0 * ya - 3.0 * yb)
    assert_allclose(mab, 2.0 * ma - 3.0 * mb, atol=1e-10)


def test_rhs_length_checked(tetra_mesh):
    _, model = _node_model(tetra_mesh, [0, 1], [1.0, 2.0])
    with pytest.raises(ModelError, match="length"):
        posterior_mean_alpha(model, np.ones(3))


# -- model construction guards ----------------------------------------------


def test_model_validates_inputs(tetra_mesh):
    ops = assemble(tetra_mesh)
    bound = bind_observations(tetra_mesh, ObservationSet(np.array([0, 1]), np.zeros(2), 0.0))
    with pytest.raises(ModelError, match="sigma"):
        posterior_model(ops, bound, np.zeros(2), sigma=0.0)
    with pytest.raises(ModelError, match="alpha"):
        posterior_model(ops, bound, np.zeros(2), alpha=-1.0)
    with pytest.raises(ModelError, match="tau"):
        posterior_model(ops, bound, np.zeros(2), tau=0.5)
    with pytest.raises(ModelError, match="length"):
        posterior_model(ops, bound, np.zeros(3))


def test_default_alpha_sits_in_band(sphere_mesh):
    rng = np.random.default_rng(6)
    idx = rng.choice(sphere_mesh.n_vertices, size=4, replace=False)
    _, model = _node_model(sphere_mesh, idx, rng.normal(size=4), sigma=2.0)
    lam_min, lam_max = model.spectral_bounds
    ratio = model.sigma / np.sqrt(model.alpha)
    assert lam_min <= ratio <= lam_max
    assert model.alpha_warning is None


def test_alpha_outside_band_warns(sphere_mesh):
    ops = assemble(sphere_mesh)
    idx = np.array([0, 1, 2])
    bound = bind_observations(sphere_mesh, ObservationSet(idx, np.zeros(3), 0.0))
    with pytest.warns(UserWarning, match="spectral band"):
        model = posterior_model(ops, bound, np.zeros(3), alpha=1e12)
    assert model.alpha_warning is not None


# -- prior simulation ---------------------------------------------------------


def test_prior_zero_eps_is_level(cyl_mesh):
    _, model = _node_model(cyl_mesh, [0, 5], [0.0, 0.0])
    z = simulate_prior(model, a=3.0, eps=np.zeros(cyl_mesh.n_vertices))
    assert_allclose(z, 3.0 * model.ops.const_mode, atol=1e-15)


def test_prior_satisfies_intrinsic_constraint(cyl_mesh):
    _, model = _node_model(cyl_mesh, [0, 5], [0.0, 0.0])
    u = model.ops.mass_times_const
    rng = np.random.default_rng(7)
    for a in (0.0, 1.7):
        z = simulate_prior(model, a=a, rng=rng)
        assert abs(u @ (z - a * model.ops.const_mode)) <= 1e-10 * np.linalg.norm(z)


def test_prior_needs_eps_or_rng(tetra_mesh):
    _, model = _node_model(tetra_mesh, [0], [0.0])
    with pytest.raises(ModelError, match="eps or rng"):
        simulate_prior(model)


def test_prior_covariance_on_tetrahedron(tetra_mesh):
    # build the full linear map eps -> projected draw and check its
    # covariance against the projected dense prior, exactly
    ops, model = _node_model(tetra_mesh, [0], [0.0], sigma=0.7)
    cols = [
        simulate_prior(model, a=0.0, eps=np.eye(4)[j]) for j in range(4)
    ]
    amat = np.column_stack(cols)
    mass, stiff = cotan_assembly(tetra_mesh.vertices, tetra_mesh.triangles)
    from _oracles import dense_sigma, phi0_of

    phi0 = phi0_of(mass)
    u = mass * phi0
    p = np.eye(4) - np.outer(phi0, u)
    target = 0.7**2 * p @ dense_sigma(mass, stiff) @ p.T
    assert_allclose(amat @ amat.T, target, rtol=1e-9, atol=1e-12)


# -- posterior simulation ------------------------------------------------------


def test_simulation_deterministic_across_threads(sphere_mesh):
    rng = np.random.default_rng(8)
    idx = rng.choice(sphere_mesh.n_vertices, size=6, replace=False)
    y = rng.normal(size=6)
    _, model = _node_model(sphere_mesh, idx, y)
    b1 = simulate_posterior(model, 8, seed=42, threads=1)
    b4 = simulate_posterior(model, 8, seed=42, threads=4)
    assert_allclose(b1.samples, b4.samples)
    b_other = simulate_posterior(model, 8, seed=43, threads=1)
    assert not np.allclose(b1.samples, b_other.samples)


def test_uk_samples_interpolate_noiseless_data(sphere_mesh):
    rng = np.random.default_rng(9)
    idx = rng.choice(sphere_mesh.n_vertices, size=5, replace=False)
    y = rng.normal(size=5)
    _, model = _node_model(sphere_mesh, idx, y)
    batch = simulate_posterior(model, 4, seed=0)
    # with tau = 0 every conditional path passes through the data
    for k in range(batch.n_sims):
        assert_allclose(batch.samples[k, idx], y, atol=1e-8)


def test_sk_and_uk_sample_means_agree_statistically(sphere_mesh):
    rng = np.random.default_rng(10)
    idx = rng.choice(sphere_mesh.n_vertices, size=6, replace=False)
    y = rng.normal(size=6)
    _, model = _node_model(sphere_mesh, idx, y)
    uk = simulate_posterior(model, 400, seed=1, kind="uk")
    sk = simulate_simple_kriging(model, 400, seed=1)
    mean = posterior_mean(model, y)
    # both are unbiased for the posterior mean
    scale = np.abs(mean).max()
    assert np.abs(uk.mean() - mean).max() <= 0.25 * scale
    assert np.abs(sk.mean() - mean).max() <= 0.25 * scale
    # pinning the level cannot add variance
    assert sk.variance().mean() <= uk.variance().mean() * 1.05


def test_batch_metadata_and_variance(tetra_mesh):
    _, model = _node_model(tetra_mesh, [0, 2], [1.0, -1.0])
    batch = simulate_posterior(model, 5, seed=3, kind="uk")
    assert batch.n_sims == 5
    assert batch.kind == "uk"
    assert batch.scenario == 1
    assert batch.seed == 3
    assert batch.samples.shape == (5, 4)
    v = posterior_variance(model, batch)
    assert v.shape == (4,)
    assert np.all(v >= 0)
    assert_allclose(v[[0, 2]], 0.0, atol=1e-12)


def test_posterior_variance_rejects_foreign_batch(tetra_mesh, cyl_mesh):
    _, node_model = _node_model(tetra_mesh, [0], [1.0])
    tri = cyl_mesh.triangles[0]
    pt = cyl_mesh.vertices[tri].mean(axis=0)
    _, pt_model = _point_model(cyl_mesh, [pt], [1.0], 0.2)
    batch = simulate_posterior(pt_model, 2, seed=0)
    with pytest.raises(ModelError, match="belong"):
        posterior_variance(node_model, batch)


def test_simulation_guards(tetra_mesh):
    _, model = _node_model(tetra_mesh, [0], [1.0])
    with pytest.raises(ModelError, match="n_sims"):
        simulate_posterior(model, 0, seed=0)
    with pytest.raises(ModelError, match="kind"):
        simulate_posterior(model, 1, seed=0, kind="bootstrap")
    batch = simulate_posterior(model, 1, seed=0)
    with pytest.raises(ModelError, match="two"):
        batch.variance()


def test_batch_csv_layout(tmp_path, tetra_mesh):
    _, model = _node_model(tetra_mesh, [0, 1], [1.0, 2.0])
    batch = simulate_posterior(model, 3, seed=5)
    out = tmp_path / "sims.csv"
    batch.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "node_index,mean,variance,sample_0,sample_1,sample_2"
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert first[0] == "0"
    assert_allclose(float(first[1]), batch.mean()[0])

    side = tmp_path / "sims.json"
    batch.write_sidecar(side)
    import json

    meta = json.loads(side.read_text())
    assert meta["seed"] == 5 and meta["n_sims"] == 3 and meta["kind"] == "uk"


def test_scenario2_simulation_covariance_small(tetra_mesh):
    # 4-node mesh: sample covariance of many draws approaches the exact
    # posterior covariance from the dense oracle
    tri = tetra_mesh.triangles
    pts = np.array([
        tetra_mesh.vertices[tri[0]].mean(axis=0),
        tetra_mesh.vertices[tri[1]].mean(axis=0),
    ])
    y = np.array([0.8, -0.3])
    tau = 0.4
    ops, model = _point_model(tetra_mesh, pts, y, tau, sigma=1.0)
    mass, stiff = cotan_assembly(tetra_mesh.vertices, tetra_mesh.triangles)
    proj = model.bound.matrix.toarray()
    _, cov_uk, _, _ = kriging_limit(mass, stiff, proj, y, 1.0, tau)

    batch = simulate_posterior(model, 4000, seed=11)
    sample_cov = np.cov(batch.samples.T, ddof=1)
    se = np.sqrt(
        (cov_uk * cov_uk + np.outer(np.diag(cov_uk), np.diag(cov_uk))) / 4000
    )
    assert np.all(np.abs(sample_cov - cov_uk) <= 5.0 * se + 1e-12)
