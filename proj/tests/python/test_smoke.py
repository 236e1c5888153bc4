import json

import numpy as np
import numpy.polynomial.hermite_e as herm
import pytest

import mlta


def planted_cells(n=120, r=8, seed=3):
    rng = np.random.default_rng(seed)
    groups = rng.random(n) < 0.5
    base = np.where(groups[:, None], 0.65, 0.1)
    probs = np.where(np.arange(r)[None, :] < r // 2, base, 0.75 - base)
    return (rng.random((n, r)) < probs).astype(np.int32), groups


def test_fit_and_memberships():
    cells, groups = planted_cells()
    fr = mlta.fit(cells, n_groups=2, latent_dim=0, seed=7)
    assert fr.converged
    assert np.all(np.diff(fr.bound_trace) >= -1e-8)

    posterior, labels, conf = mlta.memberships(fr)
    assert posterior.shape == (120, 2)
    np.testing.assert_allclose(posterior.sum(axis=1), 1.0, atol=1e-12)
    labels = np.asarray(labels)
    agree = (labels == groups).mean()
    assert max(agree, 1 - agree) > 0.9
    assert np.all(np.asarray(conf) >= 0.5 - 1e-12)


def test_loglik_matches_monte_carlo_free_quadrature():
    # the D=1 marginal for a single cell equals an E-Hermite quadrature of the
    # logistic over N(0,1); compare against numpy's rule directly
    eta = np.array([1.0])
    b = np.array([[0.4, -0.9]])
    w = [np.array([[0.8], [-0.5]])]
    cells = np.array([[1, 0]], dtype=np.int32)

    nodes, weights = herm.hermegauss(41)
    weights = weights / weights.sum()
    sigma = lambda x: 1.0 / (1.0 + np.exp(-x))
    lik = np.sum(weights * sigma(0.4 + 0.8 * nodes) * (1 - sigma(-0.9 - 0.5 * nodes)))

    sim_cells, _, _ = mlta.simulate(eta, b, w, n_senders=5, seed=1)
    assert sim_cells.shape == (5, 2)

    fr = mlta.fit(cells, n_groups=1, latent_dim=1, seed=1, max_iter=1)
    text = mlta.params_to_json(fr.params)
    doc = json.loads(text)
    doc["eta"] = [1.0]
    doc["intercepts"] = b.tolist()
    doc["slopes"] = [w[0].tolist()]
    params = mlta.params_from_json(json.dumps(doc))
    assert mlta.loglik(cells, params, gh_points=41) == pytest.approx(
        float(np.log(lik)), abs=1e-9
    )


def test_select_prefers_planted_structure():
    cells, _ = planted_cells(n=150, r=10, seed=11)
    table = mlta.select(cells, g_min=1, g_max=2, d_min=0, d_max=0, n_starts=3)
    assert table.winning().spec == mlta.ModelSpec(2, 0)
    assert len(table.records) == 2
    assert table.records[table.winner].bic == min(r.bic for r in table.records)


def test_simulate_roundtrip_determinism():
    eta = np.array([0.6, 0.4])
    b = np.array([[0.5, -1.0, 0.2], [-0.5, 1.0, -0.2]])
    a, ga, _ = mlta.simulate(eta, b, n_senders=40, seed=9)
    b2, gb, _ = mlta.simulate(eta, b, n_senders=40, seed=9)
    assert np.array_equal(a, b2)
    assert list(ga) == list(gb)
    assert a.shape == (40, 3)


def test_posthoc_surfaces():
    cells, _ = planted_cells(n=90, r=6, seed=5)
    fr = mlta.fit(cells, n_groups=2, latent_dim=1, common_slope=True, seed=2,
                  tol=1e-4)
    dep = mlta.dependence_matrix(fr, 0)
    assert dep.shape == (6, 6)
    np.testing.assert_allclose(dep, dep.T, atol=1e-14)

    lift = mlta.log_lift_matrix(fr, 0, gh_points=41)
    np.testing.assert_allclose(np.diag(lift), 0.0)

    probs = mlta.median_actor_prob(fr)
    assert probs.shape == (2, 6)
    assert np.all((probs > 0) & (probs < 1))

    entries, skipped, unreliable = mlta.jackknife_se(
        cells, fr, eta=True, tol=1e-3, max_iter=400
    )
    assert [name for name, *_ in entries] == ["eta[1]", "eta[2]"]
    ses = [se for _, _, se, _ in entries]
    assert ses[0] == pytest.approx(ses[1], abs=1e-10)
    assert not unreliable
