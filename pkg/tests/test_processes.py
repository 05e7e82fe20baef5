import numpy as np
import pytest

from unionerm.model import (
    Dataset,
    DiscreteLaw,
    FeatureCollection,
    FeatureEntry,
    sample_dataset,
)
from unionerm.population import profile
from unionerm.processes import (
    DeltaUndefinedError,
    delta_process,
    enumerate_product_counts,
    expected_sup,
    g_process,
    lambda_process,
    snapshot,
)

from conftest import random_instance
from oracles import enum_expected_sup_gsq


def _unit_scalar_instance():
    law = DiscreteLaw(xs=np.array([[1.0]]), ys=np.array([0.0]), weights=np.array([1.0]))
    coll = FeatureCollection([FeatureEntry("t", 1, lambda x: x)])
    return law, coll, profile(law, coll)


def test_lambda_zero_when_empirical_matches_population(canonical):
    law, coll, prof = canonical
    # dataset replaying every atom once has the exact population second moment
    ds = Dataset(x=law.xs, y=law.ys)
    assert lambda_process(ds, "A", prof) == pytest.approx(0.0, abs=1e-10)
    assert lambda_process(ds, "B", prof) == pytest.approx(0.0, abs=1e-10)


def test_lambda_degenerate_point_mass():
    law, coll, prof = _unit_scalar_instance()
    ds = Dataset(x=np.array([[1.0]]), y=np.array([0.0]))
    assert lambda_process(ds, "t", prof) == pytest.approx(0.0, abs=1e-14)


def test_lambda_matches_direct_eigendecomposition(canonical):
    law, coll, prof = canonical
    ds = sample_dataset(law, 20, (200, 0))
    for t in ("A", "B"):
        phi = coll.entry(t)(ds.x)
        wh = prof.whitener(t)
        m = wh @ (phi.T @ phi / ds.n) @ wh
        ref = np.sqrt(ds.n) * np.linalg.eigvalsh(np.eye(len(m)) - m)[-1]
        assert lambda_process(ds, t, prof) == pytest.approx(float(ref), abs=1e-10)


def test_lambda_bounded_by_sqrt_n(canonical):
    law, coll, prof = canonical
    for trial in range(50):
        ds = sample_dataset(law, 7, (201, trial))
        for t in ("A", "B"):
            assert lambda_process(ds, t, prof) <= np.sqrt(ds.n) + 1e-12


def test_lambda_variational_form_certificate(canonical):
    law, coll, prof = canonical
    big = FeatureCollection(list(coll.entries) + [FeatureEntry("C", 2, lambda x: x)])
    prof2 = profile(law, big)
    rng = np.random.default_rng(77)
    ds = sample_dataset(law, 25, (202, 0))
    for t in ("A", "B", "C"):
        entry = big.entry(t)
        psi = entry(ds.x) @ prof2.whitener(t)
        d = entry.dim
        wcov = psi.T @ psi / ds.n
        top = np.linalg.eigh(np.eye(d) - wcov)[1][:, -1]
        probes = rng.normal(size=(200, d))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        probes = np.vstack([probes, top])
        vals = np.sqrt(ds.n) * (1.0 - np.mean((psi @ probes.T) ** 2, axis=0))
        lam = lambda_process(ds, t, prof2)
        assert np.all(vals <= lam + 1e-9)          # every direction is a lower bound
        assert vals.max() == pytest.approx(lam, abs=1e-6)  # attained at the top eigvector


def test_g_zero_in_noiseless_realizable(realizable):
    law, coll, prof = realizable
    for trial in range(10):
        ds = sample_dataset(law, 12, (203, trial))
        assert g_process(ds, "full", prof) == pytest.approx(0.0, abs=1e-12)


def test_g_unit_whitened_gradient():
    # one sample with residual 1 and unit feature: whitened gradient norm 1
    law = DiscreteLaw(xs=np.array([[1.0], [-1.0]]), ys=np.array([1.0, -1.0]), weights=[0.5, 0.5])
    coll = FeatureCollection([FeatureEntry("t", 1, lambda x: x)])
    prof_ = profile(law, coll)
    ds = Dataset(x=np.array([[1.0]]), y=np.array([2.0]))  # residual = w* x - y = -1
    assert g_process(ds, "t", prof_) == pytest.approx(1.0, rel=1e-12)


def test_g_second_moment_matches_population(canonical):
    law, coll, prof = canonical
    est, se = expected_sup("g_sq", ["A"], 1, prof, trials=100_000, seed=4)
    assert abs(est - prof.grad_second_moment("A")) <= 3 * se
    exact, _ = expected_sup("g_sq", ["A"], 1, prof, mode="exact")
    assert exact == pytest.approx(prof.grad_second_moment("A"), rel=1e-10)


def test_g_invariant_under_feature_rescaling(canonical):
    law, coll, prof = canonical
    rng = np.random.default_rng(31)
    for _ in range(5):
        a = float(rng.normal()) or 1.0
        coll2 = FeatureCollection(
            [
                FeatureEntry("A", 1, lambda x, aa=a: aa * x[:, [0]]),
                FeatureEntry("B", 1, lambda x: x[:, [1]]),
            ]
        )
        prof2 = profile(law, coll2)
        ds = sample_dataset(law, 15, (204, 0))
        assert g_process(ds, "A", prof2) == pytest.approx(g_process(ds, "A", prof), rel=1e-9)


def test_g_invariant_under_matrix_reparameterization(canonical):
    # whitened quantity: replacing a two-dimensional map by a nonsingular
    # linear reimage leaves the gradient-norm process unchanged
    law, _, _ = canonical
    base = FeatureCollection([FeatureEntry("C", 2, lambda x: x)])
    prof1 = profile(law, base)
    rng = np.random.default_rng(37)
    ds = sample_dataset(law, 18, (208, 0))
    for _ in range(5):
        a = rng.normal(size=(2, 2))
        while abs(np.linalg.det(a)) < 0.1:
            a = rng.normal(size=(2, 2))
        coll2 = FeatureCollection([FeatureEntry("C", 2, lambda x, m=a: x @ m.T)])
        prof2 = profile(law, coll2)
        assert g_process(ds, "C", prof2) == pytest.approx(g_process(ds, "C", prof1), rel=1e-9)
        assert lambda_process(ds, "C", prof2) == pytest.approx(
            lambda_process(ds, "C", prof1), rel=1e-9
        )


def test_delta_zero_when_empirical_equals_population(canonical):
    law, coll, prof = canonical
    ds = Dataset(x=law.xs, y=law.ys)  # exact replay of the law
    assert delta_process(ds, "B", "A", prof) == pytest.approx(0.0, abs=1e-10)


def test_delta_rejects_optimal_index(canonical):
    law, coll, prof = canonical
    ds = sample_dataset(law, 5, (205, 0))
    with pytest.raises(DeltaUndefinedError):
        delta_process(ds, "A", "A", prof)


def test_delta_mean_zero(canonical):
    law, coll, prof = canonical
    est, se = expected_sup("delta", ["B"], 8, prof, trials=100_000, seed=6)
    assert abs(est) <= 4 * se


def test_snapshot_consistency(canonical):
    law, coll, prof = canonical
    ds = sample_dataset(law, 30, (206, 0))
    snap = snapshot(ds, prof)
    assert snap.lam["A"] == pytest.approx(lambda_process(ds, "A", prof))
    assert snap.g["B"] == pytest.approx(g_process(ds, "B", prof))
    assert snap.delta["B"] == pytest.approx(delta_process(ds, "B", "A", prof))
    assert snap.sup_g_sq == pytest.approx(max(snap.g["A"] ** 2, snap.g["B"] ** 2))
    assert snap.lam_plus_scaled == pytest.approx(max(snap.lam.values()) / np.sqrt(ds.n))


def test_snapshot_sup_delta_empty_is_zero(symmetric):
    law, coll, prof = symmetric
    ds = sample_dataset(law, 10, (207, 0))
    snap = snapshot(ds, prof)
    assert snap.delta == {}
    assert snap.sup_delta == 0.0


def test_expected_sup_empty_subset(canonical):
    _, _, prof = canonical
    assert expected_sup("delta", [], 10, prof, trials=100) == (0.0, 0.0)


def test_expected_sup_zero_for_noiseless_gradient(realizable):
    law, coll, prof = realizable
    est, se = expected_sup("g_sq", ["full"], 5, prof, trials=200, seed=1)
    assert est == pytest.approx(0.0, abs=1e-20)
    assert se == pytest.approx(0.0, abs=1e-20)


def test_expected_sup_requires_enough_trials(canonical):
    _, _, prof = canonical
    with pytest.raises(ValueError, match="100"):
        expected_sup("g_sq", None, 5, prof, trials=50)


def test_exact_mode_matches_independent_enumeration(canonical):
    law, coll, prof = canonical
    for n in (1, 2):
        ref = enum_expected_sup_gsq(law, coll, prof, n)  # itertools loop oracle
        lib, _ = expected_sup("g_sq", None, n, prof, mode="exact")
        assert lib == pytest.approx(ref, rel=1e-10)


def test_exact_mode_matches_monte_carlo():
    law = DiscreteLaw(
        xs=np.array([[1.0], [-1.0]]), ys=np.array([2.0, -2.0]), weights=np.array([0.5, 0.5])
    )
    coll = FeatureCollection([FeatureEntry("t", 1, lambda x: x)])
    prof_ = profile(law, coll)
    for process in ("lambda", "g_sq"):
        exact, _ = expected_sup(process, None, 2, prof_, mode="exact")
        mc, se = expected_sup(process, None, 2, prof_, trials=1_000_000, seed=8)
        assert abs(mc - exact) <= 4 * max(se, 1e-12)


def test_exact_mode_respects_cap():
    law, coll, prof = random_instance(np.random.default_rng(0))
    with pytest.raises(ValueError, match="cap"):
        enumerate_product_counts(law, 30)


def test_expected_sup_lambda_scale_decreases_with_n(canonical):
    law, coll, prof = canonical
    vals = {}
    for n in (50, 100, 200):
        est, se = expected_sup("lambda", None, n, prof, trials=20_000, seed=9)
        vals[n] = (est / np.sqrt(n), se / np.sqrt(n))
    assert vals[100][0] <= vals[50][0] + 3 * (vals[50][1] + vals[100][1])
    assert vals[200][0] <= vals[100][0] + 3 * (vals[100][1] + vals[200][1])
