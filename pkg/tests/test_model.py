import math

import numpy as np
import pytest

from unionerm.model import (
    DegenerateFeatureError,
    DiscreteLaw,
    DuplicateClassError,
    FeatureCollection,
    FeatureEntry,
    GaussianDesignLaw,
    exact_expectation,
    sample_dataset,
    subset_collection,
    validate_collection,
)

from conftest import canonical_law, two_atom_law
from oracles import atoms_of, enum_expectation


def test_exact_expectation_constant_is_one():
    law = two_atom_law()
    assert exact_expectation(lambda x, y: np.ones(len(y)), law) == pytest.approx(1.0)


def test_exact_expectation_symmetric_mean_zero():
    law = two_atom_law()
    assert exact_expectation(lambda x, y: y, law) == pytest.approx(0.0)


def test_exact_expectation_second_moment():
    law = two_atom_law()
    expected = enum_expectation(atoms_of(law), lambda x, y: y**2)  # two-atom enumeration
    assert expected == pytest.approx(4.0)
    assert exact_expectation(lambda x, y: y**2, law) == pytest.approx(float(expected))


def test_exact_expectation_rejects_generative():
    law = GaussianDesignLaw(cov=np.eye(2), w_true=np.array([1.0, 0.0]), noise_std=1.0)
    with pytest.raises(ValueError, match="discrete"):
        exact_expectation(lambda x, y: y, law)


def test_exact_expectation_matches_enumeration_for_polynomials():
    law = canonical_law()
    atoms = atoms_of(law)
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = rng.normal(size=5)

        def poly(x, y):
            x = np.atleast_2d(x)
            return (
                c[0]
                + c[1] * x[..., 0] * y
                + c[2] * x[..., 1] ** 2
                + c[3] * y**3
                + c[4] * x[..., 0] ** 2 * y**2
            )

        lib = exact_expectation(lambda x, y: poly(x, y), law)
        ref = float(enum_expectation(atoms, lambda x, y: np.ravel(poly(x, y))[0]))
        assert lib == pytest.approx(ref, rel=1e-12)


def test_discrete_law_weight_validation():
    with pytest.raises(ValueError):
        DiscreteLaw(xs=np.array([[1.0], [2.0]]), ys=np.zeros(2), weights=np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        DiscreteLaw(xs=np.array([[1.0], [2.0]]), ys=np.zeros(2), weights=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        DiscreteLaw(xs=np.array([[np.inf], [2.0]]), ys=np.zeros(2), weights=np.array([0.5, 0.5]))


def test_sample_dataset_deterministic():
    law = two_atom_law()
    a = sample_dataset(law, 5, (0, 0))
    b = sample_dataset(law, 5, (0, 0))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    c = sample_dataset(law, 5, (0, 1))
    assert not (np.array_equal(a.x, c.x) and np.array_equal(a.y, c.y))


def test_sample_dataset_rejects_empty():
    with pytest.raises(ValueError):
        sample_dataset(two_atom_law(), 0, (0, 0))


def test_sample_mean_matches_exact_expectation():
    law = two_atom_law()
    ds = sample_dataset(law, 10**6, (123, 0))
    # law of large numbers against the exact mean 0, sd = 2
    assert abs(ds.y.mean()) <= 0.01


def test_sample_atom_frequencies_within_four_se():
    law = canonical_law()
    n = 10**6
    ds = sample_dataset(law, n, (7, 0))
    keys = {tuple(np.r_[law.xs[i], law.ys[i]]): law.weights[i] for i in range(law.support_size)}
    seen = {}
    for i in range(n):
        k = tuple(np.r_[ds.x[i], ds.y[i]])
        seen[k] = seen.get(k, 0) + 1
    for k, w in keys.items():
        se = math.sqrt(w * (1 - w) / n)
        assert abs(seen.get(k, 0) / n - w) <= 4 * se


def test_subset_collection_full_subset_is_identity():
    coll = subset_collection(3, 3)
    assert len(coll) == 1
    x = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(coll.entries[0](x), x)


def test_subset_collection_counts_and_order():
    coll = subset_collection(4, 2)
    assert len(coll) == 6
    assert coll.indices() == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def test_subset_collection_coordinate_projection():
    coll = subset_collection(3, 1)
    x = np.array([[4.0, 5.0, 6.0]])
    vals = [coll.entry((j,))(x)[0, 0] for j in range(3)]
    assert vals == [4.0, 5.0, 6.0]


def test_subset_collection_sizes_match_binomial():
    for d in range(1, 13):
        for s in (1, min(2, d), d):
            assert len(subset_collection(d, s)) == math.comb(d, s)


def test_subset_collection_rejects_bad_sparsity():
    with pytest.raises(ValueError):
        subset_collection(3, 4)
    with pytest.raises(ValueError):
        subset_collection(3, 0)


def test_subset_collection_warns_above_cap():
    with pytest.warns(RuntimeWarning):
        subset_collection(5, 2, cap=5)


def test_validate_collection_rejects_degenerate():
    law = canonical_law()
    coll = FeatureCollection(
        [FeatureEntry("zeroish", 1, lambda x: 0.0 * x[:, [0]])]
    )
    with pytest.raises(DegenerateFeatureError):
        validate_collection(law, coll)


def test_validate_collection_rejects_duplicate_classes():
    law = canonical_law()
    coll = FeatureCollection(
        [
            FeatureEntry("a", 1, lambda x: x[:, [0]]),
            FeatureEntry("b", 1, lambda x: 3.0 * x[:, [0]]),  # same linear class
        ]
    )
    with pytest.raises(DuplicateClassError):
        validate_collection(law, coll)


def test_gaussian_design_closed_forms():
    law = GaussianDesignLaw(cov=np.eye(3), w_true=np.array([1.0, -2.0, 0.0]), noise_std=0.5)
    coll = subset_collection(3, 2)
    best = coll.entry((0, 1))
    assert np.allclose(law.optimal_weights(best), [1.0, -2.0])
    assert law.approx_risk(best) == pytest.approx(0.5 * 0.25)
    worse = coll.entry((0, 2))
    # dropping coordinate 1 leaves its signal as residual variance
    assert law.approx_risk(worse) == pytest.approx(0.5 * (4.0 + 0.25))
    ds = sample_dataset(law, 200_000, (5, 0))
    emp = np.mean((ds.x @ np.array([1.0, -2.0, 0.0]) - ds.y) ** 2)
    assert emp == pytest.approx(0.25, rel=0.02)


def test_feature_entry_shape_check():
    entry = FeatureEntry("bad", 2, lambda x: x[:, [0]])
    with pytest.raises(ValueError, match="shape"):
        entry(np.zeros((3, 2)))


def test_collection_requires_unique_comparable_ids():
    with pytest.raises(ValueError):
        FeatureCollection(
            [FeatureEntry("a", 1, lambda x: x[:, [0]]), FeatureEntry("a", 1, lambda x: x[:, [0]])]
        )
